//! Command-line harness around the mpnav library: library generation,
//! clustering, single-shot planning, closed-loop navigation, and the full
//! benchmark matrix.

use clap::{Parser, Subcommand};
use mpnav::adaptive::{adaptive_navigate, events_csv};
use mpnav::bench::{
    render_table, results_csv, run_bench, teleop_generate, teleop_script, trace_csv, ProfileName,
    ScenarioResult,
};
use mpnav::clustering::{build_clusters, ClusterSet};
use mpnav::config::Config;
use mpnav::kinematics::Pose2D;
use mpnav::mp::{write_log_csv, FeatureScale, MpLibrary};
use mpnav::planner::{plan_astar, PenaltyGrid};
use mpnav::sim::{OccupancyGrid, Simulator};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mpnav",
    about = "Adaptive motion-primitive navigation under degraded locomotion",
    version
)]
struct Cli {
    /// JSON config overriding any subset of the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base random seed.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Output directory for logs, libraries, traces, and reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the motion-primitive library from scripted teleoperation.
    Gen {
        /// Teleoperation duration in seconds (default from config).
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Re-cluster an existing library.
    Cluster {
        /// Library file (default <out>/mp_library.json).
        #[arg(long)]
        library: Option<PathBuf>,
    },
    /// Plan a single path through the clustered library.
    Plan {
        /// Goal as `X,Y` in meters.
        #[arg(long, value_parser = parse_goal)]
        goal: (f64, f64),
        /// Start pose as `X,Y,THETA` (default 0,0,0).
        #[arg(long, value_parser = parse_pose, default_value = "0,0,0")]
        start: Pose2D,
        /// ASCII grid file (default: empty 10 m x 10 m lab).
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Run the adaptive closed loop against a hidden profile.
    Navigate {
        #[arg(long, default_value = "normal")]
        profile: ProfileName,
        #[arg(long, value_parser = parse_goal)]
        goal: (f64, f64),
    },
    /// Run the full profile x goal x method benchmark matrix.
    Bench {},
    /// Re-render a results CSV as the plain-text table.
    Report {
        /// Results file (default <out>/results.csv).
        #[arg(long)]
        results: Option<PathBuf>,
    },
}

fn parse_goal(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected X,Y".into());
    }
    let x = parts[0].trim().parse().map_err(|e| format!("bad X: {e}"))?;
    let y = parts[1].trim().parse().map_err(|e| format!("bad Y: {e}"))?;
    Ok((x, y))
}

fn parse_pose(s: &str) -> Result<Pose2D, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected X,Y,THETA".into());
    }
    let mut v = [0.0; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part.trim().parse().map_err(|e| format!("bad pose component: {e}"))?;
    }
    Ok(Pose2D::new(v[0], v[1], v[2]))
}

fn load_config(path: &Option<PathBuf>) -> Result<Config, String> {
    match path {
        Some(p) => Config::load(p).map_err(|e| format!("failed to load {}: {e}", p.display())),
        None => Ok(Config::default()),
    }
}

fn library_paths(out: &Path) -> (PathBuf, PathBuf) {
    (out.join("mp_library.json"), out.join("clusters.json"))
}

/// Load the library and clusters from the output directory, generating them
/// first when missing.
fn load_or_generate_library(
    config: &Config,
    seed: u64,
    out: &Path,
) -> Result<(MpLibrary, ClusterSet), String> {
    let (lib_path, cluster_path) = library_paths(out);
    if lib_path.exists() && cluster_path.exists() {
        let library = MpLibrary::load(&lib_path).map_err(|e| e.to_string())?;
        let clusters = ClusterSet::load(&cluster_path).map_err(|e| e.to_string())?;
        return Ok((library, clusters));
    }
    eprintln!(
        "note: no library under {}; generating one ({} s scripted teleoperation)",
        out.display(),
        config.bench.teleop_duration
    );
    generate(config, seed, out, config.bench.teleop_duration)
}

fn generate(
    config: &Config,
    seed: u64,
    out: &Path,
    duration: f64,
) -> Result<(MpLibrary, ClusterSet), String> {
    fs::create_dir_all(out).map_err(|e| e.to_string())?;
    let script = teleop_script(duration);
    let (log, library, clusters) = teleop_generate(&script, config, seed);
    write_log_csv(&out.join("teleop_log.csv"), &log).map_err(|e| e.to_string())?;
    let (lib_path, cluster_path) = library_paths(out);
    library.save(&lib_path).map_err(|e| e.to_string())?;
    let cluster_set = ClusterSet { clusters };
    cluster_set.save(&cluster_path).map_err(|e| e.to_string())?;
    if library.mps.is_empty() {
        eprintln!("warning: the script never moved the robot; the library is empty");
    }
    println!(
        "generated {} primitives -> {} clusters ({} s of teleoperation)",
        library.mps.len(),
        cluster_set.clusters.len(),
        duration
    );
    println!("wrote {} and {}", lib_path.display(), cluster_path.display());
    Ok((library, cluster_set))
}

fn run(cli: Cli) -> Result<(), String> {
    let config = load_config(&cli.config)?;
    let out = &cli.out;

    match cli.command {
        Command::Gen { duration } => {
            let duration = duration.unwrap_or(config.bench.teleop_duration);
            generate(&config, cli.seed, out, duration)?;
        }

        Command::Cluster { library } => {
            let lib_path = library.unwrap_or_else(|| library_paths(out).0);
            let library = MpLibrary::load(&lib_path).map_err(|e| e.to_string())?;
            let scale = FeatureScale::from_model(&config.robot, library.delta_t);
            let clusters = build_clusters(&library.mps, &scale, &config.clustering);
            println!("{} primitives -> {} clusters", library.mps.len(), clusters.len());
            for c in &clusters {
                println!("  exemplar {:>4}: {} members", c.exemplar_id, c.member_ids.len());
            }
            fs::create_dir_all(out).map_err(|e| e.to_string())?;
            let path = library_paths(out).1;
            ClusterSet { clusters }.save(&path).map_err(|e| e.to_string())?;
            println!("wrote {}", path.display());
        }

        Command::Plan { goal, start, grid } => {
            let (library, clusters) = load_or_generate_library(&config, cli.seed, out)?;
            let grid = match grid {
                Some(p) => OccupancyGrid::load(&p).map_err(|e| e.to_string())?,
                None => OccupancyGrid::lab_default(),
            };
            let enabled: Vec<_> = clusters
                .clusters
                .iter()
                .filter_map(|c| library.mps.iter().find(|m| m.id == c.exemplar_id))
                .collect();
            let penalty = PenaltyGrid::new(
                config.penalty.resolution,
                config.penalty.beta,
                config.penalty.decay_length,
            );
            let result = plan_astar(&enabled, start, goal, &grid, &penalty, &config.planner);
            match result.plan {
                Ok(plan) => {
                    println!(
                        "plan: {} actions, {:.2} m, {} expansions",
                        plan.actions.len(),
                        plan.length,
                        result.expansions
                    );
                    let path = out.join("plan.csv");
                    fs::create_dir_all(out).map_err(|e| e.to_string())?;
                    fs::write(&path, plan.to_csv()).map_err(|e| e.to_string())?;
                    println!("wrote {}", path.display());
                }
                Err(e) => return Err(format!("planning failed after {} expansions: {e}", result.expansions)),
            }
        }

        Command::Navigate { profile, goal } => {
            let (library, clusters) = load_or_generate_library(&config, cli.seed, out)?;
            let mut sim = Simulator::new(
                config.robot,
                profile.build(config.sim.degraded_cap),
                OccupancyGrid::lab_default(),
                Pose2D::identity(),
                cli.seed,
            );
            sim.footprint_radius = config.sim.footprint_radius;
            let nav = adaptive_navigate(&mut sim, goal, &library, &clusters.clusters, &config);
            println!(
                "{}: reached={} distance={:.2} m path={:.2} m sim_time={:.1} s plans={} promotions={}",
                profile,
                nav.reached,
                nav.distance_to_goal,
                nav.path_length,
                nav.sim_time,
                nav.iterations,
                nav.promotions
            );
            fs::create_dir_all(out).map_err(|e| e.to_string())?;
            fs::write(out.join("trace.csv"), trace_csv(&nav.trace)).map_err(|e| e.to_string())?;
            fs::write(out.join("events.csv"), events_csv(&nav.events)).map_err(|e| e.to_string())?;
            println!("wrote {} and {}", out.join("trace.csv").display(), out.join("events.csv").display());
        }

        Command::Bench {} => {
            fs::create_dir_all(out.join("traces")).map_err(|e| e.to_string())?;
            let bench = run_bench(&config, cli.seed, |msg| eprintln!("[bench] {msg}"));
            write_log_csv(&out.join("teleop_log.csv"), &bench.teleop_log)
                .map_err(|e| e.to_string())?;
            let (lib_path, cluster_path) = library_paths(out);
            bench.library.save(&lib_path).map_err(|e| e.to_string())?;
            ClusterSet { clusters: bench.clusters.clone() }
                .save(&cluster_path)
                .map_err(|e| e.to_string())?;
            let results: Vec<ScenarioResult> =
                bench.scenarios.iter().map(|s| s.result.clone()).collect();
            for scenario in &bench.scenarios {
                let path = out.join("traces").join(format!("{}.csv", scenario.label()));
                fs::write(&path, trace_csv(&scenario.trace)).map_err(|e| e.to_string())?;
            }
            fs::write(out.join("results.csv"), results_csv(&results)).map_err(|e| e.to_string())?;
            let table = render_table(&results);
            fs::write(out.join("table.txt"), &table).map_err(|e| e.to_string())?;
            println!("{table}");
            println!("wrote {}", out.join("results.csv").display());
        }

        Command::Report { results } => {
            let path = results.unwrap_or_else(|| out.join("results.csv"));
            let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
            let parsed = parse_results_csv(&text)?;
            println!("{}", render_table(&parsed));
        }
    }
    Ok(())
}

fn parse_results_csv(text: &str) -> Result<Vec<ScenarioResult>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(format!("results line {} has {} fields, expected 10", n + 1, f.len()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", n + 1));
        out.push(ScenarioResult {
            condition: f[0].parse()?,
            method: f[1].parse()?,
            goal: (num(f[2])?, num(f[3])?),
            path_length: num(f[4])?,
            end_point: (num(f[5])?, num(f[6])?),
            run_time: num(f[7])?,
            distance_to_goal: num(f[8])?,
            result: f[9].trim().parse::<u8>().map_err(|e| format!("line {}: {e}", n + 1))?,
        });
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
