//! Scenario harness: scripted teleoperation for library generation, the
//! four locomotion conditions times two goals times two methods, and
//! Table-style reporting.

use crate::adaptive::{adaptive_navigate, trace_length, NavigationResult, TraceRow};
use crate::clustering::{build_clusters, MPCluster};
use crate::config::Config;
use crate::dwa::baseline_dwa;
use crate::kinematics::{Pose2D, WheelCommand};
use crate::mp::{generate_mps, FeatureScale, LogRecord, MpLibrary};
use crate::sim::{DegradationProfile, OccupancyGrid, Simulator};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

/// The four benchmarked locomotion conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Normal,
    RightConstrained,
    LeftConstrained,
    Overload,
}

impl ProfileName {
    pub const ALL: [ProfileName; 4] = [
        ProfileName::Normal,
        ProfileName::RightConstrained,
        ProfileName::LeftConstrained,
        ProfileName::Overload,
    ];

    /// Materialize the hidden profile with the configured wheel-speed cap.
    pub fn build(&self, cap: f64) -> DegradationProfile {
        match self {
            ProfileName::Normal => DegradationProfile::normal(),
            ProfileName::RightConstrained => DegradationProfile::right_constrained(cap),
            ProfileName::LeftConstrained => DegradationProfile::left_constrained(cap),
            ProfileName::Overload => DegradationProfile::overload(cap),
        }
    }

    pub fn slug(&self) -> &'static str {
        match self {
            ProfileName::Normal => "normal",
            ProfileName::RightConstrained => "right_constrained",
            ProfileName::LeftConstrained => "left_constrained",
            ProfileName::Overload => "overload",
        }
    }
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ProfileName::Normal => "Normal",
            ProfileName::RightConstrained => "Right Constrained",
            ProfileName::LeftConstrained => "Left Constrained",
            ProfileName::Overload => "Overload",
        };
        f.write_str(name)
    }
}

impl FromStr for ProfileName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().replace('-', "_").as_str() {
            "normal" => Ok(ProfileName::Normal),
            "right_constrained" | "right" => Ok(ProfileName::RightConstrained),
            "left_constrained" | "left" => Ok(ProfileName::LeftConstrained),
            "overload" => Ok(ProfileName::Overload),
            other => Err(format!(
                "unknown profile {other:?} (expected normal, right_constrained, left_constrained or overload)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ours,
    Baseline,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ours => "ours",
            Method::Baseline => "baseline",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "ours" => Ok(Method::Ours),
            "baseline" | "dwa" => Ok(Method::Baseline),
            other => Err(format!("unknown method {other:?} (expected ours or baseline)")),
        }
    }
}

/// One benchmark cell in the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub condition: ProfileName,
    pub method: Method,
    pub goal: (f64, f64),
    pub path_length: f64,
    pub end_point: (f64, f64),
    /// Simulated seconds, not wall-clock.
    pub run_time: f64,
    pub distance_to_goal: f64,
    /// 1 for success (distance within the success threshold), 0 otherwise.
    pub result: u8,
}

/// Scripted pseudo-teleoperation standing in for a human driver: straights
/// at block-varying speeds, a continuous speed sweep, arcs of both handedness
/// and varying curvature, spins, slow sub-cap maneuvers, and a short
/// reverse, separated by brief stops so primitive generation sees distinct
/// segments. Parameters drift from block to block so no two windows carry
/// identical commands. Repeats until `total` seconds.
pub fn teleop_script(total: f64) -> Vec<(f64, WheelCommand)> {
    let mut out: Vec<(f64, WheelCommand)> = Vec::new();
    let mut t = 0.0;

    let mut push = |out: &mut Vec<(f64, WheelCommand)>, dur: f64, left: f64, right: f64| -> bool {
        let dur = dur.min(total - t);
        if dur <= 1e-12 {
            return false;
        }
        out.push((dur, WheelCommand::new(left, right)));
        t += dur;
        t < total
    };

    // Quasi-uniform drift over the wheel-speed box (R2 low-discrepancy
    // sequence): like a human driver, no two maneuvers repeat the same
    // input. Every fourth maneuver stays under 5 rad/s on both wheels so
    // the library always contains motions a capped robot can still execute.
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_2;
    let frac = |x: f64| x - x.floor();

    let mut n = 0usize;
    'outer: loop {
        let u = frac(0.5 + n as f64 * A1);
        let v = frac(0.5 + n as f64 * A2);
        let stop = 0.6;
        let keep_going = match n % 8 {
            // Forward motion over the full box: straights and arcs of every
            // curvature, mostly above a 5 rad/s cap.
            0 | 3 | 5 => {
                let l = 3.0 + 9.0 * u;
                let r = 3.0 + 9.0 * v;
                push(&mut out, 2.2, l, r)
            }
            // Speed sweep between drifting endpoints.
            1 => {
                let lo = 3.0 + 2.0 * u;
                let hi = 9.0 + 3.0 * v;
                let mut ok = true;
                for k in 0..12 {
                    let w = lo + (hi - lo) * k as f64 / 11.0;
                    if !push(&mut out, 0.25, w, w) {
                        ok = false;
                        break;
                    }
                }
                ok
            }
            // Sub-cap forward motion, executable under every cap profile.
            2 | 6 => {
                let l = 2.0 + 2.7 * u;
                let r = 2.0 + 2.7 * v;
                push(&mut out, 2.2, l, r)
            }
            // Spin in place, alternating handedness.
            4 => {
                let s = 1.8 + 2.4 * u;
                let dir = if n % 16 < 8 { 1.0 } else { -1.0 };
                push(&mut out, 1.5, -dir * s, dir * s)
            }
            // Short reverse.
            _ => {
                let r = 3.5 + 1.5 * u;
                push(&mut out, 1.2, -r, -r)
            }
        };
        if !keep_going || !push(&mut out, stop, 0.0, 0.0) {
            break 'outer;
        }
        n += 1;
    }
    out
}

/// Drive a command schedule through a normal-profile simulator on a large
/// empty floor and harvest the motion-primitive library plus its clusters.
pub fn teleop_generate(
    script: &[(f64, WheelCommand)],
    config: &Config,
    seed: u64,
) -> (Vec<LogRecord>, MpLibrary, Vec<MPCluster>) {
    let grid = OccupancyGrid::empty(0.05, 1200, 1200, Pose2D::new(-30.0, -30.0, 0.0));
    let mut sim = Simulator::new(
        config.robot,
        DegradationProfile::normal(),
        grid,
        Pose2D::identity(),
        seed,
    );
    sim.footprint_radius = config.sim.footprint_radius;

    let dt = config.sim.control_period;
    let mut log = Vec::new();
    let mut t = 0.0;
    for &(duration, cmd) in script {
        let steps = (duration / dt).round() as usize;
        for _ in 0..steps {
            log.push(LogRecord { t, cmd, pose: sim.localize(config.sim.noise_std) });
            sim.step(cmd, dt);
            t += dt;
        }
    }
    log.push(LogRecord { t, cmd: WheelCommand::zero(), pose: sim.localize(config.sim.noise_std) });

    let mps = generate_mps(&log, config.mp.delta_t, config.mp.deadband);
    let scale = FeatureScale::from_model(&config.robot, config.mp.delta_t);
    let clusters = build_clusters(&mps, &scale, &config.clustering);
    (log, MpLibrary::new(config.mp.delta_t, mps), clusters)
}

/// One scenario run: the table row plus the executed trace and, for the
/// adaptive method, the full navigation result.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub result: ScenarioResult,
    pub trace: Vec<TraceRow>,
    pub navigation: Option<NavigationResult>,
}

impl ScenarioRun {
    pub fn label(&self) -> String {
        format!(
            "{}_{}_{}_{}",
            self.result.condition.slug(),
            self.result.method,
            self.result.goal.0,
            self.result.goal.1
        )
    }
}

/// Run one benchmark cell. The start pose is the grid center with heading
/// +x; the world is the empty 10 m x 10 m lab.
pub fn run_scenario(
    profile: ProfileName,
    goal: (f64, f64),
    method: Method,
    config: &Config,
    library: &MpLibrary,
    clusters: &[MPCluster],
    seed: u64,
) -> ScenarioRun {
    let mut sim = Simulator::new(
        config.robot,
        profile.build(config.sim.degraded_cap),
        OccupancyGrid::lab_default(),
        Pose2D::identity(),
        seed,
    );
    sim.footprint_radius = config.sim.footprint_radius;

    let (trace, navigation) = match method {
        Method::Ours => {
            let mut cfg = config.clone();
            cfg.adaptive.sim_time_cap = config.bench.time_cap;
            let nav = adaptive_navigate(&mut sim, goal, library, clusters, &cfg);
            (nav.trace.clone(), Some(nav))
        }
        Method::Baseline => {
            let run = baseline_dwa(
                &mut sim,
                goal,
                &config.robot,
                &config.dwa,
                config.sim.control_period,
                config.sim.noise_std,
                config.bench.time_cap,
            );
            (run.trace, None)
        }
    };

    let end = sim.state.true_pose;
    let distance = (end.x - goal.0).hypot(end.y - goal.1);
    let result = ScenarioResult {
        condition: profile,
        method,
        goal,
        path_length: trace_length(&trace),
        end_point: (end.x, end.y),
        run_time: sim.state.clock,
        distance_to_goal: distance,
        result: u8::from(distance <= config.bench.success_threshold),
    };
    ScenarioRun { result, trace, navigation }
}

/// Full benchmark: library generation once, then every profile x method x
/// goal cell in table order.
#[derive(Debug, Clone)]
pub struct BenchRun {
    pub teleop_log: Vec<LogRecord>,
    pub library: MpLibrary,
    pub clusters: Vec<MPCluster>,
    pub scenarios: Vec<ScenarioRun>,
}

pub fn run_bench(config: &Config, seed: u64, mut progress: impl FnMut(&str)) -> BenchRun {
    progress("generating motion-primitive library from scripted teleoperation");
    let script = teleop_script(config.bench.teleop_duration);
    let (teleop_log, library, clusters) = teleop_generate(&script, config, seed);
    progress(&format!(
        "library ready: {} primitives, {} clusters",
        library.mps.len(),
        clusters.len()
    ));

    let mut scenarios = Vec::new();
    let mut index = 0u64;
    for profile in ProfileName::ALL {
        for method in [Method::Baseline, Method::Ours] {
            for &goal in &config.bench.goals {
                let scenario_seed = seed.wrapping_add(1000).wrapping_add(index);
                index += 1;
                let run =
                    run_scenario(profile, goal, method, config, &library, &clusters, scenario_seed);
                progress(&format!(
                    "{} / {} / ({}, {}): result={} distance={:.2} m time={:.1} s",
                    profile,
                    method,
                    goal.0,
                    goal.1,
                    run.result.result,
                    run.result.distance_to_goal,
                    run.result.run_time
                ));
                scenarios.push(run);
            }
        }
    }
    BenchRun { teleop_log, library, clusters, scenarios }
}

/// Machine-readable results, fixed column order and formatting so runs with
/// the same seed diff byte-identically.
pub fn results_csv(results: &[ScenarioResult]) -> String {
    let mut out = String::from(
        "condition,method,goal_x,goal_y,path_length_m,end_x,end_y,run_time_s,distance_to_goal_m,result\n",
    );
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{}",
            r.condition.slug(),
            r.method,
            r.goal.0,
            r.goal.1,
            r.path_length,
            r.end_point.0,
            r.end_point.1,
            r.run_time,
            r.distance_to_goal,
            r.result
        );
    }
    out
}

/// Plain-text table in the benchmark's column order.
pub fn render_table(results: &[ScenarioResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Navigation results (run time is simulated seconds)");
    let _ = writeln!(
        out,
        "{:<18} {:<9} {:>10} {:>15} {:>18} {:>12} {:>18} {:>7}",
        "Condition", "Method", "Goal", "Path Length(m)", "End Point", "Run Time(s)", "Distance to Goal(m)", "Result"
    );
    let _ = writeln!(out, "{}", "-".repeat(115));
    for r in results {
        let _ = writeln!(
            out,
            "{:<18} {:<9} {:>10} {:>15.2} {:>18} {:>12.2} {:>18.2} {:>7}",
            r.condition.to_string(),
            r.method.to_string(),
            format!("({}, {})", r.goal.0, r.goal.1),
            r.path_length,
            format!("({:.2}, {:.2})", r.end_point.0, r.end_point.1),
            r.run_time,
            r.distance_to_goal,
            r.result
        );
    }
    let _ = writeln!(out, "{}", "-".repeat(115));
    let _ = writeln!(out, "Result: 1 = success, 0 = failure (threshold on distance to goal)");
    out
}

/// Executed-trace CSV with both the commanded and the achieved wheel speeds.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("t,x,y,theta,wl_cmd,wr_cmd,wl_eff,wr_eff\n");
    for row in trace {
        let _ = writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            row.t,
            row.pose.x,
            row.pose.y,
            row.pose.theta,
            row.cmd.left,
            row.cmd.right,
            row.effective.left,
            row.effective.right
        );
    }
    out
}
