//! Plan execution, consistency checks, cluster voting, and the adaptive
//! navigation loop.
//!
//! Executed motions are compared against the primitive the planner designed
//! (end pose in the primitive's start frame). Consistent motions upvote
//! their cluster. Inconsistent motions downvote it and either reinforce a
//! matching candidate cluster or spawn a new one holding the observed motion
//! with the commands that produced it, so that once promoted, planning
//! predicts the degraded motion while replay issues the same commands.

use crate::clustering::{ClusterStatus, MPCluster};
use crate::config::Config;
use crate::kinematics::{normalize_angle, Pose2D, WheelCommand};
use crate::mp::{featurize, FeatureScale, MotionPrimitive, MpLibrary, MpStore, FEATURE_LEN};
use crate::planner::{plan_astar, PenaltyGrid, Plan};
use crate::sim::Simulator;
use std::collections::HashSet;
use std::fmt::Write as _;

/// One executed primitive: where the plan said it would end (from where
/// execution actually started), where localization says it ended, and the
/// observed motion itself.
#[derive(Debug, Clone)]
pub struct ExecutionRecord {
    pub mp_id: u64,
    pub designed_end: Pose2D,
    pub executed_end: Pose2D,
    pub consistent: bool,
    /// The executed motion as a primitive: the issued commands paired with
    /// the observed, start-normalized pose trace.
    pub observed: MotionPrimitive,
    /// True when a collision cut the motion short; such records are kept in
    /// the report but excluded from voting (the penalty grid owns collision
    /// feedback).
    pub aborted_by_collision: bool,
}

/// Ground-truth trace row recorded at every control step.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub t: f64,
    pub pose: Pose2D,
    pub cmd: WheelCommand,
    pub effective: WheelCommand,
}

#[derive(Debug, Clone, Default)]
pub struct ExecutionReport {
    pub records: Vec<ExecutionRecord>,
    pub trace: Vec<TraceRow>,
    pub collided: bool,
    pub reached_goal: bool,
    pub timed_out: bool,
}

/// Knobs for a single plan execution.
#[derive(Debug, Clone, Copy)]
pub struct ExecutionParams {
    pub control_period: f64,
    pub noise_std: (f64, f64, f64),
    pub tol_pos: f64,
    pub tol_theta: f64,
    pub goal: (f64, f64),
    pub goal_tolerance: f64,
    /// Simulator clock value at which execution must stop.
    pub deadline: f64,
    /// Abort after the first inconsistent primitive so the loop can re-plan
    /// early.
    pub stop_on_inconsistent: bool,
}

/// Consistency check against the designed motion primitive: the executed
/// trace's end pose, expressed in the trace's start frame, must match the
/// primitive's end pose within the (closed) tolerances.
pub fn ccdmp(
    designed: &MotionPrimitive,
    executed_world: &[Pose2D],
    tol_pos: f64,
    tol_theta: f64,
) -> bool {
    let (first, last) = match (executed_world.first(), executed_world.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return false,
    };
    let executed_rel = first.relative(last);
    let designed_rel = designed.end_pose();
    let pos_err = executed_rel.distance(&designed_rel);
    let theta_err = normalize_angle(executed_rel.theta - designed_rel.theta).abs();
    pos_err <= tol_pos && theta_err <= tol_theta
}

/// Consistency check against the candidate clusters: the nearest candidate
/// exemplar within `tol` in feature space, ties to the lowest exemplar id.
pub fn cccmp(
    executed: &MotionPrimitive,
    clusters: &[MPCluster],
    store: &MpStore,
    scale: &FeatureScale,
    tol: f64,
) -> Option<u64> {
    let feature = featurize(executed, scale);
    let mut best: Option<(f64, u64)> = None;
    for cluster in clusters {
        if cluster.status != ClusterStatus::Candidate {
            continue;
        }
        let exemplar = store.get(cluster.exemplar_id)?;
        let d = feature_distance(&feature, &featurize(exemplar, scale));
        if d > tol {
            continue;
        }
        let better = match best {
            None => true,
            Some((bd, bid)) => d < bd || (d == bd && cluster.exemplar_id < bid),
        };
        if better {
            best = Some((d, cluster.exemplar_id));
        }
    }
    best.map(|(_, id)| id)
}

fn feature_distance(a: &[f64; FEATURE_LEN], b: &[f64; FEATURE_LEN]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Replay each planned primitive's controls through the simulator, recording
/// designed versus localized end poses. Execution aborts on collision, on
/// the first inconsistent primitive (when requested), on reaching the goal
/// tolerance, or at the deadline.
pub fn execute_plan(
    plan: &Plan,
    store: &MpStore,
    sim: &mut Simulator,
    params: &ExecutionParams,
) -> ExecutionReport {
    let mut report = ExecutionReport::default();

    'plan: for &mp_id in &plan.actions {
        let mp = store.get(mp_id).expect("plan references a stored primitive");
        if sim.state.clock >= params.deadline {
            report.timed_out = true;
            break;
        }
        let start_loc = sim.localize(params.noise_std);
        let mut segment: Vec<(f64, Pose2D)> = vec![(0.0, start_loc)];
        let mut t = 0.0;
        let mut collided_here = false;
        while t < mp.duration - 1e-9 {
            if sim.state.clock >= params.deadline {
                // Motion truncated by the time budget: report the timeout
                // without judging the partial primitive.
                report.timed_out = true;
                break 'plan;
            }
            let cmd = mp.command_at(t + 1e-12);
            let dt = params.control_period.min(mp.duration - t);
            let outcome = sim.step(cmd, dt);
            t += dt;
            report.trace.push(TraceRow {
                t: sim.state.clock,
                pose: sim.state.true_pose,
                cmd,
                effective: outcome.effective,
            });
            segment.push((t, sim.localize(params.noise_std)));
            if outcome.collided {
                collided_here = true;
                break;
            }
        }

        let executed_end = segment.last().unwrap().1;
        let designed_end = start_loc.compose(&mp.end_pose());
        let world_poses: Vec<Pose2D> = segment.iter().map(|&(_, p)| p).collect();
        let consistent = !collided_here
            && ccdmp(mp, &world_poses, params.tol_pos, params.tol_theta);
        let observed = MotionPrimitive {
            id: 0,
            controls: mp.controls.clone(),
            poses: segment
                .iter()
                .map(|&(tr, p)| (tr, start_loc.relative(&p)))
                .collect(),
            duration: segment.last().unwrap().0,
        };
        report.records.push(ExecutionRecord {
            mp_id,
            designed_end,
            executed_end,
            consistent,
            observed,
            aborted_by_collision: collided_here,
        });

        if collided_here {
            report.collided = true;
            break;
        }
        if (executed_end.x - params.goal.0).hypot(executed_end.y - params.goal.1)
            <= params.goal_tolerance
        {
            report.reached_goal = true;
            break;
        }
        if params.stop_on_inconsistent && !consistent {
            break;
        }
    }
    report
}

/// Cluster scores plus promotion/demotion thresholds.
#[derive(Debug, Clone)]
pub struct VoteLedger {
    pub clusters: Vec<MPCluster>,
    pub promote_threshold: i32,
    pub demote_threshold: i32,
}

impl VoteLedger {
    pub fn new(clusters: Vec<MPCluster>, promote_threshold: i32, demote_threshold: i32) -> Self {
        VoteLedger { clusters, promote_threshold, demote_threshold }
    }

    pub fn cluster_index_of_mp(&self, mp_id: u64) -> Option<usize> {
        self.clusters
            .iter()
            .position(|c| c.member_ids.binary_search(&mp_id).is_ok())
    }

    pub fn cluster_by_exemplar(&self, exemplar_id: u64) -> Option<&MPCluster> {
        self.clusters.iter().find(|c| c.exemplar_id == exemplar_id)
    }

    /// Active clusters eligible for planning, highest votes first (ties to
    /// the lower exemplar id), capped at `max_active`. Demoted actives
    /// (votes at or below the demote threshold) are skipped, except that the
    /// best-voted active cluster always stays enabled so the planner never
    /// receives an empty primitive set.
    pub fn enabled_for_planning(&self, max_active: usize) -> Vec<&MPCluster> {
        let mut active: Vec<&MPCluster> = self
            .clusters
            .iter()
            .filter(|c| c.status == ClusterStatus::Active)
            .collect();
        active.sort_by(|a, b| b.votes.cmp(&a.votes).then(a.exemplar_id.cmp(&b.exemplar_id)));
        let mut enabled: Vec<&MPCluster> = active
            .iter()
            .copied()
            .filter(|c| c.votes > self.demote_threshold)
            .collect();
        if enabled.is_empty() {
            enabled.extend(active.first().copied());
        }
        enabled.truncate(max_active);
        enabled
    }

    fn snapshot(&self) -> Vec<(u64, i32, ClusterStatus)> {
        self.clusters
            .iter()
            .map(|c| (c.exemplar_id, c.votes, c.status))
            .collect()
    }
}

/// What one execution record did to the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteEvent {
    Upvoted { exemplar: u64, votes: i32 },
    Downvoted { exemplar: u64, votes: i32 },
    CandidateUpvoted { exemplar: u64, votes: i32 },
    NewCandidate { exemplar: u64 },
    Promoted { exemplar: u64 },
}

/// Apply the three-case voting rule to every non-aborted record:
/// consistent -> upvote the cluster; inconsistent with no candidate match ->
/// downvote and add a new candidate holding the observed motion;
/// inconsistent with a candidate match -> downvote and upvote the candidate.
/// Candidates reaching the promote threshold become active clusters.
pub fn vote_update(
    ledger: &mut VoteLedger,
    store: &mut MpStore,
    scale: &FeatureScale,
    records: &[ExecutionRecord],
    cccmp_tol: f64,
) -> Vec<VoteEvent> {
    let mut events = Vec::new();
    for record in records {
        if record.aborted_by_collision {
            continue;
        }
        let Some(idx) = ledger.cluster_index_of_mp(record.mp_id) else {
            continue;
        };
        if record.consistent {
            ledger.clusters[idx].votes += 1;
            events.push(VoteEvent::Upvoted {
                exemplar: ledger.clusters[idx].exemplar_id,
                votes: ledger.clusters[idx].votes,
            });
            continue;
        }

        ledger.clusters[idx].votes -= 1;
        events.push(VoteEvent::Downvoted {
            exemplar: ledger.clusters[idx].exemplar_id,
            votes: ledger.clusters[idx].votes,
        });

        match cccmp(&record.observed, &ledger.clusters, store, scale, cccmp_tol) {
            Some(candidate_exemplar) => {
                let cand = ledger
                    .clusters
                    .iter_mut()
                    .find(|c| c.exemplar_id == candidate_exemplar)
                    .expect("cccmp returned a known candidate");
                cand.votes += 1;
                events.push(VoteEvent::CandidateUpvoted {
                    exemplar: candidate_exemplar,
                    votes: cand.votes,
                });
                if cand.votes >= ledger.promote_threshold {
                    cand.status = ClusterStatus::Active;
                    events.push(VoteEvent::Promoted { exemplar: candidate_exemplar });
                }
            }
            None => {
                let new_id = store.insert_observed(record.observed.clone());
                ledger.clusters.push(MPCluster {
                    exemplar_id: new_id,
                    member_ids: vec![new_id],
                    votes: 1,
                    status: ClusterStatus::Candidate,
                });
                events.push(VoteEvent::NewCandidate { exemplar: new_id });
            }
        }
    }
    events
}

/// Per-iteration log line of the adaptive loop.
#[derive(Debug, Clone)]
pub struct IterationLog {
    pub iteration: usize,
    pub plan_actions: usize,
    pub plan_length: f64,
    pub records: usize,
    pub consistent_records: usize,
    pub collided: bool,
    pub plan_failed: bool,
    pub ledger: Vec<(u64, i32, ClusterStatus)>,
}

/// Render the iteration log as CSV, the ledger snapshot packed into one
/// column as `exemplar:votes:status|...`.
pub fn events_csv(events: &[IterationLog]) -> String {
    let mut out =
        String::from("iteration,plan_actions,plan_length,records,consistent_records,collided,plan_failed,ledger\n");
    for e in events {
        let ledger = e
            .ledger
            .iter()
            .map(|(id, votes, status)| {
                let s = match status {
                    ClusterStatus::Active => "active",
                    ClusterStatus::Candidate => "candidate",
                };
                format!("{id}:{votes}:{s}")
            })
            .collect::<Vec<_>>()
            .join("|");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.iteration,
            e.plan_actions,
            e.plan_length,
            e.records,
            e.consistent_records,
            e.collided,
            e.plan_failed,
            ledger
        );
    }
    out
}

/// One designed-motion consistency check, tagged with whether its cluster
/// was promoted at runtime (as opposed to seeded from the initial library).
#[derive(Debug, Clone, Copy)]
pub struct CcdmpCheck {
    pub cluster_exemplar: u64,
    pub promoted_cluster: bool,
    pub consistent: bool,
}

#[derive(Debug, Clone)]
pub struct NavigationResult {
    pub reached: bool,
    pub iterations: usize,
    pub final_pose: Pose2D,
    pub distance_to_goal: f64,
    /// Polyline length of the executed trace, meters.
    pub path_length: f64,
    /// Simulator clock at the end of the run, seconds.
    pub sim_time: f64,
    pub trace: Vec<TraceRow>,
    pub events: Vec<IterationLog>,
    /// Candidate clusters promoted to active during the run.
    pub promotions: usize,
    pub ccdmp_checks: Vec<CcdmpCheck>,
}

pub fn trace_length(trace: &[TraceRow]) -> f64 {
    trace
        .windows(2)
        .map(|w| w[0].pose.distance(&w[1].pose))
        .sum()
}

/// Closed-loop navigation: plan with the enabled clusters, execute, vote,
/// feed failures to the penalty grid, and re-plan until the goal tolerance,
/// the re-plan limit, or the simulated-time budget.
pub fn adaptive_navigate(
    sim: &mut Simulator,
    goal: (f64, f64),
    library: &MpLibrary,
    clusters: &[MPCluster],
    config: &Config,
) -> NavigationResult {
    let mut store = MpStore::from_library(library);
    let mut ledger = VoteLedger::new(
        clusters.to_vec(),
        config.adaptive.promote_threshold,
        config.adaptive.demote_threshold,
    );
    let scale = FeatureScale::from_model(&config.robot, library.delta_t);
    let mut penalty = PenaltyGrid::new(
        config.penalty.resolution,
        config.penalty.beta,
        config.penalty.decay_length,
    );
    let deadline = sim.state.clock + config.adaptive.sim_time_cap;

    let mut trace: Vec<TraceRow> = Vec::new();
    let mut events: Vec<IterationLog> = Vec::new();
    let mut ccdmp_checks: Vec<CcdmpCheck> = Vec::new();
    let mut promoted: HashSet<u64> = HashSet::new();
    let mut promotions = 0;
    let mut reached = false;
    let mut iterations = 0;

    for iteration in 0..config.adaptive.max_replans {
        if sim.state.clock >= deadline {
            break;
        }
        iterations = iteration + 1;
        let current = sim.localize(config.sim.noise_std);
        if (current.x - goal.0).hypot(current.y - goal.1) <= config.planner.goal_tolerance {
            reached = true;
            iterations -= 1;
            break;
        }

        let enabled = ledger.enabled_for_planning(config.adaptive.max_active);
        let mps: Vec<&MotionPrimitive> = enabled
            .iter()
            .filter_map(|c| store.get(c.exemplar_id))
            .collect();
        let result = plan_astar(&mps, current, goal, &sim.grid, &penalty, &config.planner);

        match result.plan {
            Ok(plan) => {
                if plan.is_empty() {
                    reached = true;
                    events.push(IterationLog {
                        iteration,
                        plan_actions: 0,
                        plan_length: 0.0,
                        records: 0,
                        consistent_records: 0,
                        collided: false,
                        plan_failed: false,
                        ledger: ledger.snapshot(),
                    });
                    break;
                }
                let params = ExecutionParams {
                    control_period: config.sim.control_period,
                    noise_std: config.sim.noise_std,
                    tol_pos: config.adaptive.tol_pos,
                    tol_theta: config.adaptive.tol_theta,
                    goal,
                    goal_tolerance: config.planner.goal_tolerance,
                    deadline,
                    stop_on_inconsistent: true,
                };
                let report = execute_plan(&plan, &store, sim, &params);

                for record in &report.records {
                    if let Some(idx) = ledger.cluster_index_of_mp(record.mp_id) {
                        let exemplar = ledger.clusters[idx].exemplar_id;
                        if !record.aborted_by_collision {
                            ccdmp_checks.push(CcdmpCheck {
                                cluster_exemplar: exemplar,
                                promoted_cluster: promoted.contains(&exemplar),
                                consistent: record.consistent,
                            });
                        }
                    }
                }
                let vote_events =
                    vote_update(&mut ledger, &mut store, &scale, &report.records, config.adaptive.cccmp_tol);
                for ev in &vote_events {
                    if let VoteEvent::Promoted { exemplar } = ev {
                        promoted.insert(*exemplar);
                        promotions += 1;
                    }
                }
                if report.collided {
                    let executed: Vec<Pose2D> = report.trace.iter().map(|r| r.pose).collect();
                    penalty.add_failure(&executed);
                }

                events.push(IterationLog {
                    iteration,
                    plan_actions: plan.actions.len(),
                    plan_length: plan.length,
                    records: report.records.len(),
                    consistent_records: report.records.iter().filter(|r| r.consistent).count(),
                    collided: report.collided,
                    plan_failed: false,
                    ledger: ledger.snapshot(),
                });
                let reached_now = report.reached_goal;
                trace.extend(report.trace);
                if reached_now {
                    reached = true;
                    break;
                }
            }
            Err(_) => {
                // Feed the search failures to the penalty grid and retry.
                for failure in &result.failures {
                    penalty.add_failure(&failure.samples);
                }
                events.push(IterationLog {
                    iteration,
                    plan_actions: 0,
                    plan_length: 0.0,
                    records: 0,
                    consistent_records: 0,
                    collided: false,
                    plan_failed: true,
                    ledger: ledger.snapshot(),
                });
            }
        }
    }

    let final_pose = sim.state.true_pose;
    let distance_to_goal = (final_pose.x - goal.0).hypot(final_pose.y - goal.1);
    if !reached && distance_to_goal <= config.planner.goal_tolerance {
        reached = true;
    }
    NavigationResult {
        reached,
        iterations,
        final_pose,
        distance_to_goal,
        path_length: trace_length(&trace),
        sim_time: sim.state.clock,
        trace,
        events,
        promotions,
        ccdmp_checks,
    }
}
