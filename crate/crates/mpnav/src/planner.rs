//! A* over the search space spanned by motion primitives.
//!
//! Successors of a state are generated by composing each available
//! primitive's normalized pose trace onto the state's pose; the swept trace
//! is collision-checked sample by sample. Duplicate detection closes states
//! by a discretized `(x, y, heading)` cell. The heuristic is the Euclidean
//! distance to the goal plus a spatial penalty field fed by previously
//! failed traces, which deliberately trades admissibility for pruning.

use crate::kinematics::Pose2D;
use crate::mp::MotionPrimitive;
use crate::sim::OccupancyGrid;
use serde::{Deserialize, Serialize};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;
use thiserror::Error;

/// Per-cell failure penalty field added to the A* heuristic.
#[derive(Debug, Clone)]
pub struct PenaltyGrid {
    pub resolution: f64,
    /// Penalty added at the failure point itself.
    pub beta: f64,
    /// Along-path e-folding distance of the penalty, meters.
    pub decay_length: f64,
    cells: HashMap<(i64, i64), f64>,
}

impl PenaltyGrid {
    pub fn new(resolution: f64, beta: f64, decay_length: f64) -> Self {
        assert!(resolution > 0.0 && beta >= 0.0 && decay_length > 0.0);
        PenaltyGrid { resolution, beta, decay_length, cells: HashMap::new() }
    }

    fn key(&self, x: f64, y: f64) -> (i64, i64) {
        (
            (x / self.resolution).floor() as i64,
            (y / self.resolution).floor() as i64,
        )
    }

    /// Stored penalty for the cell containing a world point.
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        self.cells.get(&self.key(x, y)).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Record a failed trace whose last pose is the failure point. Every
    /// cell covered by the trace gains `beta * exp(-d / decay_length)` where
    /// `d` is the along-path distance from the failure point, so the failure
    /// cell gains exactly `beta` and earlier cells progressively less.
    pub fn add_failure(&mut self, trace: &[Pose2D]) {
        if trace.is_empty() {
            return;
        }
        // Along-path distance from each sample to the end of the trace.
        let mut dist_to_end = vec![0.0; trace.len()];
        for i in (0..trace.len() - 1).rev() {
            dist_to_end[i] = dist_to_end[i + 1] + trace[i].distance(&trace[i + 1]);
        }
        // A cell touched several times gets one increment, at its smallest
        // distance to the failure point.
        let mut per_cell: HashMap<(i64, i64), f64> = HashMap::new();
        for (pose, d) in trace.iter().zip(&dist_to_end) {
            per_cell
                .entry(self.key(pose.x, pose.y))
                .and_modify(|best| *best = best.min(*d))
                .or_insert(*d);
        }
        for (cell, d) in per_cell {
            *self.cells.entry(cell).or_insert(0.0) += self.beta * (-d / self.decay_length).exp();
        }
    }
}

/// Cost assigned to one primitive expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    /// Polyline length of the primitive's pose trace (meters).
    #[default]
    ArcLength,
    /// Primitive duration (seconds).
    Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Position-only goal acceptance radius, meters.
    pub goal_tolerance: f64,
    /// Duplicate-detection cell edge, meters.
    pub dup_cell_size: f64,
    /// Duplicate-detection heading bins over the full circle.
    pub heading_bins: u32,
    /// Maximum number of expansions before giving up.
    pub budget: usize,
    pub cost_model: CostModel,
    /// Meters-per-second charged on top of the arc length. In-place
    /// rotations would otherwise be zero-cost edges, letting the search
    /// chain arbitrarily slow plans at no penalty; this keeps every edge
    /// strictly positive and breaks length ties toward faster primitives.
    /// Applies to the arc-length cost model only.
    pub time_cost_weight: f64,
    /// Disc footprint radius used for swept collision checks, meters.
    pub footprint_radius: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            goal_tolerance: 0.5,
            dup_cell_size: 0.25,
            heading_bins: 16,
            budget: 50_000,
            cost_model: CostModel::ArcLength,
            time_cost_weight: 0.05,
            footprint_radius: crate::sim::DEFAULT_FOOTPRINT_RADIUS,
        }
    }
}

/// Euclidean distance to the goal plus the stored penalty of the pose's
/// cell. With an all-zero penalty field this heuristic is consistent.
pub fn heuristic(pose: &Pose2D, goal: (f64, f64), penalty: &PenaltyGrid) -> f64 {
    (pose.x - goal.0).hypot(pose.y - goal.1) + penalty.value_at(pose.x, pose.y)
}

/// A successor produced by composing one primitive onto a state.
#[derive(Debug, Clone)]
pub struct Successor {
    pub pose: Pose2D,
    /// Cost of the expansion under the active cost model.
    pub cost: f64,
    pub mp_id: u64,
}

/// An expansion rejected by the collision check: the composed samples up to
/// and including the colliding one, for penalty updates.
#[derive(Debug, Clone)]
pub struct RejectedExpansion {
    pub mp_id: u64,
    pub samples: Vec<Pose2D>,
}

fn mp_cost(mp: &MotionPrimitive, config: &PlannerConfig) -> f64 {
    match config.cost_model {
        CostModel::ArcLength => mp.arc_length() + config.time_cost_weight * mp.duration,
        CostModel::Duration => mp.duration,
    }
}

/// Expand a collision-free state with every available primitive. The swept
/// trace is checked at every stored sample; colliding expansions are
/// rejected and reported.
pub fn expand(
    pose: Pose2D,
    mps: &[&MotionPrimitive],
    grid: &OccupancyGrid,
    config: &PlannerConfig,
) -> (Vec<Successor>, Vec<RejectedExpansion>) {
    let mut successors = Vec::with_capacity(mps.len());
    let mut rejected = Vec::new();
    'primitive: for mp in mps {
        let mut swept = Vec::with_capacity(mp.poses.len());
        for (idx, (_, rel)) in mp.poses.iter().enumerate() {
            let world = pose.compose(rel);
            swept.push(world);
            if idx == 0 {
                continue; // the state itself was already checked
            }
            if grid.disc_collides(world.x, world.y, config.footprint_radius) {
                rejected.push(RejectedExpansion { mp_id: mp.id, samples: swept });
                continue 'primitive;
            }
        }
        successors.push(Successor {
            pose: *swept.last().expect("nonempty trace"),
            cost: mp_cost(mp, config.cost_model),
            mp_id: mp.id,
        });
    }
    (successors, rejected)
}

/// Planner output: the chained waypoints, the primitive id applied at each
/// step, and the total trace length in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub states: Vec<Pose2D>,
    pub actions: Vec<u64>,
    /// Sum of the chained primitives' arc lengths, meters.
    pub length: f64,
    /// Accumulated search cost of the goal state (equals `length` under the
    /// arc-length cost model).
    pub cost: f64,
}

impl Plan {
    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// CSV dump: one row per waypoint with the primitive that led to it.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,x,y,theta,mp_id\n");
        for (i, s) in self.states.iter().enumerate() {
            let id = if i == 0 {
                String::new()
            } else {
                self.actions[i - 1].to_string()
            };
            let _ = writeln!(out, "{},{},{},{},{}", i, s.x, s.y, s.theta, id);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PlanError {
    /// The open list emptied before reaching the goal tolerance.
    #[error("no path: search space exhausted")]
    NoPath,
    /// The expansion budget ran out; callers may widen the tolerance or the
    /// primitive set.
    #[error("no path within the expansion budget")]
    BudgetExhausted,
    /// The start pose already collides.
    #[error("start pose is in collision")]
    StartInCollision,
    /// The goal position lies outside the grid.
    #[error("goal lies outside the grid")]
    GoalOutOfBounds,
}

/// Search outcome plus statistics the adaptive loop consumes.
#[derive(Debug)]
pub struct PlanResult {
    pub plan: Result<Plan, PlanError>,
    pub expansions: usize,
    /// Colliding expansions encountered during the search, each as a
    /// world-frame trace from the search root to the collision sample.
    pub failures: Vec<RejectedExpansion>,
}

struct Node {
    pose: Pose2D,
    g: f64,
    parent: Option<u32>,
    via_mp: Option<u64>,
}

#[derive(PartialEq)]
struct OpenEntry {
    f: f64,
    g: f64,
    seq: u64,
    node: u32,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap: order so the popped entry has the lowest
        // f, ties broken toward larger g (deeper first), then FIFO.
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn dup_key(pose: &Pose2D, config: &PlannerConfig) -> (i64, i64, u32) {
    let bins = config.heading_bins as f64;
    let frac = (pose.theta + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
    let bin = ((frac * bins).floor() as i64).rem_euclid(config.heading_bins as i64) as u32;
    (
        (pose.x / config.dup_cell_size).floor() as i64,
        (pose.y / config.dup_cell_size).floor() as i64,
        bin,
    )
}

fn reconstruct(nodes: &[Node], goal_node: u32, mps: &HashMap<u64, &MotionPrimitive>) -> Plan {
    let mut states = Vec::new();
    let mut actions = Vec::new();
    let mut cursor = Some(goal_node);
    while let Some(idx) = cursor {
        let node = &nodes[idx as usize];
        states.push(node.pose);
        if let Some(mp) = node.via_mp {
            actions.push(mp);
        }
        cursor = node.parent;
    }
    states.reverse();
    actions.reverse();
    let length = actions.iter().map(|id| mps[id].arc_length()).sum();
    Plan { states, actions, length, cost: nodes[goal_node as usize].g }
}

/// Trace from the search root to `node`, as waypoint poses. Used to extend a
/// rejected expansion's samples back to the root for penalty updates.
fn root_trace(nodes: &[Node], node: u32) -> Vec<Pose2D> {
    let mut out = Vec::new();
    let mut cursor = Some(node);
    while let Some(idx) = cursor {
        out.push(nodes[idx as usize].pose);
        cursor = nodes[idx as usize].parent;
    }
    out.reverse();
    out
}

/// Plan from `start` to within `goal_tolerance` of `goal` by chaining the
/// given primitives. A state is closed by its discretized cell; the search
/// ends when a popped state is inside the tolerance ball, the open list
/// empties, or the expansion budget runs out.
pub fn plan_astar(
    mps: &[&MotionPrimitive],
    start: Pose2D,
    goal: (f64, f64),
    grid: &OccupancyGrid,
    penalty: &PenaltyGrid,
    config: &PlannerConfig,
) -> PlanResult {
    let mut failures = Vec::new();

    if grid.world_to_cell(goal.0, goal.1).is_none() {
        return PlanResult { plan: Err(PlanError::GoalOutOfBounds), expansions: 0, failures };
    }
    if grid.disc_collides(start.x, start.y, config.footprint_radius) {
        return PlanResult { plan: Err(PlanError::StartInCollision), expansions: 0, failures };
    }

    let by_id: HashMap<u64, &MotionPrimitive> = mps.iter().map(|mp| (mp.id, *mp)).collect();
    let mut nodes = vec![Node { pose: start, g: 0.0, parent: None, via_mp: None }];
    let mut open = BinaryHeap::new();
    let mut closed: HashSet<(i64, i64, u32)> = HashSet::new();
    let mut seq = 0u64;
    open.push(OpenEntry { f: heuristic(&start, goal, penalty), g: 0.0, seq, node: 0 });

    let mut expansions = 0usize;
    while let Some(entry) = open.pop() {
        let node_idx = entry.node;
        let pose = nodes[node_idx as usize].pose;
        let key = dup_key(&pose, config);
        if !closed.insert(key) {
            continue;
        }

        if (pose.x - goal.0).hypot(pose.y - goal.1) <= config.goal_tolerance {
            let plan = reconstruct(&nodes, node_idx, &by_id);
            return PlanResult { plan: Ok(plan), expansions, failures };
        }
        if expansions >= config.budget {
            return PlanResult { plan: Err(PlanError::BudgetExhausted), expansions, failures };
        }
        expansions += 1;

        let (successors, rejected) = expand(pose, mps, grid, config);
        if !rejected.is_empty() {
            let prefix = root_trace(&nodes, node_idx);
            for r in rejected {
                let mut trace = prefix.clone();
                trace.extend(r.samples.into_iter().skip(1));
                failures.push(RejectedExpansion { mp_id: r.mp_id, samples: trace });
            }
        }
        let g = nodes[node_idx as usize].g;
        for succ in successors {
            if closed.contains(&dup_key(&succ.pose, config)) {
                continue;
            }
            let g_new = g + succ.cost;
            let node = Node {
                pose: succ.pose,
                g: g_new,
                parent: Some(node_idx),
                via_mp: Some(succ.mp_id),
            };
            nodes.push(node);
            seq += 1;
            open.push(OpenEntry {
                f: g_new + heuristic(&succ.pose, goal, penalty),
                g: g_new,
                seq,
                node: (nodes.len() - 1) as u32,
            });
        }
    }

    PlanResult { plan: Err(PlanError::NoPath), expansions, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{integrate_exact, RobotModel, WheelCommand};
    use approx::assert_abs_diff_eq;

    /// Build a constant-command primitive by exact integration on a 0.05 s
    /// sample grid with bit-exact relative times.
    pub(crate) fn constant_mp(id: u64, cmd: WheelCommand, duration_steps: usize) -> MotionPrimitive {
        let model = RobotModel::default();
        let mut poses = vec![(0.0, Pose2D::identity())];
        let mut p = Pose2D::identity();
        let total = duration_steps as f64 * 0.05;
        for k in 1..=duration_steps {
            p = integrate_exact(p, cmd, &model, 0.05);
            poses.push((k as f64 * total / duration_steps as f64, p));
        }
        MotionPrimitive {
            id,
            controls: poses.iter().map(|&(t, _)| (t, cmd)).collect(),
            poses,
            duration: total,
        }
    }

    /// A 1 m straight primitive taking 1 s.
    fn straight_1m(id: u64) -> MotionPrimitive {
        let model = RobotModel::default();
        let wheel = 1.0 / model.wheel_radius; // v = 1 m/s
        constant_mp(id, WheelCommand::new(wheel, wheel), 20)
    }

    fn big_grid() -> OccupancyGrid {
        OccupancyGrid::lab_default()
    }

    fn zero_penalty() -> PenaltyGrid {
        PenaltyGrid::new(0.25, 1.0, 0.5)
    }

    #[test]
    fn heuristic_trivials() {
        let penalty = zero_penalty();
        assert_eq!(heuristic(&Pose2D::identity(), (0.0, 0.0), &penalty), 0.0);
        assert_abs_diff_eq!(
            heuristic(&Pose2D::identity(), (3.0, 4.0), &penalty),
            5.0,
            epsilon = 1e-12
        );

        let mut penalty = zero_penalty();
        penalty.add_failure(&[Pose2D::new(1.0, 1.0, 0.0)]);
        let expected = 5.0 + penalty.value_at(1.0, 1.0);
        assert_abs_diff_eq!(
            heuristic(&Pose2D::new(1.0, 1.0, 0.0), (4.0, 5.0), &penalty),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn expand_single_straight_primitive() {
        let mp = straight_1m(0);
        let (succ, rejected) = expand(
            Pose2D::identity(),
            &[&mp],
            &big_grid(),
            &PlannerConfig::default(),
        );
        assert!(rejected.is_empty());
        assert_eq!(succ.len(), 1);
        assert_abs_diff_eq!(succ[0].pose.x, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(succ[0].pose.y, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(succ[0].cost, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn expand_rejects_primitive_through_wall() {
        let mp = straight_1m(0);
        let mut grid = big_grid();
        grid.occupy_rect(0.6, -0.5, 0.65, 0.5);
        let (succ, rejected) = expand(
            Pose2D::identity(),
            &[&mp],
            &grid,
            &PlannerConfig::default(),
        );
        assert!(succ.is_empty());
        assert_eq!(rejected.len(), 1);
        assert_eq!(rejected[0].mp_id, 0);
        // Collision when the footprint first touches the wall (x >= 0.35).
        let last = rejected[0].samples.last().unwrap();
        assert!(last.x >= 0.35 - 1e-9 && last.x < 0.6);
    }

    #[test]
    fn expand_mirrored_arcs_mirror_successors() {
        let left = constant_mp(0, WheelCommand::new(4.0, 8.0), 20);
        let right = constant_mp(1, WheelCommand::new(8.0, 4.0), 20);
        let (succ, _) = expand(
            Pose2D::identity(),
            &[&left, &right],
            &big_grid(),
            &PlannerConfig::default(),
        );
        assert_eq!(succ.len(), 2);
        assert_abs_diff_eq!(succ[0].pose.x, succ[1].pose.x, epsilon = 1e-9);
        assert_abs_diff_eq!(succ[0].pose.y, -succ[1].pose.y, epsilon = 1e-9);
        assert_abs_diff_eq!(succ[0].pose.theta, -succ[1].pose.theta, epsilon = 1e-9);
    }

    #[test]
    fn straight_corridor_plan() {
        let mp = straight_1m(0);
        let result = plan_astar(
            &[&mp],
            Pose2D::identity(),
            (3.0, 0.0),
            &big_grid(),
            &zero_penalty(),
            &PlannerConfig::default(),
        );
        let plan = result.plan.unwrap();
        assert_eq!(plan.actions, vec![0, 0, 0]);
        assert_abs_diff_eq!(plan.length, 3.0, epsilon = 1e-6);
        assert_eq!(plan.states.len(), 4);
    }

    #[test]
    fn start_within_tolerance_yields_empty_plan() {
        let mp = straight_1m(0);
        let result = plan_astar(
            &[&mp],
            Pose2D::new(2.9, 0.1, 1.0),
            (3.0, 0.0),
            &big_grid(),
            &zero_penalty(),
            &PlannerConfig::default(),
        );
        let plan = result.plan.unwrap();
        assert!(plan.is_empty());
        assert_eq!(plan.states.len(), 1);
        assert_eq!(plan.length, 0.0);
    }

    #[test]
    fn no_primitives_means_no_path() {
        let result = plan_astar(
            &[],
            Pose2D::identity(),
            (3.0, 0.0),
            &big_grid(),
            &zero_penalty(),
            &PlannerConfig::default(),
        );
        assert_eq!(result.plan.unwrap_err(), PlanError::NoPath);
    }

    #[test]
    fn tiny_budget_reports_exhaustion() {
        let mp = straight_1m(0);
        let config = PlannerConfig { budget: 1, ..PlannerConfig::default() };
        let result = plan_astar(
            &[&mp],
            Pose2D::identity(),
            (3.0, 0.0),
            &big_grid(),
            &zero_penalty(),
            &config,
        );
        assert_eq!(result.plan.unwrap_err(), PlanError::BudgetExhausted);
    }

    #[test]
    fn goal_outside_grid_is_an_error() {
        let mp = straight_1m(0);
        let result = plan_astar(
            &[&mp],
            Pose2D::identity(),
            (50.0, 0.0),
            &big_grid(),
            &zero_penalty(),
            &PlannerConfig::default(),
        );
        assert_eq!(result.plan.unwrap_err(), PlanError::GoalOutOfBounds);
    }

    #[test]
    fn penalty_formula_on_sparse_trace() {
        let mut penalty = PenaltyGrid::new(0.25, 1.0, 0.5);
        let trace = [
            Pose2D::new(0.0, 0.0, 0.0),
            Pose2D::new(1.0, 0.0, 0.0),
            Pose2D::new(2.0, 0.0, 0.0),
        ];
        penalty.add_failure(&trace);
        // Failure cell gains exactly beta; one path-meter back gains
        // beta * exp(-1 / 0.5); two meters back exp(-2 / 0.5).
        assert_abs_diff_eq!(penalty.value_at(2.0, 0.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(penalty.value_at(1.0, 0.0), (-1.0f64 / 0.5).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(penalty.value_at(0.0, 0.0), (-2.0f64 / 0.5).exp(), epsilon = 1e-12);
        // Untouched cells stay zero.
        assert_eq!(penalty.value_at(0.5, 0.0), 0.0);
    }

    #[test]
    fn penalty_increments_decay_with_path_distance() {
        let mut penalty = PenaltyGrid::new(0.25, 1.0, 0.5);
        // Dense straight trace along +x ending (failing) at x = 2.0.
        let trace: Vec<Pose2D> = (0..=20)
            .map(|k| Pose2D::new(k as f64 * 0.1, 0.0, 0.0))
            .collect();
        penalty.add_failure(&trace);

        assert_abs_diff_eq!(penalty.value_at(2.0, 0.0), 1.0, epsilon = 1e-12);

        // Walking backwards from the failure point, increments never grow.
        let mut prev = f64::INFINITY;
        for k in (0..=20).rev() {
            let v = penalty.value_at(k as f64 * 0.1, 0.0);
            assert!(v <= prev + 1e-12, "penalty grew away from the failure point");
            prev = v;
        }
    }

    #[test]
    fn failure_reports_extend_to_search_root() {
        let mp = straight_1m(0);
        let mut grid = big_grid();
        // Wall two primitives ahead.
        grid.occupy_rect(1.6, -0.5, 1.65, 0.5);
        let result = plan_astar(
            &[&mp],
            Pose2D::identity(),
            (3.0, 0.0),
            &grid,
            &zero_penalty(),
            &PlannerConfig::default(),
        );
        assert!(result.plan.is_err());
        assert!(!result.failures.is_empty());
        // Each failure trace starts at the search root.
        for f in &result.failures {
            assert!(f.samples[0].distance(&Pose2D::identity()) < 1e-12);
            assert!(f.samples.len() >= 2);
        }
    }

    #[test]
    fn plan_csv_has_one_row_per_state() {
        let mp = straight_1m(0);
        let result = plan_astar(
            &[&mp],
            Pose2D::identity(),
            (2.0, 0.0),
            &big_grid(),
            &zero_penalty(),
            &PlannerConfig::default(),
        );
        let plan = result.plan.unwrap();
        let csv = plan.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "step,x,y,theta,mp_id");
        assert_eq!(lines.len(), 1 + plan.states.len());
        assert!(lines[1].ends_with(','));
        assert!(lines[2].ends_with(",0"));
    }
}
