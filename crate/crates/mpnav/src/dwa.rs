//! Velocity-sampling local-planner baseline.
//!
//! Classic dynamic-window navigation that trusts the undegraded robot model:
//! each control period it samples `(v, w)` from the window reachable under
//! the assumed acceleration limits, forward-simulates the assumed kinematics
//! over a short horizon, scores the rollouts, and executes the best
//! command's first step through the (possibly degraded) simulator. Its
//! internal velocity estimate comes from its own commands, never from
//! localization, which is exactly why degraded locomotion defeats it.

use crate::adaptive::TraceRow;
use crate::config::DwaConfig;
use crate::kinematics::{integrate_twist_exact, normalize_angle, Pose2D, RobotModel, Twist};
use crate::sim::Simulator;

#[derive(Debug, Clone)]
pub struct DwaRun {
    pub trace: Vec<TraceRow>,
    pub arrived: bool,
    pub collided: bool,
}

fn rollout_score(
    start: Pose2D,
    twist: Twist,
    goal: (f64, f64),
    sim: &Simulator,
    assumed: &RobotModel,
    cfg: &DwaConfig,
) -> Option<f64> {
    let steps = (cfg.horizon / cfg.sim_step).round() as usize;
    let mut pose = start;
    let mut min_clearance = cfg.clearance_cap;
    for _ in 0..steps {
        pose = integrate_twist_exact(pose, twist, cfg.sim_step);
        if sim.grid.disc_collides(pose.x, pose.y, sim.footprint_radius) {
            return None; // predicted collision (or leaving the map)
        }
        if sim.grid.occupied_count() > 0 {
            min_clearance = min_clearance.min(clearance_at(sim, pose.x, pose.y));
        }
    }
    let dist_now = (start.x - goal.0).hypot(start.y - goal.1);
    let dist_end = (pose.x - goal.0).hypot(pose.y - goal.1);
    let progress = (dist_now - dist_end) / (assumed.max_linear_speed() * cfg.horizon);
    let bearing = (goal.1 - pose.y).atan2(goal.0 - pose.x);
    let heading = 1.0 - normalize_angle(bearing - pose.theta).abs() / std::f64::consts::PI;
    let clearance = min_clearance / cfg.clearance_cap;
    let velocity = twist.v / assumed.max_linear_speed();
    Some(
        cfg.weight_goal * progress
            + cfg.weight_heading * heading
            + cfg.weight_clearance * clearance
            + cfg.weight_velocity * velocity,
    )
}

/// Distance from a point to the nearest occupied cell, capped by scanning
/// only the clearance neighborhood.
fn clearance_at(sim: &Simulator, x: f64, y: f64) -> f64 {
    let grid = &sim.grid;
    let cap = 1.0;
    let cells = (cap / grid.resolution).ceil() as i64;
    let center = match grid.world_to_cell(x, y) {
        Some(c) => c,
        None => return 0.0,
    };
    let mut best = cap;
    for dy in -cells..=cells {
        for dx in -cells..=cells {
            let ix = center.0 as i64 + dx;
            let iy = center.1 as i64 + dy;
            if ix < 0 || iy < 0 {
                continue;
            }
            if grid.is_occupied(ix as usize, iy as usize) {
                let (cx, cy) = grid.cell_center(ix as usize, iy as usize);
                best = best.min((cx - x).hypot(cy - y));
            }
        }
    }
    best
}

/// Pick the best command in the current dynamic window.
fn best_command(
    pose: Pose2D,
    believed: Twist,
    goal: (f64, f64),
    sim: &Simulator,
    assumed: &RobotModel,
    cfg: &DwaConfig,
    control_period: f64,
) -> Twist {
    let v_max = assumed.max_linear_speed();
    let w_max = 2.0 * v_max / assumed.track_width;
    let v_lo = (believed.v - cfg.accel_v * control_period).max(0.0);
    let v_hi = (believed.v + cfg.accel_v * control_period).min(v_max);
    let w_lo = (believed.w - cfg.accel_w * control_period).max(-w_max);
    let w_hi = (believed.w + cfg.accel_w * control_period).min(w_max);

    let mut best: Option<(f64, Twist)> = None;
    for i in 0..cfg.v_samples {
        let v = if cfg.v_samples == 1 {
            v_lo
        } else {
            v_lo + (v_hi - v_lo) * i as f64 / (cfg.v_samples - 1) as f64
        };
        for j in 0..cfg.w_samples {
            let w = if cfg.w_samples == 1 {
                w_lo
            } else {
                w_lo + (w_hi - w_lo) * j as f64 / (cfg.w_samples - 1) as f64
            };
            // Skip samples the assumed hardware cannot realize.
            let wheels = assumed.wheel_speeds(v, w);
            if wheels.left.abs() > assumed.max_wheel_speed
                || wheels.right.abs() > assumed.max_wheel_speed
            {
                continue;
            }
            let twist = Twist { v, w };
            if let Some(score) = rollout_score(pose, twist, goal, sim, assumed, cfg) {
                if best.map_or(true, |(s, _)| score > s) {
                    best = Some((score, twist));
                }
            }
        }
    }
    best.map(|(_, t)| t).unwrap_or_else(|| {
        // Every rollout collides: rotate in place toward the goal.
        let bearing = (goal.1 - pose.y).atan2(goal.0 - pose.x);
        let dir = normalize_angle(bearing - pose.theta).signum();
        Twist { v: 0.0, w: dir * w_hi.abs().max(w_lo.abs()).min(1.5) }
    })
}

/// Run the baseline until it believes it arrived, collides, or the
/// simulator clock reaches `deadline`.
pub fn baseline_dwa(
    sim: &mut Simulator,
    goal: (f64, f64),
    assumed: &RobotModel,
    cfg: &DwaConfig,
    control_period: f64,
    noise_std: (f64, f64, f64),
    deadline: f64,
) -> DwaRun {
    let mut run = DwaRun { trace: Vec::new(), arrived: false, collided: false };
    let mut believed = Twist { v: 0.0, w: 0.0 };

    while sim.state.clock < deadline {
        let pose = sim.localize(noise_std);
        if (pose.x - goal.0).hypot(pose.y - goal.1) <= cfg.stop_tolerance {
            run.arrived = true;
            break;
        }
        let twist = best_command(pose, believed, goal, sim, assumed, cfg, control_period);
        let cmd = assumed.wheel_speeds(twist.v, twist.w);
        let outcome = sim.step(cmd, control_period);
        run.trace.push(TraceRow {
            t: sim.state.clock,
            pose: sim.state.true_pose,
            cmd,
            effective: outcome.effective,
        });
        believed = twist; // trusts its own command, not the localization
        if outcome.collided {
            run.collided = true;
            break;
        }
    }
    run
}
