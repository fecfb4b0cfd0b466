//! Aggregated runtime configuration with JSON overrides.
//!
//! Every tunable in the crate lives here with its default; a config file may
//! override any subset of fields (unknown fields are rejected, missing ones
//! fall back to the defaults).

use crate::clustering::ApParams;
use crate::kinematics::RobotModel;
use crate::planner::PlannerConfig;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Control period in seconds.
    pub control_period: f64,
    /// Disc footprint radius in meters.
    pub footprint_radius: f64,
    /// Localization noise standard deviations `(x m, y m, theta rad)`.
    pub noise_std: (f64, f64, f64),
    /// Wheel-speed cap used by the degraded profiles, rad/s.
    pub degraded_cap: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            control_period: crate::sim::DEFAULT_CONTROL_PERIOD,
            footprint_radius: crate::sim::DEFAULT_FOOTPRINT_RADIUS,
            noise_std: (0.0, 0.0, 0.0),
            degraded_cap: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpConfig {
    /// Window duration for primitive generation, seconds.
    pub delta_t: f64,
    /// Inf-norm dead-band below which a command counts as zero, rad/s.
    pub deadband: f64,
}

impl Default for MpConfig {
    fn default() -> Self {
        MpConfig { delta_t: 1.0, deadband: crate::mp::COMMAND_DEADBAND }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    /// Penalty-grid cell edge, meters.
    pub resolution: f64,
    /// Increment at the failure point.
    pub beta: f64,
    /// Along-path decay length, meters.
    pub decay_length: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig { resolution: 0.25, beta: 1.0, decay_length: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveConfig {
    /// End-position tolerance of the designed-motion consistency check, m.
    pub tol_pos: f64,
    /// Heading tolerance of the designed-motion consistency check, rad.
    pub tol_theta: f64,
    /// Feature-space radius of the candidate-matching check
    /// (normalized units).
    pub cccmp_tol: f64,
    /// Votes at which a candidate cluster becomes active.
    pub promote_threshold: i32,
    /// Votes at or below which an active cluster is ignored for planning.
    pub demote_threshold: i32,
    /// Maximum clusters handed to the planner, highest votes first.
    pub max_active: usize,
    /// Maximum number of plans per navigation.
    pub max_replans: usize,
    /// Simulated-time budget per navigation, seconds.
    pub sim_time_cap: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            tol_pos: 0.15,
            tol_theta: 0.2,
            cccmp_tol: 0.5,
            promote_threshold: 3,
            demote_threshold: -2,
            max_active: 40,
            max_replans: 20,
            sim_time_cap: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwaConfig {
    /// Forward-simulation horizon, seconds.
    pub horizon: f64,
    /// Rollout integration step, seconds.
    pub sim_step: f64,
    /// Assumed linear acceleration limit, m/s^2.
    pub accel_v: f64,
    /// Assumed angular acceleration limit, rad/s^2.
    pub accel_w: f64,
    pub v_samples: usize,
    pub w_samples: usize,
    pub weight_goal: f64,
    pub weight_heading: f64,
    pub weight_clearance: f64,
    pub weight_velocity: f64,
    /// Clearance saturation distance, meters.
    pub clearance_cap: f64,
    /// Distance at which the baseline declares arrival, meters.
    pub stop_tolerance: f64,
}

impl Default for DwaConfig {
    fn default() -> Self {
        DwaConfig {
            horizon: 1.5,
            sim_step: 0.1,
            accel_v: 2.0,
            accel_w: 3.0,
            v_samples: 8,
            w_samples: 15,
            weight_goal: 2.0,
            weight_heading: 0.8,
            weight_clearance: 0.4,
            weight_velocity: 0.4,
            clearance_cap: 1.0,
            stop_tolerance: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Success threshold on the final distance to goal, meters.
    pub success_threshold: f64,
    /// Simulated-time cap per scenario run, seconds.
    pub time_cap: f64,
    /// Scripted teleoperation duration for library generation, seconds.
    pub teleop_duration: f64,
    /// Benchmark goals in meters.
    pub goals: Vec<(f64, f64)>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            success_threshold: 1.0,
            time_cap: 20.0,
            teleop_duration: 200.0,
            goals: vec![(3.0, 2.0), (3.0, -2.0)],
        }
    }
}

/// Top-level configuration. All fields have defaults; a JSON file can
/// override any subset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub robot: RobotModel,
    pub sim: SimConfig,
    pub mp: MpConfig,
    pub clustering: ApParams,
    pub planner: PlannerConfig,
    pub penalty: PenaltyConfig,
    pub adaptive: AdaptiveConfig,
    pub dwa: DwaConfig,
    pub bench: BenchConfig,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let c = Config::default();
        assert_eq!(c.robot.wheel_radius, 0.098);
        assert_eq!(c.robot.track_width, 0.37);
        assert_eq!(c.robot.max_wheel_speed, 16.0);
        assert_eq!(c.sim.control_period, 0.05);
        assert_eq!(c.mp.delta_t, 1.0);
        assert_eq!(c.clustering.damping, 0.9);
        assert_eq!(c.planner.goal_tolerance, 0.5);
        assert_eq!(c.planner.budget, 50_000);
        assert_eq!(c.penalty.beta, 1.0);
        assert_eq!(c.adaptive.promote_threshold, 3);
        assert_eq!(c.adaptive.demote_threshold, -2);
        assert_eq!(c.adaptive.max_active, 40);
        assert_eq!(c.bench.success_threshold, 1.0);
    }

    #[test]
    fn partial_json_overrides_only_named_fields() {
        let json = r#"{ "planner": { "budget": 123 }, "sim": { "degraded_cap": 4.0 } }"#;
        let c: Config = serde_json::from_str(json).unwrap();
        assert_eq!(c.planner.budget, 123);
        assert_eq!(c.planner.goal_tolerance, 0.5);
        assert_eq!(c.sim.degraded_cap, 4.0);
        assert_eq!(c.mp.delta_t, 1.0);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let mut c = Config::default();
        c.adaptive.max_replans = 7;
        c.save(&path).unwrap();
        assert_eq!(Config::load(&path).unwrap(), c);
    }

    #[test]
    fn unknown_top_level_fields_are_rejected() {
        assert!(serde_json::from_str::<Config>(r#"{ "nonsense": 1 }"#).is_err());
    }
}
