//! Motion-primitive generation from driven logs.
//!
//! A log of `(t, command, localized pose)` samples is partitioned into
//! maximal nonzero-command segments, each segment is chopped into windows of
//! a fixed duration, and every window becomes one [`MotionPrimitive`]: the
//! control samples plus the pose trace re-expressed relative to the window's
//! first pose. Primitives are featurized for clustering by sampling command
//! and pose at five equally spaced relative times.

use crate::kinematics::{normalize_angle, Pose2D, RobotModel, WheelCommand};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs;
use std::path::Path;
use thiserror::Error;

/// Dead-band (rad/s, inf-norm) under which a command counts as zero.
pub const COMMAND_DEADBAND: f64 = 0.05;

/// A timed control sequence paired with its origin-normalized pose trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPrimitive {
    pub id: u64,
    /// `(t_rel, command)` samples, strictly increasing in time, nonempty.
    pub controls: Vec<(f64, WheelCommand)>,
    /// `(t_rel, pose)` samples relative to the window start; `poses[0]` is
    /// the identity pose at `t_rel = 0`.
    pub poses: Vec<(f64, Pose2D)>,
    /// Equals the last relative timestamp.
    pub duration: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum MpError {
    #[error("motion primitive {0} has an empty control or pose trace")]
    Empty(u64),
    #[error("motion primitive {0} does not start at the identity pose")]
    NotNormalized(u64),
    #[error("motion primitive {0} has non-increasing timestamps")]
    NonIncreasingTime(u64),
    #[error("motion primitive {0}: duration does not match the last sample time")]
    DurationMismatch(u64),
    #[error("motion primitive {id}: end displacement {displacement:.3} m exceeds reachable {reachable:.3} m")]
    Unreachable { id: u64, displacement: f64, reachable: f64 },
}

#[allow(unused)]
impl MotionPrimitive {
    /// Final relative pose of the trace.
    pub fn end_pose(&self) -> Pose2D {
        self.poses.last().expect("nonempty pose trace").1
    }

    /// Polyline length of the pose trace in meters.
    pub fn arc_length(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| w[0].1.distance(&w[1].1))
            .sum()
    }

    /// Zero-order-hold command lookup at a relative time.
    pub fn command_at(&self, t_rel: f64) -> WheelCommand {
        let mut cmd = self.controls[0].1;
        for &(t, c) in &self.controls {
            if t <= t_rel {
                cmd = c;
            } else {
                break;
            }
        }
        cmd
    }

    /// Check the structural invariants. `max_linear_speed` bounds the
    /// physically reachable end displacement.
    pub fn validate(&self, max_linear_speed: f64) -> Result<(), MpError> {
        if self.controls.is_empty() || self.poses.is_empty() {
            return Err(MpError::Empty(self.id));
        }
        let first = self.poses[0];
        if first.0 != 0.0 || first.1.distance(&Pose2D::identity()) > 1e-9 || first.1.theta.abs() > 1e-9 {
            return Err(MpError::NotNormalized(self.id));
        }
        for series in [
            self.controls.iter().map(|s| s.0).collect::<Vec<_>>(),
            self.poses.iter().map(|s| s.0).collect::<Vec<_>>(),
        ] {
            if series.windows(2).any(|w| w[1] <= w[0]) {
                return Err(MpError::NonIncreasingTime(self.id));
            }
        }
        let last_t = self.poses.last().unwrap().0;
        if (self.duration - last_t).abs() > 1e-9 {
            return Err(MpError::DurationMismatch(self.id));
        }
        let displacement = self.end_pose().distance(&Pose2D::identity());
        let reachable = max_linear_speed * self.duration + 1e-9;
        if displacement > reachable {
            return Err(MpError::Unreachable { id: self.id, displacement, reachable });
        }
        Ok(())
    }
}

/// One driven-log sample: timestamp, commanded wheel speeds, localized pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: f64,
    pub cmd: WheelCommand,
    pub pose: Pose2D,
}

/// Segment a driven log into fixed-duration motion primitives.
///
/// Maximal runs of nonzero commands are chopped into windows of `delta_t`;
/// consecutive windows share their boundary sample so that composing the
/// normalized traces back into the world frame reconstructs the log poses at
/// every window boundary. A trailing partial window shorter than
/// `0.5 * delta_t` is dropped.
pub fn generate_mps(log: &[LogRecord], delta_t: f64, deadband: f64) -> Vec<MotionPrimitive> {
    assert!(delta_t > 0.0, "delta_t must be positive");
    let mut out = Vec::new();
    let mut next_id = 0u64;
    let mut segment: Vec<&LogRecord> = Vec::new();

    let flush = |segment: &mut Vec<&LogRecord>, out: &mut Vec<MotionPrimitive>, next_id: &mut u64| {
        if segment.len() >= 2 {
            chop_segment(segment, delta_t, out, next_id);
        }
        segment.clear();
    };

    for rec in log {
        if rec.cmd.is_zero(deadband) {
            flush(&mut segment, &mut out, &mut next_id);
        } else {
            segment.push(rec);
        }
    }
    flush(&mut segment, &mut out, &mut next_id);
    out
}

fn chop_segment(
    segment: &[&LogRecord],
    delta_t: f64,
    out: &mut Vec<MotionPrimitive>,
    next_id: &mut u64,
) {
    let mut window_start = 0;
    for i in 1..segment.len() {
        if segment[i].t - segment[window_start].t >= delta_t - 1e-9 {
            out.push(window_to_mp(&segment[window_start..=i], *next_id));
            *next_id += 1;
            window_start = i;
        }
    }
    let last = segment.len() - 1;
    if window_start < last {
        let tail = segment[last].t - segment[window_start].t;
        if tail >= 0.5 * delta_t {
            out.push(window_to_mp(&segment[window_start..=last], *next_id));
            *next_id += 1;
        }
    }
}

fn window_to_mp(window: &[&LogRecord], id: u64) -> MotionPrimitive {
    let t0 = window[0].t;
    let origin = window[0].pose;
    let controls: Vec<(f64, WheelCommand)> = window.iter().map(|r| (r.t - t0, r.cmd)).collect();
    let poses: Vec<(f64, Pose2D)> = window
        .iter()
        .map(|r| (r.t - t0, origin.relative(&r.pose)))
        .collect();
    let duration = poses.last().unwrap().0;
    MotionPrimitive { id, controls, poses, duration }
}

/// Number of sample times used for the clustering feature.
pub const FEATURE_SAMPLES: usize = 5;

/// Flat feature length: 5 sample times x (wl, wr, x, y, theta).
pub const FEATURE_LEN: usize = FEATURE_SAMPLES * 5;

/// Per-dimension feature normalizers keeping the Euclidean metric balanced:
/// wheel speeds by the hardware limit, positions by the distance reachable in
/// one window, angles by pi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub wheel: f64,
    pub pos: f64,
    pub angle: f64,
}

impl FeatureScale {
    pub fn from_model(model: &RobotModel, delta_t: f64) -> Self {
        FeatureScale {
            wheel: model.max_wheel_speed,
            pos: model.max_linear_speed() * delta_t,
            angle: std::f64::consts::PI,
        }
    }
}

fn lerp(a: f64, b: f64, frac: f64) -> f64 {
    a + (b - a) * frac
}

fn bracket<T: Copy>(series: &[(f64, T)], t: f64) -> ((f64, T), (f64, T)) {
    if t <= series[0].0 {
        return (series[0], series[0]);
    }
    for w in series.windows(2) {
        if t <= w[1].0 {
            return (w[0], w[1]);
        }
    }
    let last = *series.last().unwrap();
    (last, last)
}

fn interp_command(controls: &[(f64, WheelCommand)], t: f64) -> WheelCommand {
    let ((ta, ca), (tb, cb)) = bracket(controls, t);
    if tb <= ta {
        return ca;
    }
    let frac = (t - ta) / (tb - ta);
    WheelCommand::new(lerp(ca.left, cb.left, frac), lerp(ca.right, cb.right, frac))
}

fn interp_pose(poses: &[(f64, Pose2D)], t: f64) -> Pose2D {
    let ((ta, pa), (tb, pb)) = bracket(poses, t);
    if tb <= ta {
        return pa;
    }
    let frac = (t - ta) / (tb - ta);
    Pose2D::new(
        lerp(pa.x, pb.x, frac),
        lerp(pa.y, pb.y, frac),
        // Interpolate the heading along the shorter circle arc.
        pa.theta + frac * normalize_angle(pb.theta - pa.theta),
    )
}

/// Sample command and pose at `{0, T/4, T/2, 3T/4, T}` and scale each
/// dimension, interleaving `(wl, wr, x, y, theta)` per sample time.
pub fn featurize(mp: &MotionPrimitive, scale: &FeatureScale) -> [f64; FEATURE_LEN] {
    let mut feature = [0.0; FEATURE_LEN];
    for k in 0..FEATURE_SAMPLES {
        let t = mp.duration * k as f64 / (FEATURE_SAMPLES - 1) as f64;
        let cmd = interp_command(&mp.controls, t);
        let pose = interp_pose(&mp.poses, t);
        let base = 5 * k;
        feature[base] = cmd.left / scale.wheel;
        feature[base + 1] = cmd.right / scale.wheel;
        feature[base + 2] = pose.x / scale.pos;
        feature[base + 3] = pose.y / scale.pos;
        feature[base + 4] = pose.theta / scale.angle;
    }
    feature
}

#[derive(Debug, Error)]
pub enum LogIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("log file is missing the `{0}` column")]
    MissingColumn(&'static str),
}

#[derive(Debug, Serialize, Deserialize)]
struct LogRow {
    t: f64,
    wl_cmd: f64,
    wr_cmd: f64,
    x: f64,
    y: f64,
    theta: f64,
}

/// Read a driven log from CSV with header `t,wl_cmd,wr_cmd,x,y,theta`.
pub fn read_log_csv(path: &Path) -> Result<Vec<LogRecord>, LogIoError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.deserialize::<LogRow>() {
        let row = row?;
        out.push(LogRecord {
            t: row.t,
            cmd: WheelCommand::new(row.wl_cmd, row.wr_cmd),
            pose: Pose2D::new(row.x, row.y, row.theta),
        });
    }
    Ok(out)
}

/// Write a driven log as CSV with header `t,wl_cmd,wr_cmd,x,y,theta`.
pub fn write_log_csv(path: &Path, log: &[LogRecord]) -> Result<(), LogIoError> {
    let mut writer = csv::Writer::from_path(path)?;
    for rec in log {
        writer.serialize(LogRow {
            t: rec.t,
            wl_cmd: rec.cmd.left,
            wr_cmd: rec.cmd.right,
            x: rec.pose.x,
            y: rec.pose.y,
            theta: rec.pose.theta,
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// On-disk motion-primitive library: the window duration used to generate
/// the primitives plus the primitives themselves, keyed by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpLibrary {
    pub delta_t: f64,
    pub mps: Vec<MotionPrimitive>,
}

#[derive(Debug, Error)]
pub enum LibraryIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MpLibrary {
    pub fn new(delta_t: f64, mps: Vec<MotionPrimitive>) -> Self {
        MpLibrary { delta_t, mps }
    }

    pub fn load(path: &Path) -> Result<Self, LibraryIoError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), LibraryIoError> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Mutable id-keyed primitive store used by the adaptive loop, which adds
/// observed primitives at runtime.
#[derive(Debug, Clone, Default)]
pub struct MpStore {
    map: HashMap<u64, MotionPrimitive>,
    next_id: u64,
}

impl MpStore {
    pub fn from_library(library: &MpLibrary) -> Self {
        let mut store = MpStore::default();
        for mp in &library.mps {
            store.next_id = store.next_id.max(mp.id + 1);
            store.map.insert(mp.id, mp.clone());
        }
        store
    }

    pub fn get(&self, id: u64) -> Option<&MotionPrimitive> {
        self.map.get(&id)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Insert a runtime-observed primitive under a fresh id and return it.
    pub fn insert_observed(&mut self, mut mp: MotionPrimitive) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        mp.id = id;
        self.map.insert(id, mp);
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::integrate_exact;
    use crate::sim::{DegradationProfile, OccupancyGrid, Simulator};
    use approx::assert_abs_diff_eq;

    /// Drive a scripted command schedule through a normal-profile simulator
    /// and record the log at the control period.
    fn scripted_log(script: &[(f64, WheelCommand)], dt: f64) -> Vec<LogRecord> {
        let mut sim = Simulator::new(
            RobotModel::default(),
            DegradationProfile::normal(),
            OccupancyGrid::empty(0.05, 2000, 2000, Pose2D::new(-50.0, -50.0, 0.0)),
            Pose2D::identity(),
            0,
        );
        let mut log = Vec::new();
        let mut t = 0.0;
        for &(duration, cmd) in script {
            let steps = (duration / dt).round() as usize;
            for _ in 0..steps {
                log.push(LogRecord { t, cmd, pose: sim.state.true_pose });
                sim.step(cmd, dt);
                t += dt;
            }
        }
        log.push(LogRecord { t, cmd: WheelCommand::zero(), pose: sim.state.true_pose });
        log
    }

    #[test]
    fn ten_second_log_yields_ten_primitives() {
        let log = scripted_log(&[(10.0, WheelCommand::new(4.0, 4.0))], 0.05);
        let mps = generate_mps(&log, 1.0, COMMAND_DEADBAND);
        assert_eq!(mps.len(), 10);
        for (k, mp) in mps.iter().enumerate() {
            assert_eq!(mp.id, k as u64);
            mp.validate(RobotModel::default().max_linear_speed()).unwrap();
        }
        // Nine full windows; the segment ends at the last nonzero-command
        // sample (t = 9.95), leaving a kept trailing window.
        for mp in &mps[..9] {
            assert_abs_diff_eq!(mp.duration, 1.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(mps[9].duration, 0.95, epsilon = 1e-9);
    }

    #[test]
    fn zero_command_log_yields_nothing() {
        let log = scripted_log(&[(5.0, WheelCommand::zero())], 0.05);
        assert!(generate_mps(&log, 1.0, COMMAND_DEADBAND).is_empty());
        assert!(generate_mps(&[], 1.0, COMMAND_DEADBAND).is_empty());
    }

    #[test]
    fn deadband_counts_as_zero() {
        assert!(WheelCommand::new(0.04, -0.03).is_zero(COMMAND_DEADBAND));
        assert!(!WheelCommand::new(0.06, 0.0).is_zero(COMMAND_DEADBAND));
    }

    #[test]
    fn trailing_window_kept_above_half_delta_t() {
        // Samples run to t = 1.60: one full 1.0 s window plus a 0.6 s tail.
        let log = scripted_log(&[(1.65, WheelCommand::new(4.0, 4.0))], 0.05);
        let mps = generate_mps(&log, 1.0, COMMAND_DEADBAND);
        assert_eq!(mps.len(), 2);
        assert_abs_diff_eq!(mps[1].duration, 0.6, epsilon = 1e-9);

        // Samples run to t = 1.25: the 0.25 s tail is dropped.
        let log = scripted_log(&[(1.3, WheelCommand::new(4.0, 4.0))], 0.05);
        let mps = generate_mps(&log, 1.0, COMMAND_DEADBAND);
        assert_eq!(mps.len(), 1);
    }

    #[test]
    fn segments_split_on_zero_commands() {
        let script = [
            (2.0, WheelCommand::new(4.0, 4.0)),
            (0.5, WheelCommand::zero()),
            (3.0, WheelCommand::new(2.0, 6.0)),
        ];
        let log = scripted_log(&script, 0.05);
        let mps = generate_mps(&log, 1.0, COMMAND_DEADBAND);
        assert_eq!(mps.len(), 5);
    }

    #[test]
    fn windows_are_normalized_and_partition_the_log() {
        let dt = 0.05;
        let log = scripted_log(&[(4.0, WheelCommand::new(5.0, 7.0))], dt);
        let mps = generate_mps(&log, 1.0, COMMAND_DEADBAND);
        assert_eq!(mps.len(), 4);

        for mp in &mps {
            assert_eq!(mp.poses[0].1, Pose2D::identity());
            assert_eq!(mp.poses[0].0, 0.0);
            mp.validate(RobotModel::default().max_linear_speed()).unwrap();
        }

        // Chaining the normalized windows back into the world frame must
        // reconstruct the log poses at every window boundary.
        let mut world = log[0].pose;
        let mut t_accum = 0.0;
        for mp in &mps {
            world = world.compose(&mp.end_pose());
            t_accum += mp.duration;
            let idx = (t_accum / dt).round() as usize;
            assert!(
                world.distance(&log[idx].pose) < 1e-9,
                "boundary mismatch at t={t_accum}: {world:?} vs {:?}",
                log[idx].pose
            );
        }
    }

    #[test]
    fn boundary_samples_are_shared_between_windows() {
        let log = scripted_log(&[(3.0, WheelCommand::new(4.0, 6.0))], 0.05);
        let mps = generate_mps(&log, 1.0, COMMAND_DEADBAND);
        assert_eq!(mps.len(), 3);
        // End pose of window k composed onto its world start equals the world
        // start of window k+1.
        let start0 = log[0].pose;
        let start1 = start0.compose(&mps[0].end_pose());
        let idx = (1.0 / 0.05) as usize;
        assert!(start1.distance(&log[idx].pose) < 1e-9);
    }

    #[test]
    fn featurize_stationary_rotation_has_zero_positions() {
        let log = scripted_log(&[(1.0, WheelCommand::new(-3.0, 3.0))], 0.05);
        let mps = generate_mps(&log, 1.0, COMMAND_DEADBAND);
        let scale = FeatureScale::from_model(&RobotModel::default(), 1.0);
        let f = featurize(&mps[0], &scale);
        for k in 0..FEATURE_SAMPLES {
            assert_abs_diff_eq!(f[5 * k + 2], 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(f[5 * k + 3], 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(f[5 * k], -3.0 / scale.wheel, epsilon = 1e-9);
            assert_abs_diff_eq!(f[5 * k + 1], 3.0 / scale.wheel, epsilon = 1e-9);
        }
        // Heading grows over the sample times.
        assert!(f[24] > f[19] && f[19] > f[14] && f[14] > f[9] && f[9] > f[4]);
    }

    #[test]
    fn featurize_straight_matches_pattern() {
        let model = RobotModel::default();
        let log = scripted_log(&[(1.0, WheelCommand::new(4.0, 4.0))], 0.05);
        let mps = generate_mps(&log, 1.0, COMMAND_DEADBAND);
        let scale = FeatureScale::from_model(&model, 1.0);
        let mp = &mps[0];
        let f = featurize(mp, &scale);
        let v = model.wheel_radius * 4.0;
        for k in 0..FEATURE_SAMPLES {
            let t = mp.duration * k as f64 / 4.0;
            assert_abs_diff_eq!(f[5 * k], 4.0 / scale.wheel, epsilon = 1e-9);
            assert_abs_diff_eq!(f[5 * k + 1], 4.0 / scale.wheel, epsilon = 1e-9);
            assert_abs_diff_eq!(f[5 * k + 2], v * t / scale.pos, epsilon = 1e-6);
            assert_abs_diff_eq!(f[5 * k + 3], 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(f[5 * k + 4], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn featurize_arc_matches_dense_resampling_oracle() {
        let log = scripted_log(&[(1.0, WheelCommand::new(3.0, 7.0))], 0.05);
        let mps = generate_mps(&log, 1.0, COMMAND_DEADBAND);
        let mp = &mps[0];
        let scale = FeatureScale::from_model(&RobotModel::default(), 1.0);
        let f = featurize(mp, &scale);

        // Oracle: resample the stored trace on a 1 ms grid by independent
        // linear interpolation, then pick the five sample times from it.
        let dense_at = |t: f64| -> Pose2D {
            let mut i = 0;
            while i + 1 < mp.poses.len() && mp.poses[i + 1].0 < t {
                i += 1;
            }
            let (ta, pa) = mp.poses[i];
            let (tb, pb) = mp.poses[(i + 1).min(mp.poses.len() - 1)];
            if tb <= ta {
                return pa;
            }
            let frac = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            Pose2D::new(
                pa.x + (pb.x - pa.x) * frac,
                pa.y + (pb.y - pa.y) * frac,
                pa.theta + frac * normalize_angle(pb.theta - pa.theta),
            )
        };
        for k in 0..FEATURE_SAMPLES {
            let t_target = mp.duration * k as f64 / 4.0;
            let steps = (t_target / 0.001).round();
            let p = dense_at(steps * 0.001);
            assert_abs_diff_eq!(f[5 * k + 2], p.x / scale.pos, epsilon = 1e-3);
            assert_abs_diff_eq!(f[5 * k + 3], p.y / scale.pos, epsilon = 1e-3);
            assert_abs_diff_eq!(f[5 * k + 4], p.theta / scale.angle, epsilon = 1e-3);
        }
    }

    #[test]
    fn replay_reproduces_end_pose_under_normal_profile() {
        let script = [
            (2.4, WheelCommand::new(6.0, 8.0)),
            (0.3, WheelCommand::zero()),
            (1.8, WheelCommand::new(9.0, 9.0)),
        ];
        let log = scripted_log(&script, 0.05);
        let mps = generate_mps(&log, 1.0, COMMAND_DEADBAND);
        assert!(!mps.is_empty());
        let model = RobotModel::default();
        for mp in &mps {
            // Replay from an arbitrary start pose with zero-order hold.
            let start = Pose2D::new(1.3, -0.7, 0.9);
            let mut pose = start;
            let mut t = 0.0;
            while t < mp.duration - 1e-12 {
                let dt = (mp.duration - t).min(0.05);
                pose = integrate_exact(pose, mp.command_at(t + 1e-12), &model, dt);
                t += dt;
            }
            let designed = start.compose(&mp.end_pose());
            assert!(
                pose.distance(&designed) < 1e-6,
                "mp {}: replay end {pose:?} vs designed {designed:?}",
                mp.id
            );
        }
    }

    #[test]
    fn replay_deviates_under_cap_profile() {
        let log = scripted_log(&[(1.0, WheelCommand::new(9.0, 9.0))], 0.05);
        let mp = &generate_mps(&log, 1.0, COMMAND_DEADBAND)[0];
        let mut sim = Simulator::new(
            RobotModel::default(),
            DegradationProfile::overload(5.0),
            OccupancyGrid::lab_default(),
            Pose2D::identity(),
            0,
        );
        let mut t = 0.0;
        while t < mp.duration - 1e-12 {
            sim.step(mp.command_at(t + 1e-12), 0.05);
            t += 0.05;
        }
        let designed = mp.end_pose();
        assert!(sim.state.true_pose.distance(&designed) > 0.2);
    }

    #[test]
    fn single_sample_command_holds_for_full_duration() {
        let mp = MotionPrimitive {
            id: 0,
            controls: vec![(0.0, WheelCommand::new(2.0, 3.0))],
            poses: vec![(0.0, Pose2D::identity()), (1.0, Pose2D::new(0.2, 0.0, 0.1))],
            duration: 1.0,
        };
        assert_eq!(mp.command_at(0.0), WheelCommand::new(2.0, 3.0));
        assert_eq!(mp.command_at(0.7), WheelCommand::new(2.0, 3.0));
        assert_eq!(mp.command_at(1.0), WheelCommand::new(2.0, 3.0));
    }

    #[test]
    fn generation_is_deterministic_and_order_preserving() {
        let log = scripted_log(&[(5.0, WheelCommand::new(4.0, 5.0))], 0.05);
        let a = generate_mps(&log, 1.0, COMMAND_DEADBAND);
        let b = generate_mps(&log, 1.0, COMMAND_DEADBAND);
        assert_eq!(a, b);
        for (k, mp) in a.iter().enumerate() {
            assert_eq!(mp.id, k as u64);
        }
    }

    #[test]
    fn log_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let log = scripted_log(&[(0.5, WheelCommand::new(4.0, 6.0))], 0.05);
        write_log_csv(&path, &log).unwrap();
        let back = read_log_csv(&path).unwrap();
        assert_eq!(log.len(), back.len());
        for (a, b) in log.iter().zip(&back) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.cmd, b.cmd);
            assert_eq!(a.pose, b.pose);
        }
    }

    #[test]
    fn library_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("library.json");
        let log = scripted_log(&[(2.0, WheelCommand::new(4.0, 6.0))], 0.05);
        let library = MpLibrary::new(1.0, generate_mps(&log, 1.0, COMMAND_DEADBAND));
        library.save(&path).unwrap();
        assert_eq!(MpLibrary::load(&path).unwrap(), library);
    }

    #[test]
    fn store_assigns_fresh_ids() {
        let log = scripted_log(&[(2.0, WheelCommand::new(4.0, 6.0))], 0.05);
        let library = MpLibrary::new(1.0, generate_mps(&log, 1.0, COMMAND_DEADBAND));
        let mut store = MpStore::from_library(&library);
        let max_id = library.mps.iter().map(|m| m.id).max().unwrap();
        let observed = library.mps[0].clone();
        let new_id = store.insert_observed(observed);
        assert!(new_id > max_id);
        assert_eq!(store.get(new_id).unwrap().id, new_id);
    }
}
