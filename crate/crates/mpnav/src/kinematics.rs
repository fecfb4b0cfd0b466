//! Differential-drive forward kinematics and planar pose algebra.
//!
//! Three integration schemes are provided for the constant-twist motion
//! between control updates: the exact circular-arc solution, a first-order
//! Euler step, and a second-order midpoint (RK2) step. The exact integrator
//! is what the simulator and the motion-primitive machinery use; Euler and
//! RK2 exist for comparison and as convergence references.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Normalize an angle to `(-PI, PI]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// Planar pose `(x, y, theta)` in meters and radians, world frame,
/// theta counter-clockwise from +x and kept in `(-PI, PI]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2D {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Pose2D {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    /// Euclidean distance between the positions of two poses.
    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Apply `local` (a pose expressed in this pose's frame) to get its
    /// world-frame pose.
    pub fn compose(&self, local: &Pose2D) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D::new(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
            self.theta + local.theta,
        )
    }

    /// Express `other` (world frame) in this pose's frame. Inverse of
    /// [`Pose2D::compose`]: `a.compose(&a.relative(&b)) == b`.
    pub fn relative(&self, other: &Pose2D) -> Pose2D {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        let (s, c) = self.theta.sin_cos();
        Pose2D::new(
            c * dx + s * dy,
            -s * dx + c * dy,
            other.theta - self.theta,
        )
    }
}

/// Commanded left/right wheel angular speeds in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheelCommand {
    pub left: f64,
    pub right: f64,
}

impl WheelCommand {
    pub fn new(left: f64, right: f64) -> Self {
        WheelCommand { left, right }
    }

    pub fn zero() -> Self {
        WheelCommand {
            left: 0.0,
            right: 0.0,
        }
    }

    /// True when both wheel speeds are inside the dead-band (inf-norm).
    pub fn is_zero(&self, deadband: f64) -> bool {
        self.left.abs() <= deadband && self.right.abs() <= deadband
    }

    /// Swap left and right wheels. Mirrors the resulting trajectory about
    /// the robot's x-axis.
    pub fn swapped(&self) -> Self {
        WheelCommand {
            left: self.right,
            right: self.left,
        }
    }
}

/// Differential-drive geometry plus the hardware wheel-speed limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotModel {
    /// Wheel radius in meters.
    pub wheel_radius: f64,
    /// Axle separation in meters.
    pub track_width: f64,
    /// Hardware limit on commanded wheel speed, rad/s.
    pub max_wheel_speed: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        RobotModel {
            wheel_radius: 0.098,
            track_width: 0.37,
            max_wheel_speed: 16.0,
        }
    }
}

impl RobotModel {
    /// Top linear speed with both wheels at the hardware limit, m/s.
    pub fn max_linear_speed(&self) -> f64 {
        self.wheel_radius * self.max_wheel_speed
    }

    /// Wheel speeds realizing a body twist `(v, w)`.
    pub fn wheel_speeds(&self, v: f64, w: f64) -> WheelCommand {
        let half_track = 0.5 * self.track_width;
        WheelCommand {
            left: (v - w * half_track) / self.wheel_radius,
            right: (v + w * half_track) / self.wheel_radius,
        }
    }
}

/// Body velocity: linear `v` (m/s) along heading and angular `w` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub v: f64,
    pub w: f64,
}

/// Map wheel speeds to the body twist: `v = r(wl+wr)/2`, `w = r(wr-wl)/track`.
pub fn body_twist(cmd: WheelCommand, model: &RobotModel) -> Twist {
    scaled_body_twist(cmd, model, 1.0, 1.0)
}

/// Body twist with per-side effective wheel-radius scale factors. Scale 1.0
/// on both sides is the nominal map; the simulator uses other values to model
/// radius changes that command-based odometry cannot see.
pub fn scaled_body_twist(
    cmd: WheelCommand,
    model: &RobotModel,
    scale_left: f64,
    scale_right: f64,
) -> Twist {
    let r = model.wheel_radius;
    let vl = r * scale_left * cmd.left;
    let vr = r * scale_right * cmd.right;
    Twist {
        v: 0.5 * (vl + vr),
        w: (vr - vl) / model.track_width,
    }
}

/// Angular speed below which the exact integrator takes its straight-line
/// branch instead of dividing by `w`.
pub const STRAIGHT_LINE_EPS: f64 = 1e-9;

/// Exact constant-twist pose update: a circular arc, or a straight line when
/// `|w| < STRAIGHT_LINE_EPS`.
pub fn integrate_twist_exact(start: Pose2D, twist: Twist, dt: f64) -> Pose2D {
    let Twist { v, w } = twist;
    if w.abs() < STRAIGHT_LINE_EPS {
        let (s, c) = start.theta.sin_cos();
        return Pose2D::new(start.x + v * c * dt, start.y + v * s * dt, start.theta);
    }
    // Chord form of the arc solution: length v*dt, chord factor sinc(w*dt/2),
    // direction theta + w*dt/2. Equivalent to (v/w)(sin(theta+w dt) - sin theta)
    // but stable for small w*dt.
    let half = 0.5 * w * dt;
    let chord = v * dt * (half.sin() / half);
    let (s, c) = (start.theta + half).sin_cos();
    Pose2D::new(
        start.x + chord * c,
        start.y + chord * s,
        start.theta + w * dt,
    )
}

/// First-order Euler pose update for a constant twist.
pub fn integrate_twist_euler(start: Pose2D, twist: Twist, dt: f64) -> Pose2D {
    let (s, c) = start.theta.sin_cos();
    Pose2D::new(
        start.x + twist.v * c * dt,
        start.y + twist.v * s * dt,
        start.theta + twist.w * dt,
    )
}

/// Second-order midpoint pose update: trig terms evaluated at
/// `theta + w*dt/2`.
pub fn integrate_twist_rk2(start: Pose2D, twist: Twist, dt: f64) -> Pose2D {
    let (s, c) = (start.theta + 0.5 * twist.w * dt).sin_cos();
    Pose2D::new(
        start.x + twist.v * c * dt,
        start.y + twist.v * s * dt,
        start.theta + twist.w * dt,
    )
}

/// Exact pose after holding `cmd` for `dt` seconds.
pub fn integrate_exact(start: Pose2D, cmd: WheelCommand, model: &RobotModel, dt: f64) -> Pose2D {
    integrate_twist_exact(start, body_twist(cmd, model), dt)
}

/// Euler-approximated pose after holding `cmd` for `dt` seconds.
pub fn integrate_euler(start: Pose2D, cmd: WheelCommand, model: &RobotModel, dt: f64) -> Pose2D {
    integrate_twist_euler(start, body_twist(cmd, model), dt)
}

/// RK2-approximated pose after holding `cmd` for `dt` seconds.
pub fn integrate_rk2(start: Pose2D, cmd: WheelCommand, model: &RobotModel, dt: f64) -> Pose2D {
    integrate_twist_rk2(start, body_twist(cmd, model), dt)
}
