//! Skid-steer motion: twist/wheel-speed mapping, exact-arc pose
//! integration, first-order motor response with a torque limit, and hall
//! tick generation.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::world::{RobotParams, SurfaceParams};

/// Fixed simulation timestep, s.
pub const DT: f64 = 0.01;

/// Below this yaw rate the straight-line limit of the arc is used.
pub const STRAIGHT_EPS: f64 = 1e-9;

/// Wraps an angle into (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: normalize_angle(theta) }
    }

    /// World point to body frame (forward, left).
    pub fn to_body(&self, wx: f64, wy: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let dx = wx - self.x;
        let dy = wy - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Body point (forward, left) to world frame.
    pub fn to_world(&self, bx: f64, by: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * bx - s * by, self.y + s * bx + c * by)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    /// Forward speed, m/s.
    pub v: f64,
    /// Yaw rate, rad/s.
    pub omega: f64,
}

impl Twist {
    pub const ZERO: Twist = Twist { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

/// Wheel-shaft speeds per side, rad/s. Both wheels of a side share a belt.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelSpeeds {
    pub left: f64,
    pub right: f64,
}

impl WheelSpeeds {
    pub fn new(left: f64, right: f64) -> Self {
        Self { left, right }
    }
}

/// Differential side speeds for `t`, scaled down uniformly (keeping the
/// turning radius) if either side would exceed the motor's free speed.
pub fn twist_to_wheel_speeds(t: Twist, p: &RobotParams) -> WheelSpeeds {
    twist_to_wheel_speeds_chi(t, p, p.slip_widening_factor)
}

pub fn twist_to_wheel_speeds_chi(t: Twist, p: &RobotParams, chi: f64) -> WheelSpeeds {
    let half_track = chi * p.track_width / 2.0;
    let mut left = (t.v - t.omega * half_track) / p.wheel_radius;
    let mut right = (t.v + t.omega * half_track) / p.wheel_radius;
    let limit = p.wheel_speed_limit();
    let peak = left.abs().max(right.abs());
    if peak > limit {
        let scale = limit / peak;
        left *= scale;
        right *= scale;
    }
    WheelSpeeds { left, right }
}

/// Algebraic inverse of [`twist_to_wheel_speeds`] for in-limit speeds.
pub fn wheel_speeds_to_twist(w: WheelSpeeds, p: &RobotParams) -> Twist {
    wheel_speeds_to_twist_chi(w, p, p.slip_widening_factor)
}

pub fn wheel_speeds_to_twist_chi(w: WheelSpeeds, p: &RobotParams, chi: f64) -> Twist {
    let vl = w.left * p.wheel_radius;
    let vr = w.right * p.wheel_radius;
    Twist { v: (vl + vr) / 2.0, omega: (vr - vl) / (chi * p.track_width) }
}

/// Exact constant-twist (circular arc) pose update.
pub fn integrate_pose(p: Pose2D, t: Twist, dt: f64) -> Pose2D {
    let th = p.theta;
    if t.omega.abs() < STRAIGHT_EPS {
        let (s, c) = th.sin_cos();
        return Pose2D { x: p.x + t.v * dt * c, y: p.y + t.v * dt * s, theta: normalize_angle(th) };
    }
    let th1 = th + t.omega * dt;
    let r = t.v / t.omega;
    Pose2D {
        x: p.x + r * (th1.sin() - th.sin()),
        y: p.y + r * (th.cos() - th1.cos()),
        theta: normalize_angle(th1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotorSideState {
    /// Wheel-shaft speed, rad/s.
    pub speed: f64,
    /// Cumulative motor-shaft hall ticks.
    pub hall_ticks: i64,
    /// Cumulative motor-shaft angle, rad. Ticks are quantized from this.
    pub motor_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriveState {
    pub left: MotorSideState,
    pub right: MotorSideState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TickDeltas {
    pub left: i64,
    pub right: i64,
}

/// What happened on one side during a motor step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SideStep {
    pub state: MotorSideState,
    pub ticks: i64,
    /// Mean wheel speed over the step, rad/s.
    pub mean_speed: f64,
    /// Shaft torque delivered at the wheel side, N·m.
    pub torque: f64,
}

/// Rotational inertia of half the robot reflected to one side's wheel
/// shaft, kg·m².
fn side_inertia(p: &RobotParams) -> f64 {
    0.5 * p.mass * p.wheel_radius * p.wheel_radius
}

/// Rolling-resistance torque at one side (two wheels), N·m.
pub fn side_resistive_torque(p: &RobotParams, surface: &SurfaceParams, g: f64) -> f64 {
    2.0 * surface.c_rr * (p.mass * g / 4.0) * p.wheel_radius
}

/// One motor side: the speed relaxes toward `cmd` with the motor time
/// constant, the per-step change is capped by what the gearbox torque (less
/// rolling resistance) and the soil grip can deliver, and hall ticks are
/// quantized from the accumulated motor-shaft angle with the remainder
/// carried to the next step.
pub fn step_side(state: MotorSideState, cmd: f64, surface: &SurfaceParams, p: &RobotParams, dt: f64) -> SideStep {
    let g = crate::drivetrain::STANDARD_GRAVITY;
    let inertia = side_inertia(p);
    let resist = side_resistive_torque(p, surface, g);
    let drive = p.gear_ratio * p.motor_rated_torque;
    // Grip limit: two wheels, each μ·N_w at the contact patch.
    let grip = 2.0 * surface.mu * (p.mass * g / 4.0) * p.wheel_radius;

    let target = state.speed + (cmd - state.speed) * (1.0 - (-dt / p.motor_time_constant).exp());
    let mut delta = target - state.speed;
    let speeding_up = target.abs() > state.speed.abs() && target * state.speed >= 0.0;
    if inertia > 0.0 {
        let max_accel = if speeding_up {
            (drive.min(grip) - resist).max(0.0) / inertia
        } else {
            (drive.min(grip) + resist) / inertia
        };
        delta = delta.clamp(-max_accel * dt, max_accel * dt);
    }
    let speed = state.speed + delta;
    let mean_speed = 0.5 * (state.speed + speed);

    let motor_angle = state.motor_angle + mean_speed * dt * p.gear_ratio;
    let quantum = TAU / p.ticks_per_motor_rev as f64;
    let hall_ticks = (motor_angle / quantum).round() as i64;
    let torque = inertia * delta / dt + resist * mean_speed.signum();

    SideStep {
        state: MotorSideState { speed, hall_ticks, motor_angle },
        ticks: hall_ticks - state.hall_ticks,
        mean_speed,
        torque,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorStep {
    pub state: DriveState,
    pub ticks: TickDeltas,
    /// Mean side speeds over the step; these move the robot.
    pub mean: WheelSpeeds,
    /// Mechanical power summed over both sides, W (non-negative).
    pub mechanical_power: f64,
}

pub fn step_motors(state: DriveState, cmd: WheelSpeeds, surface: &SurfaceParams, p: &RobotParams, dt: f64) -> MotorStep {
    let l = step_side(state.left, cmd.left, surface, p, dt);
    let r = step_side(state.right, cmd.right, surface, p, dt);
    let power = (l.torque * l.mean_speed).max(0.0) + (r.torque * r.mean_speed).max(0.0);
    MotorStep {
        state: DriveState { left: l.state, right: r.state },
        ticks: TickDeltas { left: l.ticks, right: r.ticks },
        mean: WheelSpeeds { left: l.mean_speed, right: r.mean_speed },
        mechanical_power: power,
    }
}
