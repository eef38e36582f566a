//! Dead reckoning from motor hall ticks alone.

use serde::{Deserialize, Serialize};

use crate::simcore::{integrate_pose, normalize_angle, Pose2D, TickDeltas, Twist};
use crate::world::RobotParams;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OdometryEstimate {
    pub pose: Pose2D,
    /// m/s
    pub v: f64,
    /// rad/s
    pub omega: f64,
}

impl OdometryEstimate {
    pub fn at(pose: Pose2D) -> Self {
        Self { pose: Pose2D { theta: normalize_angle(pose.theta), ..pose }, v: 0.0, omega: 0.0 }
    }
}

/// Advances `est` by one step's worth of tick deltas.
pub fn odometry_update(est: &OdometryEstimate, ticks: TickDeltas, p: &RobotParams, dt: f64) -> OdometryEstimate {
    let quantum = p.tick_quantum();
    let d_left = ticks.left as f64 * quantum;
    let d_right = ticks.right as f64 * quantum;
    let v = (d_left + d_right) / (2.0 * dt);
    let omega = (d_right - d_left) / (p.slip_widening_factor * p.track_width * dt);
    OdometryEstimate { pose: integrate_pose(est.pose, Twist { v, omega }, dt), v, omega }
}
