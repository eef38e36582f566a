use serde::{Deserialize, Serialize};

use super::CorridorEstimate;
use crate::error::{Error, Result};
use crate::sensors::SolarAngles;
use crate::simcore::{normalize_angle, Pose2D, Twist};
use crate::world::SunState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SteerGains {
    pub k_y: f64,
    pub k_theta: f64,
    /// Cruise speed, m/s.
    pub v_ref: f64,
    /// Yaw-rate limit, rad/s.
    pub omega_max: f64,
}

impl Default for SteerGains {
    fn default() -> Self {
        Self { k_y: 1.5, k_theta: 2.0, v_ref: 1.0, omega_max: 1.0 }
    }
}

/// Proportional corridor law. Speed drops as the turn tightens and as the
/// estimate gets less certain.
pub fn corridor_steer(est: &CorridorEstimate, gains: &SteerGains) -> Twist {
    if !(est.confidence > 0.0) || gains.omega_max <= 0.0 {
        return Twist::ZERO;
    }
    let omega = (-gains.k_y * est.lateral_offset - gains.k_theta * est.heading_error).clamp(-gains.omega_max, gains.omega_max);
    let v = gains.v_ref.max(0.0) * (1.0 - omega.abs() / gains.omega_max) * est.confidence.min(1.0);
    Twist { v, omega }
}

/// World yaw from the sun sensor's projection angles and a known sun
/// azimuth.
pub fn sun_heading(angles: &SolarAngles, sun: &SunState, elevation_max: f64) -> Result<f64> {
    if sun.elevation >= elevation_max {
        return Err(Error::IllConditioned { elevation_deg: sun.elevation.to_degrees() });
    }
    let body_azimuth = angles.alpha_y.tan().atan2(angles.alpha_x.tan());
    Ok(normalize_angle(sun.azimuth - body_azimuth))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaypointConfig {
    /// m
    pub lookahead: f64,
    /// m
    pub arrival_radius: f64,
    pub v_ref: f64,
    pub omega_max: f64,
}

impl Default for WaypointConfig {
    fn default() -> Self {
        Self { lookahead: 1.0, arrival_radius: 0.3, v_ref: 1.0, omega_max: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaypointCommand {
    Drive(Twist),
    Done,
}

/// Pure pursuit toward the first path point at least one lookahead ahead of
/// the point nearest the robot.
pub fn waypoint_steer(pose: &Pose2D, path: &[(f64, f64)], cfg: &WaypointConfig) -> WaypointCommand {
    let Some(&last) = path.last() else { return WaypointCommand::Done };
    let dist = |p: &(f64, f64)| (p.0 - pose.x).hypot(p.1 - pose.y);
    if dist(&last) <= cfg.arrival_radius {
        return WaypointCommand::Done;
    }
    let nearest = path
        .iter()
        .enumerate()
        .min_by(|a, b| dist(a.1).total_cmp(&dist(b.1)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let target = path[nearest..].iter().find(|p| dist(p) >= cfg.lookahead).unwrap_or(&last);
    let (_, ty) = pose.to_body(target.0, target.1);
    let d = dist(target);
    let l = if d >= cfg.lookahead { cfg.lookahead } else { d };
    let kappa = 2.0 * ty / (l * l);
    let omega = (cfg.v_ref * kappa).clamp(-cfg.omega_max, cfg.omega_max);
    WaypointCommand::Drive(Twist { v: cfg.v_ref, omega })
}
