//! Corridor navigation: path extraction from thermal frames and lidar
//! scans, the steering law, sun-aided initial heading and waypoint
//! following.

pub mod lidar;
pub mod steer;
pub mod thermal;

use serde::{Deserialize, Serialize};

pub use lidar::{corridor_from_points, lidar_corridor, LidarNavConfig};
pub use steer::{corridor_steer, sun_heading, waypoint_steer, SteerGains, WaypointCommand, WaypointConfig};
pub use thermal::{thermal_centerline, ThermalBand, ThermalNavConfig};

/// Where the robot sits in the corridor, as seen by one sensor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorridorEstimate {
    /// m, positive when the robot is left of the centerline.
    pub lateral_offset: f64,
    /// rad, positive when the robot points left of the corridor direction.
    pub heading_error: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NavMode {
    Thermal,
    Lidar,
    Waypoint,
    Teleop,
}

impl std::str::FromStr for NavMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "thermal" => Ok(Self::Thermal),
            "lidar" => Ok(Self::Lidar),
            "waypoint" => Ok(Self::Waypoint),
            "teleop" => Ok(Self::Teleop),
            other => Err(crate::Error::Config(format!("unknown nav mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for NavMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Thermal => "thermal",
            Self::Lidar => "lidar",
            Self::Waypoint => "waypoint",
            Self::Teleop => "teleop",
        })
    }
}

/// Least-squares line `y = a + b·x`.
pub(crate) fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let b = sxy / sxx;
    Some((my - b * mx, b))
}
