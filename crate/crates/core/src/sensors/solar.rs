//! Quadrant-photodiode sun sensor.
//!
//! The four cell voltages encode the sun ray's projection angles on the
//! sensor's x and y axes through the normalized differences
//!
//! ```text
//! F_x = (V1 + V2 - V3 - V4) / ΣV      α_x = atan(C·F_x)
//! F_y = (V2 + V3 - V1 - V4) / ΣV      α_y = atan(C·F_y)
//! ```
//!
//! The sensor sits on the top lid with its x axis pointing forward and its
//! y axis pointing left.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::normalize_angle;
use crate::world::SunState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarReading {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
    pub valid: bool,
}

impl SolarReading {
    pub fn sum(&self) -> f64 {
        self.v1 + self.v2 + self.v3 + self.v4
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { v1: self.v1 * k, v2: self.v2 * k, v3: self.v3 * k, v4: self.v4 * k, valid: self.valid }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarAngles {
    pub alpha_x: f64,
    pub alpha_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SunSensorConfig {
    /// Model constant C.
    pub constant: f64,
    /// Half field of view, rad.
    pub fov: f64,
    /// Total cell voltage in full sun, V.
    pub nominal_sum: f64,
    /// Readings whose sum falls below this fraction of `nominal_sum` are dark.
    pub threshold_fraction: f64,
}

impl Default for SunSensorConfig {
    fn default() -> Self {
        Self { constant: 1.0, fov: 60f64.to_radians(), nominal_sum: 2.0, threshold_fraction: 0.05 }
    }
}

impl SunSensorConfig {
    pub fn threshold(&self) -> f64 {
        self.threshold_fraction * self.nominal_sum
    }

    /// Cell voltages for a sun ray at `angles`, using the symmetric quarter
    /// split of the total `s`, dimmed by the cloud factor.
    pub fn synthesize(&self, angles: SolarAngles, sun: &SunState, s: f64) -> SolarReading {
        let fx = angles.alpha_x.tan() / self.constant;
        let fy = angles.alpha_y.tan() / self.constant;
        let k = sun.cloud_factor;
        let q = s / 4.0;
        let raw = SolarReading {
            v1: q * (1.0 + fx - fy) * k,
            v2: q * (1.0 + fx + fy) * k,
            v3: q * (1.0 - fx + fy) * k,
            v4: q * (1.0 - fx - fy) * k,
            valid: true,
        };
        let in_fov = fx.abs() + fy.abs() <= 1.0
            && angles.alpha_x.abs() <= self.fov
            && angles.alpha_y.abs() <= self.fov;
        if !in_fov {
            // Outside the diamond some cells would go negative; a real cell
            // just reads zero.
            return SolarReading {
                v1: raw.v1.max(0.0),
                v2: raw.v2.max(0.0),
                v3: raw.v3.max(0.0),
                v4: raw.v4.max(0.0),
                valid: false,
            };
        }
        SolarReading { valid: raw.sum() > self.threshold(), ..raw }
    }

    pub fn estimate(&self, r: &SolarReading) -> Result<SolarAngles> {
        let sum = r.sum();
        let threshold = self.threshold();
        if !(sum > threshold) {
            return Err(Error::InsufficientLight { sum, threshold });
        }
        let fx = (r.v1 + r.v2 - r.v3 - r.v4) / sum;
        let fy = (r.v2 + r.v3 - r.v1 - r.v4) / sum;
        Ok(SolarAngles { alpha_x: (self.constant * fx).atan(), alpha_y: (self.constant * fy).atan() })
    }

    /// Reading seen by a level sensor on a robot with heading `yaw`.
    pub fn observe(&self, yaw: f64, sun: &SunState) -> SolarReading {
        self.synthesize(sun_projection_angles(yaw, sun), sun, self.nominal_sum)
    }
}

/// Projection angles of the sun ray on the body x/y axes for a level robot
/// with heading `yaw`. Near the horizon the ray leaves any physical field of
/// view; the angles still follow the geometry.
pub fn sun_projection_angles(yaw: f64, sun: &SunState) -> SolarAngles {
    let az = normalize_angle(sun.azimuth - yaw);
    let (se, ce) = sun.elevation.sin_cos();
    let sx = ce * az.cos();
    let sy = ce * az.sin();
    SolarAngles { alpha_x: sx.atan2(se), alpha_y: sy.atan2(se) }
}
