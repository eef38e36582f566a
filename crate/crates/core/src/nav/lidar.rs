//! Corridor fitting on a lidar scan: the forward half of the returns splits
//! into a left and a right band, each fitted with a total-least-squares line.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use super::CorridorEstimate;
use crate::error::{Error, Result};
use crate::sensors::LidarScan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarNavConfig {
    /// Expected row spacing, used when only one row is visible, m.
    pub nominal_spacing: f64,
    pub min_points: usize,
    /// Points per side at which that side's confidence saturates.
    pub saturation_points: usize,
    /// Returns farther than this to the side are ignored, m.
    pub max_lateral: f64,
    /// Perpendicular residual beyond which a point is dropped before the refit, m.
    pub refit_residual: f64,
}

impl Default for LidarNavConfig {
    fn default() -> Self {
        Self { nominal_spacing: 1.5, min_points: 3, saturation_points: 8, max_lateral: 2.0, refit_residual: 0.1 }
    }
}

/// Total-least-squares line through points: centroid and unit direction
/// with non-negative forward component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlsLine {
    pub cx: f64,
    pub cy: f64,
    pub dx: f64,
    pub dy: f64,
}

impl TlsLine {
    pub fn fit(pts: &[(f64, f64)]) -> Option<Self> {
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for &(x, y) in pts {
            sxx += (x - cx) * (x - cx);
            syy += (y - cy) * (y - cy);
            sxy += (x - cx) * (y - cy);
        }
        if sxx + syy <= 0.0 {
            return None;
        }
        // major axis of the scatter
        let phi = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let (mut dy, mut dx) = phi.sin_cos();
        if dx < 0.0 {
            dx = -dx;
            dy = -dy;
        }
        Some(Self { cx, cy, dx, dy })
    }

    pub fn angle(&self) -> f64 {
        self.dy.atan2(self.dx)
    }

    /// Signed distance of `(x, y)` to the left of the line.
    pub fn side_distance(&self, x: f64, y: f64) -> f64 {
        -self.dy * (x - self.cx) + self.dx * (y - self.cy)
    }

    fn fit_robust(pts: &[(f64, f64)], residual: f64) -> Option<(Self, usize)> {
        let first = Self::fit(pts)?;
        let kept: Vec<_> = pts.iter().copied().filter(|&(x, y)| first.side_distance(x, y).abs() <= residual).collect();
        if kept.len() >= 2 && kept.len() < pts.len() {
            if let Some(l) = Self::fit(&kept) {
                return Some((l, kept.len()));
            }
        }
        Some((first, pts.len()))
    }
}

pub fn lidar_corridor(scan: &LidarScan, cfg: &LidarNavConfig) -> Result<CorridorEstimate> {
    let forward = scan.hits().filter(|(a, _, _)| crate::simcore::normalize_angle(*a).abs() < FRAC_PI_2);
    corridor_from_points(forward.map(|(_, f, l)| (f, l)), cfg)
}

/// Corridor fit on body-frame `(forward, left)` points, split into rows by
/// the sign of the lateral coordinate.
pub fn corridor_from_points(pts: impl IntoIterator<Item = (f64, f64)>, cfg: &LidarNavConfig) -> Result<CorridorEstimate> {
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (f, l) in pts {
        if l.abs() > cfg.max_lateral {
            continue;
        }
        if l > 0.0 {
            left.push((f, l));
        } else if l < 0.0 {
            right.push((f, l));
        }
    }
    let usable = |pts: &[(f64, f64)]| pts.len() >= cfg.min_points.max(2);
    let fit = |pts: &[(f64, f64)]| if usable(pts) { TlsLine::fit_robust(pts, cfg.refit_residual) } else { None };
    let fl = fit(&left);
    let fr = fit(&right);
    let sat = |n: usize| (n as f64 / cfg.saturation_points.max(1) as f64).min(1.0);
    let half = 0.5 * cfg.nominal_spacing;

    // lateral position of the corridor center at the robot, along the line normal
    let (dir, center, confidence) = match (fl, fr) {
        (Some((l, nl)), Some((r, nr))) => {
            let dir = (l.dy + r.dy).atan2(l.dx + r.dx);
            let (s, c) = dir.sin_cos();
            let normal_pos = |line: &TlsLine| -s * line.cx + c * line.cy;
            (dir, 0.5 * (normal_pos(&l) + normal_pos(&r)), 0.5 * (sat(nl) + sat(nr)))
        }
        (Some((l, nl)), None) => (l.angle(), -l.side_distance(0.0, 0.0) - half, 0.5 * sat(nl)),
        (None, Some((r, nr))) => (r.angle(), -r.side_distance(0.0, 0.0) + half, 0.5 * sat(nr)),
        (None, None) => {
            return Err(Error::NoCorridor { left: left.len(), right: right.len(), needed: cfg.min_points });
        }
    };

    Ok(CorridorEstimate { lateral_offset: -center, heading_error: -dir, confidence })
}
