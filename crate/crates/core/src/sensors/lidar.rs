//! Planar lidar: one ray per beam against the stem circles (and, for tall
//! plants, the soft canopy patches), nearest hit wins.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::rng::{self, stream};
use crate::simcore::Pose2D;
use crate::world::{Rect, TunnelScenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarConfig {
    pub n_beams: usize,
    pub angle_min: f64,
    pub angle_max: f64,
    /// m
    pub max_range: f64,
    /// Range noise standard deviation, m.
    pub sigma_r: f64,
    /// Chance that a beam crossing a canopy patch returns from the leaves.
    pub p_canopy: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self { n_beams: 360, angle_min: -PI, angle_max: PI, max_range: 8.0, sigma_r: 0.01, p_canopy: 0.3 }
    }
}

impl LidarConfig {
    pub fn increment(&self) -> f64 {
        (self.angle_max - self.angle_min) / self.n_beams as f64
    }

    pub fn beam_angle(&self, i: usize) -> f64 {
        self.angle_min + i as f64 * self.increment()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    pub angle_min: f64,
    pub angle_max: f64,
    pub n_beams: usize,
    pub max_range: f64,
    pub ranges: Vec<f64>,
}

impl LidarScan {
    pub fn angle_increment(&self) -> f64 {
        (self.angle_max - self.angle_min) / self.n_beams as f64
    }

    pub fn beam_angle(&self, i: usize) -> f64 {
        self.angle_min + i as f64 * self.angle_increment()
    }

    /// Body-frame (forward, left) points of the beams that hit something.
    pub fn hits(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.ranges.iter().enumerate().filter(|(_, r)| **r < self.max_range).map(|(i, &r)| {
            let a = self.beam_angle(i);
            (a, r * a.cos(), r * a.sin())
        })
    }
}

/// Distance along a unit ray from `(ox, oy)` to a circle, if it is hit in
/// front of the origin.
pub fn ray_circle(ox: f64, oy: f64, dx: f64, dy: f64, cx: f64, cy: f64, r: f64) -> Option<f64> {
    let fx = ox - cx;
    let fy = oy - cy;
    let b = fx * dx + fy * dy;
    let c = fx * fx + fy * fy - r * r;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    if t0 > 0.0 {
        return Some(t0);
    }
    // origin inside the circle
    let t1 = -b + sq;
    (c <= 0.0 && t1 > 0.0).then_some(0.0)
}

/// Slab test against an axis-aligned rectangle; entry distance if the ray
/// starts outside it.
pub fn ray_rect(ox: f64, oy: f64, dx: f64, dy: f64, rect: &Rect) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for (o, d, lo, hi) in [(ox, dx, rect.x_min, rect.x_max), (oy, dy, rect.y_min, rect.y_max)] {
        if d.abs() < 1e-15 {
            if o < lo || o > hi {
                return None;
            }
        } else {
            let a = (lo - o) / d;
            let b = (hi - o) / d;
            t_near = t_near.max(a.min(b));
            t_far = t_far.min(a.max(b));
        }
    }
    (t_near <= t_far && t_near > 0.0).then_some(t_near)
}

/// Noise-free nearest obstacle distance along each beam, ignoring canopy.
pub fn true_ranges(pose: &Pose2D, scene: &TunnelScenario, cfg: &LidarConfig) -> Vec<f64> {
    let stems: Vec<_> = scene.stems_in_x(pose.x - cfg.max_range - 0.1, pose.x + cfg.max_range + 0.1).copied().collect();
    (0..cfg.n_beams)
        .map(|i| {
            let a = pose.theta + cfg.beam_angle(i);
            let (dy, dx) = a.sin_cos();
            stems
                .iter()
                .filter_map(|s| ray_circle(pose.x, pose.y, dx, dy, s.x, s.y, s.radius))
                .fold(cfg.max_range, f64::min)
        })
        .collect()
}

/// Scan from `pose`. Noise and canopy returns come from the substream for
/// `(seed, frame)`.
pub fn lidar_scan(pose: &Pose2D, scene: &TunnelScenario, cfg: &LidarConfig, seed: u64, frame: u64) -> LidarScan {
    let reach = cfg.max_range + 0.1;
    let stems: Vec<_> = scene.stems_in_x(pose.x - reach, pose.x + reach).copied().collect();
    let canopy: Vec<Rect> = scene.canopy_in_x(pose.x - reach, pose.x + reach).copied().collect();
    let mut rng = rng::substream(seed, stream::LIDAR, frame);
    let noise = Normal::new(0.0, cfg.sigma_r.max(0.0)).expect("finite sigma");

    let ranges = (0..cfg.n_beams)
        .map(|i| {
            let a = pose.theta + cfg.beam_angle(i);
            let (dy, dx) = a.sin_cos();
            let mut best = stems
                .iter()
                .filter_map(|s| ray_circle(pose.x, pose.y, dx, dy, s.x, s.y, s.radius))
                .fold(f64::INFINITY, f64::min);
            for rect in &canopy {
                if let Some(t) = ray_rect(pose.x, pose.y, dx, dy, rect) {
                    // one draw per crossed patch keeps the stream aligned
                    let leaf: f64 = rng.random();
                    if t < best && leaf < cfg.p_canopy {
                        best = t;
                    }
                }
            }
            // clipped at 4σ so a return never undercuts the truth by more
            let e = if cfg.sigma_r > 0.0 {
                noise.sample(&mut rng).clamp(-4.0 * cfg.sigma_r, 4.0 * cfg.sigma_r)
            } else {
                0.0
            };
            if best >= cfg.max_range {
                cfg.max_range
            } else {
                (best + e).clamp(1e-3, cfg.max_range)
            }
        })
        .collect();

    LidarScan { angle_min: cfg.angle_min, angle_max: cfg.angle_max, n_beams: cfg.n_beams, max_range: cfg.max_range, ranges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_tunnel, HeightClass, Stem, TunnelSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn empty_scene() -> TunnelScenario {
        let mut s = generate_tunnel(0, &TunnelSpec::default()).unwrap();
        s.stems_left.clear();
        s.stems_right.clear();
        s
    }

    #[test]
    fn empty_scene_reads_max_range() {
        let scan = lidar_scan(&Pose2D::new(10.0, 0.0, 0.0), &empty_scene(), &LidarConfig::default(), 1, 0);
        assert_eq!(scan.ranges.len(), 360);
        assert!(scan.ranges.iter().all(|&r| r == 8.0));
    }

    #[test]
    fn stem_dead_ahead() {
        let mut scene = empty_scene();
        scene.stems_left.push(Stem { x: 12.0, y: 0.0, radius: 0.015 });
        let cfg = LidarConfig { sigma_r: 0.0, ..Default::default() };
        let scan = lidar_scan(&Pose2D::new(10.0, 0.0, 0.0), &scene, &cfg, 1, 0);
        assert_eq!(cfg.beam_angle(180), 0.0);
        assert_abs_diff_eq!(scan.ranges[180], 1.985, epsilon = 1e-12);
    }

    #[test]
    fn mirror_symmetric_corridor() {
        let mut scene = empty_scene();
        for i in 0..100 {
            let x = 0.25 + 0.5 * i as f64;
            scene.stems_left.push(Stem { x, y: 0.75, radius: 0.015 });
            scene.stems_right.push(Stem { x, y: -0.75, radius: 0.015 });
        }
        let cfg = LidarConfig { sigma_r: 0.0, ..Default::default() };
        let scan = lidar_scan(&Pose2D::new(20.1, 0.0, 0.0), &scene, &cfg, 1, 0);
        let left = (181..360).map(|i| scan.ranges[i]).fold(f64::INFINITY, f64::min);
        let right = (1..180).map(|i| scan.ranges[i]).fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(left, right, epsilon = 1e-9);
        for k in 1..180 {
            assert_abs_diff_eq!(scan.ranges[180 + k], scan.ranges[180 - k], epsilon = 1e-9);
        }
    }

    #[test]
    fn canopy_returns_only_in_tall_plants() {
        let spec = TunnelSpec { height_class: HeightClass::H3, ..Default::default() };
        let scene = generate_tunnel(2, &spec).unwrap();
        let cfg = LidarConfig { sigma_r: 0.0, p_canopy: 1.0, ..Default::default() };
        let pose = Pose2D::new(20.0, 0.0, 0.0);
        let noisy = lidar_scan(&pose, &scene, &cfg, 1, 0);
        let truth = true_ranges(&pose, &scene, &cfg);
        assert!(noisy.ranges.iter().zip(&truth).any(|(a, b)| a < b));
        assert!(noisy.ranges.iter().zip(&truth).all(|(a, b)| a <= b));
    }

    #[test]
    fn ray_rect_cases() {
        let r = Rect { x_min: 1.0, x_max: 2.0, y_min: -1.0, y_max: 1.0 };
        assert_eq!(ray_rect(0.0, 0.0, 1.0, 0.0, &r), Some(1.0));
        assert_eq!(ray_rect(0.0, 0.0, -1.0, 0.0, &r), None);
        assert_eq!(ray_rect(1.5, 0.0, 1.0, 0.0, &r), None);
        assert_eq!(ray_rect(0.0, 2.0, 1.0, 0.0, &r), None);
    }

    proptest! {
        #[test]
        fn ranges_are_bounded(seed in 0u64..50, x in 1.0f64..49.0, y in -0.3f64..0.3, th in -3.1f64..3.1, frame in 0u64..1000) {
            let scene = generate_tunnel(seed, &TunnelSpec::default()).unwrap();
            let cfg = LidarConfig::default();
            let pose = Pose2D::new(x, y, th);
            let scan = lidar_scan(&pose, &scene, &cfg, seed, frame);
            let truth = true_ranges(&pose, &scene, &cfg);
            prop_assert_eq!(scan.ranges.len(), cfg.n_beams);
            for (r, t) in scan.ranges.iter().zip(&truth) {
                prop_assert!(*r > 0.0 && *r <= cfg.max_range);
                prop_assert!(*r >= t - 5.0 * cfg.sigma_r);
            }
        }
    }
}
