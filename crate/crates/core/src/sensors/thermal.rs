//! Forward-looking thermal camera.
//!
//! A pinhole camera on the lid, pitched down, looks into a temperature
//! field: a sun-warmed ground path between two plant walls, with a cold
//! kerb at the wall base for short plants. Under tall plants the ground is
//! shaded, the ordering inverts (ground colder than plants) and there is no
//! kerb. Clouds pull every contrast toward ambient.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::{self, stream};
use crate::simcore::Pose2D;
use crate::world::{Rect, SunState, TunnelScenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view, rad. Pixels are square.
    pub hfov: f64,
    /// Lens height above ground, m.
    pub mount_height: f64,
    /// Downward pitch, rad (positive looks down).
    pub pitch_down: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self { width: 160, height: 120, hfov: 50f64.to_radians(), mount_height: 0.7, pitch_down: 10f64.to_radians() }
    }
}

impl CameraModel {
    pub fn focal_px(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.hfov / 2.0).tan()
    }

    /// Body-frame (forward, left, up) ray through continuous pixel
    /// coordinates `(u, v)`; pixel `(i, j)` has its center at `(i + 0.5, j + 0.5)`.
    pub fn ray(&self, u: f64, v: f64) -> (f64, f64, f64) {
        let f = self.focal_px();
        let xc = (u - self.width as f64 / 2.0) / f;
        let yc = (v - self.height as f64 / 2.0) / f;
        let (s, c) = self.pitch_down.sin_cos();
        (c - yc * s, -xc, -s - yc * c)
    }

    /// Flat-ground point (forward, left) seen at `(u, v)`, if below the horizon.
    pub fn ground_point(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        let (df, dl, du) = self.ray(u, v);
        if du >= 0.0 {
            return None;
        }
        let t = self.mount_height / -du;
        Some((df * t, dl * t))
    }

    /// Continuous row coordinate whose ground points lie `forward` m ahead.
    pub fn row_for_forward(&self, forward: f64) -> f64 {
        let (s, c) = self.pitch_down.sin_cos();
        let h = self.mount_height;
        let yc = (h * c - forward * s) / (forward * c + h * s);
        yc * self.focal_px() + self.height as f64 / 2.0
    }

    /// Lateral ground distance covered by one pixel column on row `v`, m.
    pub fn meters_per_column(&self, v: f64) -> Option<f64> {
        let (_, _, du) = self.ray(0.0, v);
        (du < 0.0).then(|| self.mount_height / -du / self.focal_px())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermalConfig {
    pub camera: CameraModel,
    /// °C
    pub ambient: f64,
    pub t_ground: f64,
    pub t_plant: f64,
    pub t_kerb: f64,
    /// Shaded ground under tall plants.
    pub t_ground_tall: f64,
    pub t_plant_tall: f64,
    /// Sky, relative to ambient.
    pub sky_offset: f64,
    /// Width of the cold strip along the wall foot, m.
    pub kerb_width: f64,
    /// Height of the cold band at the wall base, m.
    pub kerb_height: f64,
    /// Contrast kept under full overcast, as a fraction of full-sun contrast.
    pub overcast_contrast: f64,
    /// Pixel noise, °C.
    pub sigma_t: f64,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        Self {
            camera: CameraModel::default(),
            ambient: 25.0,
            t_ground: 45.0,
            t_plant: 30.0,
            t_kerb: 25.0,
            t_ground_tall: 26.0,
            t_plant_tall: 30.0,
            sky_offset: -15.0,
            kerb_width: 0.1,
            kerb_height: 0.15,
            overcast_contrast: 0.4,
            sigma_t: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, °C.
    pub temps: Vec<f32>,
}

impl ThermalImage {
    pub fn at(&self, u: usize, v: usize) -> f32 {
        self.temps[v * self.width + u]
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.temps.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)))
    }

    /// Mean over the pixel block `cols × rows`.
    pub fn region_mean(&self, cols: std::ops::Range<usize>, rows: std::ops::Range<usize>) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for v in rows {
            for u in cols.clone() {
                sum += self.at(u, v) as f64;
                n += 1;
            }
        }
        sum / n.max(1) as f64
    }

    /// Bottom-center third of the frame: where the path is under a robot
    /// facing down the tunnel.
    pub fn bottom_center_mean(&self) -> f64 {
        let (w, h) = (self.width, self.height);
        self.region_mean(w / 3..2 * w / 3, 2 * h / 3..h)
    }

    /// Outer sixths of the middle band of rows: where the plant walls are.
    pub fn side_mean(&self) -> f64 {
        let (w, h) = (self.width, self.height);
        let rows = h / 3..2 * h / 3;
        0.5 * (self.region_mean(0..w / 6, rows.clone()) + self.region_mean(w - w / 6..w, rows))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Surface {
    Ground,
    Plant,
    Kerb,
    Sky,
}

/// Renders the thermal frame seen from `pose`.
pub fn thermal_render(pose: &Pose2D, scene: &TunnelScenario, sun: &SunState, cfg: &ThermalConfig, seed: u64, frame: u64) -> ThermalImage {
    let cam = &cfg.camera;
    let tall = scene.plant_height_class.is_tall();
    let plant_h = scene.plant_height_class.height_m();
    let half = scene.row_spacing / 2.0;
    let (st, ct) = pose.theta.sin_cos();

    let contrast = cfg.overcast_contrast + (1.0 - cfg.overcast_contrast) * sun.cloud_factor;
    let temp = |raw: f64| cfg.ambient + contrast * (raw - cfg.ambient);
    let (t_ground, t_plant) = if tall { (cfg.t_ground_tall, cfg.t_plant_tall) } else { (cfg.t_ground, cfg.t_plant) };
    let (t_ground, t_plant, t_kerb, t_sky) =
        (temp(t_ground), temp(t_plant), temp(cfg.t_kerb), temp(cfg.ambient + cfg.sky_offset));

    // ground hits beyond this are too small to matter
    let reach = 30.0;
    let canopy: Vec<Rect> = scene.canopy_in_x(pose.x - reach, pose.x + reach).copied().collect();

    let classify = |u: f64, v: f64| -> Surface {
        let (df, dl, du) = cam.ray(u, v);
        let dx = ct * df - st * dl;
        let dy = st * df + ct * dl;
        let t_wall = if dy > 0.0 {
            (half - pose.y) / dy
        } else if dy < 0.0 {
            (-half - pose.y) / dy
        } else {
            f64::INFINITY
        };
        let t_ground = if du < 0.0 { cam.mount_height / -du } else { f64::INFINITY };

        if t_ground <= t_wall {
            let gx = pose.x + dx * t_ground;
            let gy = pose.y + dy * t_ground;
            if canopy.iter().any(|r| r.contains(gx, gy)) {
                Surface::Plant
            } else if !tall && gy.abs() > half - cfg.kerb_width {
                Surface::Kerb
            } else {
                Surface::Ground
            }
        } else if t_wall.is_finite() {
            let z = cam.mount_height + du * t_wall;
            if z <= plant_h {
                if !tall && z < cfg.kerb_height {
                    Surface::Kerb
                } else {
                    Surface::Plant
                }
            } else if du >= 0.0 {
                Surface::Sky
            } else {
                // over the wall top into the next row's foliage
                Surface::Plant
            }
        } else {
            Surface::Sky
        }
    };

    let mut rng = rng::substream(seed, stream::THERMAL, frame);
    let noise = Normal::new(0.0, cfg.sigma_t.max(0.0)).expect("finite sigma");
    let mut temps = Vec::with_capacity(cam.width * cam.height);
    for v in 0..cam.height {
        for u in 0..cam.width {
            let base = match classify(u as f64 + 0.5, v as f64 + 0.5) {
                Surface::Ground => t_ground,
                Surface::Plant => t_plant,
                Surface::Kerb => t_kerb,
                Surface::Sky => t_sky,
            };
            let e = if cfg.sigma_t > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            temps.push((base + e) as f32);
        }
    }
    ThermalImage { width: cam.width, height: cam.height, temps }
}
