//! Scenario geometry, terrain surfaces, sun state and robot parameters.
//!
//! World frame: `x` runs along the tunnel from the entrance (`x = 0`) to the
//! exit (`x = length`), `y` points left, the tunnel centerline is `y = 0`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Side length of the sand/clay assignment grid.
pub const SURFACE_CELL_M: f64 = 0.1;
/// How far past the tunnel ends and the plant rows the world extends.
pub const BOUNDS_MARGIN_X_M: f64 = 5.0;
pub const BOUNDS_MARGIN_Y_M: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotParams {
    /// kg
    pub mass: f64,
    /// m
    pub wheel_radius: f64,
    /// Side-to-side distance between wheel contact lines, m.
    pub track_width: f64,
    /// m
    pub wheelbase: f64,
    pub gear_ratio: f64,
    /// N·m at the motor shaft.
    pub motor_rated_torque: f64,
    /// rpm at the motor shaft.
    pub motor_free_speed: f64,
    pub ticks_per_motor_rev: u32,
    /// m
    pub body_width: f64,
    /// m
    pub body_length: f64,
    /// Effective track widening from lateral tire slip (χ ≥ 1).
    pub slip_widening_factor: f64,
    /// First-order motor response time constant, s.
    pub motor_time_constant: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            mass: 130.0,
            wheel_radius: 0.2,
            track_width: 0.6,
            wheelbase: 0.5,
            gear_ratio: 50.0,
            motor_rated_torque: 1.57,
            motor_free_speed: 3000.0,
            ticks_per_motor_rev: 24,
            body_width: 1.0,
            body_length: 0.8,
            slip_widening_factor: 1.2,
            motor_time_constant: 0.15,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("wheel_radius", self.wheel_radius),
            ("track_width", self.track_width),
            ("wheelbase", self.wheelbase),
            ("gear_ratio", self.gear_ratio),
            ("motor_rated_torque", self.motor_rated_torque),
            ("motor_free_speed", self.motor_free_speed),
            ("body_width", self.body_width),
            ("body_length", self.body_length),
            ("slip_widening_factor", self.slip_widening_factor),
            ("motor_time_constant", self.motor_time_constant),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be > 0, got {value}")));
            }
        }
        if self.ticks_per_motor_rev == 0 {
            return Err(Error::InvalidParams("ticks_per_motor_rev must be > 0".into()));
        }
        if self.gear_ratio < 1.0 {
            return Err(Error::InvalidParams(format!(
                "gear_ratio must be >= 1, got {}",
                self.gear_ratio
            )));
        }
        if self.slip_widening_factor < 1.0 {
            return Err(Error::InvalidParams(format!(
                "slip_widening_factor must be >= 1, got {}",
                self.slip_widening_factor
            )));
        }
        Ok(())
    }

    /// Wheel-shaft speed limit at the motor's free speed, rad/s.
    pub fn wheel_speed_limit(&self) -> f64 {
        2.0 * PI * self.motor_free_speed / (60.0 * self.gear_ratio)
    }

    /// Forward speed limit, m/s.
    pub fn max_speed(&self) -> f64 {
        self.wheel_speed_limit() * self.wheel_radius
    }

    /// Yaw-rate limit for a spin in place with slip factor `chi`, rad/s.
    pub fn max_yaw_rate(&self, chi: f64) -> f64 {
        2.0 * self.max_speed() / (chi * self.track_width)
    }

    /// Ground distance per hall tick, m.
    pub fn tick_quantum(&self) -> f64 {
        2.0 * PI * self.wheel_radius / (self.ticks_per_motor_rev as f64 * self.gear_ratio)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    Sand,
    Clay,
    Crevice,
    Pavement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceParams {
    pub kind: SurfaceKind,
    /// Coulomb friction coefficient.
    pub mu: f64,
    /// Rolling resistance coefficient.
    pub c_rr: f64,
}

impl SurfaceParams {
    /// Off-road tire on sand.
    pub const SAND: Self = Self { kind: SurfaceKind::Sand, mu: 0.6, c_rr: 0.2 };
    /// Off-road tire on wet earth road or clay.
    pub const CLAY: Self = Self { kind: SurfaceKind::Clay, mu: 0.55, c_rr: 0.08 };
    pub const PAVEMENT: Self = Self { kind: SurfaceKind::Pavement, mu: 0.9, c_rr: 0.015 };

    pub fn new(kind: SurfaceKind, mu: f64, c_rr: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.5) {
            return Err(Error::InvalidSpec(format!("mu must be in (0, 1.5], got {mu}")));
        }
        if !(0.0..1.0).contains(&c_rr) {
            return Err(Error::InvalidSpec(format!("c_rr must be in [0, 1), got {c_rr}")));
        }
        Ok(Self { kind, mu, c_rr })
    }

    /// A crevice over `base`: half the grip, twice the rolling resistance.
    pub fn crevice_over(base: SurfaceParams) -> Self {
        Self {
            kind: SurfaceKind::Crevice,
            mu: base.mu * 0.5,
            c_rr: (base.c_rr * 2.0).min(0.99),
        }
    }

    /// Effective track-widening factor on this surface. Pavement makes the
    /// tires scrub harder than loose soil.
    pub fn slip_widening(&self, params: &RobotParams) -> f64 {
        match self.kind {
            SurfaceKind::Pavement => 1.5,
            _ => params.slip_widening_factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeightClass {
    H1,
    H2,
    H3,
}

impl HeightClass {
    pub fn height_m(self) -> f64 {
        match self {
            HeightClass::H1 => 1.0,
            HeightClass::H2 => 2.0,
            HeightClass::H3 => 3.0,
        }
    }

    /// Tall plants shade the ground and fold back over the tunnel.
    pub fn is_tall(self) -> bool {
        matches!(self, HeightClass::H3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GroundKind {
    #[default]
    Field,
    Pavement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SunState {
    /// World-frame azimuth, rad, counter-clockwise from +x.
    pub azimuth: f64,
    /// rad, 0 = horizon.
    pub elevation: f64,
    /// 1 = full sun, 0 = overcast.
    pub cloud_factor: f64,
}

impl Default for SunState {
    fn default() -> Self {
        Self {
            azimuth: 120f64.to_radians(),
            elevation: 60f64.to_radians(),
            cloud_factor: 1.0,
        }
    }
}

impl SunState {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=FRAC_PI_2).contains(&self.elevation) {
            return Err(Error::InvalidSpec(format!(
                "sun elevation must be in [0, pi/2], got {}",
                self.elevation
            )));
        }
        if !(0.0..=1.0).contains(&self.cloud_factor) {
            return Err(Error::InvalidSpec(format!(
                "cloud_factor must be in [0, 1], got {}",
                self.cloud_factor
            )));
        }
        if !self.azimuth.is_finite() {
            return Err(Error::InvalidSpec("sun azimuth must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stem {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

/// Axis-aligned rectangle in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon {
    /// Even-odd rule.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let [xi, yi] = v[i];
            let [xj, yj] = v[j];
            if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

/// Inputs to [`generate_tunnel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunnelSpec {
    pub length_m: f64,
    pub row_spacing_m: f64,
    pub height_class: HeightClass,
    pub stem_pitch_m: f64,
    /// Half-width of the uniform stem position jitter, both axes.
    pub stem_jitter_m: f64,
    pub stem_radius_m: f64,
    pub sand_fraction: f64,
    /// Deepest canopy intrusion per side; only used for tall plants.
    pub canopy_overhang_m: f64,
    pub ground: GroundKind,
    pub crevices: Vec<Vec<[f64; 2]>>,
    pub sun: SunState,
}

impl Default for TunnelSpec {
    fn default() -> Self {
        Self {
            length_m: 50.0,
            row_spacing_m: 1.5,
            height_class: HeightClass::H1,
            stem_pitch_m: 0.5,
            stem_jitter_m: 0.05,
            stem_radius_m: 0.015,
            sand_fraction: 0.667,
            canopy_overhang_m: 0.3,
            ground: GroundKind::Field,
            crevices: Vec::new(),
            sun: SunState::default(),
        }
    }
}

impl TunnelSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length_m", self.length_m),
            ("row_spacing_m", self.row_spacing_m),
            ("stem_pitch_m", self.stem_pitch_m),
            ("stem_radius_m", self.stem_radius_m),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidSpec(format!("{name} must be > 0, got {value}")));
            }
        }
        if !(self.stem_jitter_m >= 0.0) || !(self.canopy_overhang_m >= 0.0) {
            return Err(Error::InvalidSpec("jitter and overhang must be >= 0".into()));
        }
        if self.stem_jitter_m >= self.stem_pitch_m / 2.0 {
            return Err(Error::InvalidSpec("stem_jitter_m must be below half the pitch".into()));
        }
        if !(0.0..=1.0).contains(&self.sand_fraction) {
            return Err(Error::InvalidSpec(format!(
                "sand_fraction must be in [0, 1], got {}",
                self.sand_fraction
            )));
        }
        if self.canopy_overhang_m >= self.row_spacing_m / 2.0 {
            return Err(Error::InvalidSpec("canopy overhang closes the tunnel".into()));
        }
        for (i, c) in self.crevices.iter().enumerate() {
            if c.len() < 3 {
                return Err(Error::InvalidSpec(format!("crevice {i} needs at least 3 vertices")));
            }
        }
        self.sun.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunnelScenario {
    pub seed: u64,
    pub row_spacing: f64,
    pub tunnel_length: f64,
    pub plant_height_class: HeightClass,
    pub stem_pitch: f64,
    pub stem_jitter: f64,
    pub stem_radius: f64,
    /// Stems of the left row (`y > 0`), sorted by `x`.
    pub stems_left: Vec<Stem>,
    /// Stems of the right row (`y < 0`), sorted by `x`.
    pub stems_right: Vec<Stem>,
    pub canopy_overhang: f64,
    /// Soft-obstacle canopy patches, sorted by `x_min`.
    pub canopy: Vec<Rect>,
    pub crevices: Vec<Polygon>,
    pub sand_fraction: f64,
    pub ground: GroundKind,
    pub sun: SunState,
}

/// Builds the tunnel for `(seed, spec)`. Pure: the same inputs give the same
/// scenario, field for field.
pub fn generate_tunnel(seed: u64, spec: &TunnelSpec) -> Result<TunnelScenario> {
    spec.validate()?;
    let half = spec.row_spacing_m / 2.0;
    let count = (spec.length_m / spec.stem_pitch_m).round() as usize;

    let mut rng = rng::substream(seed, stream::STEMS, 0);
    let mut row = |side: f64| -> Vec<Stem> {
        (0..count)
            .map(|i| {
                let nominal = (i as f64 + 0.5) * spec.stem_pitch_m;
                let (jx, jy) = if spec.stem_jitter_m > 0.0 {
                    (
                        rng.random_range(-spec.stem_jitter_m..=spec.stem_jitter_m),
                        rng.random_range(-spec.stem_jitter_m..=spec.stem_jitter_m),
                    )
                } else {
                    (0.0, 0.0)
                };
                Stem { x: nominal + jx, y: side * half + jy, radius: spec.stem_radius_m }
            })
            .collect()
    };
    let stems_left = row(1.0);
    let stems_right = row(-1.0);

    let (canopy_overhang, canopy) = if spec.height_class.is_tall() && spec.canopy_overhang_m > 0.0 {
        (spec.canopy_overhang_m, canopy_patches(seed, spec))
    } else {
        (0.0, Vec::new())
    };

    Ok(TunnelScenario {
        seed,
        row_spacing: spec.row_spacing_m,
        tunnel_length: spec.length_m,
        plant_height_class: spec.height_class,
        stem_pitch: spec.stem_pitch_m,
        stem_jitter: spec.stem_jitter_m,
        stem_radius: spec.stem_radius_m,
        stems_left,
        stems_right,
        canopy_overhang,
        canopy,
        crevices: spec.crevices.iter().map(|v| Polygon { vertices: v.clone() }).collect(),
        sand_fraction: spec.sand_fraction,
        ground: spec.ground,
        sun: spec.sun,
    })
}

fn canopy_patches(seed: u64, spec: &TunnelSpec) -> Vec<Rect> {
    let half = spec.row_spacing_m / 2.0;
    let mut rng = rng::substream(seed, stream::CANOPY, 0);
    let mut patches = Vec::new();
    for side in [1.0f64, -1.0] {
        let mut x = rng.random_range(0.0..3.0);
        while x < spec.length_m {
            let len = rng.random_range(0.5..2.0);
            let depth = spec.canopy_overhang_m * rng.random_range(0.3..=1.0);
            let (y_min, y_max) = if side > 0.0 { (half - depth, half) } else { (-half, depth - half) };
            patches.push(Rect { x_min: x, x_max: (x + len).min(spec.length_m), y_min, y_max });
            x += len + rng.random_range(1.0..4.0);
        }
    }
    patches.sort_by(|a, b| a.x_min.total_cmp(&b.x_min));
    patches
}

impl TunnelScenario {
    /// `(x_min, x_max, y_min, y_max)` of the simulated area.
    pub fn bounds(&self) -> Rect {
        let half = self.row_spacing / 2.0 + BOUNDS_MARGIN_Y_M;
        Rect {
            x_min: -BOUNDS_MARGIN_X_M,
            x_max: self.tunnel_length + BOUNDS_MARGIN_X_M,
            y_min: -half,
            y_max: half,
        }
    }

    pub fn in_bounds(&self, x: f64, y: f64) -> bool {
        self.bounds().contains(x, y)
    }

    /// Half-width of the strip around the centerline that no stem reaches.
    pub fn clear_half_width(&self) -> f64 {
        self.row_spacing / 2.0 - self.stem_jitter - self.stem_radius
    }

    pub fn stems(&self) -> impl Iterator<Item = &Stem> {
        self.stems_left.iter().chain(self.stems_right.iter())
    }

    pub fn stem_count(&self) -> usize {
        self.stems_left.len() + self.stems_right.len()
    }

    /// Stems with center `x` in `[x_min, x_max]`.
    pub fn stems_in_x(&self, x_min: f64, x_max: f64) -> impl Iterator<Item = &Stem> {
        fn window(row: &[Stem], x_min: f64, x_max: f64) -> &[Stem] {
            let lo = row.partition_point(|s| s.x < x_min);
            let hi = row.partition_point(|s| s.x <= x_max);
            &row[lo..hi.max(lo)]
        }
        window(&self.stems_left, x_min, x_max)
            .iter()
            .chain(window(&self.stems_right, x_min, x_max).iter())
    }

    /// Canopy patches overlapping `[x_min, x_max]`.
    pub fn canopy_in_x(&self, x_min: f64, x_max: f64) -> impl Iterator<Item = &Rect> {
        let hi = self.canopy.partition_point(|r| r.x_min <= x_max);
        self.canopy[..hi].iter().filter(move |r| r.x_max >= x_min)
    }

    pub fn surface_at(&self, x: f64, y: f64) -> Result<SurfaceParams> {
        if !self.in_bounds(x, y) {
            return Err(Error::OutOfBounds { x, y });
        }
        let base = self.base_surface(x, y);
        if self.crevices.iter().any(|c| c.contains(x, y)) {
            Ok(SurfaceParams::crevice_over(base))
        } else {
            Ok(base)
        }
    }

    fn base_surface(&self, x: f64, y: f64) -> SurfaceParams {
        if self.ground == GroundKind::Pavement {
            return SurfaceParams::PAVEMENT;
        }
        let ix = (x / SURFACE_CELL_M).floor() as i64;
        let iy = (y / SURFACE_CELL_M).floor() as i64;
        let h = rng::mix64(rng::mix64(rng::mix64(self.seed) ^ ix as u64) ^ (iy as u64).rotate_left(32));
        if rng::unit_from_hash(h) < self.sand_fraction {
            SurfaceParams::SAND
        } else {
            SurfaceParams::CLAY
        }
    }
}
