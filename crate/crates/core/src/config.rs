//! Scenario files: TOML with top-level tunnel keys and dotted sections
//! (`sun.*`, `nav.*`, `robot.*`, ...). Every key has a default, so an empty
//! file is a valid H1 scenario.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nav::{LidarNavConfig, NavMode, ThermalNavConfig};
use crate::pipeline::{TeleopConfig, VssConfig};
use crate::sensors::{HTConfig, LidarConfig, SunSensorConfig, ThermalConfig};
use crate::simcore::Pose2D;
use crate::world::{GroundKind, HeightClass, RobotParams, SunState, TunnelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SunSection {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub cloud_factor: f64,
}

impl Default for SunSection {
    fn default() -> Self {
        Self { azimuth_deg: 120.0, elevation_deg: 60.0, cloud_factor: 1.0 }
    }
}

impl SunSection {
    pub fn state(&self) -> SunState {
        SunState { azimuth: self.azimuth_deg.to_radians(), elevation: self.elevation_deg.to_radians(), cloud_factor: self.cloud_factor }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartSection {
    pub x_m: f64,
    pub y_m: f64,
    pub heading_deg: f64,
}

impl StartSection {
    pub fn pose(&self) -> Pose2D {
        Pose2D::new(self.x_m, self.y_m, self.heading_deg.to_radians())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavSection {
    pub mode: NavMode,
    pub k_y: f64,
    pub k_theta: f64,
    /// m/s
    pub v_ref: f64,
    /// rad/s
    pub omega_max: f64,
    pub lookahead_m: f64,
    pub arrival_radius_m: f64,
    /// Waypoints; empty means the tunnel centerline.
    pub path: Vec<[f64; 2]>,
    /// Period of sensing and corridor estimation, s.
    pub control_period_s: f64,
    /// How long the last command is held after the path is lost, s.
    pub lost_hold_s: f64,
    /// Over this last stretch of the row, where the rows ahead run out,
    /// corridor modes hold the odometry heading instead of sensing, m.
    pub row_end_m: f64,
    pub sun_elevation_max_deg: f64,
    pub thermal: ThermalNavConfig,
    pub lidar: LidarNavConfig,
}

impl Default for NavSection {
    fn default() -> Self {
        Self {
            mode: NavMode::Thermal,
            k_y: 1.5,
            k_theta: 2.0,
            v_ref: 1.0,
            omega_max: 1.0,
            lookahead_m: 1.0,
            arrival_radius_m: 0.3,
            path: Vec::new(),
            control_period_s: 0.1,
            lost_hold_s: 0.5,
            row_end_m: 2.0,
            sun_elevation_max_deg: 80.0,
            thermal: ThermalNavConfig::default(),
            lidar: LidarNavConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogSection {
    pub pose_period_s: f64,
    pub wheel_period_s: f64,
    pub vss_period_s: f64,
    pub sensor_period_s: f64,
    pub thermal_period_s: f64,
}

impl Default for LogSection {
    fn default() -> Self {
        Self { pose_period_s: 0.01, wheel_period_s: 0.1, vss_period_s: 0.1, sensor_period_s: 1.0, thermal_period_s: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub length_m: f64,
    pub row_spacing_m: f64,
    pub height_class: HeightClass,
    pub stem_pitch_m: f64,
    pub stem_jitter_m: f64,
    pub stem_radius_m: f64,
    pub sand_fraction: f64,
    pub canopy_overhang_m: f64,
    pub ground: GroundKind,
    pub crevices: Vec<Vec<[f64; 2]>>,
    pub sun: SunSection,
    pub start: StartSection,
    pub nav: NavSection,
    pub robot: RobotParams,
    pub teleop: TeleopConfig,
    pub lidar: LidarConfig,
    pub thermal: ThermalConfig,
    pub sun_sensor: SunSensorConfig,
    pub ht: HTConfig,
    pub vss: VssConfig,
    pub log: LogSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let t = TunnelSpec::default();
        Self {
            seed: 0,
            duration_s: 120.0,
            length_m: t.length_m,
            row_spacing_m: t.row_spacing_m,
            height_class: t.height_class,
            stem_pitch_m: t.stem_pitch_m,
            stem_jitter_m: t.stem_jitter_m,
            stem_radius_m: t.stem_radius_m,
            sand_fraction: t.sand_fraction,
            canopy_overhang_m: t.canopy_overhang_m,
            ground: t.ground,
            crevices: t.crevices,
            sun: SunSection::default(),
            start: StartSection::default(),
            nav: NavSection::default(),
            robot: RobotParams::default(),
            teleop: TeleopConfig::default(),
            lidar: LidarConfig::default(),
            thermal: ThermalConfig::default(),
            sun_sensor: SunSensorConfig::default(),
            ht: HTConfig::default(),
            vss: VssConfig::default(),
            log: LogSection::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(v.clone()).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tunnel_spec(&self) -> TunnelSpec {
        TunnelSpec {
            length_m: self.length_m,
            row_spacing_m: self.row_spacing_m,
            height_class: self.height_class,
            stem_pitch_m: self.stem_pitch_m,
            stem_jitter_m: self.stem_jitter_m,
            stem_radius_m: self.stem_radius_m,
            sand_fraction: self.sand_fraction,
            canopy_overhang_m: self.canopy_overhang_m,
            ground: self.ground,
            crevices: self.crevices.clone(),
            sun: self.sun.state(),
        }
    }

    /// Waypoints to follow: the configured path, or the centerline every
    /// half meter from the start to the tunnel end.
    pub fn waypoints(&self) -> Vec<(f64, f64)> {
        if !self.nav.path.is_empty() {
            return self.nav.path.iter().map(|p| (p[0], p[1])).collect();
        }
        let n = ((self.length_m - self.start.x_m) / 0.5).ceil().max(1.0) as usize;
        (1..=n).map(|i| ((self.start.x_m + i as f64 * 0.5).min(self.length_m), 0.0)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.tunnel_spec().validate()?;
        self.sun.state().validate()?;
        self.robot.validate()?;
        self.vss.validate()?;
        let positive = [
            ("duration_s", self.duration_s),
            ("nav.v_ref", self.nav.v_ref),
            ("nav.omega_max", self.nav.omega_max),
            ("nav.lookahead_m", self.nav.lookahead_m),
            ("nav.arrival_radius_m", self.nav.arrival_radius_m),
            ("nav.control_period_s", self.nav.control_period_s),
            ("log.pose_period_s", self.log.pose_period_s),
            ("log.wheel_period_s", self.log.wheel_period_s),
            ("log.vss_period_s", self.log.vss_period_s),
            ("log.sensor_period_s", self.log.sensor_period_s),
            ("log.thermal_period_s", self.log.thermal_period_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("nav.k_y", self.nav.k_y), ("nav.k_theta", self.nav.k_theta), ("nav.lost_hold_s", self.nav.lost_hold_s), ("nav.row_end_m", self.nav.row_end_m)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.lidar.n_beams == 0 || self.thermal.camera.width < 3 || self.thermal.camera.height < 3 {
            return Err(Error::Config("sensor resolution too small".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ScenarioConfig::from_toml("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn dotted_keys() {
        let cfg = ScenarioConfig::from_toml(
            r#"
            seed = 7
            height_class = "H3"
            row_spacing_m = 1.4
            sun.cloud_factor = 0.5
            nav.mode = "lidar"
            nav.k_y = 2.5
            robot.mass = 140.0
            vss.devices.lidar = 0.7
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.height_class, HeightClass::H3);
        assert_eq!(cfg.nav.mode, NavMode::Lidar);
        assert_eq!(cfg.nav.k_y, 2.5);
        assert_eq!(cfg.nav.k_theta, 2.0);
        assert_eq!(cfg.sun.state().cloud_factor, 0.5);
        assert_eq!(cfg.robot.mass, 140.0);
        assert_eq!(cfg.vss.devices["lidar"], 0.7);
        assert_eq!(cfg.vss.devices["thermal_camera"], 0.3);
    }

    #[test]
    fn errors_are_config_errors() {
        assert!(matches!(ScenarioConfig::from_toml("seed = \"x\""), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::from_toml("row_spacng_m = 1.0"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::from_toml("duration_s = 0.0"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::from_toml("row_spacing_m = -1.0"), Err(Error::InvalidSpec(_))));
        assert!(matches!(ScenarioConfig::load("/nonexistent/x.cfg"), Err(Error::Config(_))));
    }

    #[test]
    fn json_and_toml_round_trip() {
        let mut cfg = ScenarioConfig::default();
        cfg.seed = 99;
        cfg.crevices = vec![vec![[1.0, -0.2], [2.0, -0.2], [2.0, 0.2]]];
        cfg.nav.path = vec![[1.0, 0.0], [5.0, 0.5]];
        assert_eq!(ScenarioConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn default_waypoints_follow_centerline() {
        let w = ScenarioConfig::default().waypoints();
        assert_eq!(w.len(), 100);
        assert_eq!(*w.last().unwrap(), (50.0, 0.0));
    }
}
