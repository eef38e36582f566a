//! Synthetic sensors: sun sensor, lidar, thermal camera, hall odometry and
//! the lid's temperature/humidity sensor.

pub mod ht;
pub mod lidar;
pub mod odometry;
pub mod solar;
pub mod thermal;

pub use ht::{ht_sample, HTConfig, HTReading};
pub use lidar::{lidar_scan, LidarConfig, LidarScan};
pub use odometry::{odometry_update, OdometryEstimate};
pub use solar::{sun_projection_angles, SolarAngles, SolarReading, SunSensorConfig};
pub use thermal::{thermal_render, CameraModel, ThermalConfig, ThermalImage};
