//! Telemetry service wire format: one JSON text message per WebSocket
//! frame, tagged by `type`. SI units throughout.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use tiba_core::nav::NavMode;
use tiba_core::pipeline::runlog::EventRecord;
use tiba_core::pipeline::{RelayCommand, TeleopInput, VssState};
use tiba_core::sensors::{LidarScan, ThermalImage};
use tiba_core::sim::Snapshot;

/// Thumbnail downsampling factor per axis.
pub const THUMB_FACTOR: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseMsg {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub odom_x: f64,
    pub odom_y: f64,
    pub odom_theta: f64,
    /// Commanded twist, m/s and rad/s.
    pub v: f64,
    pub omega: f64,
    pub mode: NavMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMsg {
    pub t: f64,
    pub angle_min: f64,
    pub angle_max: f64,
    pub max_range: f64,
    pub ranges: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalMsg {
    pub t: f64,
    pub width: usize,
    pub height: usize,
    /// °C at byte 0 and 255.
    pub min: f32,
    pub max: f32,
    /// Row-major 8-bit normalized temperatures, base64.
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VssMsg {
    pub t: f64,
    #[serde(flatten)]
    pub state: VssState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMsg {
    pub t: f64,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relay: Option<RelayCommand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    Pose(PoseMsg),
    Scan(ScanMsg),
    Thermal(ThermalMsg),
    Vss(VssMsg),
    Event(EventMsg),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    Teleop(TeleopInput),
    Relay(RelayCommand),
    Mode { mode: NavMode },
}

impl ServerMessage {
    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("telemetry serializes")
    }

    pub fn event(t: f64, e: &EventRecord) -> Self {
        Self::Event(EventMsg { t, name: e.name.clone(), message: e.message.clone(), relay: e.relay.clone() })
    }

    pub fn scan(t: f64, s: &LidarScan) -> Self {
        Self::Scan(ScanMsg { t, angle_min: s.angle_min, angle_max: s.angle_max, max_range: s.max_range, ranges: s.ranges.clone() })
    }

    /// The 10 Hz frame set for one snapshot.
    pub fn frames(s: &Snapshot) -> Vec<Self> {
        let mut out = vec![Self::Pose(PoseMsg {
            t: s.t,
            x: s.pose.x,
            y: s.pose.y,
            theta: s.pose.theta,
            odom_x: s.odometry.x,
            odom_y: s.odometry.y,
            odom_theta: s.odometry.theta,
            v: s.setpoint.v,
            omega: s.setpoint.omega,
            mode: s.mode,
        })];
        if let Some(scan) = &s.scan {
            out.push(Self::scan(s.t, scan));
        }
        if let Some(img) = &s.thermal {
            out.push(Self::Thermal(thumbnail(s.t, img)));
        }
        out.push(Self::Vss(VssMsg { t: s.t, state: s.vss.clone() }));
        out
    }
}

/// Block-mean downsampled, 8-bit normalized thermal frame.
pub fn thumbnail(t: f64, img: &ThermalImage) -> ThermalMsg {
    let w = img.width / THUMB_FACTOR;
    let h = img.height / THUMB_FACTOR;
    let mut temps = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let mut sum = 0.0f32;
            for dv in 0..THUMB_FACTOR {
                for du in 0..THUMB_FACTOR {
                    sum += img.at(u * THUMB_FACTOR + du, v * THUMB_FACTOR + dv);
                }
            }
            temps.push(sum / (THUMB_FACTOR * THUMB_FACTOR) as f32);
        }
    }
    let min = temps.iter().copied().fold(f32::INFINITY, f32::min);
    let max = temps.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let span = max - min;
    let bytes: Vec<u8> = temps
        .iter()
        .map(|&x| if span > 0.0 { (255.0 * (x - min) / span).round().clamp(0.0, 255.0) as u8 } else { 0 })
        .collect();
    ThermalMsg { t, width: w, height: h, min, max, data: STANDARD.encode(bytes) }
}

/// Approximate temperatures back from a thumbnail.
pub fn thumbnail_temps(msg: &ThermalMsg) -> Result<Vec<f32>, base64::DecodeError> {
    let bytes = STANDARD.decode(&msg.data)?;
    Ok(bytes.iter().map(|&b| msg.min + (msg.max - msg.min) * b as f32 / 255.0).collect())
}
