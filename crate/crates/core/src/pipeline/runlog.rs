//! Run log: newline-delimited JSON. The first line is a header carrying the
//! seed, the resolved scenario config and its SHA-256; every further line
//! is one record `{step, t, kind, payload}`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufRead, Write};

use super::vss::{RelayCommand, VssState};
use crate::error::{Error, Result};
use crate::sensors::{HTReading, LidarScan, SolarReading, ThermalImage};
use crate::simcore::{Pose2D, TickDeltas, WheelSpeeds};

pub const FORMAT: &str = "tiba-runlog";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
}

impl LogHeader {
    pub fn new(seed: u64, config: serde_json::Value) -> Self {
        Self { format: FORMAT.into(), version: VERSION, seed, config_hash: config_hash(&config), config }
    }
}

pub fn config_hash(config: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(config).expect("json value serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub v: f64,
    pub omega: f64,
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub truth: Pose2D,
    pub odometry: Pose2D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheelRecord {
    pub commanded: WheelSpeeds,
    pub actual: WheelSpeeds,
    pub ticks: TickDeltas,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major °C, little-endian f32, base64.
    #[serde(with = "b64_f32")]
    pub temps: Vec<f32>,
}

impl From<&ThermalImage> for ThermalFrame {
    fn from(img: &ThermalImage) -> Self {
        Self { width: img.width, height: img.height, temps: img.temps.clone() }
    }
}

impl From<ThermalFrame> for ThermalImage {
    fn from(f: ThermalFrame) -> Self {
        Self { width: f.width, height: f.height, temps: f.temps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relay: Option<RelayCommand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl EventRecord {
    pub fn named(name: &str) -> Self {
        Self { name: name.into(), relay: None, message: None }
    }

    pub fn with_message(name: &str, message: impl Into<String>) -> Self {
        Self { name: name.into(), relay: None, message: Some(message.into()) }
    }
}

pub mod event {
    pub const START: &str = "start";
    pub const COMPLETE: &str = "complete";
    pub const TIMEOUT: &str = "timeout";
    pub const RELAY: &str = "relay";
    pub const MODE: &str = "mode";
    pub const NAV_LOST: &str = "nav_lost";
    pub const NAV_STOP: &str = "nav_stop";
    pub const NAV_RECOVERED: &str = "nav_recovered";
    pub const ROW_END: &str = "row_end";
    pub const HEADING_FIX: &str = "heading_fix";
    pub const OUT_OF_BOUNDS: &str = "out_of_bounds";
    pub const POWER_EXHAUSTED: &str = "power_exhausted";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "lowercase")]
pub enum Payload {
    Command(CommandRecord),
    Pose(PoseRecord),
    Wheel(WheelRecord),
    Solar(SolarReading),
    Lidar(LidarScan),
    Thermal(ThermalFrame),
    Ht(HTReading),
    Vss(VssState),
    Event(EventRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub step: u64,
    /// Sim time, s.
    pub t: f64,
    #[serde(flatten)]
    pub payload: Payload,
}

impl RunRecord {
    pub fn to_line(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::CorruptLog(e.to_string()))
    }
}

mod b64_f32 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f32], s: S) -> Result<S::Ok, S::Error> {
        let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f32>, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = STANDARD.decode(text).map_err(de::Error::custom)?;
        if bytes.len() % 4 != 0 {
            return Err(de::Error::custom("thermal payload is not a whole number of f32"));
        }
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }
}

/// Line writer that refuses records going back in time.
pub struct RunLogWriter<W: Write> {
    out: W,
    last_t: f64,
}

impl<W: Write> RunLogWriter<W> {
    pub fn new(mut out: W, header: &LogHeader) -> Result<Self> {
        let line = serde_json::to_string(header).map_err(|e| Error::CorruptLog(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::CorruptLog(e.to_string()))?;
        Ok(Self { out, last_t: f64::NEG_INFINITY })
    }

    pub fn append(&mut self, rec: &RunRecord) -> Result<()> {
        if rec.t < self.last_t {
            return Err(Error::CorruptLog(format!("record at t={} after t={}", rec.t, self.last_t)));
        }
        self.last_t = rec.t;
        writeln!(self.out, "{}", rec.to_line()?).map_err(|e| Error::CorruptLog(e.to_string()))
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush().map_err(|e| Error::CorruptLog(e.to_string()))?;
        Ok(self.out)
    }
}

pub fn parse_header(line: &str) -> Result<LogHeader> {
    let header: LogHeader = serde_json::from_str(line).map_err(|e| Error::CorruptLog(format!("header: {e}")))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::CorruptLog(format!("unsupported log {} v{}", header.format, header.version)));
    }
    if config_hash(&header.config) != header.config_hash {
        return Err(Error::CorruptLog("config hash mismatch".into()));
    }
    Ok(header)
}

/// Reads a whole log. An empty input is a configuration error, not a
/// corrupt log.
pub fn read_run_log(input: impl BufRead) -> Result<(LogHeader, Vec<RunRecord>)> {
    let mut lines = input.lines();
    let first = match lines.next() {
        None => return Err(Error::Config("empty run log".into())),
        Some(l) => l.map_err(|e| Error::CorruptLog(e.to_string()))?,
    };
    if first.trim().is_empty() {
        return Err(Error::Config("empty run log".into()));
    }
    let header = parse_header(&first)?;
    let mut records = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::CorruptLog(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RunRecord = serde_json::from_str(&line).map_err(|e| Error::CorruptLog(format!("line {}: {e}", i + 2)))?;
        if rec.t < last_t {
            return Err(Error::CorruptLog(format!("line {}: t={} after t={}", i + 2, rec.t, last_t)));
        }
        last_t = rec.t;
        records.push(rec);
    }
    Ok((header, records))
}
