//! Drive-chain bus frames. A wheel command is two signed 32-bit
//! little-endian integers in milli-rad/s, left then right.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::WheelSpeeds;

pub const MAX_ID: u16 = 0x7FF;
pub const MAX_PAYLOAD: usize = 8;
pub const WHEEL_COMMAND_ID: u16 = 0x201;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusFrame {
    id: u16,
    payload: Vec<u8>,
}

impl BusFrame {
    pub fn new(id: u16, payload: Vec<u8>) -> Result<Self> {
        if id > MAX_ID {
            return Err(Error::MalformedFrame(format!("id {id:#x} exceeds 11 bits")));
        }
        if payload.len() > MAX_PAYLOAD {
            return Err(Error::MalformedFrame(format!("{} payload bytes", payload.len())));
        }
        Ok(Self { id, payload })
    }

    pub fn id(&self) -> u16 {
        self.id
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }
}

fn to_milli(w: f64) -> i32 {
    (w * 1000.0).round().clamp(i32::MIN as f64, i32::MAX as f64) as i32
}

pub fn encode_wheel_command(w: WheelSpeeds, id: u16) -> Result<BusFrame> {
    let mut payload = Vec::with_capacity(8);
    payload.extend_from_slice(&to_milli(w.left).to_le_bytes());
    payload.extend_from_slice(&to_milli(w.right).to_le_bytes());
    BusFrame::new(id, payload)
}

pub fn decode_wheel_command(f: &BusFrame) -> Result<WheelSpeeds> {
    let p = f.payload();
    if p.len() != 8 {
        return Err(Error::MalformedFrame(format!("wheel command needs 8 bytes, got {}", p.len())));
    }
    let left = i32::from_le_bytes([p[0], p[1], p[2], p[3]]);
    let right = i32::from_le_bytes([p[4], p[5], p[6], p[7]]);
    Ok(WheelSpeeds { left: left as f64 / 1000.0, right: right as f64 / 1000.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_packed_example() {
        let f = encode_wheel_command(WheelSpeeds::new(1.5, -1.5), WHEEL_COMMAND_ID).unwrap();
        assert_eq!(f.payload(), &[0xDC, 0x05, 0x00, 0x00, 0x24, 0xFA, 0xFF, 0xFF]);
        assert_eq!(decode_wheel_command(&f).unwrap(), WheelSpeeds::new(1.5, -1.5));
    }

    #[test]
    fn short_payload_rejected() {
        let f = BusFrame::new(WHEEL_COMMAND_ID, vec![1, 2, 3, 4]).unwrap();
        assert!(matches!(decode_wheel_command(&f), Err(Error::MalformedFrame(_))));
    }

    #[test]
    fn frame_limits() {
        assert!(BusFrame::new(2048, vec![]).is_err());
        assert!(BusFrame::new(2047, vec![0; 8]).is_ok());
        assert!(BusFrame::new(1, vec![0; 9]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_within_quantum(l in -6.3f64..6.3, r in -6.3f64..6.3) {
            let d = decode_wheel_command(&encode_wheel_command(WheelSpeeds::new(l, r), 0x10).unwrap()).unwrap();
            prop_assert!((d.left - l).abs() <= 0.0005 + 1e-12);
            prop_assert!((d.right - r).abs() <= 0.0005 + 1e-12);
        }
    }
}
