use std::fmt;

use super::CanError;

pub const MAX_STANDARD_ID: u32 = 0x7FF;
pub const MAX_EXTENDED_ID: u32 = 0x1FFF_FFFF;
pub const MAX_DLC: usize = 8;

/// One classical CAN frame.
///
/// `ts_us` is the virtual time the frame was placed on a bus; it is
/// metadata and not part of frame identity (see [`CanFrame::same_content`]).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanFrame {
    aid: u32,
    extended: bool,
    payload: Vec<u8>,
    pub ts_us: u64,
}

impl CanFrame {
    pub fn new(aid: u32, extended: bool, payload: &[u8]) -> Result<Self, CanError> {
        let max = if extended { MAX_EXTENDED_ID } else { MAX_STANDARD_ID };
        if aid > max {
            return Err(CanError::InvalidFrame(format!(
                "aid {aid:#x} exceeds {} range",
                if extended { "29-bit" } else { "11-bit" }
            )));
        }
        if payload.len() > MAX_DLC {
            return Err(CanError::InvalidFrame(format!(
                "payload of {} bytes exceeds 8",
                payload.len()
            )));
        }
        Ok(Self {
            aid,
            extended,
            payload: payload.to_vec(),
            ts_us: 0,
        })
    }

    pub fn with_ts(mut self, ts_us: u64) -> Self {
        self.ts_us = ts_us;
        self
    }

    pub fn aid(&self) -> u32 {
        self.aid
    }

    pub fn extended(&self) -> bool {
        self.extended
    }

    pub fn dlc(&self) -> u8 {
        self.payload.len() as u8
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// Equality of identifier, format, and payload, ignoring the timestamp.
    pub fn same_content(&self, other: &CanFrame) -> bool {
        self.aid == other.aid && self.extended == other.extended && self.payload == other.payload
    }

    /// Bits on the wire, ignoring stuffing: 44 (standard) or 64 (extended)
    /// overhead bits plus eight per payload byte.
    pub fn wire_bits(&self) -> u64 {
        let overhead = if self.extended { 64 } else { 44 };
        overhead + 8 * self.payload.len() as u64
    }

    /// Time the frame occupies a bus at `bitrate_bps`, rounded up to whole µs.
    pub fn duration_us(&self, bitrate_bps: u64) -> u64 {
        (self.wire_bits() * 1_000_000).div_ceil(bitrate_bps.max(1))
    }
}

/// candump notation without timestamp: `123#DEADBEEF` / `0000039D#00`.
impl fmt::Display for CanFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.extended {
            write!(f, "{:08X}#", self.aid)?;
        } else {
            write!(f, "{:03X}#", self.aid)?;
        }
        for b in &self.payload {
            write!(f, "{b:02X}")?;
        }
        Ok(())
    }
}
