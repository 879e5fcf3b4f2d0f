use thiserror::Error;

use crate::can::{CanFrame, MAX_DLC};

const FLAG_EXTENDED: u8 = 0x01;
const HEADER_LEN: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("content shorter than the frame header")]
    Truncated,
    #[error("unknown flag bits {0:#04x}")]
    UnknownFlags(u8),
    #[error("dlc {0} exceeds 8")]
    BadDlc(u8),
    #[error("content length {actual} does not match dlc {dlc}")]
    LengthMismatch { dlc: u8, actual: usize },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
}

/// flags (bit0 = extended) | aid u32 BE | dlc | payload.
pub fn encode_frame(frame: &CanFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + frame.payload().len());
    out.push(if frame.extended() { FLAG_EXTENDED } else { 0 });
    out.extend_from_slice(&frame.aid().to_be_bytes());
    out.push(frame.dlc());
    out.extend_from_slice(frame.payload());
    out
}

pub fn decode_frame(content: &[u8]) -> Result<CanFrame, CodecError> {
    if content.len() < HEADER_LEN {
        return Err(CodecError::Truncated);
    }
    let flags = content[0];
    if flags & !FLAG_EXTENDED != 0 {
        return Err(CodecError::UnknownFlags(flags));
    }
    let aid = u32::from_be_bytes(content[1..5].try_into().expect("4 bytes"));
    let dlc = content[5];
    if dlc as usize > MAX_DLC {
        return Err(CodecError::BadDlc(dlc));
    }
    let payload = &content[HEADER_LEN..];
    if payload.len() != dlc as usize {
        return Err(CodecError::LengthMismatch {
            dlc,
            actual: payload.len(),
        });
    }
    CanFrame::new(aid, flags & FLAG_EXTENDED != 0, payload).map_err(|e| CodecError::InvalidFrame(e.to_string()))
}
