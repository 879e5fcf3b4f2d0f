//! Classical CAN: frames, a virtual arbitrating bus, and candump replay.

mod bus;
mod frame;
mod replay;
mod trace;

pub use bus::{CanBus, Delivery, DEFAULT_BITRATE_BPS};
pub use frame::{CanFrame, MAX_DLC, MAX_EXTENDED_ID, MAX_STANDARD_ID};
pub use replay::ReplayNode;
pub use trace::{load_trace, parse_trace, parse_trace_line, Trace, TraceRecord};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CanError {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("unknown sender {0}")]
    UnknownSender(String),
    #[error("malformed trace line: {0}")]
    MalformedLine(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("trace contains no valid records")]
    EmptyTrace,
}
