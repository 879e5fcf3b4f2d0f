//! NDN packet model and its TLV wire codec.

mod name;
mod packet;
pub mod tlv;

pub use name::{name_is_prefix, Name, NameParseError};
pub use packet::{
    decode_data, decode_data_with_signed_range, decode_interest, decode_nack, decode_packet, encode_data,
    encode_interest, encode_nack, encode_name, Data, Interest, Nack, NackReason, Nonce, Packet, SigType,
    DEFAULT_INTEREST_LIFETIME_MS,
};
pub use tlv::{encode_varnum, hex_dump, TlvElement};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("packet truncated")]
    Truncated,
    #[error("unknown TLV type {0:#x}")]
    UnknownTlvType(u64),
    #[error("duplicate field {0:#x}")]
    DuplicateField(u64),
    #[error("field {0:#x} out of order")]
    OutOfOrder(u64),
    #[error("packet has no name")]
    MissingName,
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("name has no components")]
    EmptyName,
    #[error("invalid length {len} for field {type_code:?}")]
    InvalidLength { type_code: Option<u64>, len: usize },
    #[error("invalid value for {0}")]
    InvalidValue(&'static str),
    #[error("non-minimal number encoding")]
    NonCanonical,
    #[error("trailing bytes after packet")]
    TrailingBytes,
}
