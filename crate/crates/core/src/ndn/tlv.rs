//! Type-length-value primitives shared by all packet codecs.
//!
//! Types and lengths use the NDN variable-size number encoding. Integer
//! field values (lifetime, freshness, signature type, nack reason) use the
//! NDN non-negative integer encoding: 1, 2, 4 or 8 big-endian bytes. The
//! decoder only accepts minimal encodings, so every accepted packet
//! re-encodes to exactly the bytes it was decoded from.

use std::fmt::Write as _;
use std::ops::Range;

use super::WireError;

pub mod types {
    pub const INTEREST: u64 = 0x05;
    pub const DATA: u64 = 0x06;
    pub const NAME: u64 = 0x07;
    pub const GENERIC_COMPONENT: u64 = 0x08;
    pub const NONCE: u64 = 0x0A;
    pub const INTEREST_LIFETIME: u64 = 0x0C;
    pub const META_INFO: u64 = 0x14;
    pub const CONTENT: u64 = 0x15;
    pub const SIGNATURE_INFO: u64 = 0x16;
    pub const SIGNATURE_VALUE: u64 = 0x17;
    pub const SIGNATURE_TYPE: u64 = 0x1B;
    pub const KEY_LOCATOR: u64 = 0x1C;
    pub const FRESHNESS_PERIOD: u64 = 0x25;
    pub const NACK: u64 = 0x0320;
    pub const NACK_REASON: u64 = 0x0321;
}

pub fn varnum_len(n: u64) -> usize {
    match n {
        0..=252 => 1,
        253..=0xFFFF => 3,
        0x1_0000..=0xFFFF_FFFF => 5,
        _ => 9,
    }
}

pub fn encode_varnum(n: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(9);
    put_varnum(&mut out, n);
    out
}

pub fn put_varnum(out: &mut Vec<u8>, n: u64) {
    match n {
        0..=252 => out.push(n as u8),
        253..=0xFFFF => {
            out.push(0xFD);
            out.extend_from_slice(&(n as u16).to_be_bytes());
        }
        0x1_0000..=0xFFFF_FFFF => {
            out.push(0xFE);
            out.extend_from_slice(&(n as u32).to_be_bytes());
        }
        _ => {
            out.push(0xFF);
            out.extend_from_slice(&n.to_be_bytes());
        }
    }
}

pub fn put_nonneg(out: &mut Vec<u8>, n: u64) {
    if n <= 0xFF {
        out.push(n as u8);
    } else if n <= 0xFFFF {
        out.extend_from_slice(&(n as u16).to_be_bytes());
    } else if n <= 0xFFFF_FFFF {
        out.extend_from_slice(&(n as u32).to_be_bytes());
    } else {
        out.extend_from_slice(&n.to_be_bytes());
    }
}

pub fn nonneg_len(n: u64) -> usize {
    if n <= 0xFF {
        1
    } else if n <= 0xFFFF {
        2
    } else if n <= 0xFFFF_FFFF {
        4
    } else {
        8
    }
}

/// Appends a complete TLV element.
pub fn put_tlv(out: &mut Vec<u8>, type_code: u64, value: &[u8]) {
    put_varnum(out, type_code);
    put_varnum(out, value.len() as u64);
    out.extend_from_slice(value);
}

pub fn put_nonneg_tlv(out: &mut Vec<u8>, type_code: u64, n: u64) {
    put_varnum(out, type_code);
    put_varnum(out, nonneg_len(n) as u64);
    put_nonneg(out, n);
}

pub fn decode_nonneg(value: &[u8]) -> Result<u64, WireError> {
    let n = match value.len() {
        1 => value[0] as u64,
        2 => u16::from_be_bytes([value[0], value[1]]) as u64,
        4 => u32::from_be_bytes(value.try_into().unwrap()) as u64,
        8 => u64::from_be_bytes(value.try_into().unwrap()),
        len => return Err(WireError::InvalidLength { type_code: None, len }),
    };
    if nonneg_len(n) != value.len() {
        return Err(WireError::NonCanonical);
    }
    Ok(n)
}

/// One decoded element, borrowing its value from the input buffer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Element<'a> {
    pub type_code: u64,
    pub value: &'a [u8],
    /// Byte range of the whole element (header included) in the buffer
    /// the reader was created over.
    pub span: Range<usize>,
}

/// Bounds-checked cursor over a byte slice. Never reads past the slice.
#[derive(Clone, Debug)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self::with_base(buf, 0)
    }

    /// `base` is added to reported spans, for nested readers.
    pub fn with_base(buf: &'a [u8], base: usize) -> Self {
        Self { buf, pos: 0, base }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).ok_or(WireError::Truncated)?;
        let out = self.buf.get(self.pos..end).ok_or(WireError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    pub fn read_varnum(&mut self) -> Result<u64, WireError> {
        let first = self.take(1)?[0];
        let (n, min) = match first {
            0..=252 => return Ok(first as u64),
            0xFD => (u16::from_be_bytes(self.take(2)?.try_into().unwrap()) as u64, 253),
            0xFE => (u32::from_be_bytes(self.take(4)?.try_into().unwrap()) as u64, 0x1_0000),
            0xFF => (u64::from_be_bytes(self.take(8)?.try_into().unwrap()), 0x1_0000_0000),
        };
        if n < min {
            return Err(WireError::NonCanonical);
        }
        Ok(n)
    }

    pub fn read_element(&mut self) -> Result<Element<'a>, WireError> {
        let start = self.pos;
        let type_code = self.read_varnum()?;
        let len = self.read_varnum()?;
        let len = usize::try_from(len).map_err(|_| WireError::Truncated)?;
        let value = self.take(len)?;
        Ok(Element {
            type_code,
            value,
            span: self.base + start..self.base + self.pos,
        })
    }
}

/// A generic owned TLV element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TlvElement {
    pub type_code: u64,
    pub value: Vec<u8>,
}

impl TlvElement {
    pub fn new(type_code: u64, value: impl Into<Vec<u8>>) -> Self {
        Self {
            type_code,
            value: value.into(),
        }
    }

    pub fn length(&self) -> usize {
        self.value.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_tlv(&mut out, self.type_code, &self.value);
        out
    }

    /// Parses exactly one element occupying all of `bytes`.
    pub fn parse(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let el = r.read_element()?;
        if !r.is_empty() {
            return Err(WireError::TrailingBytes);
        }
        Ok(Self::new(el.type_code, el.value))
    }
}

/// Space-separated uppercase hex, for debug output and reports.
pub fn hex_dump(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 3);
    for (i, b) in bytes.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{b:02X}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn varnum_examples() {
        assert_eq!(encode_varnum(7), [0x07]);
        assert_eq!(encode_varnum(252), [0xFC]);
        assert_eq!(encode_varnum(253), [0xFD, 0x00, 0xFD]);
        assert_eq!(encode_varnum(65535), [0xFD, 0xFF, 0xFF]);
        assert_eq!(encode_varnum(65536), [0xFE, 0x00, 0x01, 0x00, 0x00]);
        assert_eq!(encode_varnum(1 << 32), [0xFF, 0, 0, 0, 1, 0, 0, 0, 0]);
    }

    #[test]
    fn varnum_rejects_non_minimal() {
        assert_eq!(
            Reader::new(&[0xFD, 0x00, 0x07]).read_varnum(),
            Err(WireError::NonCanonical)
        );
        assert_eq!(Reader::new(&[0xFE, 0x00]).read_varnum(), Err(WireError::Truncated));
    }

    #[test]
    fn element_never_reads_past_buffer() {
        assert_eq!(
            Reader::new(&[0x07, 0x05, 0x08]).read_element(),
            Err(WireError::Truncated)
        );
        assert_eq!(
            Reader::new(&[0x07, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF]).read_element(),
            Err(WireError::Truncated)
        );
    }

    #[test]
    fn nonneg_round_trip_and_canonical() {
        for n in [0u64, 255, 256, 4000, 65535, 65536, u32::MAX as u64, u64::MAX] {
            let mut v = Vec::new();
            put_nonneg(&mut v, n);
            assert_eq!(v.len(), nonneg_len(n));
            assert_eq!(decode_nonneg(&v), Ok(n));
        }
        assert_eq!(decode_nonneg(&[0x00, 0x05]), Err(WireError::NonCanonical));
        assert!(decode_nonneg(&[1, 2, 3]).is_err());
    }

    #[test]
    fn generic_element() {
        let el = TlvElement::new(0x15, b"hi".to_vec());
        assert_eq!(el.to_bytes(), [0x15, 0x02, b'h', b'i']);
        assert_eq!(TlvElement::parse(&el.to_bytes()), Ok(el));
        assert_eq!(TlvElement::parse(&[0x15, 0x00, 0x00]), Err(WireError::TrailingBytes));
        assert_eq!(hex_dump(&[0x07, 0xA0]), "07 A0");
    }
}
