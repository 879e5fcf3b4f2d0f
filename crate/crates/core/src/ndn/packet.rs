use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::tlv::{self, types, Element, Reader};
use super::{Name, WireError};

pub const DEFAULT_INTEREST_LIFETIME_MS: u64 = 4000;

/// Four random bytes identifying one Interest emission.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Nonce(pub [u8; 4]);

impl From<u32> for Nonce {
    fn from(v: u32) -> Self {
        Nonce(v.to_be_bytes())
    }
}

impl fmt::Display for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interest {
    pub name: Name,
    pub nonce: Nonce,
    pub lifetime_ms: u64,
}

impl Interest {
    pub fn new(name: Name, nonce: impl Into<Nonce>) -> Self {
        Self {
            name,
            nonce: nonce.into(),
            lifetime_ms: DEFAULT_INTEREST_LIFETIME_MS,
        }
    }

    pub fn with_lifetime(mut self, lifetime_ms: u64) -> Self {
        self.lifetime_ms = lifetime_ms;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigType {
    /// No signature; only produced when a gateway runs with signing off.
    Unsigned = 0,
    HmacSha256 = 1,
    Ed25519 = 2,
    RsaSha256 = 3,
}

impl SigType {
    pub fn code(self) -> u64 {
        self as u64
    }

    pub fn from_code(code: u64) -> Option<Self> {
        match code {
            0 => Some(Self::Unsigned),
            1 => Some(Self::HmacSha256),
            2 => Some(Self::Ed25519),
            3 => Some(Self::RsaSha256),
            _ => None,
        }
    }

    /// Whether a signature value of `len` bytes is well-formed for this type.
    pub fn accepts_len(self, len: usize) -> bool {
        match self {
            Self::Unsigned => len == 0,
            Self::HmacSha256 => len == 32,
            Self::Ed25519 => len == 64,
            Self::RsaSha256 => matches!(len, 128 | 256 | 384 | 512),
        }
    }
}

impl fmt::Display for SigType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Unsigned => "unsigned",
            Self::HmacSha256 => "hmac-sha256",
            Self::Ed25519 => "ed25519",
            Self::RsaSha256 => "rsa-sha256",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Data {
    pub name: Name,
    pub freshness_ms: u64,
    pub content: Vec<u8>,
    pub sig_type: SigType,
    pub key_locator: Name,
    pub sig_value: Vec<u8>,
}

impl Data {
    /// A Data packet with an empty signature value, ready for signing.
    pub fn unsigned(name: Name, content: Vec<u8>, freshness_ms: u64, sig_type: SigType, key_locator: Name) -> Self {
        Self {
            name,
            freshness_ms,
            content,
            sig_type,
            key_locator,
            sig_value: Vec::new(),
        }
    }

    /// The bytes covered by the signature: Name through SignatureInfo.
    pub fn signed_portion(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.content.len());
        put_name(&mut out, &self.name);

        let mut meta = Vec::new();
        tlv::put_nonneg_tlv(&mut meta, types::FRESHNESS_PERIOD, self.freshness_ms);
        tlv::put_tlv(&mut out, types::META_INFO, &meta);

        tlv::put_tlv(&mut out, types::CONTENT, &self.content);

        let mut info = Vec::new();
        tlv::put_nonneg_tlv(&mut info, types::SIGNATURE_TYPE, self.sig_type.code());
        tlv::put_tlv(&mut info, types::KEY_LOCATOR, &encode_name(&self.key_locator));
        tlv::put_tlv(&mut out, types::SIGNATURE_INFO, &info);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NackReason {
    Congestion = 1,
    NoRoute = 2,
    RateLimit = 3,
}

impl NackReason {
    fn from_code(code: u64) -> Option<Self> {
        match code {
            1 => Some(Self::Congestion),
            2 => Some(Self::NoRoute),
            3 => Some(Self::RateLimit),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nack {
    pub name: Name,
    pub nonce: Nonce,
    pub reason: NackReason,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Packet {
    Interest(Interest),
    Data(Data),
    Nack(Nack),
}

impl Packet {
    pub fn name(&self) -> &Name {
        match self {
            Packet::Interest(i) => &i.name,
            Packet::Data(d) => &d.name,
            Packet::Nack(n) => &n.name,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Packet::Interest(i) => encode_interest(i),
            Packet::Data(d) => encode_data(d),
            Packet::Nack(n) => encode_nack(n),
        }
    }
}

// ---- encoding ----

fn put_name(out: &mut Vec<u8>, name: &Name) {
    let mut value = Vec::new();
    for c in name.components() {
        tlv::put_tlv(&mut value, types::GENERIC_COMPONENT, c);
    }
    tlv::put_tlv(out, types::NAME, &value);
}

pub fn encode_name(name: &Name) -> Vec<u8> {
    let mut out = Vec::new();
    put_name(&mut out, name);
    out
}

pub fn encode_interest(i: &Interest) -> Vec<u8> {
    let mut value = Vec::new();
    put_name(&mut value, &i.name);
    tlv::put_tlv(&mut value, types::NONCE, &i.nonce.0);
    tlv::put_nonneg_tlv(&mut value, types::INTEREST_LIFETIME, i.lifetime_ms);
    let mut out = Vec::with_capacity(value.len() + 4);
    tlv::put_tlv(&mut out, types::INTEREST, &value);
    out
}

pub fn encode_data(d: &Data) -> Vec<u8> {
    let mut value = d.signed_portion();
    tlv::put_tlv(&mut value, types::SIGNATURE_VALUE, &d.sig_value);
    let mut out = Vec::with_capacity(value.len() + 4);
    tlv::put_tlv(&mut out, types::DATA, &value);
    out
}

pub fn encode_nack(n: &Nack) -> Vec<u8> {
    let mut value = Vec::new();
    put_name(&mut value, &n.name);
    tlv::put_tlv(&mut value, types::NONCE, &n.nonce.0);
    tlv::put_nonneg_tlv(&mut value, types::NACK_REASON, n.reason as u64);
    let mut out = Vec::new();
    tlv::put_tlv(&mut out, types::NACK, &value);
    out
}

// ---- decoding ----

/// Reads the single outer element of `bytes`, which must have `expected` type.
fn outer<'a>(bytes: &'a [u8], expected: u64) -> Result<Element<'a>, WireError> {
    let mut r = Reader::new(bytes);
    let el = r.read_element()?;
    if !r.is_empty() {
        return Err(WireError::TrailingBytes);
    }
    if el.type_code != expected {
        return Err(WireError::UnknownTlvType(el.type_code));
    }
    Ok(el)
}

fn value_base(el: &Element<'_>) -> usize {
    el.span.end - el.value.len()
}

/// Splits a TLV value into the fields listed in `order`, enforcing the
/// fixed field order and rejecting unknown or repeated types.
fn fields<'a, const N: usize>(
    value: &'a [u8],
    base: usize,
    order: [u64; N],
) -> Result<[Option<Element<'a>>; N], WireError> {
    let mut out: [Option<Element<'a>>; N] = std::array::from_fn(|_| None);
    let mut r = Reader::with_base(value, base);
    let mut next = 0usize;
    while !r.is_empty() {
        let el = r.read_element()?;
        let idx = order
            .iter()
            .position(|&t| t == el.type_code)
            .ok_or(WireError::UnknownTlvType(el.type_code))?;
        if out[idx].is_some() {
            return Err(WireError::DuplicateField(el.type_code));
        }
        if idx < next {
            return Err(WireError::OutOfOrder(el.type_code));
        }
        next = idx + 1;
        out[idx] = Some(el);
    }
    Ok(out)
}

fn name_from_value(value: &[u8]) -> Result<Name, WireError> {
    let mut r = Reader::new(value);
    let mut components = Vec::new();
    while !r.is_empty() {
        let el = r.read_element()?;
        if el.type_code != types::GENERIC_COMPONENT {
            return Err(WireError::UnknownTlvType(el.type_code));
        }
        components.push(el.value.to_vec());
    }
    Ok(Name::from_components(components))
}

/// Decodes a standalone Name TLV (root allowed).
pub fn decode_name(bytes: &[u8]) -> Result<Name, WireError> {
    name_from_value(outer(bytes, types::NAME)?.value)
}

fn packet_name(el: Option<Element<'_>>) -> Result<Name, WireError> {
    let name = name_from_value(el.ok_or(WireError::MissingName)?.value)?;
    if name.is_empty() {
        return Err(WireError::EmptyName);
    }
    Ok(name)
}

fn nonce(el: Option<Element<'_>>) -> Result<Nonce, WireError> {
    let el = el.ok_or(WireError::MissingField("Nonce"))?;
    let bytes: [u8; 4] = el.value.try_into().map_err(|_| WireError::InvalidLength {
        type_code: Some(types::NONCE),
        len: el.value.len(),
    })?;
    Ok(Nonce(bytes))
}

pub fn decode_interest(bytes: &[u8]) -> Result<Interest, WireError> {
    let el = outer(bytes, types::INTEREST)?;
    let [name, nonce_el, lifetime] = fields(
        el.value,
        value_base(&el),
        [types::NAME, types::NONCE, types::INTEREST_LIFETIME],
    )?;
    let name = packet_name(name)?;
    let nonce = nonce(nonce_el)?;
    let lifetime_ms = match lifetime {
        Some(l) => tlv::decode_nonneg(l.value)?,
        None => DEFAULT_INTEREST_LIFETIME_MS,
    };
    if lifetime_ms == 0 {
        return Err(WireError::InvalidValue("InterestLifetime"));
    }
    Ok(Interest {
        name,
        nonce,
        lifetime_ms,
    })
}

pub fn decode_data(bytes: &[u8]) -> Result<Data, WireError> {
    decode_data_with_signed_range(bytes).map(|(d, _)| d)
}

/// Decodes a Data packet and also returns the byte range of `bytes` that
/// the signature covers (Name TLV start through SignatureInfo TLV end).
pub fn decode_data_with_signed_range(bytes: &[u8]) -> Result<(Data, Range<usize>), WireError> {
    let el = outer(bytes, types::DATA)?;
    let [name_el, meta, content, info, sig] = fields(
        el.value,
        value_base(&el),
        [
            types::NAME,
            types::META_INFO,
            types::CONTENT,
            types::SIGNATURE_INFO,
            types::SIGNATURE_VALUE,
        ],
    )?;
    let signed_start = name_el.as_ref().map(|e| e.span.start);
    let name = packet_name(name_el)?;

    let freshness_ms = match meta {
        Some(m) => {
            let [fresh] = fields(m.value, 0, [types::FRESHNESS_PERIOD])?;
            match fresh {
                Some(f) => tlv::decode_nonneg(f.value)?,
                None => 0,
            }
        }
        None => 0,
    };
    let content = content.map(|c| c.value.to_vec()).unwrap_or_default();

    let info = info.ok_or(WireError::MissingField("SignatureInfo"))?;
    let signed_end = info.span.end;
    let [sig_type_el, locator_el] = fields(info.value, 0, [types::SIGNATURE_TYPE, types::KEY_LOCATOR])?;
    let sig_type_el = sig_type_el.ok_or(WireError::MissingField("SignatureType"))?;
    let sig_type =
        SigType::from_code(tlv::decode_nonneg(sig_type_el.value)?).ok_or(WireError::InvalidValue("SignatureType"))?;
    let locator_el = locator_el.ok_or(WireError::MissingField("KeyLocator"))?;
    let key_locator = decode_name(locator_el.value)?;

    let sig = sig.ok_or(WireError::MissingField("SignatureValue"))?;
    if !sig_type.accepts_len(sig.value.len()) {
        return Err(WireError::InvalidLength {
            type_code: Some(types::SIGNATURE_VALUE),
            len: sig.value.len(),
        });
    }

    let data = Data {
        name,
        freshness_ms,
        content,
        sig_type,
        key_locator,
        sig_value: sig.value.to_vec(),
    };
    // Name is mandatory, so the start is always known here.
    Ok((data, signed_start.unwrap_or(0)..signed_end))
}

pub fn decode_nack(bytes: &[u8]) -> Result<Nack, WireError> {
    let el = outer(bytes, types::NACK)?;
    let [name, nonce_el, reason] = fields(
        el.value,
        value_base(&el),
        [types::NAME, types::NONCE, types::NACK_REASON],
    )?;
    let name = packet_name(name)?;
    let nonce = nonce(nonce_el)?;
    let reason = reason.ok_or(WireError::MissingField("NackReason"))?;
    let reason =
        NackReason::from_code(tlv::decode_nonneg(reason.value)?).ok_or(WireError::InvalidValue("NackReason"))?;
    Ok(Nack { name, nonce, reason })
}

/// Decodes any packet type, dispatching on the outer TLV type.
pub fn decode_packet(bytes: &[u8]) -> Result<Packet, WireError> {
    let mut r = Reader::new(bytes);
    let type_code = r.read_varnum()?;
    match type_code {
        types::INTEREST => decode_interest(bytes).map(Packet::Interest),
        types::DATA => decode_data(bytes).map(Packet::Data),
        types::NACK => decode_nack(bytes).map(Packet::Nack),
        other => Err(WireError::UnknownTlvType(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        s.parse().unwrap()
    }

    fn sample_data() -> Data {
        Data {
            name: n("/vehicle/left/can/39d/7"),
            freshness_ms: 1000,
            content: vec![1, 0, 0, 3, 0x9d, 2, 0xAA, 0xBB],
            sig_type: SigType::HmacSha256,
            key_locator: n("/vehicle/left/gateway/KEY"),
            sig_value: vec![0x5A; 32],
        }
    }

    #[test]
    fn name_encoding() {
        assert_eq!(
            encode_name(&n("/a/b")),
            [0x07, 0x06, 0x08, 0x01, 0x61, 0x08, 0x01, 0x62]
        );
        assert_eq!(encode_name(&Name::root()), [0x07, 0x00]);
        assert_eq!(decode_name(&[0x07, 0x00]), Ok(Name::root()));
    }

    #[test]
    fn nonce_length_three_is_rejected() {
        let bytes = [0x05, 0x0A, 0x07, 0x03, 0x08, 0x01, 0x61, 0x0A, 0x03, 0x00, 0x00, 0x01];
        assert_eq!(
            decode_interest(&bytes),
            Err(WireError::InvalidLength {
                type_code: Some(types::NONCE),
                len: 3
            })
        );
    }

    #[test]
    fn interest_field_errors() {
        // nonce before name
        let bytes = [0x05, 0x0B, 0x0A, 0x04, 0, 0, 0, 1, 0x07, 0x03, 0x08, 0x01, 0x61];
        assert_eq!(decode_interest(&bytes), Err(WireError::OutOfOrder(types::NAME)));
        // duplicate name
        let bytes = [0x05, 0x0A, 0x07, 0x03, 0x08, 0x01, 0x61, 0x07, 0x03, 0x08, 0x01, 0x61];
        assert_eq!(decode_interest(&bytes), Err(WireError::DuplicateField(types::NAME)));
        // no name
        let bytes = [0x05, 0x06, 0x0A, 0x04, 0, 0, 0, 1];
        assert_eq!(decode_interest(&bytes), Err(WireError::MissingName));
        // unknown inner type
        let bytes = [0x05, 0x07, 0x07, 0x03, 0x08, 0x01, 0x61, 0x99, 0x00];
        assert_eq!(decode_interest(&bytes), Err(WireError::UnknownTlvType(0x99)));
        // root name
        let bytes = [0x05, 0x08, 0x07, 0x00, 0x0A, 0x04, 0, 0, 0, 1];
        assert_eq!(decode_interest(&bytes), Err(WireError::EmptyName));
    }

    #[test]
    fn data_round_trip_and_signed_range() {
        let d = sample_data();
        let wire = encode_data(&d);
        let (back, range) = decode_data_with_signed_range(&wire).unwrap();
        assert_eq!(back, d);
        let signed = &wire[range.clone()];
        assert_eq!(signed, d.signed_portion().as_slice());
        // Slice starts with the Name TLV and ends with the SignatureInfo TLV.
        assert_eq!(signed[0] as u64, types::NAME);
        let mut r = Reader::new(signed);
        let mut last = None;
        while !r.is_empty() {
            last = Some(r.read_element().unwrap().type_code);
        }
        assert_eq!(last, Some(types::SIGNATURE_INFO));
    }

    #[test]
    fn data_missing_signature_value() {
        let d = sample_data();
        let mut value = d.signed_portion();
        let mut wire = Vec::new();
        tlv::put_tlv(&mut wire, types::DATA, &value);
        assert_eq!(decode_data(&wire), Err(WireError::MissingField("SignatureValue")));
        // wrong signature length for the declared type
        tlv::put_tlv(&mut value, types::SIGNATURE_VALUE, &[0u8; 31]);
        let mut wire = Vec::new();
        tlv::put_tlv(&mut wire, types::DATA, &value);
        assert!(matches!(decode_data(&wire), Err(WireError::InvalidLength { .. })));
    }

    #[test]
    fn nack_round_trip() {
        let nack = Nack {
            name: n("/vehicle/left/can/1a0/3"),
            nonce: Nonce([1, 2, 3, 4]),
            reason: NackReason::RateLimit,
        };
        let wire = encode_nack(&nack);
        assert_eq!(&wire[..3], &[0xFD, 0x03, 0x20]);
        assert_eq!(decode_packet(&wire), Ok(Packet::Nack(nack)));
    }

    #[test]
    fn packet_dispatch_rejects_unknown_outer() {
        assert_eq!(decode_packet(&[0x42, 0x00]), Err(WireError::UnknownTlvType(0x42)));
        assert_eq!(decode_packet(&[]), Err(WireError::Truncated));
    }
}
