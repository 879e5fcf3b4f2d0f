use std::fmt::Write as _;

use thiserror::Error;

use crate::can::{CanFrame, MAX_EXTENDED_ID};
use crate::ndn::Name;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NameError {
    #[error("{name} is not under {prefix}")]
    NotUnderPrefix { name: Name, prefix: Name },
    #[error("{0} does not have exactly an aid and a sequence after the prefix")]
    WrongShape(Name),
    #[error("bad aid component in {0}")]
    BadAid(Name),
    #[error("bad sequence component in {0}")]
    BadSeq(Name),
}

/// Default segment prefix, `/vehicle/<segment>/can`.
pub fn default_prefix(segment: &str) -> Name {
    Name::from_components(["vehicle", segment, "can"])
}

/// Lowercase hex with no `0x` and no leading zeros.
pub fn aid_component(aid: u32) -> String {
    let mut s = String::new();
    write!(s, "{aid:x}").expect("write to String");
    s
}

/// `<prefix>/<aid hex>/<seq>`.
pub fn frame_to_name(prefix: &Name, frame: &CanFrame, seq: u64) -> Name {
    aid_seq_name(prefix, frame.aid(), seq)
}

pub fn aid_seq_name(prefix: &Name, aid: u32, seq: u64) -> Name {
    prefix.child(aid_component(aid)).child(seq.to_string())
}

/// Prefix for every sequence of one aid.
pub fn aid_prefix(prefix: &Name, aid: u32) -> Name {
    prefix.child(aid_component(aid))
}

fn canonical_digits(s: &str, hex: bool) -> bool {
    let ok_char = |c: char| {
        if hex {
            c.is_ascii_digit() || ('a'..='f').contains(&c)
        } else {
            c.is_ascii_digit()
        }
    };
    !s.is_empty() && s.chars().all(ok_char) && (s == "0" || !s.starts_with('0'))
}

/// Inverse of [`aid_seq_name`]. Only canonical spellings are accepted, so
/// each (aid, seq) has exactly one name.
pub fn parse_name(prefix: &Name, name: &Name) -> Result<(u32, u64), NameError> {
    if !prefix.is_prefix_of(name) {
        return Err(NameError::NotUnderPrefix {
            name: name.clone(),
            prefix: prefix.clone(),
        });
    }
    if name.len() != prefix.len() + 2 {
        return Err(NameError::WrongShape(name.clone()));
    }
    let aid_s = name
        .component_str(prefix.len())
        .ok_or_else(|| NameError::BadAid(name.clone()))?;
    let seq_s = name
        .component_str(prefix.len() + 1)
        .ok_or_else(|| NameError::BadSeq(name.clone()))?;
    if !canonical_digits(aid_s, true) || aid_s.len() > 8 {
        return Err(NameError::BadAid(name.clone()));
    }
    let aid = u32::from_str_radix(aid_s, 16).map_err(|_| NameError::BadAid(name.clone()))?;
    if aid > MAX_EXTENDED_ID {
        return Err(NameError::BadAid(name.clone()));
    }
    if !canonical_digits(seq_s, false) {
        return Err(NameError::BadSeq(name.clone()));
    }
    let seq = seq_s.parse().map_err(|_| NameError::BadSeq(name.clone()))?;
    Ok((aid, seq))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let p = default_prefix("left");
        let f = CanFrame::new(0x39D, true, &[1]).unwrap();
        assert_eq!(frame_to_name(&p, &f, 7).to_string(), "/vehicle/left/can/39d/7");
        assert_eq!(frame_to_name(&p, &f, 7), frame_to_name(&p, &f, 7));
        let f = CanFrame::new(0x7FF, false, &[]).unwrap();
        assert_eq!(frame_to_name(&p, &f, 0).to_string(), "/vehicle/left/can/7ff/0");
    }

    #[test]
    fn parse_inverts() {
        let p = default_prefix("left");
        for (aid, seq) in [(0, 0), (0x39d, 7), (0x1FFF_FFFF, u64::MAX)] {
            assert_eq!(parse_name(&p, &aid_seq_name(&p, aid, seq)), Ok((aid, seq)));
        }
    }

    #[test]
    fn parse_rejects_noncanonical() {
        let p = default_prefix("left");
        for bad in [
            "/vehicle/left/can/39D/7",
            "/vehicle/left/can/039d/7",
            "/vehicle/left/can/39d/07",
            "/vehicle/left/can/39d/-1",
            "/vehicle/left/can/39d",
            "/vehicle/left/can/39d/7/x",
            "/vehicle/left/can/3fffffff/1",
            "/vehicle/right/can/39d/7",
        ] {
            assert!(parse_name(&p, &bad.parse().unwrap()).is_err(), "{bad}");
        }
    }
}
