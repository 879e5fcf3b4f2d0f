//! candump log ingestion: `(SECONDS.USECS) IFACE AID#HEXPAYLOAD`.

use std::fmt;
use std::path::Path;

use super::{CanError, CanFrame};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    /// Capture timestamp in whole microseconds (fraction digits beyond the
    /// sixth are truncated).
    pub ts_us: u64,
    pub iface: String,
    pub frame: CanFrame,
}

impl TraceRecord {
    pub fn ts_s(&self) -> f64 {
        self.ts_us as f64 / 1e6
    }
}

/// Canonical candump form, e.g. `(1596032681.000123) can0 123#DEADBEEF`.
impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}.{:06}) {} {}",
            self.ts_us / 1_000_000,
            self.ts_us % 1_000_000,
            self.iface,
            self.frame
        )
    }
}

fn malformed(reason: impl Into<String>) -> CanError {
    CanError::MalformedLine(reason.into())
}

fn parse_timestamp(text: &str) -> Result<u64, CanError> {
    let inner = text
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| malformed("timestamp must be parenthesised"))?;
    let (secs, frac) = inner.split_once('.').unwrap_or((inner, ""));
    if secs.is_empty() || !secs.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(format!("bad seconds {secs:?}")));
    }
    if !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(format!("bad fraction {frac:?}")));
    }
    let secs: u64 = secs.parse().map_err(|_| malformed("seconds out of range"))?;
    let mut usec = 0u64;
    for i in 0..6 {
        let digit = frac.as_bytes().get(i).map_or(0, |b| (b - b'0') as u64);
        usec = usec * 10 + digit;
    }
    secs.checked_mul(1_000_000)
        .and_then(|s| s.checked_add(usec))
        .ok_or_else(|| malformed("timestamp out of range"))
}

fn parse_frame(text: &str) -> Result<CanFrame, CanError> {
    let (aid_hex, data_hex) = text.split_once('#').ok_or_else(|| malformed("missing '#'"))?;
    let extended = match aid_hex.len() {
        3 => false,
        8 => true,
        n => return Err(malformed(format!("identifier must have 3 or 8 hex digits, got {n}"))),
    };
    if !aid_hex.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(malformed(format!("non-hex identifier {aid_hex:?}")));
    }
    let aid = u32::from_str_radix(aid_hex, 16).map_err(|e| malformed(e.to_string()))?;
    if data_hex.len() > 16 {
        return Err(malformed("payload longer than 8 bytes"));
    }
    if data_hex.len() % 2 != 0 {
        return Err(malformed("odd number of payload hex digits"));
    }
    let payload = hex::decode(data_hex).map_err(|e| malformed(e.to_string()))?;
    CanFrame::new(aid, extended, &payload).map_err(|e| malformed(e.to_string()))
}

/// Parses one non-comment candump line. Lowercase hex is accepted.
pub fn parse_trace_line(line: &str) -> Result<TraceRecord, CanError> {
    let mut parts = line.split_whitespace();
    let (Some(ts), Some(iface), Some(frame), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(malformed("expected '(ts) iface AID#DATA'"));
    };
    let ts_us = parse_timestamp(ts)?;
    let frame = parse_frame(frame)?.with_ts(ts_us);
    Ok(TraceRecord {
        ts_us,
        iface: iface.to_owned(),
        frame,
    })
}

/// A loaded trace, sorted by timestamp.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// Non-blank, non-comment lines that failed to parse.
    pub skipped_malformed: usize,
}

/// Parses trace text. Blank lines and `#` comments are skipped; malformed
/// lines are counted and skipped. Records are stably sorted by timestamp.
pub fn parse_trace(text: &str) -> Result<Trace, CanError> {
    let mut trace = Trace::default();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_trace_line(line) {
            Ok(rec) => trace.records.push(rec),
            Err(_) => trace.skipped_malformed += 1,
        }
    }
    if trace.records.is_empty() {
        return Err(CanError::EmptyTrace);
    }
    trace.records.sort_by_key(|r| r.ts_us);
    Ok(trace)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace, CanError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CanError::Io(format!("{}: {e}", path.display())))?;
    parse_trace(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_frame_line() {
        let r = parse_trace_line("(1596032681.000123) can0 123#DEADBEEF").unwrap();
        assert_eq!(r.ts_us, 1_596_032_681_000_123);
        assert_eq!(r.ts_s(), 1596032681.000123);
        assert_eq!(r.iface, "can0");
        assert_eq!(r.frame.aid(), 0x123);
        assert!(!r.frame.extended());
        assert_eq!(r.frame.dlc(), 4);
        assert_eq!(r.frame.payload(), &[0xDE, 0xAD, 0xBE, 0xEF]);
    }

    #[test]
    fn extended_and_empty_frames() {
        let r = parse_trace_line("(0.000000) can0 0000039D#00").unwrap();
        assert_eq!((r.frame.aid(), r.frame.extended(), r.frame.dlc()), (0x39D, true, 1));
        let r = parse_trace_line("(1.0) can0 7FF#").unwrap();
        assert_eq!((r.frame.aid(), r.frame.extended(), r.frame.dlc()), (0x7FF, false, 0));
        assert_eq!(r.ts_us, 1_000_000);
    }

    #[test]
    fn malformed_lines() {
        for line in [
            "1.0 can0 123#00",
            "(1.0 can0 123#00",
            "(1.0) can0 12G#00",
            "(1.0) can0 123#0",
            "(1.0) can0 123#000102030405060708",
            "(1.0) can0 1234#00",
            "(1.0) can0 800#00",
            "(1.0) can0 123",
            "(x.0) can0 123#00",
            "(1.0) can0 123#00 extra",
        ] {
            assert!(
                matches!(parse_trace_line(line), Err(CanError::MalformedLine(_))),
                "{line}"
            );
        }
    }

    #[test]
    fn load_sorts_and_skips() {
        let text = "# header\n(2.0) can0 100#01\n\n(1.0) can0 101#02\nnot a frame\n(1.5) can0 102#\n";
        let t = parse_trace(text).unwrap();
        let ts: Vec<u64> = t.records.iter().map(|r| r.ts_us).collect();
        assert_eq!(ts, vec![1_000_000, 1_500_000, 2_000_000]);
        assert_eq!(t.skipped_malformed, 1);
        assert_eq!(parse_trace("# only\n\n").unwrap_err(), CanError::EmptyTrace);
    }

    #[test]
    fn load_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.log");
        std::fs::write(&path, "(0.1) can0 123#00\n(0.2) can0 124#01\n# c\n(0.3) can0 125#02\n").unwrap();
        assert_eq!(load_trace(&path).unwrap().records.len(), 3);
        let empty = dir.path().join("empty.log");
        std::fs::write(&empty, "").unwrap();
        assert_eq!(load_trace(&empty).unwrap_err(), CanError::EmptyTrace);
        assert!(matches!(load_trace(dir.path().join("missing")), Err(CanError::Io(_))));
    }
}
