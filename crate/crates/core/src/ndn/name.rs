use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// A hierarchical NDN name: an ordered list of opaque byte components.
///
/// The text form is `/` followed by the components joined with `/`. Bytes
/// outside `[A-Za-z0-9._~-]` are percent-encoded, and a component made only
/// of periods is written with three extra periods so that the empty
/// component (`...`) stays representable.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name {
    components: Vec<Vec<u8>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NameParseError {
    #[error("name must start with '/'")]
    MissingLeadingSlash,
    #[error("bad percent escape in component {0:?}")]
    BadEscape(String),
    #[error("component {0:?} is not a valid period-only component")]
    BadPeriods(String),
}

impl Name {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn from_components<I, C>(components: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: Into<Vec<u8>>,
    {
        Self {
            components: components.into_iter().map(Into::into).collect(),
        }
    }

    pub fn components(&self) -> &[Vec<u8>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn push(&mut self, component: impl Into<Vec<u8>>) {
        self.components.push(component.into());
    }

    /// Returns a copy of this name with one more component appended.
    pub fn child(&self, component: impl Into<Vec<u8>>) -> Self {
        let mut out = self.clone();
        out.push(component);
        out
    }

    /// The first `n` components (the whole name if `n >= len`).
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            components: self.components[..n.min(self.len())].to_vec(),
        }
    }

    pub fn is_prefix_of(&self, other: &Name) -> bool {
        name_is_prefix(self, other)
    }

    /// Component `i` as UTF-8, if it is valid UTF-8.
    pub fn component_str(&self, i: usize) -> Option<&str> {
        self.components.get(i).and_then(|c| std::str::from_utf8(c).ok())
    }
}

/// True iff every component of `prefix` equals the corresponding leading
/// component of `name`. The root name is a prefix of everything.
pub fn name_is_prefix(prefix: &Name, name: &Name) -> bool {
    prefix.len() <= name.len() && prefix.components.iter().zip(&name.components).all(|(a, b)| a == b)
}

fn is_unreserved(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'~' | b'-')
}

fn write_component(f: &mut fmt::Formatter<'_>, c: &[u8]) -> fmt::Result {
    if c.iter().all(|&b| b == b'.') {
        for _ in 0..c.len() + 3 {
            f.write_str(".")?;
        }
        return Ok(());
    }
    for &b in c {
        if is_unreserved(b) {
            write!(f, "{}", b as char)?;
        } else {
            write!(f, "%{b:02X}")?;
        }
    }
    Ok(())
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return f.write_str("/");
        }
        for c in &self.components {
            f.write_str("/")?;
            write_component(f, c)?;
        }
        Ok(())
    }
}

fn parse_component(text: &str) -> Result<Vec<u8>, NameParseError> {
    if !text.is_empty() && text.bytes().all(|b| b == b'.') {
        if text.len() < 3 {
            return Err(NameParseError::BadPeriods(text.to_owned()));
        }
        return Ok(vec![b'.'; text.len() - 3]);
    }
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = bytes
                .get(i + 1..i + 3)
                .and_then(|h| std::str::from_utf8(h).ok())
                .and_then(|h| u8::from_str_radix(h, 16).ok())
                .ok_or_else(|| NameParseError::BadEscape(text.to_owned()))?;
            out.push(hex);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    Ok(out)
}

impl FromStr for Name {
    type Err = NameParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rest = s.strip_prefix('/').ok_or(NameParseError::MissingLeadingSlash)?;
        if rest.is_empty() {
            return Ok(Name::root());
        }
        let components = rest.split('/').map(parse_component).collect::<Result<Vec<_>, _>>()?;
        Ok(Name { components })
    }
}

impl serde::Serialize for Name {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Name {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        s.parse().unwrap()
    }

    #[test]
    fn prefix_matching() {
        let rpm = n("/vehicle/chassis/RearAxle/LeftWheel/rotationSpeed/rpm");
        assert!(name_is_prefix(&n("/vehicle/chassis"), &rpm));
        assert!(!name_is_prefix(&n("/vehicle/maliciousECU"), &rpm));
        assert!(name_is_prefix(&Name::root(), &rpm));
        assert!(name_is_prefix(&rpm, &rpm));
        assert!(!name_is_prefix(&rpm, &n("/vehicle/chassis")));
    }

    #[test]
    fn text_form_escapes_and_periods() {
        let name = Name::from_components([b"a b".to_vec(), Vec::new(), b"..".to_vec()]);
        assert_eq!(name.to_string(), "/a%20b/.../.....");
        assert_eq!(n(&name.to_string()), name);
        assert_eq!(Name::root().to_string(), "/");
        assert_eq!(n("/"), Name::root());
    }

    #[test]
    fn rejects_bad_text() {
        assert_eq!("a/b".parse::<Name>(), Err(NameParseError::MissingLeadingSlash));
        assert!(matches!("/a%G1".parse::<Name>(), Err(NameParseError::BadEscape(_))));
        assert!(matches!("/a/..".parse::<Name>(), Err(NameParseError::BadPeriods(_))));
    }
}
