use serde::{Deserialize, Serialize};

use super::TrustError;
use crate::ndn::Name;

/// Data under `prefix` must be signed by the key named `key`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustRule {
    pub prefix: Name,
    pub key: Name,
}

/// Literal-prefix trust rules; the longest matching prefix decides.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrustSchema {
    rules: Vec<TrustRule>,
}

impl TrustSchema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_rule(&mut self, prefix: Name, key: Name) -> Result<(), TrustError> {
        if self.rules.iter().any(|r| r.prefix == prefix) {
            return Err(TrustError::DuplicateRule(prefix));
        }
        self.rules.push(TrustRule { prefix, key });
        Ok(())
    }

    pub fn rules(&self) -> &[TrustRule] {
        &self.rules
    }

    /// Required signing key for `data_name`, from the longest matching rule.
    pub fn lookup(&self, data_name: &Name) -> Option<&Name> {
        self.rules
            .iter()
            .filter(|r| r.prefix.is_prefix_of(data_name))
            .max_by_key(|r| r.prefix.len())
            .map(|r| &r.key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        s.parse().unwrap()
    }

    #[test]
    fn longest_prefix_wins() {
        let mut s = TrustSchema::new();
        s.add_rule(n("/vehicle"), n("/K1")).unwrap();
        s.add_rule(n("/vehicle/chassis"), n("/K2")).unwrap();
        assert_eq!(s.lookup(&n("/vehicle/chassis/x")), Some(&n("/K2")));
        assert_eq!(s.lookup(&n("/vehicle/body")), Some(&n("/K1")));
        assert_eq!(s.lookup(&n("/other/x")), None);
        assert_eq!(s.lookup(&n("/vehicle/chassis")), Some(&n("/K2")));
    }

    #[test]
    fn duplicate_prefix_rejected() {
        let mut s = TrustSchema::new();
        s.add_rule(n("/a"), n("/K")).unwrap();
        assert_eq!(s.add_rule(n("/a"), n("/K2")), Err(TrustError::DuplicateRule(n("/a"))));
    }
}
