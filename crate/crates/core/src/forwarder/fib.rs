use std::collections::HashMap;

use super::FaceId;
use crate::ndn::Name;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FibEntry {
    pub prefix: Name,
    pub next_hops: Vec<FaceId>,
}

/// Prefix routes, looked up by longest prefix match.
#[derive(Clone, Debug, Default)]
pub struct Fib {
    routes: HashMap<Name, Vec<FaceId>>,
}

impl Fib {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `face` to the next hops for `prefix`, creating the entry.
    pub fn add_route(&mut self, prefix: Name, face: FaceId) {
        let hops = self.routes.entry(prefix).or_default();
        if !hops.contains(&face) {
            hops.push(face);
        }
    }

    pub fn lookup(&self, name: &Name) -> Option<FibEntry> {
        (0..=name.len()).rev().find_map(|len| {
            let prefix = name.prefix(len);
            self.routes.get(&prefix).map(|hops| FibEntry {
                prefix,
                next_hops: hops.clone(),
            })
        })
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        s.parse().unwrap()
    }

    #[test]
    fn longest_prefix_match() {
        let mut fib = Fib::new();
        fib.add_route(n("/vehicle"), FaceId(1));
        fib.add_route(n("/vehicle/left"), FaceId(2));
        fib.add_route(n("/vehicle/left"), FaceId(3));
        let e = fib.lookup(&n("/vehicle/left/can/39d/7")).unwrap();
        assert_eq!(e.prefix, n("/vehicle/left"));
        assert_eq!(e.next_hops, vec![FaceId(2), FaceId(3)]);
        assert_eq!(fib.lookup(&n("/vehicle/right/x")).unwrap().next_hops, vec![FaceId(1)]);
        assert!(fib.lookup(&n("/other")).is_none());
    }

    #[test]
    fn default_route() {
        let mut fib = Fib::new();
        fib.add_route(Name::root(), FaceId(9));
        assert_eq!(fib.lookup(&n("/anything")).unwrap().next_hops, vec![FaceId(9)]);
    }
}
