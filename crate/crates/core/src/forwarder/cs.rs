use std::collections::{BTreeMap, HashMap};

use crate::ndn::Name;

pub const DEFAULT_CS_CAPACITY: usize = 1024;

#[derive(Clone, Debug)]
pub struct CsEntry {
    pub wire: Vec<u8>,
    pub inserted_us: u64,
    pub staleness_deadline_us: u64,
    tick: u64,
}

/// Exact-name Data cache with freshness expiry and LRU eviction.
#[derive(Debug)]
pub struct ContentStore {
    capacity: usize,
    entries: HashMap<Name, CsEntry>,
    lru: BTreeMap<u64, Name>,
    tick: u64,
}

impl ContentStore {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: HashMap::new(),
            lru: BTreeMap::new(),
            tick: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn bump(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }

    /// Fresh entry for `name`, refreshing its LRU position. A stale entry
    /// is evicted and reported as a miss.
    pub fn lookup(&mut self, name: &Name, now_us: u64) -> Option<&[u8]> {
        let stale = self.entries.get(name)?.staleness_deadline_us <= now_us;
        if stale {
            self.remove(name);
            return None;
        }
        let tick = self.bump();
        let entry = self.entries.get_mut(name)?;
        self.lru.remove(&entry.tick);
        entry.tick = tick;
        self.lru.insert(tick, name.clone());
        Some(&entry.wire)
    }

    /// Inserts Data that stays servable for `freshness_ms`. Zero freshness
    /// is not cached. Returns how many entries were evicted for capacity.
    pub fn insert(&mut self, name: Name, wire: Vec<u8>, freshness_ms: u64, now_us: u64) -> usize {
        if freshness_ms == 0 || self.capacity == 0 {
            return 0;
        }
        self.remove(&name);
        let tick = self.bump();
        self.lru.insert(tick, name.clone());
        self.entries.insert(
            name,
            CsEntry {
                wire,
                inserted_us: now_us,
                staleness_deadline_us: now_us.saturating_add(freshness_ms.saturating_mul(1000)),
                tick,
            },
        );
        let mut evicted = 0;
        while self.entries.len() > self.capacity {
            let Some((_, oldest)) = self.lru.pop_first() else { break };
            self.entries.remove(&oldest);
            evicted += 1;
        }
        evicted
    }

    pub fn remove(&mut self, name: &Name) -> bool {
        match self.entries.remove(name) {
            Some(e) => {
                self.lru.remove(&e.tick);
                true
            }
            None => false,
        }
    }

    /// Drops every stale entry; returns how many.
    pub fn sweep(&mut self, now_us: u64) -> usize {
        let stale: Vec<Name> = self
            .entries
            .iter()
            .filter(|(_, e)| e.staleness_deadline_us <= now_us)
            .map(|(n, _)| n.clone())
            .collect();
        for n in &stale {
            self.remove(n);
        }
        stale.len()
    }

    pub fn peek(&self, name: &Name) -> Option<&CsEntry> {
        self.entries.get(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        s.parse().unwrap()
    }

    #[test]
    fn freshness_expiry() {
        let mut cs = ContentStore::new(4);
        cs.insert(n("/a"), vec![1], 1000, 0);
        assert_eq!(cs.lookup(&n("/a"), 999_999), Some(&[1u8][..]));
        assert_eq!(cs.lookup(&n("/a"), 1_500_000), None);
        assert!(cs.is_empty());
    }

    #[test]
    fn zero_freshness_not_cached() {
        let mut cs = ContentStore::new(4);
        cs.insert(n("/a"), vec![1], 0, 0);
        assert!(cs.lookup(&n("/a"), 0).is_none());
    }

    #[test]
    fn lru_eviction() {
        let mut cs = ContentStore::new(2);
        cs.insert(n("/a"), vec![1], 10_000, 0);
        cs.insert(n("/b"), vec![2], 10_000, 0);
        cs.lookup(&n("/a"), 1);
        assert_eq!(cs.insert(n("/c"), vec![3], 10_000, 2), 1);
        assert!(cs.peek(&n("/b")).is_none());
        assert!(cs.peek(&n("/a")).is_some());
        assert_eq!(cs.len(), 2);
    }

    #[test]
    fn sweep_and_remove() {
        let mut cs = ContentStore::new(8);
        cs.insert(n("/a"), vec![1], 1, 0);
        cs.insert(n("/b"), vec![2], 100, 0);
        assert_eq!(cs.sweep(1_000), 1);
        assert!(cs.remove(&n("/b")));
        assert!(!cs.remove(&n("/b")));
    }
}
