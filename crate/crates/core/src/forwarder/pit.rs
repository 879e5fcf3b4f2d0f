use std::collections::{HashMap, HashSet, VecDeque};

use super::FaceId;
use crate::ndn::{Name, Nonce};

pub const DEFAULT_DEAD_NONCE_CAPACITY: usize = 4096;

#[derive(Clone, Debug)]
pub struct PitEntry {
    pub name: Name,
    /// Requesting faces with the nonce each used, in arrival order.
    pub downstream: Vec<(FaceId, Nonce)>,
    pub upstream: Option<(FaceId, Nonce)>,
    pub created_us: u64,
    pub expiry_us: u64,
    /// Longest lifetime among the aggregated Interests.
    pub lifetime_ms: u64,
    pub seen_nonces: HashSet<Nonce>,
}

impl PitEntry {
    pub fn new(name: Name, face: FaceId, nonce: Nonce, lifetime_ms: u64, now_us: u64) -> Self {
        Self {
            name,
            downstream: vec![(face, nonce)],
            upstream: None,
            created_us: now_us,
            expiry_us: now_us + lifetime_ms * 1000,
            lifetime_ms,
            seen_nonces: HashSet::from([nonce]),
        }
    }

    pub fn is_live(&self, now_us: u64) -> bool {
        self.expiry_us > now_us
    }

    /// Adds a downstream requester. Expiry only ever moves later.
    pub fn aggregate(&mut self, face: FaceId, nonce: Nonce, lifetime_ms: u64, now_us: u64) {
        self.downstream.push((face, nonce));
        self.seen_nonces.insert(nonce);
        self.expiry_us = self.expiry_us.max(now_us + lifetime_ms * 1000);
        self.lifetime_ms = self.lifetime_ms.max(lifetime_ms);
    }

    /// Distinct downstream faces, first-arrival order.
    pub fn downstream_faces(&self) -> Vec<FaceId> {
        let mut faces: Vec<FaceId> = Vec::new();
        for (f, _) in &self.downstream {
            if !faces.contains(f) {
                faces.push(*f);
            }
        }
        faces
    }
}

pub type Pit = HashMap<Name, PitEntry>;

/// Recently retired (name, nonce) pairs, remembered for loop suppression.
#[derive(Debug)]
pub struct DeadNonceList {
    capacity: usize,
    order: VecDeque<(Name, Nonce, u64)>,
    members: HashMap<(Name, Nonce), u64>,
}

impl DeadNonceList {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            order: VecDeque::new(),
            members: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn insert(&mut self, name: &Name, nonce: Nonce, until_us: u64) {
        if self.capacity == 0 {
            return;
        }
        let key = (name.clone(), nonce);
        self.members.insert(key, until_us);
        self.order.push_back((name.clone(), nonce, until_us));
        while self.order.len() > self.capacity {
            self.pop_front();
        }
    }

    fn pop_front(&mut self) {
        if let Some((name, nonce, until)) = self.order.pop_front() {
            let key = (name, nonce);
            // A later re-insert of the same pair owns the membership.
            if self.members.get(&key) == Some(&until) {
                self.members.remove(&key);
            }
        }
    }

    pub fn contains(&self, name: &Name, nonce: Nonce, now_us: u64) -> bool {
        self.members
            .get(&(name.clone(), nonce))
            .is_some_and(|&until| until > now_us)
    }

    /// Drops expired pairs from the front of the FIFO.
    pub fn sweep(&mut self, now_us: u64) {
        while self.order.front().is_some_and(|(_, _, until)| *until <= now_us) {
            self.pop_front();
        }
    }
}
