//! NDN forwarding node: PIT, Content Store, FIB, and the unsatisfied-Interest
//! rate monitor.

mod cs;
mod fib;
mod pit;
mod rate;

pub use cs::{ContentStore, CsEntry, DEFAULT_CS_CAPACITY};
pub use fib::{Fib, FibEntry};
pub use pit::{DeadNonceList, PitEntry, DEFAULT_DEAD_NONCE_CAPACITY};
pub use rate::{RateMonitor, DEFAULT_THRESHOLD_PER_S, DEFAULT_WINDOW_MS};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ndn::{
    decode_data, decode_interest, decode_nack, encode_interest, encode_nack, tlv, Data, Interest, Nack, NackReason,
    Name,
};
use crate::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FaceId(pub u32);

impl fmt::Display for FaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "face{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceKind {
    App,
    Link,
}

#[derive(Clone, Debug)]
pub struct Face {
    pub id: FaceId,
    pub peer: NodeId,
    pub kind: FaceKind,
    pub delay_us: u64,
    pub per_byte_ns: u64,
}

impl Face {
    /// Time for `len` bytes to cross this face.
    pub fn tx_time_us(&self, len: usize) -> u64 {
        self.delay_us + (len as u64 * self.per_byte_ns).div_ceil(1000)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwarderConfig {
    pub cs_capacity: usize,
    pub rate_window_ms: u64,
    /// Unsatisfied Interests per second; `inf` disables tripping.
    pub rate_threshold_per_s: f64,
    /// Refuse new Interests with Nack(RATE_LIMIT) while the monitor is tripped.
    pub nack_on_trip: bool,
    pub dead_nonce_capacity: usize,
}

impl Default for ForwarderConfig {
    fn default() -> Self {
        Self {
            cs_capacity: DEFAULT_CS_CAPACITY,
            rate_window_ms: DEFAULT_WINDOW_MS,
            rate_threshold_per_s: DEFAULT_THRESHOLD_PER_S,
            nack_on_trip: true,
            dead_nonce_capacity: DEFAULT_DEAD_NONCE_CAPACITY,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub interests_in: u64,
    pub data_in: u64,
    pub nacks_in: u64,
    pub cs_hit: u64,
    pub aggregated: u64,
    pub forwarded: u64,
    pub nacked: u64,
    pub dup_nonce: u64,
    pub unsolicited_dropped: u64,
    pub malformed_dropped: u64,
    /// The part of `malformed_dropped` that carried an Interest type.
    pub malformed_interest: u64,
    pub unsatisfied: u64,
    pub nack_relayed: u64,
    pub cs_evicted: u64,
    pub data_sent: u64,
    pub nacks_sent: u64,
    pub rate_trips: u64,
}

/// Per-face view of the same dispositions, for attributing attack traffic.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FaceCounters {
    pub interests_in: u64,
    pub data_in: u64,
    pub nacks_in: u64,
    pub cs_hit: u64,
    pub aggregated: u64,
    pub forwarded: u64,
    pub nacked: u64,
    pub dup_nonce: u64,
    pub unsolicited_dropped: u64,
    pub malformed_dropped: u64,
    pub unsatisfied: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Send {
        face: FaceId,
        wire: Vec<u8>,
    },
    /// Check the PIT entry for `name` again at `at_us`.
    ExpireAt {
        name: Name,
        at_us: u64,
    },
}

#[derive(Debug)]
pub struct Forwarder {
    pub node: NodeId,
    config: ForwarderConfig,
    faces: BTreeMap<FaceId, Face>,
    fib: Fib,
    pit: pit::Pit,
    cs: ContentStore,
    dead_nonces: DeadNonceList,
    monitor: RateMonitor,
    counters: Counters,
    face_counters: BTreeMap<FaceId, FaceCounters>,
}

impl Forwarder {
    pub fn new(node: NodeId, config: ForwarderConfig) -> Self {
        Self {
            node,
            fib: Fib::new(),
            pit: pit::Pit::new(),
            cs: ContentStore::new(config.cs_capacity),
            dead_nonces: DeadNonceList::new(config.dead_nonce_capacity),
            monitor: RateMonitor::new(config.rate_window_ms, config.rate_threshold_per_s),
            counters: Counters::default(),
            face_counters: BTreeMap::new(),
            faces: BTreeMap::new(),
            config,
        }
    }

    pub fn config(&self) -> &ForwarderConfig {
        &self.config
    }

    /// Registers a face; ids are allocated sequentially.
    pub fn add_face(&mut self, peer: NodeId, kind: FaceKind, delay_us: u64, per_byte_ns: u64) -> FaceId {
        let id = FaceId(self.faces.len() as u32);
        self.faces.insert(
            id,
            Face {
                id,
                peer,
                kind,
                delay_us,
                per_byte_ns,
            },
        );
        self.face_counters.insert(id, FaceCounters::default());
        id
    }

    pub fn face(&self, id: FaceId) -> Option<&Face> {
        self.faces.get(&id)
    }

    pub fn faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.values()
    }

    pub fn add_route(&mut self, prefix: Name, face: FaceId) {
        self.fib.add_route(prefix, face);
    }

    pub fn fib(&self) -> &Fib {
        &self.fib
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn face_counters(&self, face: FaceId) -> FaceCounters {
        self.face_counters.get(&face).cloned().unwrap_or_default()
    }

    pub fn monitor(&self) -> &RateMonitor {
        &self.monitor
    }

    pub fn pit_entry(&self, name: &Name) -> Option<&PitEntry> {
        self.pit.get(name)
    }

    pub fn pit_len(&self) -> usize {
        self.pit.len()
    }

    pub fn cs(&self) -> &ContentStore {
        &self.cs
    }

    /// Removes a cached Data, e.g. one a local consumer rejected.
    pub fn cs_purge(&mut self, name: &Name) -> bool {
        self.cs.remove(name)
    }

    /// interests_in == cs_hit + aggregated + forwarded + nacked + dup_nonce
    /// + malformed Interests.
    pub fn conservation_holds(&self) -> bool {
        let c = &self.counters;
        c.interests_in == c.cs_hit + c.aggregated + c.forwarded + c.nacked + c.dup_nonce + c.malformed_interest
    }

    fn fc(&mut self, face: FaceId) -> &mut FaceCounters {
        self.face_counters.entry(face).or_default()
    }

    /// Decodes `wire` by its outer TLV type and dispatches it.
    pub fn receive(&mut self, face: FaceId, wire: &[u8], now_us: u64) -> Vec<Action> {
        let outer = tlv::Reader::new(wire).read_varnum().ok();
        let decoded = match outer {
            Some(tlv::types::INTEREST) => decode_interest(wire).map(|i| self.on_interest(face, i, now_us)),
            Some(tlv::types::DATA) => decode_data(wire).map(|d| self.on_data(face, d, wire, now_us)),
            Some(tlv::types::NACK) => decode_nack(wire).map(|n| self.on_nack(face, n, now_us)),
            _ => Err(crate::ndn::WireError::UnknownTlvType(outer.unwrap_or(0))),
        };
        decoded.unwrap_or_else(|_| {
            self.counters.malformed_dropped += 1;
            self.fc(face).malformed_dropped += 1;
            if outer == Some(tlv::types::INTEREST) {
                self.counters.interests_in += 1;
                self.counters.malformed_interest += 1;
                self.fc(face).interests_in += 1;
            }
            Vec::new()
        })
    }

    /// Retires the PIT entry for `name` if it is past expiry.
    fn expire_if_due(&mut self, name: &Name, now_us: u64) -> bool {
        let due = self.pit.get(name).is_some_and(|e| !e.is_live(now_us));
        if due {
            let entry = self.pit.remove(name).expect("entry checked above");
            self.counters.unsatisfied += 1;
            for f in entry.downstream_faces() {
                self.fc(f).unsatisfied += 1;
            }
            self.retire_nonces(&entry, now_us);
            self.monitor.record_unsatisfied(now_us);
            self.note_trip();
        }
        due
    }

    fn retire_nonces(&mut self, entry: &PitEntry, now_us: u64) {
        let until = now_us + entry.lifetime_ms * 1000;
        for nonce in &entry.seen_nonces {
            self.dead_nonces.insert(&entry.name, *nonce, until);
        }
    }

    fn note_trip(&mut self) {
        self.counters.rate_trips = self.monitor.trips();
    }

    fn nack(&mut self, face: FaceId, i: &Interest, reason: NackReason) -> Action {
        self.counters.nacked += 1;
        self.counters.nacks_sent += 1;
        self.fc(face).nacked += 1;
        Action::Send {
            face,
            wire: encode_nack(&Nack {
                name: i.name.clone(),
                nonce: i.nonce,
                reason,
            }),
        }
    }

    pub fn on_interest(&mut self, face: FaceId, i: Interest, now_us: u64) -> Vec<Action> {
        self.counters.interests_in += 1;
        self.fc(face).interests_in += 1;
        self.monitor.record_incoming(now_us);
        self.note_trip();
        self.expire_if_due(&i.name, now_us);

        let looped = self.pit.get(&i.name).is_some_and(|e| e.seen_nonces.contains(&i.nonce))
            || self.dead_nonces.contains(&i.name, i.nonce, now_us);
        if looped {
            self.counters.dup_nonce += 1;
            self.fc(face).dup_nonce += 1;
            return Vec::new();
        }

        if let Some(wire) = self.cs.lookup(&i.name, now_us) {
            let wire = wire.to_vec();
            self.counters.cs_hit += 1;
            self.counters.data_sent += 1;
            self.fc(face).cs_hit += 1;
            return vec![Action::Send { face, wire }];
        }

        if let Some(entry) = self.pit.get_mut(&i.name) {
            entry.aggregate(face, i.nonce, i.lifetime_ms, now_us);
            let at_us = entry.expiry_us;
            self.counters.aggregated += 1;
            self.fc(face).aggregated += 1;
            return vec![Action::ExpireAt { name: i.name, at_us }];
        }

        if self.monitor.is_tripped() && self.config.nack_on_trip {
            return vec![self.nack(face, &i, NackReason::RateLimit)];
        }

        let upstream = self
            .fib
            .lookup(&i.name)
            .and_then(|e| e.next_hops.into_iter().find(|&h| h != face));
        let Some(upstream) = upstream else {
            return vec![self.nack(face, &i, NackReason::NoRoute)];
        };

        let mut entry = PitEntry::new(i.name.clone(), face, i.nonce, i.lifetime_ms, now_us);
        entry.upstream = Some((upstream, i.nonce));
        let at_us = entry.expiry_us;
        self.pit.insert(i.name.clone(), entry);
        self.counters.forwarded += 1;
        self.fc(face).forwarded += 1;
        vec![
            Action::Send {
                face: upstream,
                wire: encode_interest(&i),
            },
            Action::ExpireAt { name: i.name, at_us },
        ]
    }

    /// `wire` is the encoding `d` was decoded from; it is what gets cached
    /// and relayed, so downstream sees the exact bytes.
    pub fn on_data(&mut self, face: FaceId, d: Data, wire: &[u8], now_us: u64) -> Vec<Action> {
        self.counters.data_in += 1;
        self.fc(face).data_in += 1;
        self.expire_if_due(&d.name, now_us);

        let Some(entry) = self.pit.remove(&d.name) else {
            self.counters.unsolicited_dropped += 1;
            self.fc(face).unsolicited_dropped += 1;
            return Vec::new();
        };
        self.retire_nonces(&entry, now_us);

        let actions: Vec<Action> = entry
            .downstream_faces()
            .into_iter()
            .filter(|&f| f != face)
            .map(|f| Action::Send {
                face: f,
                wire: wire.to_vec(),
            })
            .collect();
        self.counters.data_sent += actions.len() as u64;

        let evicted = self.cs.insert(d.name, wire.to_vec(), d.freshness_ms, now_us);
        self.counters.cs_evicted += evicted as u64;
        actions
    }

    pub fn on_nack(&mut self, face: FaceId, n: Nack, now_us: u64) -> Vec<Action> {
        self.counters.nacks_in += 1;
        self.fc(face).nacks_in += 1;
        self.expire_if_due(&n.name, now_us);

        let Some(entry) = self.pit.remove(&n.name) else {
            return Vec::new();
        };
        self.retire_nonces(&entry, now_us);
        self.counters.nack_relayed += 1;

        let mut actions = Vec::new();
        for (f, nonce) in &entry.downstream {
            if *f == face {
                continue;
            }
            self.counters.nacks_sent += 1;
            actions.push(Action::Send {
                face: *f,
                wire: encode_nack(&Nack {
                    name: n.name.clone(),
                    nonce: *nonce,
                    reason: n.reason,
                }),
            });
        }
        actions
    }

    /// Timer hook for a scheduled [`Action::ExpireAt`]. Returns whether the
    /// entry expired; stale timers for renewed entries are no-ops.
    pub fn expire_pit(&mut self, name: &Name, now_us: u64) -> bool {
        self.expire_if_due(name, now_us)
    }

    /// Sweeps expired PIT entries, stale CS entries and dead nonces.
    pub fn housekeeping(&mut self, now_us: u64) -> usize {
        let due: Vec<Name> = self
            .pit
            .values()
            .filter(|e| !e.is_live(now_us))
            .map(|e| e.name.clone())
            .collect();
        let mut expired = 0;
        for name in due {
            expired += usize::from(self.expire_if_due(&name, now_us));
        }
        self.cs.sweep(now_us);
        self.dead_nonces.sweep(now_us);
        self.monitor.refresh(now_us);
        self.note_trip();
        expired
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndn::{decode_packet, encode_data, Nonce, Packet, SigType};

    fn n(s: &str) -> Name {
        s.parse().unwrap()
    }

    /// Forwarder with one upstream link face (0) routing `/v` and `k` app faces.
    fn node(k: usize, config: ForwarderConfig) -> (Forwarder, FaceId, Vec<FaceId>) {
        let mut f = Forwarder::new(NodeId(0), config);
        let up = f.add_face(NodeId(1), FaceKind::Link, 1000, 0);
        f.add_route(n("/v"), up);
        let apps = (0..k)
            .map(|i| f.add_face(NodeId(10 + i), FaceKind::App, 0, 0))
            .collect();
        (f, up, apps)
    }

    fn interest(name: &str, nonce: u32) -> Interest {
        Interest::new(n(name), nonce)
    }

    fn data(name: &str, freshness_ms: u64) -> (Data, Vec<u8>) {
        let d = Data::unsigned(n(name), vec![1, 2, 3], freshness_ms, SigType::Unsigned, n("/k"));
        let w = encode_data(&d);
        (d, w)
    }

    fn sends(actions: &[Action]) -> Vec<(FaceId, Packet)> {
        actions
            .iter()
            .filter_map(|a| match a {
                Action::Send { face, wire } => Some((*face, decode_packet(wire).unwrap())),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn ten_same_name_interests_forward_once() {
        let (mut f, up, apps) = node(10, ForwarderConfig::default());
        let mut upstream = 0;
        for (k, face) in apps.iter().enumerate() {
            let acts = f.on_interest(*face, interest("/v/a/1", k as u32), k as u64);
            upstream += sends(&acts).iter().filter(|(fc, _)| *fc == up).count();
        }
        assert_eq!(upstream, 1);
        assert_eq!(f.pit_entry(&n("/v/a/1")).unwrap().downstream.len(), 10);
        assert_eq!(f.counters().aggregated, 9);
        assert!(f.conservation_holds());

        let (d, w) = data("/v/a/1", 1000);
        let out = sends(&f.on_data(up, d, &w, 100));
        assert_eq!(out.len(), 10);
        assert!(f.pit_entry(&n("/v/a/1")).is_none());
    }

    #[test]
    fn cs_hit_serves_identical_bytes() {
        let (mut f, up, apps) = node(2, ForwarderConfig::default());
        f.on_interest(apps[0], interest("/v/x", 1), 0);
        let (d, w) = data("/v/x", 1000);
        f.on_data(up, d, &w, 10);
        let acts = f.on_interest(apps[1], interest("/v/x", 2), 20);
        assert_eq!(acts, vec![Action::Send { face: apps[1], wire: w }]);
        assert_eq!(f.counters().cs_hit, 1);
        assert_eq!(f.counters().forwarded, 1);
        // Past freshness: forwarded again.
        f.on_interest(apps[1], interest("/v/x", 3), 1_100_000);
        assert_eq!(f.counters().forwarded, 2);
    }

    #[test]
    fn duplicate_nonce_dropped() {
        let (mut f, _, apps) = node(2, ForwarderConfig::default());
        f.on_interest(apps[0], interest("/v/a", 7), 0);
        assert!(f.on_interest(apps[1], interest("/v/a", 7), 1).is_empty());
        assert_eq!(f.counters().dup_nonce, 1);
        assert!(f.conservation_holds());
    }

    #[test]
    fn dead_nonce_outlives_entry() {
        let (mut f, up, apps) = node(1, ForwarderConfig::default());
        f.on_interest(apps[0], interest("/v/a", 7), 0);
        let (d, w) = data("/v/a", 0);
        f.on_data(up, d, &w, 10);
        assert!(f.on_interest(apps[0], interest("/v/a", 7), 20).is_empty());
        assert_eq!(f.counters().dup_nonce, 1);
    }

    #[test]
    fn unsolicited_data_dropped_and_not_cached() {
        let (mut f, up, apps) = node(1, ForwarderConfig::default());
        let (d, w) = data("/v/a", 10_000);
        assert!(f.on_data(up, d, &w, 0).is_empty());
        assert_eq!(f.counters().unsolicited_dropped, 1);
        assert!(f.cs().is_empty());
        f.on_interest(apps[0], interest("/v/a", 1), 1);
        assert_eq!(f.counters().cs_hit, 0);
    }

    #[test]
    fn zero_freshness_delivered_not_cached() {
        let (mut f, up, apps) = node(1, ForwarderConfig::default());
        f.on_interest(apps[0], interest("/v/a", 1), 0);
        let (d, w) = data("/v/a", 0);
        assert_eq!(f.on_data(up, d, &w, 1).len(), 1);
        assert!(f.cs().is_empty());
    }

    #[test]
    fn nack_fans_out_with_reason_and_nonces() {
        let (mut f, up, apps) = node(5, ForwarderConfig::default());
        for (k, face) in apps.iter().enumerate() {
            f.on_interest(*face, interest("/v/a", 100 + k as u32), 0);
        }
        let nack = Nack {
            name: n("/v/a"),
            nonce: Nonce::from(100),
            reason: NackReason::Congestion,
        };
        let out = sends(&f.on_nack(up, nack, 5));
        assert_eq!(out.len(), 5);
        for (k, (face, p)) in out.iter().enumerate() {
            assert_eq!(*face, apps[k]);
            let Packet::Nack(nk) = p else { panic!("expected nack") };
            assert_eq!(nk.reason, NackReason::Congestion);
            assert_eq!(nk.nonce, Nonce::from(100 + k as u32));
        }
        assert_eq!(f.counters().nack_relayed, 1);
        let stray = Nack {
            name: n("/v/zzz"),
            nonce: Nonce::from(1),
            reason: NackReason::NoRoute,
        };
        assert!(f.on_nack(up, stray, 6).is_empty());
    }

    #[test]
    fn no_route_nacks() {
        let (mut f, _, apps) = node(1, ForwarderConfig::default());
        let out = sends(&f.on_interest(apps[0], interest("/elsewhere", 1), 0));
        let Packet::Nack(nk) = &out[0].1 else { panic!() };
        assert_eq!(nk.reason, NackReason::NoRoute);
        assert_eq!(f.counters().nacked, 1);
    }

    #[test]
    fn expiry_counts_unsatisfied() {
        let (mut f, _, apps) = node(1, ForwarderConfig::default());
        f.on_interest(apps[0], interest("/v/a", 1), 0);
        assert!(!f.expire_pit(&n("/v/a"), 3_999_999));
        assert!(f.expire_pit(&n("/v/a"), 4_000_000));
        assert_eq!(f.counters().unsatisfied, 1);
        assert_eq!(f.pit_len(), 0);
    }

    #[test]
    fn tripped_monitor_nacks_rate_limit() {
        let cfg = ForwarderConfig {
            rate_threshold_per_s: 10.0,
            ..Default::default()
        };
        let (mut f, _, apps) = node(1, cfg);
        for k in 0..11u32 {
            f.on_interest(apps[0], interest(&format!("/v/u/{k}"), k).with_lifetime(10), 0);
        }
        assert_eq!(f.housekeeping(10_000), 11);
        assert!(f.monitor().is_tripped());
        let out = sends(&f.on_interest(apps[0], interest("/v/new", 99), 20_000));
        let Packet::Nack(nk) = &out[0].1 else { panic!() };
        assert_eq!(nk.reason, NackReason::RateLimit);
        assert!(f.conservation_holds());
    }

    #[test]
    fn malformed_counted_without_state_change() {
        let (mut f, _, apps) = node(1, ForwarderConfig::default());
        let mut w = encode_interest(&interest("/v/a", 1));
        w.truncate(w.len() - 1);
        assert!(f.receive(apps[0], &w, 0).is_empty());
        assert!(f.receive(apps[0], &[0xFF], 0).is_empty());
        assert_eq!(f.counters().malformed_dropped, 2);
        assert_eq!(f.pit_len(), 0);
        assert!(f.conservation_holds());
    }
}
