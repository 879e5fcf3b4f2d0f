//! Scripted attacker nodes: unsolicited Data, masquerading, replay, and
//! the two Interest floods.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::can::CanFrame;
use crate::forwarder::FaceCounters;
use crate::gateway::{aid_seq_name, encode_frame, parse_name};
use crate::ndn::{encode_data, encode_interest, Data, Interest, Name, Nonce};
use crate::trust::{sign_data, KeyRecord, RejectStage, TrustError};

/// Sequence numbers at and above these are never published, so names
/// built from them cannot collide with genuine traffic.
pub const UNSOLICITED_SEQ_BASE: u64 = 1 << 40;
pub const UNIQUE_FLOOD_SEQ_BASE: u64 = 1 << 41;

/// Payload the attacker tries to get onto the victim bus.
pub const FORGED_PAYLOAD: [u8; 8] = [0xDE, 0xAD, 0xBE, 0xEF, 0xDE, 0xAD, 0xBE, 0xEF];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    UnsolicitedData,
    Masquerade,
    Replay,
    FloodSameName,
    FloodUniqueNames,
}

impl AttackKind {
    pub const ALL: [AttackKind; 5] = [
        AttackKind::UnsolicitedData,
        AttackKind::Masquerade,
        AttackKind::Replay,
        AttackKind::FloodSameName,
        AttackKind::FloodUniqueNames,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::UnsolicitedData => "unsolicited_data",
            AttackKind::Masquerade => "masquerade",
            AttackKind::Replay => "replay",
            AttackKind::FloodSameName => "flood_same_name",
            AttackKind::FloodUniqueNames => "flood_unique_names",
        }
    }

    /// Floods and unsolicited Data follow a fixed emission schedule; the
    /// others react to observed traffic.
    pub fn is_scheduled(self) -> bool {
        !matches!(self, AttackKind::Masquerade | AttackKind::Replay)
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        AttackKind::ALL.into_iter().find(|k| k.as_str() == norm).ok_or_else(|| {
            let names: Vec<_> = AttackKind::ALL.iter().map(|k| k.as_str()).collect();
            format!("unknown attack kind {s:?}; expected one of {}", names.join(", "))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Gateway whose forwarder the attacker is attached to.
    pub attach: String,
    #[serde(default)]
    pub start_s: f64,
    pub stop_s: f64,
    /// Emissions per second for scheduled kinds.
    #[serde(default = "default_rate")]
    pub rate_per_s: f64,
    /// Upper bound on emissions (forged answers, replays, packets).
    #[serde(default)]
    pub count: Option<u64>,
    /// Victim segment prefix; defaults to the attached consumer's first
    /// subscription.
    #[serde(default)]
    pub target_prefix: Option<Name>,
    /// Victim aid for generated names; defaults to the lowest subscribed aid.
    #[serde(default)]
    pub target_aid: Option<u32>,
    /// Exact name for the same-name flood; defaults to sequence 0 of the
    /// target aid.
    #[serde(default)]
    pub target_name: Option<Name>,
    /// Key the attacker signs with.
    #[serde(default)]
    pub attacker_key: Option<Name>,
    /// Keep the attacker's own key locator instead of claiming the victim's.
    #[serde(default)]
    pub own_locator: bool,
    /// Negative control: the attacker holds the victim's real signing key.
    #[serde(default)]
    pub has_real_key: bool,
    /// Replay straight into the consumer application, skipping the forwarder.
    #[serde(default)]
    pub bypass_forwarder: bool,
    #[serde(default = "default_attack_lifetime")]
    pub interest_lifetime_ms: u64,
    /// One-way delay between the attacker and its forwarder.
    #[serde(default = "default_attacker_delay")]
    pub delay_us: u64,
    /// How long a recorded Data is held before being replayed.
    #[serde(default = "default_replay_delay")]
    pub replay_delay_ms: u64,
}

fn default_rate() -> f64 {
    100.0
}

fn default_attack_lifetime() -> u64 {
    1000
}

fn default_attacker_delay() -> u64 {
    50
}

fn default_replay_delay() -> u64 {
    100
}

impl AttackSpec {
    /// A spec with every optional field at its default.
    pub fn new(kind: AttackKind, attach: impl Into<String>, start_s: f64, stop_s: f64) -> Self {
        Self {
            kind,
            attach: attach.into(),
            start_s,
            stop_s,
            rate_per_s: default_rate(),
            count: None,
            target_prefix: None,
            target_aid: None,
            target_name: None,
            attacker_key: None,
            own_locator: false,
            has_real_key: false,
            bypass_forwarder: false,
            interest_lifetime_ms: default_attack_lifetime(),
            delay_us: default_attacker_delay(),
            replay_delay_ms: default_replay_delay(),
        }
    }

    pub fn start_us(&self) -> u64 {
        secs_to_us(self.start_s)
    }

    pub fn stop_us(&self) -> u64 {
        secs_to_us(self.stop_s)
    }

    /// Emission times for scheduled kinds: one every `1/rate` seconds from
    /// `start`, strictly before `stop`, at most `count`.
    pub fn schedule(&self) -> Vec<u64> {
        if !self.kind.is_scheduled() || self.rate_per_s <= 0.0 {
            return Vec::new();
        }
        let (start, stop) = (self.start_us(), self.stop_us());
        let limit = self.count.unwrap_or(u64::MAX);
        let mut out = Vec::new();
        let mut k = 0u64;
        while k < limit {
            let t = start + (k as f64 * 1e6 / self.rate_per_s).round() as u64;
            if t >= stop {
                break;
            }
            out.push(t);
            k += 1;
        }
        out
    }
}

pub fn secs_to_us(s: f64) -> u64 {
    (s * 1e6).round().max(0.0) as u64
}

/// Resolved inputs an attacker needs from the topology.
#[derive(Clone, Debug)]
pub struct AttackContext {
    pub target_prefix: Name,
    pub target_aid: u32,
    /// Key the attacker signs with.
    pub attacker_key: KeyRecord,
    /// The legitimate producer key for the target prefix.
    pub victim_key: KeyRecord,
    pub freshness_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AttackCounters {
    pub emitted: u64,
    pub observed_interests: u64,
    pub recorded_data: u64,
    pub data_received: u64,
    pub nacks_received: u64,
    /// Attack Data that reached the consumer application.
    pub delivered_to_consumer: u64,
    pub rejected_type: u64,
    pub rejected_key_name: u64,
    pub rejected_signature: u64,
    pub replay_dropped: u64,
    pub accepted: u64,
}

impl AttackCounters {
    pub fn note_verdict(&mut self, rejected: Option<RejectStage>, replay: bool) {
        self.delivered_to_consumer += 1;
        match rejected {
            Some(RejectStage::Type) => self.rejected_type += 1,
            Some(RejectStage::KeyName) => self.rejected_key_name += 1,
            Some(RejectStage::Signature) => self.rejected_signature += 1,
            None if replay => self.replay_dropped += 1,
            None => self.accepted += 1,
        }
    }
}

/// Where an attacker packet goes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Delivery {
    /// Into the attached forwarder through the attacker's face.
    Forwarder,
    /// Directly to the attached gateway's consumer application.
    Consumer,
}

#[derive(Debug)]
pub struct Attacker {
    pub spec: AttackSpec,
    ctx: AttackContext,
    nonce_base: u32,
    answered: HashSet<Name>,
    pending_replays: VecDeque<(u64, Vec<u8>)>,
    emitted_wires: HashSet<Vec<u8>>,
    counters: AttackCounters,
}

impl Attacker {
    pub fn new(spec: AttackSpec, ctx: AttackContext, nonce_base: u32) -> Self {
        Self {
            spec,
            ctx,
            nonce_base,
            answered: HashSet::new(),
            pending_replays: VecDeque::new(),
            emitted_wires: HashSet::new(),
            counters: AttackCounters::default(),
        }
    }

    pub fn kind(&self) -> AttackKind {
        self.spec.kind
    }

    pub fn counters(&self) -> &AttackCounters {
        &self.counters
    }

    pub fn counters_mut(&mut self) -> &mut AttackCounters {
        &mut self.counters
    }

    pub fn context(&self) -> &AttackContext {
        &self.ctx
    }

    fn in_window(&self, now_us: u64) -> bool {
        now_us >= self.spec.start_us() && now_us < self.spec.stop_us()
    }

    fn budget_left(&self) -> bool {
        self.counters.emitted < self.spec.count.unwrap_or(u64::MAX)
    }

    /// Was this exact packet sent by the attacker (as opposed to a
    /// genuine packet it replayed)?
    pub fn is_forged(&self, wire: &[u8]) -> bool {
        self.kind() != AttackKind::Replay && self.emitted_wires.contains(wire)
    }

    /// Name of the same-name flood target.
    pub fn flood_target(&self) -> Name {
        self.spec
            .target_name
            .clone()
            .unwrap_or_else(|| aid_seq_name(&self.ctx.target_prefix, self.ctx.target_aid, 0))
    }

    fn nonce(&self, k: u64) -> Nonce {
        // Distinct for every emission of one attacker.
        Nonce::from(self.nonce_base.wrapping_add(k as u32))
    }

    fn forged_data(&self, name: Name, aid: u32) -> Result<Vec<u8>, TrustError> {
        let extended = aid > crate::can::MAX_STANDARD_ID;
        let frame = CanFrame::new(aid, extended, &FORGED_PAYLOAD).expect("aid within 29 bits");
        let content = encode_frame(&frame);
        let fresh = self.ctx.freshness_ms;
        let data = if self.spec.has_real_key {
            let key = &self.ctx.victim_key;
            sign_data(
                Data::unsigned(name, content, fresh, key.sig_type(), key.key_name().clone()),
                key,
            )?
        } else if self.spec.own_locator {
            let key = &self.ctx.attacker_key;
            sign_data(
                Data::unsigned(name, content, fresh, key.sig_type(), key.key_name().clone()),
                key,
            )?
        } else {
            // Claim the victim's key but sign with our own, cycling the
            // bytes to the length the claimed key type produces so the
            // packet stays well-formed.
            let victim = &self.ctx.victim_key;
            let mut d = Data::unsigned(name, content, fresh, victim.sig_type(), victim.key_name().clone());
            let sig = self.ctx.attacker_key.sign_bytes(&d.signed_portion())?;
            d.sig_value = sig.iter().copied().cycle().take(victim.public().sig_len()).collect();
            d
        };
        Ok(encode_data(&data))
    }

    /// Packet for the `k`-th scheduled emission.
    pub fn scheduled_emission(&mut self, k: u64) -> Result<Vec<u8>, TrustError> {
        let wire = match self.kind() {
            AttackKind::UnsolicitedData => {
                let aid = self.ctx.target_aid;
                let name = aid_seq_name(&self.ctx.target_prefix, aid, UNSOLICITED_SEQ_BASE + k);
                let wire = self.forged_data(name, aid)?;
                self.emitted_wires.insert(wire.clone());
                wire
            }
            AttackKind::FloodSameName => encode_interest(
                &Interest::new(self.flood_target(), self.nonce(k)).with_lifetime(self.spec.interest_lifetime_ms),
            ),
            AttackKind::FloodUniqueNames => {
                let name = aid_seq_name(&self.ctx.target_prefix, self.ctx.target_aid, UNIQUE_FLOOD_SEQ_BASE + k);
                encode_interest(&Interest::new(name, self.nonce(k)).with_lifetime(self.spec.interest_lifetime_ms))
            }
            AttackKind::Masquerade | AttackKind::Replay => unreachable!("reactive kinds are not scheduled"),
        };
        self.counters.emitted += 1;
        Ok(wire)
    }

    /// An Interest seen leaving the attached forwarder toward the producer.
    /// A masquerading attacker answers each name once with forged Data.
    pub fn on_tapped_interest(&mut self, i: &Interest, now_us: u64) -> Result<Option<Vec<u8>>, TrustError> {
        if self.kind() != AttackKind::Masquerade {
            return Ok(None);
        }
        self.counters.observed_interests += 1;
        if !self.in_window(now_us) || !self.budget_left() || !self.ctx.target_prefix.is_prefix_of(&i.name) {
            return Ok(None);
        }
        if !self.answered.insert(i.name.clone()) {
            return Ok(None);
        }
        let aid = parse_name(&self.ctx.target_prefix, &i.name)
            .map(|(aid, _)| aid)
            .unwrap_or(self.ctx.target_aid);
        let wire = self.forged_data(i.name.clone(), aid)?;
        self.emitted_wires.insert(wire.clone());
        self.counters.emitted += 1;
        Ok(Some(wire))
    }

    /// Genuine Data seen arriving at the attached forwarder. A replaying
    /// attacker records it and returns when to resend it.
    pub fn on_tapped_data(&mut self, d: &Data, wire: &[u8], now_us: u64) -> Option<u64> {
        if self.kind() != AttackKind::Replay || !self.in_window(now_us) {
            return None;
        }
        if !self.ctx.target_prefix.is_prefix_of(&d.name) {
            return None;
        }
        let planned = self.counters.recorded_data;
        if planned >= self.spec.count.unwrap_or(u64::MAX) {
            return None;
        }
        self.counters.recorded_data += 1;
        let at = now_us + self.spec.replay_delay_ms * 1000;
        self.pending_replays.push_back((at, wire.to_vec()));
        Some(at)
    }

    /// Replays due at `now_us`, oldest first.
    pub fn due_replays(&mut self, now_us: u64) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        while self.pending_replays.front().is_some_and(|(t, _)| *t <= now_us) {
            let (_, wire) = self.pending_replays.pop_front().expect("front checked");
            self.counters.emitted += 1;
            out.push(wire);
        }
        out
    }

    pub fn delivery(&self) -> Delivery {
        if self.kind() == AttackKind::Replay && self.spec.bypass_forwarder {
            Delivery::Consumer
        } else {
            Delivery::Forwarder
        }
    }
}

/// Attack section of a report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackReport {
    pub kind: AttackKind,
    pub attach: String,
    pub start_s: f64,
    pub stop_s: f64,
    pub counters: AttackCounters,
    /// Dispositions of the attacker's packets at its forwarder face.
    pub forwarder_face: FaceCounters,
    /// Seconds from attack start to the attached forwarder's first rate
    /// monitor trip.
    pub trip_after_start_s: Option<f64>,
    /// Interests for the flood target that reached the producer during
    /// the attack window.
    pub producer_target_interests: Option<u64>,
}
