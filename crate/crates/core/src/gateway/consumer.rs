use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::codec::decode_frame;
use super::naming::{aid_seq_name, parse_name};
use super::stats::{quantize, LatencyStats};
use crate::can::CanFrame;
use crate::ndn::{encode_interest, Data, Interest, Nack, Name, Nonce};
use crate::trust::{validate_data, KeyStore, RejectStage, TrustSchema, Validation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsumerConfig {
    pub pipeline_depth: usize,
    pub max_retries: u32,
    pub interest_lifetime_ms: u64,
    /// Base wait before re-polling after a Nack; doubled per Nack.
    pub retry_delay_ms: u64,
    pub max_backoff: u32,
}

impl Default for ConsumerConfig {
    fn default() -> Self {
        Self {
            pipeline_depth: 1,
            max_retries: 3,
            interest_lifetime_ms: 4000,
            retry_delay_ms: 10,
            max_backoff: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subscription {
    pub aid: u32,
    /// Segment prefix of the producing gateway.
    pub prefix: Name,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConsumerCounters {
    pub interests_sent: u64,
    pub retries: u64,
    pub timeouts: u64,
    pub nacks_in: u64,
    pub data_in: u64,
    pub accepted: u64,
    pub injected: u64,
    pub rejected_type: u64,
    pub rejected_key_name: u64,
    pub rejected_signature: u64,
    pub replay_dropped: u64,
    pub malformed_content: u64,
    pub unrequested: u64,
    pub lost: u64,
}

impl ConsumerCounters {
    pub fn rejected(&self) -> u64 {
        self.rejected_type + self.rejected_key_name + self.rejected_signature
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConsumerAction {
    Express {
        name: Name,
        wire: Vec<u8>,
    },
    Inject {
        frame: CanFrame,
        name: Name,
        seq: u64,
    },
    /// Drop a rejected Data from the local Content Store.
    Purge(Name),
    /// Poll again at this time.
    WakeAt(u64),
}

/// What one Data delivery did, and the validation time it cost.
#[derive(Clone, Debug, Default)]
pub struct DataOutcome {
    pub actions: Vec<ConsumerAction>,
    pub cost_us: u64,
    pub rejected: Option<RejectStage>,
    pub replay: bool,
}

#[derive(Clone, Debug)]
struct InFlight {
    nonce: Nonce,
    emitted_us: u64,
    attempts: u32,
    /// Timeout when `sent`, otherwise the earliest re-send time.
    deadline_us: u64,
    sent: bool,
}

#[derive(Clone, Debug)]
struct SubState {
    sub: Subscription,
    next_expected: u64,
    next_to_request: u64,
    inflight: BTreeMap<u64, InFlight>,
    ready: BTreeMap<u64, CanFrame>,
    skipped: BTreeSet<u64>,
}

/// Consuming side of a gateway: polls far-segment names in sequence,
/// validates what comes back and re-injects accepted frames.
#[derive(Debug)]
pub struct Consumer {
    config: ConsumerConfig,
    validate: bool,
    keys: KeyStore,
    schema: TrustSchema,
    subs: Vec<SubState>,
    rng: ChaCha8Rng,
    backoff: u32,
    resume_at_us: u64,
    counters: ConsumerCounters,
    latency: LatencyStats,
    validation: LatencyStats,
}

impl Consumer {
    pub fn new(
        config: ConsumerConfig,
        subscriptions: Vec<Subscription>,
        keys: KeyStore,
        schema: TrustSchema,
        validate: bool,
        seed: u64,
    ) -> Self {
        let subs = subscriptions
            .into_iter()
            .map(|sub| SubState {
                sub,
                next_expected: 0,
                next_to_request: 0,
                inflight: BTreeMap::new(),
                ready: BTreeMap::new(),
                skipped: BTreeSet::new(),
            })
            .collect();
        Self {
            config,
            validate,
            keys,
            schema,
            subs,
            rng: ChaCha8Rng::seed_from_u64(seed),
            backoff: 1,
            resume_at_us: 0,
            counters: ConsumerCounters::default(),
            latency: LatencyStats::new(),
            validation: LatencyStats::new(),
        }
    }

    pub fn counters(&self) -> &ConsumerCounters {
        &self.counters
    }

    /// Virtual time from Interest emission to validated receipt.
    pub fn latency(&self) -> &LatencyStats {
        &self.latency
    }

    /// Wall time spent validating each delivered Data.
    pub fn validation_stats(&self) -> &LatencyStats {
        &self.validation
    }

    pub fn backoff(&self) -> u32 {
        self.backoff
    }

    pub fn next_expected(&self, aid: u32) -> Option<u64> {
        self.subs.iter().find(|s| s.sub.aid == aid).map(|s| s.next_expected)
    }

    pub fn in_flight(&self) -> usize {
        self.subs.iter().map(|s| s.inflight.len()).sum()
    }

    fn express(&mut self, si: usize, seq: u64, attempts: u32, now_us: u64) -> ConsumerAction {
        let nonce = Nonce::from(self.rng.next_u32());
        let lifetime = self.config.interest_lifetime_ms;
        let sub = &mut self.subs[si];
        let name = aid_seq_name(&sub.sub.prefix, sub.sub.aid, seq);
        sub.inflight.insert(
            seq,
            InFlight {
                nonce,
                emitted_us: now_us,
                attempts,
                deadline_us: now_us + lifetime * 1000,
                sent: true,
            },
        );
        self.counters.interests_sent += 1;
        if attempts > 1 {
            self.counters.retries += 1;
        }
        let wire = encode_interest(&Interest::new(name.clone(), nonce).with_lifetime(lifetime));
        ConsumerAction::Express { name, wire }
    }

    /// Gives up on `seq` and releases any frames queued behind it.
    fn skip(&mut self, si: usize, seq: u64, out: &mut Vec<ConsumerAction>) {
        self.counters.lost += 1;
        let sub = &mut self.subs[si];
        sub.inflight.remove(&seq);
        sub.skipped.insert(seq);
        self.drain(si, out);
    }

    fn drain(&mut self, si: usize, out: &mut Vec<ConsumerAction>) {
        let sub = &mut self.subs[si];
        loop {
            let seq = sub.next_expected;
            if let Some(frame) = sub.ready.remove(&seq) {
                let name = aid_seq_name(&sub.sub.prefix, sub.sub.aid, seq);
                out.push(ConsumerAction::Inject { frame, name, seq });
                self.counters.injected += 1;
            } else if !sub.skipped.remove(&seq) {
                break;
            }
            sub.next_expected += 1;
        }
        sub.next_to_request = sub.next_to_request.max(sub.next_expected);
    }

    fn max_attempts(&self) -> u32 {
        1 + self.config.max_retries
    }

    /// Handles timeouts and due re-sends, then fills free pipeline slots.
    pub fn poll(&mut self, now_us: u64) -> Vec<ConsumerAction> {
        let mut out = Vec::new();
        for si in 0..self.subs.len() {
            let due: Vec<(u64, InFlight)> = self.subs[si]
                .inflight
                .iter()
                .filter(|(_, f)| f.deadline_us <= now_us)
                .map(|(s, f)| (*s, f.clone()))
                .collect();
            for (seq, f) in due {
                if f.sent {
                    self.counters.timeouts += 1;
                }
                if f.sent && f.attempts >= self.max_attempts() {
                    self.skip(si, seq, &mut out);
                } else if f.sent || now_us >= self.resume_at_us {
                    out.push(self.express(si, seq, f.attempts + 1, now_us));
                }
            }
            if now_us < self.resume_at_us {
                continue;
            }
            while self.subs[si].inflight.len() < self.config.pipeline_depth {
                let sub = &mut self.subs[si];
                let seq = sub.next_to_request.max(sub.next_expected);
                sub.next_to_request = seq + 1;
                out.push(self.express(si, seq, 1, now_us));
            }
        }
        if let Some(t) = self.next_wake(now_us) {
            out.push(ConsumerAction::WakeAt(t));
        }
        out
    }

    fn next_wake(&self, now_us: u64) -> Option<u64> {
        let deadlines = self.subs.iter().flat_map(|s| s.inflight.values()).map(|f| {
            if f.sent {
                f.deadline_us
            } else {
                f.deadline_us.max(self.resume_at_us)
            }
        });
        let resume = (self.resume_at_us > now_us).then_some(self.resume_at_us);
        deadlines.chain(resume).filter(|&t| t > now_us).min()
    }

    fn locate(&self, name: &Name) -> Option<(usize, u64)> {
        self.subs.iter().enumerate().find_map(|(si, s)| {
            let (aid, seq) = parse_name(&s.sub.prefix, name).ok()?;
            (aid == s.sub.aid).then_some((si, seq))
        })
    }

    /// Runs validation, the replay check and content decoding, in that order.
    pub fn on_data(&mut self, d: &Data, now_us: u64) -> DataOutcome {
        self.counters.data_in += 1;
        let mut outcome = DataOutcome::default();

        if self.validate {
            let started = Instant::now();
            let verdict = validate_data(d, &self.keys, &self.schema);
            let took = started.elapsed();
            self.validation.push_duration(took);
            outcome.cost_us = quantize(took);
            if let Validation::Reject { stage, .. } = verdict {
                match stage {
                    RejectStage::Type => self.counters.rejected_type += 1,
                    RejectStage::KeyName => self.counters.rejected_key_name += 1,
                    RejectStage::Signature => self.counters.rejected_signature += 1,
                }
                outcome.rejected = Some(stage);
                outcome.actions.push(ConsumerAction::Purge(d.name.clone()));
                self.reexpress_after_reject(&d.name, now_us + outcome.cost_us, &mut outcome.actions);
                return outcome;
            }
        }
        let done_us = now_us + outcome.cost_us;

        let Some((si, seq)) = self.locate(&d.name) else {
            self.counters.unrequested += 1;
            return outcome;
        };
        let sub = &self.subs[si];
        if seq < sub.next_expected || sub.ready.contains_key(&seq) || sub.skipped.contains(&seq) {
            self.counters.replay_dropped += 1;
            outcome.replay = true;
            return outcome;
        }
        let Some(flight) = sub.inflight.get(&seq).cloned() else {
            self.counters.unrequested += 1;
            return outcome;
        };
        let frame = match decode_frame(&d.content) {
            Ok(f) if f.aid() == sub.sub.aid => f,
            _ => {
                self.counters.malformed_content += 1;
                return outcome;
            }
        };

        self.counters.accepted += 1;
        self.backoff = 1;
        self.latency.push_us(done_us.saturating_sub(flight.emitted_us));
        let sub = &mut self.subs[si];
        sub.inflight.remove(&seq);
        sub.ready.insert(seq, frame);
        self.drain(si, &mut outcome.actions);
        outcome.actions.extend(self.poll(done_us));
        outcome
    }

    fn reexpress_after_reject(&mut self, name: &Name, now_us: u64, out: &mut Vec<ConsumerAction>) {
        let Some((si, seq)) = self.locate(name) else { return };
        let Some(f) = self.subs[si].inflight.get(&seq).cloned() else {
            return;
        };
        if f.attempts >= self.max_attempts() {
            self.skip(si, seq, out);
            out.extend(self.poll(now_us));
        } else {
            out.push(self.express(si, seq, f.attempts + 1, now_us));
        }
    }

    /// Nacks count as a failed attempt and double the poll delay.
    pub fn on_nack(&mut self, n: &Nack, now_us: u64) -> Vec<ConsumerAction> {
        self.counters.nacks_in += 1;
        let mut out = Vec::new();
        let Some((si, seq)) = self.locate(&n.name) else {
            return out;
        };
        let Some(f) = self.subs[si].inflight.get(&seq).cloned() else {
            return out;
        };
        if f.nonce != n.nonce || !f.sent {
            return out;
        }
        self.backoff = (self.backoff * 2).min(self.config.max_backoff.max(1));
        let delay = self.config.retry_delay_ms * 1000 * self.backoff as u64;
        self.resume_at_us = self.resume_at_us.max(now_us + delay);
        if f.attempts >= self.max_attempts() {
            self.skip(si, seq, &mut out);
        } else if let Some(entry) = self.subs[si].inflight.get_mut(&seq) {
            entry.sent = false;
            entry.deadline_us = now_us + delay;
        }
        if let Some(t) = self.next_wake(now_us) {
            out.push(ConsumerAction::WakeAt(t));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::codec::encode_frame;
    use crate::gateway::naming::default_prefix;
    use crate::ndn::{decode_interest, NackReason, SigType};
    use crate::trust::{sign_data, KeyRecord};

    fn n(s: &str) -> Name {
        s.parse().unwrap()
    }

    fn key() -> KeyRecord {
        KeyRecord::hmac(n("/vehicle/left/KEY"), b"left")
    }

    fn consumer(depth: usize) -> Consumer {
        let k = key();
        let mut store = KeyStore::new();
        store.trust(k.key_name().clone(), (&k).into()).unwrap();
        let mut schema = TrustSchema::new();
        schema.add_rule(default_prefix("left"), k.key_name().clone()).unwrap();
        let cfg = ConsumerConfig {
            pipeline_depth: depth,
            ..Default::default()
        };
        let subs = vec![Subscription {
            aid: 0x39d,
            prefix: default_prefix("left"),
        }];
        Consumer::new(cfg, subs, store, schema, true, 7)
    }

    fn data(seq: u64, byte: u8) -> Data {
        let frame = CanFrame::new(0x39d, false, &[byte]).unwrap();
        let name = aid_seq_name(&default_prefix("left"), 0x39d, seq);
        let k = key();
        let d = Data::unsigned(
            name,
            encode_frame(&frame),
            1000,
            SigType::HmacSha256,
            k.key_name().clone(),
        );
        sign_data(d, &k).unwrap()
    }

    fn expressed(actions: &[ConsumerAction]) -> Vec<Interest> {
        actions
            .iter()
            .filter_map(|a| match a {
                ConsumerAction::Express { wire, .. } => Some(decode_interest(wire).unwrap()),
                _ => None,
            })
            .collect()
    }

    fn injected(actions: &[ConsumerAction]) -> Vec<u64> {
        actions
            .iter()
            .filter_map(|a| match a {
                ConsumerAction::Inject { seq, .. } => Some(*seq),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn one_interest_per_subscription() {
        let mut c = consumer(1);
        let out = c.poll(0);
        let is = expressed(&out);
        assert_eq!(is.len(), 1);
        assert_eq!(is[0].name.to_string(), "/vehicle/left/can/39d/0");
        assert!(expressed(&c.poll(1)).is_empty());
    }

    #[test]
    fn accepts_in_order_and_requests_next() {
        let mut c = consumer(1);
        c.poll(0);
        let out = c.on_data(&data(0, 5), 100).actions;
        assert_eq!(injected(&out), vec![0]);
        assert_eq!(expressed(&out)[0].name.to_string(), "/vehicle/left/can/39d/1");
        assert_eq!(c.latency().len(), 1);
    }

    #[test]
    fn older_sequence_is_replay_even_if_valid() {
        let mut c = consumer(1);
        c.poll(0);
        c.on_data(&data(0, 5), 10);
        let o = c.on_data(&data(0, 5), 20);
        assert!(o.replay);
        assert!(injected(&o.actions).is_empty());
        assert_eq!(c.counters().replay_dropped, 1);
    }

    #[test]
    fn forged_signature_rejected_and_reexpressed() {
        let mut c = consumer(1);
        let first = expressed(&c.poll(0))[0].nonce;
        let mut d = data(0, 5);
        d.sig_value[0] ^= 1;
        let o = c.on_data(&d, 10);
        assert_eq!(o.rejected, Some(RejectStage::Signature));
        assert!(o.actions.contains(&ConsumerAction::Purge(d.name.clone())));
        let again = expressed(&o.actions);
        assert_eq!(again.len(), 1);
        assert_ne!(again[0].nonce, first);
        assert!(injected(&o.actions).is_empty());
    }

    #[test]
    fn unanswered_through_three_retries_is_lost() {
        let mut c = consumer(1);
        c.poll(0);
        let mut t = 0;
        for _ in 0..3 {
            t += 4_000_000;
            assert_eq!(expressed(&c.poll(t)).len(), 1);
        }
        t += 4_000_000;
        let out = c.poll(t);
        assert_eq!(c.counters().lost, 1);
        assert_eq!(c.counters().retries, 3);
        assert_eq!(expressed(&out)[0].name.to_string(), "/vehicle/left/can/39d/1");
    }

    #[test]
    fn nack_backs_off_doubling_to_cap() {
        let mut c = consumer(1);
        let mut t = 0;
        let mut nonce = expressed(&c.poll(t))[0].nonce;
        let mut seen = Vec::new();
        for _ in 0..3 {
            let nack = Nack {
                name: aid_seq_name(&default_prefix("left"), 0x39d, 0),
                nonce,
                reason: NackReason::RateLimit,
            };
            c.on_nack(&nack, t);
            seen.push(c.backoff());
            // Re-sent only once the backoff delay passes.
            assert!(expressed(&c.poll(t + 1)).is_empty());
            t += 10_000 * c.backoff() as u64;
            let again = expressed(&c.poll(t));
            assert_eq!(again.len(), 1);
            nonce = again[0].nonce;
        }
        assert_eq!(seen, vec![2, 4, 8]);
        let nack = Nack {
            name: aid_seq_name(&default_prefix("left"), 0x39d, 0),
            nonce,
            reason: NackReason::RateLimit,
        };
        c.on_nack(&nack, t);
        assert_eq!(c.backoff(), 8);
        assert_eq!(c.counters().lost, 1);
    }

    #[test]
    fn pipelined_out_of_order_is_reordered() {
        let mut c = consumer(3);
        assert_eq!(expressed(&c.poll(0)).len(), 3);
        assert!(injected(&c.on_data(&data(1, 1), 10).actions).is_empty());
        assert!(injected(&c.on_data(&data(2, 2), 11).actions).is_empty());
        assert_eq!(injected(&c.on_data(&data(0, 0), 12).actions), vec![0, 1, 2]);
    }
}
