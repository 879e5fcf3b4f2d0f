use std::collections::{HashMap, VecDeque};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::codec::encode_frame;
use super::naming::{aid_seq_name, parse_name};
use super::stats::{quantize, LatencyStats};
use crate::can::CanFrame;
use crate::ndn::{encode_data, Data, Interest, Name, SigType};
use crate::trust::{sign_data, KeyRecord, TrustError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProducerMode {
    OnDemand,
    PreGenerated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProducerConfig {
    pub mode: ProducerMode,
    pub freshness_ms: u64,
    /// Recent frames kept per aid for on-demand signing.
    pub frame_log_capacity: usize,
    /// Pre-generated Data kept across all aids, FIFO.
    pub pregen_capacity: usize,
    /// Interests up to this many sequences ahead wait for their frame.
    pub hold_horizon: u64,
    pub max_held: usize,
}

impl Default for ProducerConfig {
    fn default() -> Self {
        Self {
            mode: ProducerMode::PreGenerated,
            freshness_ms: 1000,
            frame_log_capacity: 256,
            pregen_capacity: 4096,
            hold_horizon: 64,
            max_held: 4096,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ProducerCounters {
    pub frames_in: u64,
    pub interests_in: u64,
    pub data_built: u64,
    pub served: u64,
    pub held: u64,
    pub no_response: u64,
    pub bad_name: u64,
    pub pregen_evicted: u64,
    pub frame_log_evicted: u64,
}

/// Reply to one Interest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProducerReply {
    /// Send `wire` after `cost_us` of processing.
    Respond {
        wire: Vec<u8>,
        cost_us: u64,
    },
    /// Waiting for the frame that carries this sequence.
    Held,
    NoResponse,
    BadName,
}

/// Result of observing one CAN frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameOutcome {
    pub name: Name,
    pub seq: u64,
    pub cost_us: u64,
    /// Data for Interests that were held waiting on this frame.
    pub respond: Option<Vec<u8>>,
}

/// Producing side of a gateway: names frames from its segment and serves
/// them as Data.
#[derive(Debug)]
pub struct Producer {
    prefix: Name,
    config: ProducerConfig,
    key: KeyRecord,
    signing: bool,
    next_seq: HashMap<u32, u64>,
    frame_log: HashMap<u32, VecDeque<(u64, CanFrame)>>,
    pregen: HashMap<Name, Vec<u8>>,
    pregen_order: VecDeque<Name>,
    held: HashMap<Name, u64>,
    interest_counts: HashMap<Name, u64>,
    counters: ProducerCounters,
    create: LatencyStats,
    serve: LatencyStats,
}

impl Producer {
    pub fn new(prefix: Name, config: ProducerConfig, key: KeyRecord, signing: bool) -> Self {
        Self {
            prefix,
            config,
            key,
            signing,
            next_seq: HashMap::new(),
            frame_log: HashMap::new(),
            pregen: HashMap::new(),
            pregen_order: VecDeque::new(),
            held: HashMap::new(),
            interest_counts: HashMap::new(),
            counters: ProducerCounters::default(),
            create: LatencyStats::new(),
            serve: LatencyStats::new(),
        }
    }

    pub fn prefix(&self) -> &Name {
        &self.prefix
    }

    pub fn mode(&self) -> ProducerMode {
        self.config.mode
    }

    pub fn signing(&self) -> bool {
        self.signing
    }

    pub fn counters(&self) -> &ProducerCounters {
        &self.counters
    }

    /// Wall time of each Data creation (including signing when enabled).
    pub fn create_stats(&self) -> &LatencyStats {
        &self.create
    }

    /// Wall time to answer an Interest from the pre-generated buffer.
    pub fn serve_stats(&self) -> &LatencyStats {
        &self.serve
    }

    pub fn pregen_len(&self) -> usize {
        self.pregen.len()
    }

    pub fn next_seq(&self, aid: u32) -> u64 {
        self.next_seq.get(&aid).copied().unwrap_or(0)
    }

    /// How many Interests arrived for exactly `name`.
    pub fn interest_count(&self, name: &Name) -> u64 {
        self.interest_counts.get(name).copied().unwrap_or(0)
    }

    fn build(&mut self, name: Name, frame: &CanFrame) -> Result<(Vec<u8>, Duration), TrustError> {
        let started = Instant::now();
        let content = encode_frame(frame);
        let data = if self.signing {
            let unsigned = Data::unsigned(
                name,
                content,
                self.config.freshness_ms,
                self.key.sig_type(),
                self.key.key_name().clone(),
            );
            sign_data(unsigned, &self.key)?
        } else {
            Data::unsigned(
                name,
                content,
                self.config.freshness_ms,
                SigType::Unsigned,
                self.key.key_name().clone(),
            )
        };
        let wire = encode_data(&data);
        let took = started.elapsed();
        self.counters.data_built += 1;
        self.create.push_duration(took);
        Ok((wire, took))
    }

    fn store_pregen(&mut self, name: Name, wire: Vec<u8>) {
        if self.config.pregen_capacity == 0 {
            return;
        }
        self.pregen_order.push_back(name.clone());
        self.pregen.insert(name, wire);
        while self.pregen.len() > self.config.pregen_capacity {
            if let Some(old) = self.pregen_order.pop_front() {
                self.pregen.remove(&old);
                self.counters.pregen_evicted += 1;
            }
        }
    }

    /// Assigns the next sequence for `frame.aid()` and, in pre-generated
    /// mode, builds and buffers its signed Data.
    pub fn on_can_frame(&mut self, frame: &CanFrame, now_us: u64) -> Result<FrameOutcome, TrustError> {
        self.counters.frames_in += 1;
        let aid = frame.aid();
        let seq = self.next_seq(aid);
        self.next_seq.insert(aid, seq + 1);

        let log = self.frame_log.entry(aid).or_default();
        log.push_back((seq, frame.clone()));
        if log.len() > self.config.frame_log_capacity {
            log.pop_front();
            self.counters.frame_log_evicted += 1;
        }

        let name = aid_seq_name(&self.prefix, aid, seq);
        let waiting = self.held.remove(&name).is_some_and(|expiry| expiry > now_us);
        let mut cost_us = 0;
        let mut respond = None;
        match self.config.mode {
            ProducerMode::PreGenerated => {
                let (wire, took) = self.build(name.clone(), frame)?;
                cost_us = quantize(took);
                if waiting {
                    self.counters.served += 1;
                    respond = Some(wire.clone());
                }
                self.store_pregen(name.clone(), wire);
            }
            ProducerMode::OnDemand if waiting => {
                let (wire, took) = self.build(name.clone(), frame)?;
                cost_us = quantize(took);
                self.counters.served += 1;
                respond = Some(wire);
            }
            ProducerMode::OnDemand => {}
        }
        Ok(FrameOutcome {
            name,
            seq,
            cost_us,
            respond,
        })
    }

    fn logged_frame(&self, aid: u32, seq: u64) -> Option<CanFrame> {
        let log = self.frame_log.get(&aid)?;
        let first = log.front()?.0;
        let idx = seq.checked_sub(first)? as usize;
        log.get(idx).map(|(_, f)| f.clone())
    }

    fn hold(&mut self, i: &Interest, now_us: u64) -> ProducerReply {
        if self.held.len() >= self.config.max_held {
            self.held.retain(|_, expiry| *expiry > now_us);
        }
        if self.held.len() >= self.config.max_held && !self.held.contains_key(&i.name) {
            self.counters.no_response += 1;
            return ProducerReply::NoResponse;
        }
        let expiry = now_us + i.lifetime_ms * 1000;
        let e = self.held.entry(i.name.clone()).or_insert(expiry);
        *e = (*e).max(expiry);
        self.counters.held += 1;
        ProducerReply::Held
    }

    pub fn on_interest(&mut self, i: &Interest, now_us: u64) -> Result<ProducerReply, TrustError> {
        self.counters.interests_in += 1;
        *self.interest_counts.entry(i.name.clone()).or_default() += 1;
        let Ok((aid, seq)) = parse_name(&self.prefix, &i.name) else {
            self.counters.bad_name += 1;
            return Ok(ProducerReply::BadName);
        };
        let next = self.next_seq(aid);
        if seq >= next {
            if seq - next < self.config.hold_horizon {
                return Ok(self.hold(i, now_us));
            }
            self.counters.no_response += 1;
            return Ok(ProducerReply::NoResponse);
        }
        match self.config.mode {
            ProducerMode::PreGenerated => {
                let started = Instant::now();
                let hit = self.pregen.get(&i.name).cloned();
                let took = started.elapsed();
                match hit {
                    Some(wire) => {
                        self.serve.push_duration(took);
                        self.counters.served += 1;
                        Ok(ProducerReply::Respond {
                            wire,
                            cost_us: quantize(took),
                        })
                    }
                    None => {
                        self.counters.no_response += 1;
                        Ok(ProducerReply::NoResponse)
                    }
                }
            }
            ProducerMode::OnDemand => match self.logged_frame(aid, seq) {
                Some(frame) => {
                    let (wire, took) = self.build(i.name.clone(), &frame)?;
                    self.counters.served += 1;
                    Ok(ProducerReply::Respond {
                        wire,
                        cost_us: quantize(took),
                    })
                }
                None => {
                    self.counters.no_response += 1;
                    Ok(ProducerReply::NoResponse)
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::naming::default_prefix;
    use crate::ndn::decode_data;
    use crate::trust::{verify_data, TrustedKey};

    fn key() -> KeyRecord {
        KeyRecord::ed25519("/vehicle/left/KEY".parse().unwrap(), [3; 32])
    }

    fn producer(mode: ProducerMode) -> Producer {
        let cfg = ProducerConfig {
            mode,
            ..Default::default()
        };
        Producer::new(default_prefix("left"), cfg, key(), true)
    }

    fn frame(aid: u32, b: u8) -> CanFrame {
        CanFrame::new(aid, false, &[b, b]).unwrap()
    }

    #[test]
    fn pregenerated_buffers_signed_data() {
        let mut p = producer(ProducerMode::PreGenerated);
        let out = p.on_can_frame(&frame(0x39d, 1), 0).unwrap();
        assert_eq!(out.name.to_string(), "/vehicle/left/can/39d/0");
        assert_eq!(p.pregen_len(), 1);
        let i = Interest::new(out.name.clone(), 1u32);
        let ProducerReply::Respond { wire, .. } = p.on_interest(&i, 10).unwrap() else {
            panic!("expected data")
        };
        let d = decode_data(&wire).unwrap();
        assert!(verify_data(&d, &TrustedKey::from(&key())));
    }

    #[test]
    fn on_demand_signs_on_request() {
        let mut p = producer(ProducerMode::OnDemand);
        let a = p.on_can_frame(&frame(0x10, 1), 0).unwrap();
        let b = p.on_can_frame(&frame(0x10, 2), 0).unwrap();
        assert_eq!((a.seq, b.seq), (0, 1));
        assert_eq!(p.pregen_len(), 0);
        assert_eq!(p.create_stats().len(), 0);
        let reply = p.on_interest(&Interest::new(b.name, 1u32), 5).unwrap();
        assert!(matches!(reply, ProducerReply::Respond { .. }));
        assert_eq!(p.create_stats().len(), 1);
    }

    #[test]
    fn future_sequence_is_held_then_answered() {
        for mode in [ProducerMode::OnDemand, ProducerMode::PreGenerated] {
            let mut p = producer(mode);
            let name = aid_seq_name(p.prefix(), 0x10, 0);
            let i = Interest::new(name.clone(), 1u32);
            assert_eq!(p.on_interest(&i, 0).unwrap(), ProducerReply::Held);
            let out = p.on_can_frame(&frame(0x10, 9), 1000).unwrap();
            let d = decode_data(&out.respond.expect("held interest answered")).unwrap();
            assert_eq!(d.name, name);
        }
    }

    #[test]
    fn far_future_and_expired_hold_get_nothing() {
        let mut p = producer(ProducerMode::OnDemand);
        let far = Interest::new(aid_seq_name(p.prefix(), 0x10, 1_000_000), 1u32);
        assert_eq!(p.on_interest(&far, 0).unwrap(), ProducerReply::NoResponse);
        let near = Interest::new(aid_seq_name(p.prefix(), 0x10, 0), 2u32).with_lifetime(10);
        p.on_interest(&near, 0).unwrap();
        assert!(p.on_can_frame(&frame(0x10, 1), 20_000).unwrap().respond.is_none());
    }

    #[test]
    fn bad_names_counted() {
        let mut p = producer(ProducerMode::OnDemand);
        let i = Interest::new("/vehicle/left/can/XYZ/1".parse().unwrap(), 1u32);
        assert_eq!(p.on_interest(&i, 0).unwrap(), ProducerReply::BadName);
        assert_eq!(p.counters().bad_name, 1);
    }

    #[test]
    fn evicted_sequences_unavailable() {
        let cfg = ProducerConfig {
            mode: ProducerMode::PreGenerated,
            pregen_capacity: 2,
            ..Default::default()
        };
        let mut p = Producer::new(default_prefix("left"), cfg, key(), false);
        for b in 0..3 {
            p.on_can_frame(&frame(0x10, b), 0).unwrap();
        }
        assert_eq!(p.counters().pregen_evicted, 1);
        let old = Interest::new(aid_seq_name(p.prefix(), 0x10, 0), 1u32);
        assert_eq!(p.on_interest(&old, 0).unwrap(), ProducerReply::NoResponse);
    }
}
