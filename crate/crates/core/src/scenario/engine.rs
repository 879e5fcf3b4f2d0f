use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ScenarioConfig;
use super::queue::EventQueue;
use super::report::*;
use super::ScenarioError;
use crate::attacks::{self, AttackContext, AttackKind, AttackReport, Attacker};
use crate::can::{load_trace, CanBus, CanFrame, Delivery as BusDelivery, ReplayNode};
use crate::forwarder::{Action, FaceId, FaceKind, Forwarder};
use crate::gateway::{Consumer, ConsumerAction, Producer, ProducerReply, Subscription};
use crate::ndn::{decode_packet, Name, Packet};
use crate::trust::{KeyRecord, KeyStore, TrustSchema, TrustedKey};
use crate::NodeId;

/// Period of forwarder housekeeping sweeps.
const HOUSEKEEPING_US: u64 = 100_000;

/// One timed step, for the optional timing CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TimingEvent {
    pub event_kind: &'static str,
    pub name: String,
    pub t_start_us: u64,
    pub t_end_us: u64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub record_timing: bool,
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub timing: Vec<TimingEvent>,
}

#[derive(Debug)]
enum Event {
    EcuTick(usize),
    BusArbitrate(usize),
    BusDone(usize, BusDelivery),
    ProducerFrame {
        gw: usize,
        frame: CanFrame,
    },
    FwdRx {
        gw: usize,
        face: FaceId,
        wire: Vec<u8>,
    },
    PitExpire {
        gw: usize,
        name: Name,
    },
    ProducerRx {
        gw: usize,
        wire: Vec<u8>,
    },
    ConsumerRx {
        gw: usize,
        wire: Vec<u8>,
        from_attacker: Option<usize>,
    },
    ConsumerWake(usize),
    Inject {
        gw: usize,
        frame: CanFrame,
    },
    AttackStart(usize),
    AttackEmit {
        a: usize,
        k: u64,
    },
    AttackReplay(usize),
    AttackerRx {
        a: usize,
        wire: Vec<u8>,
    },
    Housekeeping(usize),
}

impl Event {
    /// Gateway whose CPU must be free before this event runs.
    fn cpu(&self) -> Option<usize> {
        match self {
            Event::ProducerFrame { gw, .. } | Event::ProducerRx { gw, .. } | Event::ConsumerRx { gw, .. } => Some(*gw),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Endpoint {
    Link { gw: usize, face: FaceId },
    Attacker(usize),
    ProducerApp,
    ConsumerApp,
}

#[derive(Clone, Copy, Debug)]
enum Role {
    Ecu(usize),
    Gateway(usize),
    Attacker,
}

struct Ecu {
    id: String,
    segment: usize,
    node: NodeId,
    replay: Option<ReplayNode>,
    transmitted: u64,
    received: u64,
}

struct Gateway {
    id: String,
    segment: usize,
    node: NodeId,
    prefix: Name,
    fwd: Forwarder,
    producer: Producer,
    consumer: Option<Consumer>,
    validate: bool,
    subs: Vec<Subscription>,
    producer_face: FaceId,
    consumer_face: FaceId,
    endpoints: HashMap<FaceId, Endpoint>,
    face_labels: BTreeMap<FaceId, String>,
    link_free_at: HashMap<FaceId, u64>,
    cpu_free_at: u64,
    app_delay_us: u64,
    consumer_start_us: u64,
    wakes: BTreeSet<u64>,
    interest_names: HashSet<Name>,
    /// Frames the producer captured, by aid, indexed by sequence number.
    captured: BTreeMap<u32, Vec<CanFrame>>,
    injected: BTreeMap<u32, Vec<(u64, CanFrame)>>,
    order_violations: u64,
    delivered_to_ecus: u64,
    attackers: Vec<usize>,
}

struct AttackerNode {
    attacker: Attacker,
    gw: usize,
    face: FaceId,
    producer_gw: usize,
    target_at_start: u64,
}

/// A built scenario, ready to run once.
pub struct Simulation {
    cfg: ScenarioConfig,
    opts: RunOptions,
    queue: EventQueue<Event>,
    now: u64,
    roles: Vec<Role>,
    buses: Vec<CanBus>,
    ecus: Vec<Ecu>,
    gws: Vec<Gateway>,
    attackers: Vec<AttackerNode>,
    timing: Vec<TimingEvent>,
    events: u64,
}

fn key_of(cache: &mut HashMap<Name, KeyRecord>, cfg: &ScenarioConfig, name: &Name) -> Result<KeyRecord, ScenarioError> {
    if let Some(k) = cache.get(name) {
        return Ok(k.clone());
    }
    let spec = cfg
        .key_spec(name)
        .ok_or_else(|| ScenarioError::Key(format!("unknown key {name}")))?;
    let k = spec.build()?;
    cache.insert(name.clone(), k.clone());
    Ok(k)
}

fn invalid(path: String, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        path,
        reason: reason.into(),
    }
}

impl Simulation {
    pub fn build(cfg: &ScenarioConfig, opts: RunOptions) -> Result<Self, ScenarioError> {
        cfg.validate()?;
        let mut keys = HashMap::new();
        let mut roles = Vec::new();
        let mut new_node = |role: Role| {
            roles.push(role);
            NodeId(roles.len() - 1)
        };

        let mut buses = Vec::new();
        let mut ecus = Vec::new();
        let mut segment_aids: Vec<BTreeSet<u32>> = Vec::new();
        for (si, seg) in cfg.segments.iter().enumerate() {
            let mut bus = CanBus::new(seg.id.clone(), seg.bitrate_bps);
            let mut aids = BTreeSet::new();
            for e in &seg.ecus {
                let replay = match &e.trace {
                    Some(path) => {
                        let full = cfg.resolve_trace(path);
                        let trace = load_trace(&full)
                            .map_err(|err| ScenarioError::Trace(format!("{}: {err}", full.display())))?;
                        let node = ReplayNode::new(&trace.records, e.limit);
                        let take = e.limit.unwrap_or(usize::MAX);
                        aids.extend(trace.records.iter().take(take).map(|r| r.frame.aid()));
                        Some(node)
                    }
                    None => None,
                };
                let node = new_node(Role::Ecu(ecus.len()));
                bus.attach(node);
                ecus.push(Ecu {
                    id: e.id.clone(),
                    segment: si,
                    node,
                    replay,
                    transmitted: 0,
                    received: 0,
                });
            }
            buses.push(bus);
            segment_aids.push(aids);
        }
        let seg_index = |id: &str| cfg.segments.iter().position(|s| s.id == id).expect("validated");

        let mut gws = Vec::new();
        for (gi, g) in cfg.gateways.iter().enumerate() {
            let segment = seg_index(&g.segment);
            let node = new_node(Role::Gateway(gi));
            buses[segment].attach(node);
            let mut fwd = Forwarder::new(node, cfg.forwarder.clone());
            let producer_face = fwd.add_face(node, FaceKind::App, g.app_delay_us, 0);
            let consumer_face = fwd.add_face(node, FaceKind::App, g.app_delay_us, 0);
            let prefix = g.prefix();
            fwd.add_route(prefix.clone(), producer_face);
            let producer = Producer::new(
                prefix.clone(),
                g.producer.clone(),
                key_of(&mut keys, cfg, &g.key)?,
                g.signing,
            );
            let endpoints = HashMap::from([
                (producer_face, Endpoint::ProducerApp),
                (consumer_face, Endpoint::ConsumerApp),
            ]);
            let face_labels = BTreeMap::from([
                (producer_face, "app:producer".to_string()),
                (consumer_face, "app:consumer".to_string()),
            ]);
            gws.push(Gateway {
                id: g.id.clone(),
                segment,
                node,
                prefix,
                fwd,
                producer,
                consumer: None,
                validate: g.signing,
                subs: Vec::new(),
                producer_face,
                consumer_face,
                endpoints,
                face_labels,
                link_free_at: HashMap::new(),
                cpu_free_at: 0,
                app_delay_us: g.app_delay_us,
                consumer_start_us: attacks::secs_to_us(g.consumer_start_s),
                wakes: BTreeSet::new(),
                interest_names: HashSet::new(),
                captured: BTreeMap::new(),
                injected: BTreeMap::new(),
                order_violations: 0,
                delivered_to_ecus: 0,
                attackers: Vec::new(),
            });
        }
        let gw_index = |id: &str| cfg.gateway_index(id).expect("validated");

        for l in &cfg.links {
            let (a, b) = (gw_index(&l.a), gw_index(&l.b));
            let per_byte = l.per_byte_ns();
            let (na, nb) = (gws[a].node, gws[b].node);
            let fa = gws[a].fwd.add_face(nb, FaceKind::Link, l.delay_us, per_byte);
            let fb = gws[b].fwd.add_face(na, FaceKind::Link, l.delay_us, per_byte);
            gws[a].endpoints.insert(fa, Endpoint::Link { gw: b, face: fb });
            gws[b].endpoints.insert(fb, Endpoint::Link { gw: a, face: fa });
            gws[a].face_labels.insert(fa, format!("link:{}", l.b));
            gws[b].face_labels.insert(fb, format!("link:{}", l.a));
        }

        for (gi, g) in cfg.gateways.iter().enumerate() {
            for r in &g.routes {
                let nh = gw_index(&r.next_hop);
                let face = gws[gi]
                    .endpoints
                    .iter()
                    .filter_map(|(f, e)| matches!(e, Endpoint::Link { gw, .. } if *gw == nh).then_some(*f))
                    .min()
                    .expect("validated: routes point at linked neighbours");
                gws[gi].fwd.add_route(r.prefix.clone(), face);
            }

            let mut subs = Vec::new();
            for s in &g.subscriptions {
                let producer = cfg.producer_of(&s.prefix).expect("validated");
                let aids: Vec<u32> = match &s.aids {
                    Some(a) => a.clone(),
                    None => segment_aids[seg_index(&producer.segment)].iter().copied().collect(),
                };
                for aid in aids {
                    subs.push(Subscription {
                        aid,
                        prefix: s.prefix.clone(),
                    });
                }
            }
            if !subs.is_empty() {
                let mut store = KeyStore::new();
                for t in &g.trust {
                    let k = key_of(&mut keys, cfg, t)?;
                    store
                        .trust(t.clone(), TrustedKey::from(&k))
                        .map_err(|e| ScenarioError::Key(e.to_string()))?;
                }
                let mut schema = TrustSchema::new();
                for r in &g.schema {
                    schema
                        .add_rule(r.prefix.clone(), r.key.clone())
                        .map_err(|e| ScenarioError::Key(e.to_string()))?;
                }
                let seed = cfg.seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(gi as u64 + 1);
                gws[gi].consumer = Some(Consumer::new(
                    cfg.consumer.clone(),
                    subs.clone(),
                    store,
                    schema,
                    g.signing,
                    seed,
                ));
            }
            gws[gi].subs = subs;
        }

        let mut attackers = Vec::new();
        for (ai, spec) in cfg.attacks.iter().enumerate() {
            let gw = gw_index(&spec.attach);
            let target_prefix = match spec
                .target_prefix
                .clone()
                .or_else(|| gws[gw].subs.first().map(|s| s.prefix.clone()))
            {
                Some(p) => p,
                None => {
                    return Err(invalid(
                        format!("attacks[{ai}].target_prefix"),
                        "required when the attached gateway has no subscriptions",
                    ))
                }
            };
            let Some(producer_gw) = cfg.gateways.iter().position(|g| g.prefix() == target_prefix) else {
                return Err(invalid(
                    format!("attacks[{ai}].target_prefix"),
                    format!("no gateway produces {target_prefix}"),
                ));
            };
            let producer_seg = gws[producer_gw].segment;
            let target_aid = spec
                .target_aid
                .or_else(|| {
                    gws[gw]
                        .subs
                        .iter()
                        .filter(|s| s.prefix == target_prefix)
                        .map(|s| s.aid)
                        .min()
                })
                .or_else(|| segment_aids[producer_seg].first().copied());
            let Some(target_aid) = target_aid else {
                return Err(invalid(format!("attacks[{ai}].target_aid"), "no aid to target"));
            };
            let victim_name = &cfg.gateways[producer_gw].key;
            let victim_key = key_of(&mut keys, cfg, victim_name)?;
            let attacker_key = match &spec.attacker_key {
                Some(name) => key_of(&mut keys, cfg, name)?,
                None => {
                    let bits = cfg.key_spec(victim_name).map_or(1024, |k| k.rsa_bits);
                    let name: Name = format!("/attacker/{ai}/KEY").parse().expect("static name");
                    let seed = format!("attacker-{ai}-{}", cfg.seed);
                    KeyRecord::from_seed(name, victim_key.sig_type(), seed.as_bytes(), bits)
                        .map_err(|e| ScenarioError::Key(e.to_string()))?
                }
            };
            let ctx = AttackContext {
                target_prefix,
                target_aid,
                attacker_key,
                victim_key,
                freshness_ms: cfg.gateways[producer_gw].producer.freshness_ms,
            };
            let node = new_node(Role::Attacker);
            let face = gws[gw].fwd.add_face(node, FaceKind::Link, spec.delay_us, 0);
            gws[gw].endpoints.insert(face, Endpoint::Attacker(ai));
            gws[gw].face_labels.insert(face, format!("attacker:{ai}:{}", spec.kind));
            gws[gw].attackers.push(ai);
            let nonce_base = (cfg.seed as u32) ^ 0xA770_0000u32.wrapping_add((ai as u32) << 20);
            attackers.push(AttackerNode {
                attacker: Attacker::new(spec.clone(), ctx, nonce_base),
                gw,
                face,
                producer_gw,
                target_at_start: 0,
            });
        }

        let mut sim = Self {
            cfg: cfg.clone(),
            opts,
            queue: EventQueue::new(),
            now: 0,
            roles,
            buses,
            ecus,
            gws,
            attackers,
            timing: Vec::new(),
            events: 0,
        };
        sim.seed_events();
        Ok(sim)
    }

    fn seed_events(&mut self) {
        for (i, e) in self.ecus.iter().enumerate() {
            if let Some(t) = e.replay.as_ref().and_then(|r| r.next_due()) {
                self.queue.push(t, Event::EcuTick(i));
            }
        }
        for (i, g) in self.gws.iter_mut().enumerate() {
            if g.consumer.is_some() {
                g.wakes.insert(g.consumer_start_us);
                self.queue.push(g.consumer_start_us, Event::ConsumerWake(i));
            }
            self.queue.push(HOUSEKEEPING_US, Event::Housekeeping(i));
        }
        for (i, a) in self.attackers.iter().enumerate() {
            let spec = &a.attacker.spec;
            self.queue.push(spec.start_us(), Event::AttackStart(i));
            for (k, t) in spec.schedule().into_iter().enumerate() {
                self.queue.push(t, Event::AttackEmit { a: i, k: k as u64 });
            }
        }
    }

    fn violation(&self, node: impl Into<String>, detail: impl Into<String>) -> ScenarioError {
        ScenarioError::Invariant {
            at_us: self.now,
            node: node.into(),
            detail: detail.into(),
        }
    }

    fn push(&mut self, at_us: u64, ev: Event) -> Result<(), ScenarioError> {
        if self.queue.push(at_us, ev) {
            Ok(())
        } else {
            Err(self.violation(
                "engine",
                format!("event scheduled at {at_us}us, before the current time"),
            ))
        }
    }

    fn record(&mut self, kind: &'static str, name: &Name, start: u64, end: u64) {
        if self.opts.record_timing {
            self.timing.push(TimingEvent {
                event_kind: kind,
                name: name.to_string(),
                t_start_us: start,
                t_end_us: end,
            });
        }
    }

    /// Runs to the configured duration and assembles the report.
    pub fn run(mut self) -> Result<RunOutput, ScenarioError> {
        let end = self.cfg.duration_us();
        while self.queue.peek_time().is_some_and(|t| t < end) {
            let (t, ev) = self.queue.pop().expect("peeked");
            if t < self.now {
                return Err(self.violation("engine", "virtual time went backwards"));
            }
            self.now = t;
            if let Some(gw) = ev.cpu() {
                let free = self.gws[gw].cpu_free_at;
                if free > t {
                    self.push(free, ev)?;
                    continue;
                }
            }
            self.events += 1;
            self.handle(ev)?;
        }
        let report = self.report();
        Ok(RunOutput {
            report,
            timing: self.timing,
        })
    }

    fn handle(&mut self, ev: Event) -> Result<(), ScenarioError> {
        let now = self.now;
        match ev {
            Event::EcuTick(e) => {
                let ecu = &mut self.ecus[e];
                let (seg, node) = (ecu.segment, ecu.node);
                let frames = ecu.replay.as_mut().map(|r| r.step(now)).unwrap_or_default();
                ecu.transmitted += frames.len() as u64;
                let next = ecu.replay.as_ref().and_then(|r| r.next_due());
                for f in frames {
                    let idle = self.buses[seg]
                        .transmit(f.with_ts(now), node)
                        .map_err(|err| self.violation(self.ecus[e].id.clone(), err.to_string()))?;
                    if idle {
                        self.push(now, Event::BusArbitrate(seg))?;
                    }
                }
                if let Some(t) = next {
                    self.push(t.max(now), Event::EcuTick(e))?;
                }
            }
            Event::BusArbitrate(seg) => {
                if let Some(d) = self.buses[seg].arbitrate(now) {
                    self.push(now + d.duration_us, Event::BusDone(seg, d))?;
                }
            }
            Event::BusDone(seg, d) => {
                let from_gw = match self.roles[d.sender.0] {
                    Role::Gateway(g) => Some(g),
                    _ => None,
                };
                for r in &d.receivers {
                    match self.roles[r.0] {
                        Role::Ecu(e) => {
                            self.ecus[e].received += 1;
                            if let Some(g) = from_gw {
                                self.gws[g].delivered_to_ecus += 1;
                            }
                        }
                        Role::Gateway(g) => self.push(
                            now,
                            Event::ProducerFrame {
                                gw: g,
                                frame: d.frame.clone(),
                            },
                        )?,
                        Role::Attacker => {}
                    }
                }
                if self.buses[seg].finish() {
                    self.push(now, Event::BusArbitrate(seg))?;
                }
            }
            Event::ProducerFrame { gw, frame } => {
                let out = self.gws[gw]
                    .producer
                    .on_can_frame(&frame, now)
                    .map_err(|e| ScenarioError::Key(e.to_string()))?;
                let g = &mut self.gws[gw];
                let log = g.captured.entry(frame.aid()).or_default();
                if log.len() as u64 != out.seq {
                    let detail = format!("sequence {} assigned after {} captured frames", out.seq, log.len());
                    return Err(self.violation(self.gws[gw].id.clone(), detail));
                }
                log.push(frame);
                g.cpu_free_at = now + out.cost_us;
                let at = now + out.cost_us + g.app_delay_us;
                let face = g.producer_face;
                self.record("produce", &out.name, now, now + out.cost_us);
                if let Some(wire) = out.respond {
                    self.push(at, Event::FwdRx { gw, face, wire })?;
                }
            }
            Event::FwdRx { gw, face, wire } => self.forwarder_rx(gw, face, wire)?,
            Event::PitExpire { gw, name } => {
                self.gws[gw].fwd.expire_pit(&name, now);
            }
            Event::ProducerRx { gw, wire } => {
                let Ok(Packet::Interest(i)) = decode_packet(&wire) else {
                    return Ok(());
                };
                let reply = self.gws[gw]
                    .producer
                    .on_interest(&i, now)
                    .map_err(|e| ScenarioError::Key(e.to_string()))?;
                if let ProducerReply::Respond { wire, cost_us } = reply {
                    let g = &mut self.gws[gw];
                    g.cpu_free_at = now + cost_us;
                    let (at, face) = (now + cost_us + g.app_delay_us, g.producer_face);
                    self.record("serve", &i.name, now, now + cost_us);
                    self.push(at, Event::FwdRx { gw, face, wire })?;
                }
            }
            Event::ConsumerRx {
                gw,
                wire,
                from_attacker,
            } => self.consumer_rx(gw, wire, from_attacker)?,
            Event::ConsumerWake(gw) => {
                let g = &mut self.gws[gw];
                g.wakes = g.wakes.split_off(&(now + 1));
                if now < g.consumer_start_us {
                    return Ok(());
                }
                let actions = match g.consumer.as_mut() {
                    Some(c) => c.poll(now),
                    None => return Ok(()),
                };
                self.apply_consumer(gw, actions, now)?;
            }
            Event::Inject { gw, frame } => {
                let (seg, node) = (self.gws[gw].segment, self.gws[gw].node);
                let idle = self.buses[seg]
                    .transmit(frame.with_ts(now), node)
                    .map_err(|err| self.violation(self.gws[gw].id.clone(), err.to_string()))?;
                if idle {
                    self.push(now, Event::BusArbitrate(seg))?;
                }
            }
            Event::Housekeeping(gw) => {
                self.gws[gw].fwd.housekeeping(now);
                self.push(now + HOUSEKEEPING_US, Event::Housekeeping(gw))?;
            }
            Event::AttackStart(a) => {
                let node = &mut self.attackers[a];
                if node.attacker.kind() == AttackKind::FloodSameName {
                    let target = node.attacker.flood_target();
                    node.target_at_start = self.gws[node.producer_gw].producer.interest_count(&target);
                }
            }
            Event::AttackEmit { a, k } => {
                let node = &mut self.attackers[a];
                let wire = node
                    .attacker
                    .scheduled_emission(k)
                    .map_err(|e| ScenarioError::Key(e.to_string()))?;
                let (gw, face, at) = (node.gw, node.face, now + node.attacker.spec.delay_us);
                self.push(at, Event::FwdRx { gw, face, wire })?;
            }
            Event::AttackReplay(a) => {
                let node = &mut self.attackers[a];
                let wires = node.attacker.due_replays(now);
                let (gw, face, at) = (node.gw, node.face, now + node.attacker.spec.delay_us);
                let direct = node.attacker.delivery() == attacks::Delivery::Consumer;
                for wire in wires {
                    if direct {
                        self.push(
                            at,
                            Event::ConsumerRx {
                                gw,
                                wire,
                                from_attacker: Some(a),
                            },
                        )?;
                    } else {
                        self.push(at, Event::FwdRx { gw, face, wire })?;
                    }
                }
            }
            Event::AttackerRx { a, wire } => {
                let c = self.attackers[a].attacker.counters_mut();
                match decode_packet(&wire) {
                    Ok(Packet::Data(_)) => c.data_received += 1,
                    Ok(Packet::Nack(_)) => c.nacks_received += 1,
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn forwarder_rx(&mut self, gw: usize, face: FaceId, wire: Vec<u8>) -> Result<(), ScenarioError> {
        let now = self.now;
        let packet = decode_packet(&wire).ok();
        let from_link = matches!(self.gws[gw].endpoints.get(&face), Some(Endpoint::Link { .. }));
        match &packet {
            Some(Packet::Interest(i)) => {
                self.gws[gw].interest_names.insert(i.name.clone());
            }
            Some(Packet::Data(d)) if from_link => {
                for ai in self.gws[gw].attackers.clone() {
                    if let Some(at) = self.attackers[ai].attacker.on_tapped_data(d, &wire, now) {
                        self.push(at, Event::AttackReplay(ai))?;
                    }
                }
            }
            _ => {}
        }
        let actions = self.gws[gw].fwd.receive(face, &wire, now);
        if !self.gws[gw].fwd.conservation_holds() {
            let c = self.gws[gw].fwd.counters();
            let detail = format!(
                "interest conservation broken: in={} cs_hit={} aggregated={} forwarded={} nacked={} dup_nonce={} malformed={}",
                c.interests_in, c.cs_hit, c.aggregated, c.forwarded, c.nacked, c.dup_nonce, c.malformed_interest
            );
            return Err(self.violation(self.gws[gw].id.clone(), detail));
        }
        self.apply_forwarder(gw, actions)
    }

    fn apply_forwarder(&mut self, gw: usize, actions: Vec<Action>) -> Result<(), ScenarioError> {
        let now = self.now;
        for action in actions {
            match action {
                Action::ExpireAt { name, at_us } => self.push(at_us.max(now), Event::PitExpire { gw, name })?,
                Action::Send { face, wire } => {
                    let packet = decode_packet(&wire).ok();
                    if let Some(Packet::Data(d)) = &packet {
                        if !self.gws[gw].interest_names.contains(&d.name) {
                            let detail = format!("Data {} sent without any Interest for it", d.name);
                            return Err(self.violation(self.gws[gw].id.clone(), detail));
                        }
                    }
                    let Some(endpoint) = self.gws[gw].endpoints.get(&face).copied() else {
                        return Err(self.violation(self.gws[gw].id.clone(), format!("send on unknown {face}")));
                    };
                    match endpoint {
                        Endpoint::Link {
                            gw: peer,
                            face: peer_face,
                        } => {
                            if let Some(Packet::Interest(i)) = &packet {
                                self.tap_interest(gw, i)?;
                            }
                            let at = self.link_arrival(gw, face, wire.len());
                            self.push(
                                at,
                                Event::FwdRx {
                                    gw: peer,
                                    face: peer_face,
                                    wire,
                                },
                            )?;
                        }
                        Endpoint::Attacker(a) => {
                            let at = now + self.attackers[a].attacker.spec.delay_us;
                            self.push(at, Event::AttackerRx { a, wire })?;
                        }
                        Endpoint::ProducerApp => {
                            let at = now + self.gws[gw].app_delay_us;
                            self.push(at, Event::ProducerRx { gw, wire })?;
                        }
                        Endpoint::ConsumerApp => {
                            let at = now + self.gws[gw].app_delay_us;
                            self.push(
                                at,
                                Event::ConsumerRx {
                                    gw,
                                    wire,
                                    from_attacker: None,
                                },
                            )?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// An Interest leaving `gw` over a link, as seen by attackers there.
    fn tap_interest(&mut self, gw: usize, i: &crate::ndn::Interest) -> Result<(), ScenarioError> {
        let now = self.now;
        for ai in self.gws[gw].attackers.clone() {
            let node = &mut self.attackers[ai];
            let forged = node
                .attacker
                .on_tapped_interest(i, now)
                .map_err(|e| ScenarioError::Key(e.to_string()))?;
            if let Some(wire) = forged {
                let (face, at) = (node.face, now + node.attacker.spec.delay_us);
                self.push(at, Event::FwdRx { gw, face, wire })?;
            }
        }
        Ok(())
    }

    /// Serializes `len` bytes onto a link face behind anything already
    /// queued there and returns the arrival time at the far end.
    fn link_arrival(&mut self, gw: usize, face: FaceId, len: usize) -> u64 {
        let g = &mut self.gws[gw];
        let f = g.fwd.face(face).expect("face exists");
        let (delay, per_byte) = (f.delay_us, f.per_byte_ns);
        let free = g.link_free_at.entry(face).or_insert(0);
        let start = (*free).max(self.now);
        let done = start + (len as u64 * per_byte).div_ceil(1000);
        *free = done;
        done + delay
    }

    fn consumer_rx(&mut self, gw: usize, wire: Vec<u8>, from_attacker: Option<usize>) -> Result<(), ScenarioError> {
        let now = self.now;
        let Some(consumer) = self.gws[gw].consumer.as_mut() else {
            return Ok(());
        };
        match decode_packet(&wire) {
            Ok(Packet::Data(d)) => {
                let out = consumer.on_data(&d, now);
                let done = now + out.cost_us;
                self.gws[gw].cpu_free_at = done;
                if self.gws[gw].validate {
                    self.record("validate", &d.name, now, done);
                }
                match from_attacker {
                    Some(a) => self.attackers[a]
                        .attacker
                        .counters_mut()
                        .note_verdict(out.rejected, out.replay),
                    None => {
                        for ai in self.gws[gw].attackers.clone() {
                            let att = &mut self.attackers[ai].attacker;
                            if att.is_forged(&wire) {
                                att.counters_mut().note_verdict(out.rejected, out.replay);
                            }
                        }
                    }
                }
                self.apply_consumer(gw, out.actions, done)
            }
            Ok(Packet::Nack(n)) => {
                let actions = consumer.on_nack(&n, now);
                self.apply_consumer(gw, actions, now)
            }
            _ => Ok(()),
        }
    }

    fn apply_consumer(&mut self, gw: usize, actions: Vec<ConsumerAction>, at: u64) -> Result<(), ScenarioError> {
        for action in actions {
            match action {
                ConsumerAction::Express { name, wire } => {
                    self.record("express", &name, at, at);
                    let g = &self.gws[gw];
                    let (face, t) = (g.consumer_face, at + g.app_delay_us);
                    self.push(t, Event::FwdRx { gw, face, wire })?;
                }
                ConsumerAction::Inject { frame, name, seq } => {
                    let g = &mut self.gws[gw];
                    let stream = g.injected.entry(frame.aid()).or_default();
                    if stream.last().is_some_and(|(prev, _)| *prev >= seq) {
                        g.order_violations += 1;
                        let detail = format!("{name} injected out of order");
                        return Err(self.violation(self.gws[gw].id.clone(), detail));
                    }
                    stream.push((seq, frame.clone()));
                    self.record("inject", &name, at, at);
                    self.push(at, Event::Inject { gw, frame })?;
                }
                ConsumerAction::Purge(name) => {
                    self.gws[gw].fwd.cs_purge(&name);
                }
                ConsumerAction::WakeAt(t) => {
                    let t = t.max(at);
                    if self.gws[gw].wakes.insert(t) {
                        self.push(t, Event::ConsumerWake(gw))?;
                    }
                }
            }
        }
        Ok(())
    }

    fn report(&self) -> MetricsReport {
        let mut nodes = BTreeMap::new();
        let mut fidelity = BTreeMap::new();
        let mut latency = BTreeMap::new();
        for g in &self.gws {
            let faces = g
                .face_labels
                .iter()
                .map(|(id, label)| {
                    (
                        label.clone(),
                        FaceReport {
                            id: id.0,
                            counters: g.fwd.face_counters(*id),
                        },
                    )
                })
                .collect();
            let monitor = g.fwd.monitor();
            let consumer_counters = g.consumer.as_ref().map(|c| c.counters().clone()).unwrap_or_default();
            nodes.insert(
                g.id.clone(),
                NodeReport {
                    segment: self.cfg.segments[g.segment].id.clone(),
                    prefix: g.prefix.to_string(),
                    forwarder: g.fwd.counters().clone(),
                    faces,
                    rate_monitor: RateReport {
                        tripped: monitor.is_tripped(),
                        trips: monitor.trips(),
                        first_trip_s: monitor.first_trip_us().map(|t| t as f64 / 1e6),
                    },
                    pit_len: g.fwd.pit_len(),
                    cs_len: g.fwd.cs().len(),
                    producer: ProducerReport {
                        mode: g.producer.mode(),
                        signing: g.producer.signing(),
                        counters: g.producer.counters().clone(),
                    },
                    consumer: ConsumerReport {
                        enabled: g.consumer.is_some(),
                        validate: g.consumer.is_some() && g.validate,
                        subscriptions: g.subs.len(),
                        counters: consumer_counters,
                    },
                },
            );

            let Some(consumer) = &g.consumer else { continue };
            let mut fid = FidelityReport {
                delivered_to_ecus: g.delivered_to_ecus,
                order_violations: g.order_violations,
                ..Default::default()
            };
            for s in &g.subs {
                let producer = self.gws.iter().find(|p| p.prefix == s.prefix).expect("validated");
                let captured = producer.captured.get(&s.aid).map(Vec::as_slice).unwrap_or_default();
                let injected = g.injected.get(&s.aid).map(Vec::as_slice).unwrap_or_default();
                fid.frames_in += captured.len() as u64;
                fid.frames_out += injected.len() as u64;
                let mut identical = 0u64;
                let mut hasher = Sha256::new();
                for (seq, frame) in injected {
                    if captured.get(*seq as usize).is_some_and(|c| c.same_content(frame)) {
                        identical += 1;
                    } else {
                        fid.mismatched += 1;
                    }
                    hasher.update(format!("{frame}\n").as_bytes());
                }
                fid.byte_identical += identical;
                fid.missing += (captured.len() as u64).saturating_sub(identical);
                fid.streams.insert(
                    format!("{}/{:x}", s.prefix, s.aid),
                    StreamDigest {
                        count: injected.len() as u64,
                        sha256: hex::encode(hasher.finalize()),
                    },
                );
            }
            fidelity.insert(g.id.clone(), fid);

            if let Some(first) = g.subs.first() {
                let p = self.gws.iter().find(|p| p.prefix == first.prefix).expect("validated");
                latency.insert(
                    g.id.clone(),
                    LatencyEntry {
                        producer_gateway: p.id.clone(),
                        mode: p.producer.mode(),
                        signing: p.producer.signing(),
                        producer: p.producer.create_stats().summary(),
                        consumer: consumer.latency().summary(),
                        validation: consumer.validation_stats().summary(),
                    },
                );
            }
        }

        let attacks = self
            .attackers
            .iter()
            .map(|n| {
                let spec = &n.attacker.spec;
                let g = &self.gws[n.gw];
                let start = spec.start_us();
                let producer_target_interests = (spec.kind == AttackKind::FloodSameName).then(|| {
                    let count = self.gws[n.producer_gw]
                        .producer
                        .interest_count(&n.attacker.flood_target());
                    count - n.target_at_start.min(count)
                });
                AttackReport {
                    kind: spec.kind,
                    attach: spec.attach.clone(),
                    start_s: spec.start_s,
                    stop_s: spec.stop_s,
                    counters: n.attacker.counters().clone(),
                    forwarder_face: g.fwd.face_counters(n.face),
                    trip_after_start_s: g
                        .fwd
                        .monitor()
                        .first_trip_us()
                        .filter(|t| *t >= start)
                        .map(|t| (t - start) as f64 / 1e6),
                    producer_target_interests,
                }
            })
            .collect();

        let ecus = self
            .ecus
            .iter()
            .map(|e| {
                (
                    e.id.clone(),
                    EcuReport {
                        segment: self.cfg.segments[e.segment].id.clone(),
                        transmitted: e.transmitted,
                        received: e.received,
                    },
                )
            })
            .collect();
        let buses = self
            .buses
            .iter()
            .map(|b| {
                (
                    b.id().to_string(),
                    BusReport {
                        transmitted: b.transmitted(),
                        delivered: b.delivered(),
                    },
                )
            })
            .collect();

        MetricsReport {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioEcho {
                name: self.cfg.name.clone(),
                seed: self.cfg.seed,
                duration_s: self.cfg.duration_s,
                config: serde_json::to_value(&self.cfg).unwrap_or_default(),
            },
            nodes,
            ecus,
            buses,
            attacks,
            fidelity,
            latency,
            reference: ReferenceTable::default(),
            events_processed: self.events,
            end_time_us: self.now,
        }
    }
}

/// Builds and runs `cfg`.
pub fn run_with(cfg: &ScenarioConfig, opts: RunOptions) -> Result<RunOutput, ScenarioError> {
    Simulation::build(cfg, opts)?.run()
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MetricsReport, ScenarioError> {
    Ok(run_with(cfg, RunOptions::default())?.report)
}

pub fn write_timing_csv(path: impl AsRef<std::path::Path>, events: &[TimingEvent]) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    let io = |e: csv::Error| ScenarioError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(io)?;
    w.write_record(["event_kind", "name", "t_start_us", "t_end_us"])
        .map_err(io)?;
    for e in events {
        w.serialize(e).map_err(io)?;
    }
    w.flush()
        .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_config;

    const TINY: &str = r#"
duration_s = 0.5
[[keys]]
name = "/k/a"
type = "hmac-sha256"
seed = "a"
[[segments]]
id = "left"
[[gateways]]
id = "ga"
segment = "left"
key = "/k/a"
"#;

    #[test]
    fn scheduling_into_the_past_is_an_invariant_violation() {
        let cfg = parse_config(TINY, std::path::Path::new(".")).unwrap();
        let mut sim = Simulation::build(&cfg, RunOptions::default()).unwrap();
        sim.queue.push(1_000, Event::Housekeeping(0));
        while sim.queue.pop().is_some_and(|(t, _)| t < 1_000) {}
        sim.now = 1_000;
        let err = sim.push(999, Event::Housekeeping(0)).unwrap_err();
        assert!(err.is_invariant(), "{err:?}");
        assert!(sim.push(1_000, Event::Housekeeping(0)).is_ok());
    }

    #[test]
    fn idle_scenario_runs_to_completion() {
        let cfg = parse_config(TINY, std::path::Path::new(".")).unwrap();
        let report = run_scenario(&cfg).unwrap();
        assert_eq!(report.nodes["ga"].forwarder, crate::forwarder::Counters::default());
        assert!(report.events_processed > 0);
    }
}
