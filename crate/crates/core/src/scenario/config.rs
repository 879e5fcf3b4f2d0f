use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::attacks::{AttackKind, AttackSpec};
use crate::can::{DEFAULT_BITRATE_BPS, MAX_EXTENDED_ID};
use crate::forwarder::ForwarderConfig;
use crate::gateway::{default_prefix, ConsumerConfig, ProducerConfig};
use crate::ndn::{Name, SigType};
use crate::trust::{KeyRecord, TrustRule, DEFAULT_RSA_BITS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default)]
    pub forwarder: ForwarderConfig,
    #[serde(default)]
    pub consumer: ConsumerConfig,
    #[serde(default)]
    pub keys: Vec<KeySpec>,
    #[serde(default)]
    pub segments: Vec<SegmentSpec>,
    #[serde(default)]
    pub gateways: Vec<GatewaySpec>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub attacks: Vec<AttackSpec>,
    /// Directory relative trace paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeySpec {
    pub name: Name,
    #[serde(rename = "type")]
    pub sig_type: SigType,
    /// Key material is derived deterministically from this string.
    pub seed: String,
    #[serde(default = "default_rsa_bits")]
    pub rsa_bits: usize,
}

fn default_rsa_bits() -> usize {
    DEFAULT_RSA_BITS
}

impl KeySpec {
    pub fn build(&self) -> Result<KeyRecord, ScenarioError> {
        KeyRecord::from_seed(self.name.clone(), self.sig_type, self.seed.as_bytes(), self.rsa_bits)
            .map_err(|e| ScenarioError::Key(format!("{}: {e}", self.name)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub id: String,
    #[serde(default = "default_bitrate")]
    pub bitrate_bps: u64,
    #[serde(default)]
    pub ecus: Vec<EcuSpec>,
}

fn default_bitrate() -> u64 {
    DEFAULT_BITRATE_BPS
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EcuSpec {
    pub id: String,
    /// candump trace this ECU replays; without one it only listens.
    #[serde(default)]
    pub trace: Option<PathBuf>,
    /// Replay at most this many frames.
    #[serde(default)]
    pub limit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewaySpec {
    pub id: String,
    pub segment: String,
    /// Naming prefix for this segment; `/vehicle/<segment>/can` if absent.
    #[serde(default)]
    pub prefix: Option<Name>,
    /// Name of this gateway's signing key (from `keys`).
    pub key: Name,
    #[serde(default = "yes")]
    pub signing: bool,
    #[serde(default)]
    pub producer: ProducerConfig,
    /// Key names whose public halves this gateway holds.
    #[serde(default)]
    pub trust: Vec<Name>,
    #[serde(default)]
    pub schema: Vec<TrustRule>,
    #[serde(default)]
    pub routes: Vec<RouteSpec>,
    #[serde(default)]
    pub subscriptions: Vec<SubscriptionSpec>,
    /// Virtual time the consumer sends its first Interest.
    #[serde(default)]
    pub consumer_start_s: f64,
    /// One-way delay between the forwarder and the local applications.
    #[serde(default = "default_app_delay")]
    pub app_delay_us: u64,
}

fn yes() -> bool {
    true
}

fn default_app_delay() -> u64 {
    20
}

impl GatewaySpec {
    pub fn prefix(&self) -> Name {
        self.prefix.clone().unwrap_or_else(|| default_prefix(&self.segment))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSpec {
    pub prefix: Name,
    /// Neighbouring gateway id.
    pub next_hop: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubscriptionSpec {
    /// Producer prefix on the far segment.
    pub prefix: Name,
    /// Aids to fetch; every aid in the far segment's traces if absent.
    #[serde(default)]
    pub aids: Option<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    #[serde(default = "default_link_delay")]
    pub delay_us: u64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_bps: u64,
}

fn default_link_delay() -> u64 {
    100
}

fn default_bandwidth() -> u64 {
    100_000_000
}

impl LinkSpec {
    /// Serialization time per byte, in ns.
    pub fn per_byte_ns(&self) -> u64 {
        8_000_000_000u64.div_ceil(self.bandwidth_bps.max(1))
    }
}

/// Byte offset to 1-based line number.
/// 1-based line of `offset`; errors at end of input land on the last
/// non-blank line.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.trim_end().len())].matches('\n').count() + 1
}

/// Parses config text; `base_dir` anchors relative trace paths.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        reason: e.message().to_string(),
    })?;
    cfg.base_dir = base_dir.to_path_buf();
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        path: path.into(),
        reason: reason.into(),
    }
}

impl ScenarioConfig {
    pub fn duration_us(&self) -> u64 {
        crate::attacks::secs_to_us(self.duration_s)
    }

    pub fn key_spec(&self, name: &Name) -> Option<&KeySpec> {
        self.keys.iter().find(|k| &k.name == name)
    }

    pub fn gateway(&self, id: &str) -> Option<&GatewaySpec> {
        self.gateways.iter().find(|g| g.id == id)
    }

    pub fn gateway_index(&self, id: &str) -> Option<usize> {
        self.gateways.iter().position(|g| g.id == id)
    }

    /// Gateway producing under `prefix`.
    pub fn producer_of(&self, prefix: &Name) -> Option<&GatewaySpec> {
        self.gateways.iter().find(|g| &g.prefix() == prefix)
    }

    pub fn resolve_trace(&self, trace: &Path) -> PathBuf {
        if trace.is_absolute() {
            trace.to_path_buf()
        } else {
            self.base_dir.join(trace)
        }
    }

    fn linked(&self, a: &str, b: &str) -> bool {
        self.links
            .iter()
            .any(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
    }

    /// Checks every cross-reference and numeric bound.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.duration_s.is_finite() || self.duration_s < 0.0 {
            return Err(invalid(
                "duration_s",
                "must be a finite, non-negative number of seconds",
            ));
        }
        let f = &self.forwarder;
        if f.rate_window_ms == 0 {
            return Err(invalid("forwarder.rate_window_ms", "must be positive"));
        }
        if f.rate_threshold_per_s.is_nan() || f.rate_threshold_per_s <= 0.0 {
            return Err(invalid(
                "forwarder.rate_threshold_per_s",
                "must be positive (inf disables)",
            ));
        }
        if self.consumer.pipeline_depth == 0 {
            return Err(invalid("consumer.pipeline_depth", "must be at least 1"));
        }
        if self.consumer.interest_lifetime_ms == 0 {
            return Err(invalid("consumer.interest_lifetime_ms", "must be positive"));
        }

        let mut key_names = BTreeSet::new();
        for (i, k) in self.keys.iter().enumerate() {
            if !key_names.insert(&k.name) {
                return Err(invalid(format!("keys[{i}].name"), format!("duplicate key {}", k.name)));
            }
            if k.sig_type == SigType::Unsigned {
                return Err(invalid(format!("keys[{i}].type"), "a key cannot be unsigned"));
            }
            if k.sig_type == SigType::RsaSha256 && !SigType::RsaSha256.accepts_len(k.rsa_bits / 8) {
                return Err(invalid(
                    format!("keys[{i}].rsa_bits"),
                    "must be 1024, 2048, 3072 or 4096",
                ));
            }
        }

        let mut node_ids = HashSet::new();
        let mut segments = HashSet::new();
        for (i, s) in self.segments.iter().enumerate() {
            if !segments.insert(s.id.as_str()) {
                return Err(invalid(
                    format!("segments[{i}].id"),
                    format!("duplicate segment {}", s.id),
                ));
            }
            if s.bitrate_bps == 0 {
                return Err(invalid(format!("segments[{i}].bitrate_bps"), "must be positive"));
            }
            for (j, e) in s.ecus.iter().enumerate() {
                if !node_ids.insert(e.id.as_str()) {
                    return Err(invalid(
                        format!("segments[{i}].ecus[{j}].id"),
                        format!("duplicate node {}", e.id),
                    ));
                }
            }
        }

        let mut prefixes = BTreeMap::new();
        for (i, g) in self.gateways.iter().enumerate() {
            let at = |field: &str| format!("gateways[{i}].{field}");
            if !node_ids.insert(g.id.as_str()) {
                return Err(invalid(at("id"), format!("duplicate node {}", g.id)));
            }
            if !segments.contains(g.segment.as_str()) {
                return Err(invalid(at("segment"), format!("unknown segment {}", g.segment)));
            }
            if let Some(other) = prefixes.insert(g.prefix(), &g.id) {
                return Err(invalid(
                    at("prefix"),
                    format!("prefix {} already used by {other}", g.prefix()),
                ));
            }
            let Some(own) = self.key_spec(&g.key) else {
                return Err(invalid(at("key"), format!("unknown key {}", g.key)));
            };
            let _ = own;
            let mut trusted = BTreeSet::new();
            for (j, t) in g.trust.iter().enumerate() {
                if self.key_spec(t).is_none() {
                    return Err(invalid(at(&format!("trust[{j}]")), format!("unknown key {t}")));
                }
                if !trusted.insert(t) {
                    return Err(invalid(at(&format!("trust[{j}]")), format!("{t} listed twice")));
                }
            }
            let mut rule_prefixes = BTreeSet::new();
            for (j, r) in g.schema.iter().enumerate() {
                if !trusted.contains(&r.key) {
                    return Err(invalid(
                        at(&format!("schema[{j}].key")),
                        format!("{} is not among this gateway's trusted keys", r.key),
                    ));
                }
                if !rule_prefixes.insert(&r.prefix) {
                    return Err(invalid(
                        at(&format!("schema[{j}].prefix")),
                        format!("duplicate rule for {}", r.prefix),
                    ));
                }
            }
            if g.producer.frame_log_capacity == 0 {
                return Err(invalid(at("producer.frame_log_capacity"), "must be positive"));
            }
            if !g.consumer_start_s.is_finite() || g.consumer_start_s < 0.0 {
                return Err(invalid(at("consumer_start_s"), "must be a finite, non-negative time"));
            }
        }

        for (i, l) in self.links.iter().enumerate() {
            for (end, id) in [("a", &l.a), ("b", &l.b)] {
                if self.gateway(id).is_none() {
                    return Err(invalid(format!("links[{i}].{end}"), format!("unknown gateway {id}")));
                }
            }
            if l.a == l.b {
                return Err(invalid(format!("links[{i}].b"), "a link needs two distinct gateways"));
            }
            if l.bandwidth_bps == 0 {
                return Err(invalid(format!("links[{i}].bandwidth_bps"), "must be positive"));
            }
            if self.links[..i]
                .iter()
                .any(|o| (o.a == l.a && o.b == l.b) || (o.a == l.b && o.b == l.a))
            {
                return Err(invalid(
                    format!("links[{i}]"),
                    format!("duplicate link {} - {}", l.a, l.b),
                ));
            }
        }

        for (i, g) in self.gateways.iter().enumerate() {
            for (j, r) in g.routes.iter().enumerate() {
                if !self.linked(&g.id, &r.next_hop) {
                    return Err(invalid(
                        format!("gateways[{i}].routes[{j}].next_hop"),
                        format!("{} is not a linked neighbour of {}", r.next_hop, g.id),
                    ));
                }
            }
            for (j, s) in g.subscriptions.iter().enumerate() {
                let path = format!("gateways[{i}].subscriptions[{j}]");
                match self.producer_of(&s.prefix) {
                    None => {
                        return Err(invalid(
                            format!("{path}.prefix"),
                            format!("no gateway produces {}", s.prefix),
                        ))
                    }
                    Some(p) if p.id == g.id => {
                        return Err(invalid(
                            format!("{path}.prefix"),
                            "a gateway cannot subscribe to itself",
                        ))
                    }
                    Some(_) => {}
                }
                for (k, aid) in s.aids.iter().flatten().enumerate() {
                    if *aid > MAX_EXTENDED_ID {
                        return Err(invalid(
                            format!("{path}.aids[{k}]"),
                            format!("{aid:#x} exceeds 29 bits"),
                        ));
                    }
                }
            }
        }

        for (i, a) in self.attacks.iter().enumerate() {
            let at = |field: &str| format!("attacks[{i}].{field}");
            if self.gateway(&a.attach).is_none() {
                return Err(invalid(at("attach"), format!("unknown gateway {}", a.attach)));
            }
            if !a.start_s.is_finite() || a.start_s < 0.0 {
                return Err(invalid(at("start_s"), "must be a finite, non-negative time"));
            }
            if !a.stop_s.is_finite() || a.stop_s < a.start_s {
                return Err(invalid(at("stop_s"), "must not precede start_s"));
            }
            if a.kind.is_scheduled() && !(a.rate_per_s > 0.0 && a.rate_per_s.is_finite()) {
                return Err(invalid(at("rate_per_s"), "must be a positive, finite rate"));
            }
            if let Some(k) = &a.attacker_key {
                if self.key_spec(k).is_none() {
                    return Err(invalid(at("attacker_key"), format!("unknown key {k}")));
                }
            }
            if a.interest_lifetime_ms == 0 {
                return Err(invalid(at("interest_lifetime_ms"), "must be positive"));
            }
            if a.kind == AttackKind::Replay && a.count == Some(0) && a.bypass_forwarder {
                // Nothing to replay; allowed as a null attack.
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
duration_s = 1
[[keys]]
name = "/k/a"
type = "hmac-sha256"
seed = "a"
[[segments]]
id = "left"
[[segments]]
id = "right"
[[gateways]]
id = "ga"
segment = "left"
key = "/k/a"
[[gateways]]
id = "gb"
segment = "right"
key = "/k/a"
trust = ["/k/a"]
schema = [{ prefix = "/vehicle/left/can", key = "/k/a" }]
routes = [{ prefix = "/vehicle/left", next_hop = "ga" }]
subscriptions = [{ prefix = "/vehicle/left/can", aids = [0x10] }]
[[links]]
a = "ga"
b = "gb"
"#;

    fn parse(text: &str) -> Result<ScenarioConfig, ScenarioError> {
        parse_config(text, Path::new("."))
    }

    #[test]
    fn minimal_loads_with_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.forwarder.rate_threshold_per_s, 100.0);
        assert_eq!(cfg.forwarder.cs_capacity, 1024);
        assert_eq!(cfg.segments[0].bitrate_bps, 500_000);
        assert_eq!(cfg.gateways[0].prefix().to_string(), "/vehicle/left/can");
        assert_eq!(cfg.links[0].delay_us, 100);
        assert_eq!(cfg.consumer.max_retries, 3);
    }

    #[test]
    fn infinite_threshold_accepted() {
        let text = format!("{MINIMAL}\n[forwarder]\nrate_threshold_per_s = inf\n");
        assert!(parse(&text).unwrap().forwarder.rate_threshold_per_s.is_infinite());
    }

    #[test]
    fn parse_error_reports_line() {
        let err = parse("duration_s = 1\nsegments = [[\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 2, .. }), "{err:?}");
        let err = parse("duration_s = 1\nbogus = 3\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn unknown_schema_key_is_validation_error() {
        let text = MINIMAL.replace(r#"key = "/k/a" }]"#, r#"key = "/k/zzz" }]"#);
        match parse(&text).unwrap_err() {
            ScenarioError::Validation { path, .. } => assert_eq!(path, "gateways[1].schema[0].key"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn bad_references_are_located() {
        for (from, to, path) in [
            (r#"segment = "right""#, r#"segment = "nowhere""#, "gateways[1].segment"),
            (
                r#"next_hop = "ga""#,
                r#"next_hop = "gb""#,
                "gateways[1].routes[0].next_hop",
            ),
            (r#"b = "gb""#, r#"b = "ga""#, "links[0].b"),
            ("duration_s = 1", "duration_s = -1", "duration_s"),
        ] {
            match parse(&MINIMAL.replacen(from, to, 1)).unwrap_err() {
                ScenarioError::Validation { path: p, .. } => assert_eq!(p, path),
                e => panic!("unexpected {e:?}"),
            }
        }
    }

    #[test]
    fn attack_window_checked() {
        let text = format!("{MINIMAL}\n[[attacks]]\nkind = \"replay\"\nattach = \"gb\"\nstart_s = 2\nstop_s = 1\n");
        match parse(&text).unwrap_err() {
            ScenarioError::Validation { path, .. } => assert_eq!(path, "attacks[0].stop_s"),
            e => panic!("unexpected {e:?}"),
        }
    }
}
