use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use super::ScenarioError;
use crate::attacks::AttackReport;
use crate::forwarder::{Counters, FaceCounters};
use crate::gateway::{ConsumerCounters, LatencySummary, ProducerCounters, ProducerMode};

pub const SCHEMA_VERSION: u32 = 1;

/// Report subtrees that carry wall-clock measurements and legitimately
/// differ between otherwise identical runs.
pub const VOLATILE_PATHS: &[&str] = &["latency"];

/// Final-state gauges. Measured crypto cost can shift event times by a
/// quantum, which moves cache and PIT expiries across the end of the run.
pub const VOLATILE_LEAVES: &[&str] = &["end_time_us", "cs_len", "pit_len"];

#[derive(Clone, Debug, Serialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub scenario: ScenarioEcho,
    pub nodes: BTreeMap<String, NodeReport>,
    pub ecus: BTreeMap<String, EcuReport>,
    pub buses: BTreeMap<String, BusReport>,
    pub attacks: Vec<AttackReport>,
    /// Keyed by consuming gateway.
    pub fidelity: BTreeMap<String, FidelityReport>,
    /// Keyed by consuming gateway.
    pub latency: BTreeMap<String, LatencyEntry>,
    pub reference: ReferenceTable,
    pub events_processed: u64,
    pub end_time_us: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioEcho {
    pub name: String,
    pub seed: u64,
    pub duration_s: f64,
    pub config: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeReport {
    pub segment: String,
    pub prefix: String,
    pub forwarder: Counters,
    pub faces: BTreeMap<String, FaceReport>,
    pub rate_monitor: RateReport,
    pub pit_len: usize,
    pub cs_len: usize,
    pub producer: ProducerReport,
    pub consumer: ConsumerReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct FaceReport {
    pub id: u32,
    pub counters: FaceCounters,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub tripped: bool,
    pub trips: u64,
    pub first_trip_s: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProducerReport {
    pub mode: ProducerMode,
    pub signing: bool,
    pub counters: ProducerCounters,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsumerReport {
    pub enabled: bool,
    pub validate: bool,
    pub subscriptions: usize,
    pub counters: ConsumerCounters,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EcuReport {
    pub segment: String,
    pub transmitted: u64,
    pub received: u64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BusReport {
    pub transmitted: u64,
    pub delivered: u64,
}

/// One injected-frame stream, summarized.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StreamDigest {
    pub count: u64,
    /// SHA-256 over the candump rendering of each frame, newline separated.
    pub sha256: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FidelityReport {
    /// Frames the far producers captured on subscribed aids.
    pub frames_in: u64,
    /// Frames this gateway put on its own bus.
    pub frames_out: u64,
    /// Injected frames equal to the captured frame with the same sequence.
    pub byte_identical: u64,
    pub mismatched: u64,
    pub order_violations: u64,
    /// Captured frames never injected.
    pub missing: u64,
    /// Injected frames heard by local ECUs.
    pub delivered_to_ecus: u64,
    /// Keyed by `<prefix>/<lowercase hex aid>`.
    pub streams: BTreeMap<String, StreamDigest>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LatencyEntry {
    pub producer_gateway: String,
    pub mode: ProducerMode,
    pub signing: bool,
    /// Wall time to build (and sign) one Data at the producer.
    pub producer: LatencySummary,
    /// Virtual time from Interest to accepted Data at the consumer.
    pub consumer: LatencySummary,
    /// Wall time spent validating at the consumer.
    pub validation: LatencySummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReferenceCell {
    pub mode: ProducerMode,
    pub signing: bool,
    pub producer_mean_s: f64,
    pub producer_stdev_s: f64,
    pub consumer_mean_s: f64,
    pub consumer_stdev_s: f64,
}

/// Published Raspberry Pi testbed figures, kept for side-by-side reading.
#[derive(Clone, Debug, Serialize)]
pub struct ReferenceTable {
    pub asserted: bool,
    pub note: String,
    pub cells: Vec<ReferenceCell>,
}

impl Default for ReferenceTable {
    fn default() -> Self {
        let cell = |mode, signing, pm, ps, cm, cs| ReferenceCell {
            mode,
            signing,
            producer_mean_s: pm,
            producer_stdev_s: ps,
            consumer_mean_s: cm,
            consumer_stdev_s: cs,
        };
        use ProducerMode::*;
        Self {
            asserted: false,
            note: "Raspberry Pi 3 hardware measurements; documentation only, never compared against".into(),
            cells: vec![
                cell(PreGenerated, true, 0.0342, 0.0027, 0.0284, 0.0008),
                cell(PreGenerated, false, 0.0019, 0.0001, 0.0089, 0.0004),
                cell(OnDemand, true, 0.0312, 0.0025, 0.0589, 0.0044),
                cell(OnDemand, false, 0.0013, 0.0001, 0.0096, 0.0002),
            ],
        }
    }
}

impl MetricsReport {
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("report is always serializable")
    }

    /// Key-sorted, pretty-printed JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("value is always serializable")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiffEntry {
    pub path: String,
    pub a: Value,
    pub b: Value,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ReportDiff {
    pub entries: Vec<DiffEntry>,
    /// Injected-frame streams equal for every consuming gateway.
    pub streams_identical: bool,
}

impl ReportDiff {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.path.as_str())
    }

    pub fn get(&self, path: &str) -> Option<&DiffEntry> {
        self.entries.iter().find(|e| e.path == path)
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) if !map.is_empty() => {
            for (k, child) in map {
                flatten(&join(k), child, out);
            }
        }
        Value::Array(items) if !items.is_empty() => {
            for (i, child) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), child, out);
            }
        }
        leaf => {
            out.insert(prefix.to_string(), leaf.clone());
        }
    }
}

fn is_volatile(path: &str) -> bool {
    let leaf = path.rsplit('.').next().unwrap_or(path);
    VOLATILE_LEAVES.contains(&leaf)
        || VOLATILE_PATHS
            .iter()
            .any(|v| path == *v || path.starts_with(&format!("{v}.")))
}

fn streams(v: &Value) -> BTreeMap<String, Value> {
    let mut out = BTreeMap::new();
    if let Some(Value::Object(fid)) = v.get("fidelity") {
        for (gw, f) in fid {
            out.insert(gw.clone(), f.get("streams").cloned().unwrap_or(Value::Null));
        }
    }
    out
}

/// Leaf-by-leaf diff of two serialized reports, skipping [`VOLATILE_PATHS`]
/// and [`VOLATILE_LEAVES`].
pub fn compare_values(a: &Value, b: &Value) -> Result<ReportDiff, ScenarioError> {
    let version = |v: &Value| v.get("schema_version").and_then(Value::as_u64);
    let (va, vb) = (version(a), version(b));
    if va.is_none() || va != vb {
        return Err(ScenarioError::SchemaMismatch {
            a: va.map_or("missing".into(), |v| v.to_string()),
            b: vb.map_or("missing".into(), |v| v.to_string()),
        });
    }
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    flatten("", a, &mut fa);
    flatten("", b, &mut fb);
    let keys: std::collections::BTreeSet<_> = fa.keys().chain(fb.keys()).cloned().collect();
    let entries = keys
        .into_iter()
        .filter(|k| !is_volatile(k))
        .filter_map(|k| {
            let (x, y) = (
                fa.get(&k).cloned().unwrap_or(Value::Null),
                fb.get(&k).cloned().unwrap_or(Value::Null),
            );
            (x != y).then_some(DiffEntry { path: k, a: x, b: y })
        })
        .collect();
    Ok(ReportDiff {
        entries,
        streams_identical: streams(a) == streams(b),
    })
}

pub fn compare_reports(a: &MetricsReport, b: &MetricsReport) -> Result<ReportDiff, ScenarioError> {
    compare_values(&a.to_value(), &b.to_value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn diff_of_identical_is_empty() {
        let v = json!({"schema_version": 1, "a": {"b": [1, 2]}, "latency": {"x": 0.3}});
        let d = compare_values(&v, &v).unwrap();
        assert!(d.is_empty());
        assert!(d.streams_identical);
    }

    #[test]
    fn diff_lists_changed_leaves_and_skips_volatile() {
        let a = json!({"schema_version": 1, "n": {"c": 1, "d": 2}, "latency": {"x": 0.3}});
        let b = json!({"schema_version": 1, "n": {"c": 1, "d": 3, "e": 0, "cs_len": 4}, "latency": {"x": 0.4}});
        let d = compare_values(&a, &b).unwrap();
        assert_eq!(d.paths().collect::<Vec<_>>(), vec!["n.d", "n.e"]);
        assert_eq!(d.get("n.e").unwrap().a, Value::Null);
    }

    #[test]
    fn schema_versions_must_match() {
        let a = json!({"schema_version": 1});
        let b = json!({"schema_version": 2});
        assert!(matches!(
            compare_values(&a, &b),
            Err(ScenarioError::SchemaMismatch { .. })
        ));
        assert!(compare_values(&json!({}), &json!({})).is_err());
    }

    #[test]
    fn stream_equality() {
        let a = json!({"schema_version": 1, "fidelity": {"g": {"streams": {"10": {"count": 1}}, "frames_out": 1}}});
        let mut b = a.clone();
        b["fidelity"]["g"]["frames_out"] = json!(2);
        assert!(compare_values(&a, &b).unwrap().streams_identical);
        b["fidelity"]["g"]["streams"]["10"]["count"] = json!(2);
        assert!(!compare_values(&a, &b).unwrap().streams_identical);
    }
}
