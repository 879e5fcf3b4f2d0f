use serde::Serialize;

use super::config::ScenarioConfig;
use super::engine::run_scenario;
use super::report::{ReferenceTable, SCHEMA_VERSION};
use super::ScenarioError;
use crate::attacks::{AttackKind, AttackSpec};
use crate::can::load_trace;
use crate::gateway::{ProducerMode, MIN_LATENCY_SAMPLES};

/// Size of the traffic the configured ECUs will replay.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TraceSummary {
    pub frames: usize,
    /// Longest rebased trace span, in seconds.
    pub span_s: f64,
}

pub fn trace_summary(cfg: &ScenarioConfig) -> Result<TraceSummary, ScenarioError> {
    let mut out = TraceSummary::default();
    for e in cfg.segments.iter().flat_map(|s| &s.ecus) {
        let Some(path) = &e.trace else { continue };
        let full = cfg.resolve_trace(path);
        let trace = load_trace(&full).map_err(|err| ScenarioError::Trace(format!("{}: {err}", full.display())))?;
        let records = &trace.records[..e.limit.unwrap_or(usize::MAX).min(trace.records.len())];
        out.frames += records.len();
        if let (Some(first), Some(last)) = (records.first(), records.last()) {
            out.span_s = out.span_s.max((last.ts_us - first.ts_us) as f64 / 1e6);
        }
    }
    Ok(out)
}

/// `cfg` rewritten for one latency cell: every producer in `mode` with
/// `signing`, buffers large enough for the whole trace, no attacks, and
/// consumers starting only after the trace has been captured.
pub fn bench_config(cfg: &ScenarioConfig, mode: ProducerMode, signing: bool) -> Result<ScenarioConfig, ScenarioError> {
    let traces = trace_summary(cfg)?;
    let start = traces.span_s + 0.5;
    let mut c = cfg.clone();
    c.attacks.clear();
    c.duration_s = start + 10.0;
    for g in &mut c.gateways {
        g.producer.mode = mode;
        g.signing = signing;
        g.producer.pregen_capacity = g.producer.pregen_capacity.max(traces.frames);
        g.producer.frame_log_capacity = g.producer.frame_log_capacity.max(traces.frames);
        g.consumer_start_s = start;
    }
    Ok(c)
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchCell {
    pub mode: ProducerMode,
    pub signing: bool,
    pub runs: usize,
    /// Accepted exchanges summed over runs.
    pub exchanges: usize,
    /// Per-run means and standard deviations, averaged over runs.
    pub producer_mean_s: f64,
    pub producer_stdev_s: f64,
    pub consumer_mean_s: f64,
    pub consumer_stdev_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub scenario: String,
    pub repeat: usize,
    pub cells: Vec<BenchCell>,
    pub reference: ReferenceTable,
}

impl BenchReport {
    pub fn cell(&self, mode: ProducerMode, signing: bool) -> Option<&BenchCell> {
        self.cells.iter().find(|c| c.mode == mode && c.signing == signing)
    }

    /// Fixed-width table, one row per cell.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<14} {:<8} {:>9} {:>12} {:>12} {:>12} {:>12}\n",
            "mode", "signing", "exchanges", "prod_mean_s", "prod_sd_s", "cons_mean_s", "cons_sd_s"
        );
        for c in &self.cells {
            let mode = match c.mode {
                ProducerMode::PreGenerated => "pre_generated",
                ProducerMode::OnDemand => "on_demand",
            };
            out.push_str(&format!(
                "{:<14} {:<8} {:>9} {:>12.6} {:>12.6} {:>12.6} {:>12.6}\n",
                mode,
                c.signing,
                c.exchanges,
                c.producer_mean_s,
                c.producer_stdev_s,
                c.consumer_mean_s,
                c.consumer_stdev_s
            ));
        }
        out
    }
}

/// Runs the mode x signing grid `repeat` times per cell. Each run uses
/// seed `cfg.seed + r`; cell figures are averages of the per-run figures.
pub fn bench(cfg: &ScenarioConfig, repeat: usize) -> Result<BenchReport, ScenarioError> {
    let repeat = repeat.max(1);
    let mut cells = Vec::new();
    for mode in [ProducerMode::PreGenerated, ProducerMode::OnDemand] {
        for signing in [true, false] {
            let base = bench_config(cfg, mode, signing)?;
            let mut acc = [0.0f64; 4];
            let mut exchanges = 0;
            for r in 0..repeat {
                let mut c = base.clone();
                c.seed = cfg.seed.wrapping_add(r as u64);
                let report = run_scenario(&c)?;
                let cell_name = format!("{mode:?}/signing={signing}");
                let Some(lat) = report.latency.values().next() else {
                    return Err(ScenarioError::InsufficientSamples {
                        cell: cell_name,
                        have: 0,
                        need: MIN_LATENCY_SAMPLES,
                    });
                };
                let have = lat.producer.count.min(lat.consumer.count);
                if have < MIN_LATENCY_SAMPLES {
                    return Err(ScenarioError::InsufficientSamples {
                        cell: cell_name,
                        have,
                        need: MIN_LATENCY_SAMPLES,
                    });
                }
                exchanges += lat.consumer.count;
                acc[0] += lat.producer.mean_s;
                acc[1] += lat.producer.stdev_s;
                acc[2] += lat.consumer.mean_s;
                acc[3] += lat.consumer.stdev_s;
            }
            let n = repeat as f64;
            cells.push(BenchCell {
                mode,
                signing,
                runs: repeat,
                exchanges,
                producer_mean_s: acc[0] / n,
                producer_stdev_s: acc[1] / n,
                consumer_mean_s: acc[2] / n,
                consumer_stdev_s: acc[3] / n,
            });
        }
    }
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.name.clone(),
        repeat,
        cells,
        reference: ReferenceTable::default(),
    })
}

/// `cfg` with its attacks replaced by a single default attack of `kind`,
/// attached to the first gateway that consumes. The attacker signs with the
/// first declared key no gateway owns, if there is one.
pub fn attack_overlay(cfg: &ScenarioConfig, kind: AttackKind) -> Result<ScenarioConfig, ScenarioError> {
    let Some(victim) = cfg.gateways.iter().find(|g| !g.subscriptions.is_empty()) else {
        return Err(ScenarioError::Validation {
            path: "gateways".into(),
            reason: "no gateway has subscriptions to attack".into(),
        });
    };
    let end = cfg.duration_s;
    let mut spec = AttackSpec::new(kind, victim.id.clone(), 1.0_f64.min(end), end);
    spec.attacker_key = cfg
        .keys
        .iter()
        .find(|k| cfg.gateways.iter().all(|g| g.key != k.name))
        .map(|k| k.name.clone());
    match kind {
        AttackKind::Masquerade | AttackKind::UnsolicitedData => spec.count = Some(100),
        AttackKind::Replay => spec.count = Some(50),
        AttackKind::FloodSameName => {
            // Start once the consumer's own copy of the target has gone
            // stale everywhere, so the first flood Interest reaches the
            // producer.
            let freshness_s = cfg.gateways.iter().map(|g| g.producer.freshness_ms).max().unwrap_or(0) as f64 / 1000.0;
            spec.start_s = (freshness_s + 0.5).min(end);
            spec.stop_s = (spec.start_s + 1.0).min(end);
            spec.rate_per_s = 1000.0;
            spec.count = Some(1000);
        }
        AttackKind::FloodUniqueNames => {
            let t = cfg.forwarder.rate_threshold_per_s;
            spec.rate_per_s = if t.is_finite() { 5.0 * t } else { 500.0 };
            spec.stop_s = (spec.start_s + 2.0).min(end);
        }
    }
    let mut c = cfg.clone();
    c.attacks = vec![spec];
    c.validate()?;
    Ok(c)
}
