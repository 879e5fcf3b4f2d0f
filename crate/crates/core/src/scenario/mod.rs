//! Scenario configuration, the discrete-event engine, reports, and the
//! benchmark grid.

mod bench;
mod config;
mod engine;
mod queue;
mod report;

pub use bench::{attack_overlay, bench, bench_config, trace_summary, BenchCell, BenchReport, TraceSummary};
pub use config::{
    load_config, parse_config, EcuSpec, GatewaySpec, KeySpec, LinkSpec, RouteSpec, ScenarioConfig, SegmentSpec,
    SubscriptionSpec,
};
pub use engine::{run_scenario, run_with, write_timing_csv, RunOptions, RunOutput, Simulation, TimingEvent};
pub use queue::EventQueue;
pub use report::*;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid config at {path}: {reason}")]
    Validation { path: String, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("trace error: {0}")]
    Trace(String),
    #[error("key error: {0}")]
    Key(String),
    #[error("invariant violated at t={at_us}us on {node}: {detail}")]
    Invariant { at_us: u64, node: String, detail: String },
    #[error("report schema mismatch: {a} vs {b}")]
    SchemaMismatch { a: String, b: String },
    #[error("too few latency samples in cell {cell}: {have} < {need}")]
    InsufficientSamples { cell: String, have: usize, need: usize },
}

impl ScenarioError {
    pub fn is_invariant(&self) -> bool {
        matches!(self, ScenarioError::Invariant { .. })
    }
}
