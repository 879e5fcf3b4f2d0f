use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ndncan::attacks::AttackKind;
use ndncan::scenario::{
    attack_overlay, bench, compare_reports, load_config, run_with, write_timing_csv, RunOptions, ScenarioConfig,
    ScenarioError,
};

/// `println!` that tolerates a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

const EXIT_USAGE: u8 = 1;
const EXIT_SCENARIO: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser)]
#[command(name = "ndncan", version, about = "Simulate CAN segments bridged by NDN gateways")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and emit its metrics report as JSON.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-event timings as CSV.
        #[arg(long)]
        timing_csv: Option<PathBuf>,
    },
    /// Run the producer mode x signing latency grid.
    Bench {
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the grid as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Overlay one attack on a scenario and compare against the baseline.
    Attack {
        config: PathBuf,
        #[arg(long)]
        kind: AttackKind,
        #[arg(long)]
        seed: Option<u64>,
        /// Forged Data keeps the attacker's own key locator.
        #[arg(long)]
        own_locator: bool,
        /// Replay straight to the consumer application.
        #[arg(long)]
        bypass_forwarder: bool,
        /// Write baseline, attack report and diff as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load and validate a scenario without running it.
    Validate { config: PathBuf },
}

fn load(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, ScenarioError> {
    let mut cfg = load_config(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), ScenarioError> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| ScenarioError::Io(format!("{}: {e}", p.display()))),
        None => {
            say!("{text}");
            Ok(())
        }
    }
}

fn to_json(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(&serde_json::to_value(v).expect("serializable")).expect("serializable")
}

fn execute(cmd: Command) -> Result<(), ScenarioError> {
    match cmd {
        Command::Validate { config } => {
            let cfg = load(&config, None)?;
            let ecus: usize = cfg.segments.iter().map(|s| s.ecus.len()).sum();
            say!(
                "ok: {} ({} segments, {} gateways, {} ECUs, {} links, {} attacks)",
                cfg.name,
                cfg.segments.len(),
                cfg.gateways.len(),
                ecus,
                cfg.links.len(),
                cfg.attacks.len()
            );
            Ok(())
        }
        Command::Run {
            config,
            seed,
            out,
            timing_csv,
        } => {
            let cfg = load(&config, seed)?;
            let opts = RunOptions {
                record_timing: timing_csv.is_some(),
            };
            let output = run_with(&cfg, opts)?;
            if let Some(path) = &timing_csv {
                write_timing_csv(path, &output.timing)?;
            }
            emit(out.as_deref(), &output.report.to_json())
        }
        Command::Bench {
            config,
            repeat,
            seed,
            out,
        } => {
            let cfg = load(&config, seed)?;
            let grid = bench(&cfg, repeat)?;
            say!("{}", grid.table().trim_end());
            if let Some(path) = out {
                emit(Some(&path), &to_json(&grid))?;
            }
            Ok(())
        }
        Command::Attack {
            config,
            kind,
            seed,
            own_locator,
            bypass_forwarder,
            out,
        } => {
            let cfg = load(&config, seed)?;
            let mut attacked = attack_overlay(&cfg, kind)?;
            attacked.attacks[0].own_locator = own_locator;
            attacked.attacks[0].bypass_forwarder = bypass_forwarder;
            let mut baseline = cfg.clone();
            baseline.attacks.clear();
            let base = run_with(&baseline, RunOptions::default())?.report;
            let hit = run_with(&attacked, RunOptions::default())?.report;
            let diff = compare_reports(&base, &hit)?;
            let forged: u64 = hit.fidelity.values().map(|f| f.mismatched).sum();
            if diff.streams_identical {
                say!("SAFE: injected streams identical");
            } else if forged == 0 {
                let missing: u64 = hit.fidelity.values().map(|f| f.missing).sum();
                say!("DEGRADED: no forged injections, but {missing} frames missing versus baseline");
            } else {
                say!("UNSAFE: {forged} injected frames differ from the captured originals");
            }
            for a in &hit.attacks {
                say!("{}", to_json(a));
            }
            say!("changed counters:");
            for e in diff
                .entries
                .iter()
                .filter(|e| !e.path.starts_with("scenario.") && !e.path.starts_with("attacks"))
            {
                say!("  {}: {} -> {}", e.path, e.a, e.b);
            }
            if let Some(path) = out {
                let doc = serde_json::json!({
                    "baseline": base.to_value(),
                    "attack": hit.to_value(),
                    "diff": serde_json::to_value(&diff).expect("serializable"),
                });
                emit(Some(&path), &serde_json::to_string_pretty(&doc).expect("serializable"))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_invariant() {
                EXIT_INVARIANT
            } else {
                EXIT_SCENARIO
            })
        }
    }
}
