//! Scenario configuration, orchestration, metrics and CSV emission.
//!
//! A scenario is described by a flat `key = value` text file (see
//! `docs/FORMATS.md` for every key). Runs are deterministic given `seed`:
//! identical config and seed produce byte-identical CSV output. Floats are
//! printed with six significant digits, comma-separated, LF line endings.

use std::collections::BTreeSet;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AdversaryError, AdversaryPlan, CorruptionSpec, Strategy};
use crate::compare::{
    baseline_analytics, baseline_run, gearbox_find_gears, gearbox_throughput, CompareError,
    GearConfig, GearboxDistribution,
};
use crate::engine::{
    BbMode, Engine, EngineConfig, EngineError, EpochOutcome, ProcessVerdict, TxMode,
    ViolationWindow,
};
use crate::model::ShardIndex;
use crate::params::ProtocolParams;
use crate::simnet::LatencyModel;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config key `{key}`: {reason}")]
    Schema { key: String, reason: String },
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
}

impl HarnessError {
    /// Process exit category: 2 config, 3 infeasible, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Schema { .. } => 2,
            HarnessError::Infeasible(_) => 3,
            _ => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemKind {
    Reticulum,
    Baseline,
    Gearbox,
}

impl SystemKind {
    pub fn name(&self) -> &'static str {
        match self {
            SystemKind::Reticulum => "reticulum",
            SystemKind::Baseline => "baseline",
            SystemKind::Gearbox => "gearbox",
        }
    }
}

/// One metrics row per epoch per system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsSample {
    pub epoch: u32,
    pub system: SystemKind,
    pub tx_committed: u64,
    pub epoch_length_s: f64,
    pub throughput_tx_s: f64,
    pub storage_bytes_total: u64,
    /// Bytes per committed transaction this epoch.
    pub storage_per_tx: f64,
    pub silent_nodes_global: u32,
    pub expelled_cumulative: u32,
    pub bb_messages: u64,
    pub upload_bytes_max_node: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventRow {
    pub epoch: u32,
    pub node: u32,
    pub event: &'static str,
    pub shard: ShardIndex,
}

/// The full scenario configuration; every field maps to a config-file key.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub params: ProtocolParams,
    pub p_a_run: f64,
    pub corrupt_per_shard: Option<u32>,
    pub epochs: u32,
    pub strategy: Strategy,
    pub cross_tx_fraction: f64,
    pub seed: u64,
    pub system: SystemKind,
    pub tx_mode: TxMode,
    pub bb_mode: BbMode,
    pub window: ViolationWindow,
    pub latency: LatencyModel,
    pub intra_tx_per_block: u32,
    pub gearbox_trials: u32,
    pub gearbox_shards: Option<u32>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            params: ProtocolParams::default(),
            p_a_run: 0.0,
            corrupt_per_shard: None,
            epochs: 10,
            strategy: Strategy::None,
            cross_tx_fraction: 0.0,
            seed: 1,
            system: SystemKind::Reticulum,
            tx_mode: TxMode::Synthetic,
            bb_mode: BbMode::Analytic,
            window: ViolationWindow::Sliding,
            latency: LatencyModel::default(),
            intra_tx_per_block: 8,
            gearbox_trials: 1000,
            gearbox_shards: None,
        }
    }
}

fn schema_err(key: &str, reason: impl Into<String>) -> HarnessError {
    HarnessError::Schema {
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl ScenarioConfig {
    /// Parses the flat `key = value` format; `#` starts a comment. Unknown
    /// keys are errors naming the key.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = ScenarioConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(schema_err(
                    &format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets a single key; used by the parser and by sweep overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, HarnessError> {
            v.parse()
                .map_err(|_| schema_err(key, format!("cannot parse `{v}`")))
        }
        match key {
            "n" => self.params.n = num(key, value)?,
            "n_p" => self.params.np = num(key, value)?,
            "n_c" => self.params.nc = num(key, value)?,
            "p_a" => self.params.pa = num(key, value)?,
            "p_a_run" => self.p_a_run = num(key, value)?,
            "sigma" => self.params.sigma = num(key, value)?,
            "tau" => self.params.tau = num(key, value)?,
            "lambda" => self.params.lambda_s = num(key, value)?,
            "delta_s" => self.params.delta_s = num(key, value)?,
            "t1_s" => self.params.t1_s = num(key, value)?,
            "block_bytes" => self.params.block_bytes = num(key, value)?,
            "state_bytes" => self.params.state_bytes = num(key, value)?,
            "tx_per_block" => self.params.tx_per_block = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "strategy" => {
                self.strategy = Strategy::parse(value)
                    .ok_or_else(|| schema_err(key, format!("unknown strategy `{value}`")))?
            }
            "cross_tx_fraction" => self.cross_tx_fraction = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "system" => {
                self.system = match value {
                    "reticulum" => SystemKind::Reticulum,
                    "baseline" => SystemKind::Baseline,
                    "gearbox" => SystemKind::Gearbox,
                    _ => return Err(schema_err(key, format!("unknown system `{value}`"))),
                }
            }
            "corrupt_per_shard" => self.corrupt_per_shard = Some(num(key, value)?),
            "tx_mode" => {
                self.tx_mode = match value {
                    "synthetic" => TxMode::Synthetic,
                    "full" => TxMode::Full {
                        accounts_per_shard: 8,
                        genesis_balance: 1_000_000,
                    },
                    _ => return Err(schema_err(key, format!("unknown tx_mode `{value}`"))),
                }
            }
            "accounts_per_shard" => {
                let accounts: u32 = num(key, value)?;
                self.tx_mode = match self.tx_mode {
                    TxMode::Full {
                        genesis_balance, ..
                    } => TxMode::Full {
                        accounts_per_shard: accounts,
                        genesis_balance,
                    },
                    TxMode::Synthetic => TxMode::Full {
                        accounts_per_shard: accounts,
                        genesis_balance: 1_000_000,
                    },
                }
            }
            "genesis_balance" => {
                let balance: u64 = num(key, value)?;
                self.tx_mode = match self.tx_mode {
                    TxMode::Full {
                        accounts_per_shard, ..
                    } => TxMode::Full {
                        accounts_per_shard,
                        genesis_balance: balance,
                    },
                    TxMode::Synthetic => TxMode::Full {
                        accounts_per_shard: 8,
                        genesis_balance: balance,
                    },
                }
            }
            "bb_mode" => {
                self.bb_mode = match value {
                    "analytic" => BbMode::Analytic,
                    "simulated" => BbMode::Simulated,
                    _ => return Err(schema_err(key, format!("unknown bb_mode `{value}`"))),
                }
            }
            "window" => {
                self.window = match value {
                    "sliding" => ViolationWindow::Sliding,
                    "tumbling" => ViolationWindow::Tumbling,
                    _ => return Err(schema_err(key, format!("unknown window `{value}`"))),
                }
            }
            "latency" => {
                // flat:<ms> or uniform:<lo>:<hi>
                let parts: Vec<&str> = value.split(':').collect();
                self.latency = match parts.as_slice() {
                    ["flat", ms] => LatencyModel::Flat(num(key, ms)?),
                    ["uniform", lo, hi] => LatencyModel::Uniform {
                        lo: num(key, lo)?,
                        hi: num(key, hi)?,
                    },
                    _ => return Err(schema_err(key, format!("unknown latency `{value}`"))),
                }
            }
            "intra_tx_per_block" => self.intra_tx_per_block = num(key, value)?,
            "gearbox_trials" => self.gearbox_trials = num(key, value)?,
            "gearbox_shards" => self.gearbox_shards = Some(num(key, value)?),
            _ => return Err(schema_err(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.params.tau < self.params.np {
            return Err(HarnessError::Infeasible("tau must be >= n_p".into()));
        }
        self.params
            .validate()
            .map_err(|e| HarnessError::Infeasible(e.to_string()))?;
        if !(0.0..1.0).contains(&self.p_a_run) {
            return Err(HarnessError::Infeasible("p_a_run must be in [0, 1)".into()));
        }
        if self.p_a_run > self.params.pa + 1e-12 {
            return Err(HarnessError::Infeasible(
                "p_a_run must not exceed p_a".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(HarnessError::Infeasible("epochs must be >= 1".into()));
        }
        Ok(())
    }

    pub fn corruption_spec(&self) -> CorruptionSpec {
        match self.corrupt_per_shard {
            Some(count) => CorruptionSpec::PerShard { count },
            None if self.p_a_run > 0.0 => CorruptionSpec::UniformFraction(self.p_a_run),
            None => CorruptionSpec::None,
        }
    }

    fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            params: self.params.clone(),
            seed: self.seed,
            latency: self.latency.clone(),
            window: self.window,
            tx_mode: self.tx_mode.clone(),
            bb_mode: self.bb_mode,
            intra_tx_per_block: self.intra_tx_per_block,
            cross_tx_fraction: self.cross_tx_fraction,
        }
    }
}

/// Per-run summary: means, measured liveness rate, totals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub system: SystemKind,
    pub epochs: u32,
    pub tx_total: u64,
    pub mean_epoch_length_s: f64,
    pub mean_throughput_tx_s: f64,
    pub mean_storage_per_tx_bytes: f64,
    /// Mean per-shard unanimous-pass rate over every process shard.
    pub rp_measured_all: f64,
    /// Mean over shards holding at least one corrupt member.
    pub rp_measured_corrupted: f64,
    pub violations_total: u32,
    pub expelled_total: u32,
}

#[derive(Debug)]
pub struct ScenarioOutput {
    pub metrics: Vec<MetricsSample>,
    pub events: Vec<EventRow>,
    pub summary: Summary,
    /// Per-shard unanimous-pass rates (reticulum runs).
    pub shard_pass_rates: Vec<f64>,
    /// Shards that held corrupt members at bootstrap.
    pub corrupted_shards: Vec<ShardIndex>,
    /// Raw epoch outcomes (reticulum runs), for downstream checks.
    pub outcomes: Vec<EpochOutcome>,
    /// The gear distribution (gearbox runs).
    pub gearbox: Option<GearboxDistribution>,
}

/// Runs one scenario to completion. Deterministic given the config.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput, HarnessError> {
    cfg.validate()?;
    match cfg.system {
        SystemKind::Reticulum => run_reticulum(cfg),
        SystemKind::Baseline => run_baseline(cfg),
        SystemKind::Gearbox => run_gearbox(cfg),
    }
}

fn run_reticulum(cfg: &ScenarioConfig) -> Result<ScenarioOutput, HarnessError> {
    let mut engine = Engine::new(cfg.engine_config())?;
    let mut plan = AdversaryPlan::new(
        cfg.strategy,
        &cfg.corruption_spec(),
        &engine.assignment,
        cfg.params.tau,
        cfg.seed,
    )?;
    let corrupted_shards = plan.corrupted_shards();
    let outcomes = engine.run_epochs(&mut plan, cfg.epochs)?;

    let beta = engine.assignment.process_members.len();
    let mut passes = vec![0u32; beta];
    let mut metrics = Vec::with_capacity(outcomes.len());
    let mut events = Vec::new();
    let mut expelled_cumulative = 0u32;
    let mut violations_total = 0u32;
    for o in &outcomes {
        for s in &o.shards {
            if s.verdict == ProcessVerdict::UnanimousPass {
                passes[s.shard as usize] += 1;
            }
        }
        let silent: u32 = o.shards.iter().map(|s| s.silent.len() as u32).sum();
        expelled_cumulative += o.expelled.len() as u32;
        violations_total += o.violated.len() as u32;
        for &node in &o.violated {
            events.push(EventRow {
                epoch: o.epoch,
                node,
                event: "violation",
                shard: engine.assignment.placements[node as usize].0,
            });
        }
        for &node in &o.expelled {
            events.push(EventRow {
                epoch: o.epoch,
                node,
                event: "expulsion",
                shard: engine.assignment.placements[node as usize].0,
            });
        }
        metrics.push(MetricsSample {
            epoch: o.epoch,
            system: SystemKind::Reticulum,
            tx_committed: o.tx_committed,
            epoch_length_s: o.epoch_len_s,
            throughput_tx_s: o.tx_committed as f64 / o.epoch_len_s,
            storage_bytes_total: o.storage_bytes,
            storage_per_tx: if o.tx_committed == 0 {
                0.0
            } else {
                o.storage_bytes as f64 / o.tx_committed as f64
            },
            silent_nodes_global: silent,
            expelled_cumulative,
            bb_messages: o.bb_messages,
            upload_bytes_max_node: o.upload_bytes_max_node,
        });
    }
    let shard_pass_rates: Vec<f64> = passes
        .iter()
        .map(|p| *p as f64 / cfg.epochs as f64)
        .collect();
    let corrupted_set: BTreeSet<ShardIndex> = corrupted_shards.iter().copied().collect();
    let rp_all = mean(&shard_pass_rates);
    let rp_corrupted = if corrupted_set.is_empty() {
        rp_all
    } else {
        mean(
            &shard_pass_rates
                .iter()
                .enumerate()
                .filter(|(i, _)| corrupted_set.contains(&(*i as ShardIndex)))
                .map(|(_, r)| *r)
                .collect::<Vec<_>>(),
        )
    };
    let summary = Summary {
        system: SystemKind::Reticulum,
        epochs: cfg.epochs,
        tx_total: metrics.iter().map(|m| m.tx_committed).sum(),
        mean_epoch_length_s: mean(&metrics.iter().map(|m| m.epoch_length_s).collect::<Vec<_>>()),
        mean_throughput_tx_s: mean(
            &metrics
                .iter()
                .map(|m| m.throughput_tx_s)
                .collect::<Vec<_>>(),
        ),
        mean_storage_per_tx_bytes: mean(
            &metrics
                .iter()
                .filter(|m| m.tx_committed > 0)
                .map(|m| m.storage_per_tx)
                .collect::<Vec<_>>(),
        ),
        rp_measured_all: rp_all,
        rp_measured_corrupted: rp_corrupted,
        violations_total,
        expelled_total: expelled_cumulative,
    };
    Ok(ScenarioOutput {
        metrics,
        events,
        summary,
        shard_pass_rates,
        corrupted_shards,
        outcomes,
        gearbox: None,
    })
}

fn run_baseline(cfg: &ScenarioConfig) -> Result<ScenarioOutput, HarnessError> {
    let rows = baseline_run(&cfg.params, cfg.epochs)?;
    let metrics: Vec<MetricsSample> = rows
        .iter()
        .map(|r| MetricsSample {
            epoch: r.epoch,
            system: SystemKind::Baseline,
            tx_committed: r.tx_committed,
            epoch_length_s: r.epoch_length_s,
            throughput_tx_s: r.throughput_tx_s,
            storage_bytes_total: r.storage_bytes,
            storage_per_tx: r.storage_bytes as f64 / r.tx_committed as f64,
            silent_nodes_global: 0,
            expelled_cumulative: 0,
            bb_messages: 0,
            upload_bytes_max_node: 0,
        })
        .collect();
    let summary = Summary {
        system: SystemKind::Baseline,
        epochs: cfg.epochs,
        tx_total: metrics.iter().map(|m| m.tx_committed).sum(),
        mean_epoch_length_s: mean(&metrics.iter().map(|m| m.epoch_length_s).collect::<Vec<_>>()),
        mean_throughput_tx_s: mean(
            &metrics
                .iter()
                .map(|m| m.throughput_tx_s)
                .collect::<Vec<_>>(),
        ),
        mean_storage_per_tx_bytes: mean(
            &metrics.iter().map(|m| m.storage_per_tx).collect::<Vec<_>>(),
        ),
        rp_measured_all: 0.0,
        rp_measured_corrupted: 0.0,
        violations_total: 0,
        expelled_total: 0,
    };
    Ok(ScenarioOutput {
        metrics,
        events: Vec::new(),
        summary,
        shard_pass_rates: Vec::new(),
        corrupted_shards: Vec::new(),
        outcomes: Vec::new(),
        gearbox: None,
    })
}

fn run_gearbox(cfg: &ScenarioConfig) -> Result<ScenarioOutput, HarnessError> {
    let mut gear_cfg = GearConfig::default();
    gear_cfg.shard_count = cfg.gearbox_shards;
    gear_cfg.block_bytes = cfg.params.block_bytes;
    gear_cfg.tx_per_block = cfg.params.tx_per_block;
    let dist = gearbox_find_gears(
        cfg.params.n,
        cfg.p_a_run,
        cfg.seed,
        cfg.gearbox_trials,
        &gear_cfg,
    )?;
    let tx_per_epoch = dist.shard_count as u64 * gear_cfg.tx_per_block as u64;
    let metrics: Vec<MetricsSample> = dist
        .epoch_lengths_s
        .iter()
        .enumerate()
        .map(|(trial, &len)| MetricsSample {
            epoch: trial as u32,
            system: SystemKind::Gearbox,
            tx_committed: tx_per_epoch,
            epoch_length_s: len,
            throughput_tx_s: tx_per_epoch as f64 / len,
            storage_bytes_total: (dist.storage_per_tx_kb[trial] * 1024.0 * tx_per_epoch as f64)
                .round() as u64,
            storage_per_tx: dist.storage_per_tx_kb[trial] * 1024.0,
            silent_nodes_global: 0,
            expelled_cumulative: 0,
            bb_messages: 0,
            upload_bytes_max_node: 0,
        })
        .collect();
    let m = gearbox_throughput(&dist, &gear_cfg);
    let summary = Summary {
        system: SystemKind::Gearbox,
        epochs: dist.trials,
        tx_total: metrics.iter().map(|m| m.tx_committed).sum(),
        mean_epoch_length_s: m.mean_epoch_length_s,
        mean_throughput_tx_s: m.throughput_tx_s,
        mean_storage_per_tx_bytes: m.storage_per_tx_kb * 1024.0,
        rp_measured_all: 0.0,
        rp_measured_corrupted: 0.0,
        violations_total: 0,
        expelled_total: 0,
    };
    Ok(ScenarioOutput {
        metrics,
        events: Vec::new(),
        summary,
        shard_pass_rates: Vec::new(),
        corrupted_shards: Vec::new(),
        outcomes: Vec::new(),
        gearbox: Some(dist),
    })
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

// ---------------------------------------------------------------------------
// CSV / text emission.
// ---------------------------------------------------------------------------

/// Formats a float with six significant digits, plain decimal notation.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:e}", x.abs());
    let exp: i32 = sci
        .split('e')
        .nth(1)
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    let prec = (5 - exp).max(0) as usize;
    format!("{x:.prec$}")
}

pub fn metrics_csv(rows: &[MetricsSample]) -> String {
    let mut out = String::from(
        "epoch,system,tx_committed,epoch_length_s,throughput_tx_s,storage_bytes_total,storage_per_tx,silent_nodes_global,expelled_cumulative,bb_messages,upload_bytes_max_node\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.epoch,
            r.system.name(),
            r.tx_committed,
            fmt_f64(r.epoch_length_s),
            fmt_f64(r.throughput_tx_s),
            r.storage_bytes_total,
            fmt_f64(r.storage_per_tx),
            r.silent_nodes_global,
            r.expelled_cumulative,
            r.bb_messages,
            r.upload_bytes_max_node,
        ));
    }
    out
}

pub fn events_csv(rows: &[EventRow]) -> String {
    let mut out = String::from("epoch,node,event,shard\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.epoch, r.node, r.event, r.shard));
    }
    out
}

pub fn gear_distribution_csv(dist: &GearboxDistribution) -> String {
    let mut out = String::from("trial,gear,count,overlap_mean\n");
    for (trial, counts) in dist.trial_gear_counts.iter().enumerate() {
        for (gear, count) in counts.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                trial,
                gear,
                count,
                fmt_f64(dist.trial_overlap_mean[trial]),
            ));
        }
    }
    out
}

pub fn summary_text(s: &Summary) -> String {
    let mut out = String::new();
    out.push_str(&format!("system: {}\n", s.system.name()));
    out.push_str(&format!("epochs: {}\n", s.epochs));
    out.push_str(&format!("tx_total: {}\n", s.tx_total));
    out.push_str(&format!(
        "mean_epoch_length_s: {}\n",
        fmt_f64(s.mean_epoch_length_s)
    ));
    out.push_str(&format!(
        "mean_throughput_tx_s: {}\n",
        fmt_f64(s.mean_throughput_tx_s)
    ));
    out.push_str(&format!(
        "mean_storage_per_tx_bytes: {}\n",
        fmt_f64(s.mean_storage_per_tx_bytes)
    ));
    out.push_str(&format!(
        "rp_measured_all: {}\n",
        fmt_f64(s.rp_measured_all)
    ));
    out.push_str(&format!(
        "rp_measured_corrupted: {}\n",
        fmt_f64(s.rp_measured_corrupted)
    ));
    out.push_str(&format!("violations_total: {}\n", s.violations_total));
    out.push_str(&format!("expelled_total: {}\n", s.expelled_total));
    out
}

// ---------------------------------------------------------------------------
// Sweeps and the comparison grid.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub mean_throughput_tx_s: f64,
    pub mean_epoch_length_s: f64,
    pub rp_measured_all: f64,
    pub rp_measured_corrupted: f64,
    pub mean_storage_per_tx_bytes: f64,
    pub expelled_total: u32,
}

pub fn sweep_csv(param: &str, rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{param},mean_throughput_tx_s,mean_epoch_length_s,rp_measured_all,rp_measured_corrupted,mean_storage_per_tx_bytes,expelled_total\n"
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.value,
            fmt_f64(r.mean_throughput_tx_s),
            fmt_f64(r.mean_epoch_length_s),
            fmt_f64(r.rp_measured_all),
            fmt_f64(r.rp_measured_corrupted),
            fmt_f64(r.mean_storage_per_tx_bytes),
            r.expelled_total,
        ));
    }
    out
}

/// Worker count: `RETICULUM_WORKERS` or the machine's parallelism.
fn worker_count(jobs: usize) -> usize {
    let env = std::env::var("RETICULUM_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let fallback = std::thread::available_parallelism()
        .map(|v| v.get())
        .unwrap_or(1);
    env.unwrap_or(fallback).clamp(1, jobs.max(1))
}

/// Runs one scenario per value of `param`, in a worker pool, and aggregates
/// one row per value (merged in input order).
pub fn sweep(
    base: &ScenarioConfig,
    param: &str,
    values: &[String],
) -> Result<Vec<SweepRow>, HarnessError> {
    if values.is_empty() {
        return Err(schema_err(param, "empty value list"));
    }
    // Validate all configs up front so schema errors surface immediately.
    let mut configs = Vec::with_capacity(values.len());
    for v in values {
        let mut cfg = base.clone();
        cfg.set(param, v)?;
        cfg.validate()?;
        configs.push(cfg);
    }
    let results: Vec<Mutex<Option<Result<SweepRow, HarnessError>>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let workers = worker_count(configs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let row = run_scenario(&configs[i]).map(|out| SweepRow {
                    value: values[i].clone(),
                    mean_throughput_tx_s: out.summary.mean_throughput_tx_s,
                    mean_epoch_length_s: out.summary.mean_epoch_length_s,
                    rp_measured_all: out.summary.rp_measured_all,
                    rp_measured_corrupted: out.summary.rp_measured_corrupted,
                    mean_storage_per_tx_bytes: out.summary.mean_storage_per_tx_bytes,
                    expelled_total: out.summary.expelled_total,
                });
                *results[i].lock().unwrap() = Some(row);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

/// One comparison cell: all three systems at the same runtime adversary
/// ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRow {
    pub p_a_run: f64,
    pub reticulum_tx_s: f64,
    pub baseline_tx_s: f64,
    pub gearbox_tx_s: f64,
    pub gearbox_epoch_s: f64,
    pub reticulum_storage_per_tx_kb: f64,
    pub baseline_storage_per_tx_kb: f64,
    pub gearbox_storage_per_tx_kb: f64,
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from(
        "p_a_run,reticulum_tx_s,baseline_tx_s,gearbox_tx_s,gearbox_epoch_s,reticulum_storage_per_tx_kb,baseline_storage_per_tx_kb,gearbox_storage_per_tx_kb\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.p_a_run),
            fmt_f64(r.reticulum_tx_s),
            fmt_f64(r.baseline_tx_s),
            fmt_f64(r.gearbox_tx_s),
            fmt_f64(r.gearbox_epoch_s),
            fmt_f64(r.reticulum_storage_per_tx_kb),
            fmt_f64(r.baseline_storage_per_tx_kb),
            fmt_f64(r.gearbox_storage_per_tx_kb),
        ));
    }
    out
}

/// Runs reticulum, baseline and gearbox across a `p_a_run` grid.
pub fn compare_grid(
    base: &ScenarioConfig,
    pa_values: &[f64],
) -> Result<Vec<CompareRow>, HarnessError> {
    let baseline = baseline_analytics(&base.params)?;
    let mut rows = Vec::with_capacity(pa_values.len());
    for &pa_run in pa_values {
        let mut ret_cfg = base.clone();
        ret_cfg.system = SystemKind::Reticulum;
        ret_cfg.p_a_run = pa_run;
        ret_cfg.corrupt_per_shard = None;
        let ret = run_scenario(&ret_cfg)?;

        let mut gear_cfg = base.clone();
        gear_cfg.system = SystemKind::Gearbox;
        gear_cfg.p_a_run = pa_run;
        gear_cfg.corrupt_per_shard = None;
        let gear = run_scenario(&gear_cfg)?;

        rows.push(CompareRow {
            p_a_run: pa_run,
            reticulum_tx_s: ret.summary.mean_throughput_tx_s,
            baseline_tx_s: baseline.tx_total_s,
            gearbox_tx_s: gear.summary.mean_throughput_tx_s,
            gearbox_epoch_s: gear.summary.mean_epoch_length_s,
            reticulum_storage_per_tx_kb: ret.summary.mean_storage_per_tx_bytes / 1024.0,
            baseline_storage_per_tx_kb: baseline.storage_per_tx_kb,
            gearbox_storage_per_tx_kb: gear.summary.mean_storage_per_tx_bytes / 1024.0,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_text() -> &'static str {
        "\
# tiny scenario
n = 60
n_p = 3
n_c = 12
p_a = 0.33
p_a_run = 0.0
tau = 10
lambda = 50
delta_s = 10
t1_s = 86
block_bytes = 2048
state_bytes = 512
tx_per_block = 64
epochs = 4
strategy = none
seed = 7
system = reticulum
"
    }

    #[test]
    fn parse_round_trip_and_defaults() {
        let cfg = ScenarioConfig::parse(tiny_text()).unwrap();
        assert_eq!(cfg.params.n, 60);
        assert_eq!(cfg.params.np, 3);
        assert_eq!(cfg.epochs, 4);
        assert_eq!(cfg.system, SystemKind::Reticulum);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ScenarioConfig::parse("bogus = 1\n").unwrap_err();
        match err {
            HarnessError::Schema { key, .. } => assert_eq!(key, "bogus"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn infeasible_tau_is_rejected() {
        let text = tiny_text().replace("tau = 10", "tau = 2");
        let err = ScenarioConfig::parse(&text).unwrap_err();
        assert!(matches!(err, HarnessError::Infeasible(m) if m.contains("tau must be >= n_p")));
        assert_eq!(ScenarioConfig::parse(&text).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn all_honest_run_matches_best_case_formula() {
        let cfg = ScenarioConfig::parse(tiny_text()).unwrap();
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.summary.rp_measured_all, 1.0);
        for m in &out.metrics {
            assert_eq!(m.epoch_length_s, 136.0);
            // 20 process shards of 64 tx each.
            assert_eq!(m.tx_committed, 20 * 64);
        }
    }

    #[test]
    fn identical_seeds_produce_identical_csv_bytes() {
        let cfg = ScenarioConfig::parse(tiny_text()).unwrap();
        let a = metrics_csv(&run_scenario(&cfg).unwrap().metrics);
        let b = metrics_csv(&run_scenario(&cfg).unwrap().metrics);
        assert_eq!(a, b);
        assert!(a.ends_with('\n'));
        assert!(!a.contains('\r'));
    }

    #[test]
    fn fmt_f64_six_significant_digits() {
        assert_eq!(fmt_f64(88.02292263610315), "88.0229");
        assert_eq!(fmt_f64(1320.3438395415472), "1320.34");
        assert_eq!(fmt_f64(0.975), "0.975000");
        assert_eq!(fmt_f64(136.0), "136.000");
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(952.7088607594937), "952.709");
    }

    #[test]
    fn sweep_rejects_empty_values() {
        let cfg = ScenarioConfig::parse(tiny_text()).unwrap();
        assert!(sweep(&cfg, "tau", &[]).is_err());
    }

    #[test]
    fn sweep_runs_in_input_order() {
        let cfg = ScenarioConfig::parse(tiny_text()).unwrap();
        let rows = sweep(&cfg, "tau", &["10".into(), "12".into(), "14".into()]).unwrap();
        let got: Vec<&str> = rows.iter().map(|r| r.value.as_str()).collect();
        assert_eq!(got, vec!["10", "12", "14"]);
    }
}
