//! `reticulum` — parameter math, deterministic simulation, sweeps and
//! system comparisons from the command line.
//!
//! Exit codes: 0 success, 2 config/schema error, 3 infeasible parameters,
//! 4 internal error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use reticulum_core::compare::{baseline_analytics, gearbox_find_gears, GearConfig};
use reticulum_core::harness::{
    compare_csv, compare_grid, events_csv, fmt_f64, gear_distribution_csv, metrics_csv,
    run_scenario, summary_text, sweep, sweep_csv, HarnessError, ScenarioConfig,
};
use reticulum_core::params::{
    analytic_throughput_storage, control_shard_size, derive_bandwidth_and_timebounds,
    joint_sizing_table, liveness_rate, min_tau, process_shard_size, ProtocolParams, SizingGrid,
};

#[derive(Parser)]
#[command(
    name = "reticulum",
    about = "Deterministic virtual-time simulator for a two-layer sharding protocol"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print shard sizing tables, bandwidth/time-bound derivations and
    /// liveness anchors.
    Params {
        /// Also print the joint sizing table on the fine mantissa grid.
        #[arg(long)]
        fine_grid: bool,
        /// Query one sizing point: adversarial fraction.
        #[arg(long)]
        pa: Option<f64>,
        /// Query one sizing point: per-shard failure probability.
        #[arg(long)]
        pf: Option<f64>,
    },
    /// Run one scenario from a config file and emit CSV metrics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for metrics.csv, events.csv, summary.txt
        /// (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one scenario per value of a config key and aggregate one row per
    /// value.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Config key to vary (e.g. tau, p_a_run).
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare reticulum, baseline and gearbox across a p_a_run grid.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated adversarial fractions (default 0,0.10,0.20,0.33).
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Published sizing table this build reproduces: (pa, [Np per pf], [Nc per
/// pf]) over pf in {1e-5, 1e-6, 1e-7}.
const SIZING_REFERENCE: [(f64, [u32; 3], [u32; 3]); 5] = [
    (0.15, [7, 8, 9], [27, 35, 41]),
    (0.20, [8, 9, 11], [41, 51, 61]),
    (0.25, [9, 10, 12], [63, 79, 95]),
    (0.30, [10, 12, 14], [105, 131, 155]),
    (0.33, [11, 13, 15], [149, 185, 221]),
];

/// Published joint sizing cells at pa = 33%: (bound, [(N, Np, Nc)]).
const JOINT_REFERENCE: [(f64, [(u32, u32, u32); 5]); 3] = [
    (
        1e-5,
        [
            (500, 15, 221),
            (1000, 15, 221),
            (5000, 17, 257),
            (10000, 17, 257),
            (20000, 19, 293),
        ],
    ),
    (
        1e-6,
        [
            (500, 17, 257),
            (1000, 17, 257),
            (5000, 19, 293),
            (10000, 19, 293),
            (20000, 21, 329),
        ],
    ),
    (
        1e-7,
        [
            (500, 19, 293),
            (1000, 19, 293),
            (5000, 21, 329),
            (10000, 21, 329),
            (20000, 23, 367),
        ],
    ),
];

fn cmd_params(fine_grid: bool, pa: Option<f64>, pf: Option<f64>) -> Result<(), HarnessError> {
    let as_infeasible =
        |e: reticulum_core::params::ParamError| HarnessError::Infeasible(e.to_string());

    if let (Some(pa), Some(pf)) = (pa, pf) {
        let np = process_shard_size(pa, pf).map_err(as_infeasible)?;
        let nc = control_shard_size(pa, pf).map_err(as_infeasible)?;
        println!("pa={pa} pf={pf}: Np={np} Nc={nc}");
        return Ok(());
    }

    println!("Shard sizes (Np & Nc) by adversarial fraction and failure bound:");
    println!("  pf        15%      20%      25%      30%      33%");
    for (row, pf) in [1e-5f64, 1e-6, 1e-7].into_iter().enumerate() {
        let mut line = format!("  1e-{}   ", 5 + row);
        let mut mismatch = String::new();
        for (pa, nps, ncs) in SIZING_REFERENCE {
            let np = process_shard_size(pa, pf).map_err(as_infeasible)?;
            let nc = control_shard_size(pa, pf).map_err(as_infeasible)?;
            line.push_str(&format!("{np:>3}&{nc:<4} "));
            if np != nps[row] || nc != ncs[row] {
                mismatch.push_str(&format!(" [pa={pa}: reference {}&{}]", nps[row], ncs[row]));
            }
        }
        println!("{line}{mismatch}");
    }

    let print_joint = |grid: &SizingGrid, label: &str| -> Result<(), HarnessError> {
        println!("\nJoint sizing at pa=33% ({label} grid), bound x N:");
        let table = joint_sizing_table(grid).map_err(as_infeasible)?;
        for (bound, refs) in JOINT_REFERENCE {
            let mut line = format!("  {:<7}", format!("{bound:.0e}"));
            let mut mismatch = String::new();
            for (n, rnp, rnc) in refs {
                let cell = table
                    .iter()
                    .find(|c| c.n == n && (c.bound - bound).abs() < bound * 1e-9)
                    .expect("table covers the reference cells");
                line.push_str(&format!("{:>3}&{:<4} ", cell.result.np, cell.result.nc));
                if cell.result.np != rnp || cell.result.nc != rnc {
                    mismatch.push_str(&format!(" [N={n}: reference {rnp}&{rnc}]"));
                }
            }
            if mismatch.is_empty() {
                println!("{line}");
            } else {
                println!("{line}  MISMATCH:{mismatch}");
            }
        }
        Ok(())
    };
    print_joint(&SizingGrid::default(), "decade")?;
    if fine_grid {
        print_joint(&SizingGrid::fine(), "fine mantissa")?;
    }

    let p = ProtocolParams::default();
    let b = derive_bandwidth_and_timebounds(&p).map_err(as_infeasible)?;
    let base = baseline_analytics(&p)?;
    println!("\nReference configuration (N=5000, Np=21, Nc=329):");
    println!("  UB               = {} KB/s", fmt_f64(b.ub_kb_s));
    println!("  T1               = {} s", fmt_f64(b.t1_s));
    println!("  E_time best      = {} s", fmt_f64(b.e_time_best_s));
    println!("  E_time worst     = {} s", fmt_f64(b.e_time_worst_s));
    println!(
        "  baseline E_time  = {} s (quoted {})",
        fmt_f64(base.e_time_raw_s),
        fmt_f64(base.e_time_s)
    );
    println!(
        "  baseline tx/s    = {} per shard, {} total",
        fmt_f64(base.tx_per_shard_s),
        fmt_f64(base.tx_total_s)
    );
    println!(
        "  baseline S_tx    = {} KB",
        fmt_f64(base.storage_per_tx_kb)
    );

    println!(
        "\nLiveness anchors (Np=15): tau for Rp 40/70/90% = {}, {}, {}",
        min_tau(15, 0.40).map_err(as_infeasible)?,
        min_tau(15, 0.70).map_err(as_infeasible)?,
        min_tau(15, 0.90).map_err(as_infeasible)?,
    );
    println!(
        "Worst-case Rp at tau=40, Np=21: {}",
        fmt_f64(liveness_rate(40, 20).map_err(as_infeasible)?)
    );
    for rp in [0.0, 0.5, 0.95, 1.0] {
        let a = analytic_throughput_storage(&p, rp).map_err(as_infeasible)?;
        println!(
            "Expectation model at Rp={rp}: {} tx/s, {} KB/tx, epoch {} s",
            fmt_f64(a.tx_per_sec),
            fmt_f64(a.storage_per_tx_kb),
            fmt_f64(a.e_time_s)
        );
    }
    Ok(())
}

fn read_config(path: &PathBuf) -> Result<ScenarioConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Schema {
        key: path.display().to_string(),
        reason: e.to_string(),
    })?;
    ScenarioConfig::parse(&text)
}

fn write_out(dir: &Option<PathBuf>, name: &str, contents: &str) -> Result<(), HarnessError> {
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d).map_err(|e| HarnessError::Schema {
                key: d.display().to_string(),
                reason: e.to_string(),
            })?;
            let path = d.join(name);
            std::fs::write(&path, contents).map_err(|e| HarnessError::Schema {
                key: path.display().to_string(),
                reason: e.to_string(),
            })?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            println!("==== {name} ====");
            print!("{contents}");
        }
    }
    Ok(())
}

fn cmd_simulate(config: PathBuf, out: Option<PathBuf>) -> Result<(), HarnessError> {
    let cfg = read_config(&config)?;
    let result = run_scenario(&cfg)?;
    write_out(&out, "metrics.csv", &metrics_csv(&result.metrics))?;
    write_out(&out, "events.csv", &events_csv(&result.events))?;
    write_out(&out, "summary.txt", &summary_text(&result.summary))?;
    if let Some(dist) = &result.gearbox {
        write_out(&out, "gear_distribution.csv", &gear_distribution_csv(dist))?;
    }
    Ok(())
}

fn cmd_sweep(
    config: PathBuf,
    param: String,
    values: String,
    out: Option<PathBuf>,
) -> Result<(), HarnessError> {
    let cfg = read_config(&config)?;
    let values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    let rows = sweep(&cfg, &param, &values)?;
    write_out(&out, "sweep.csv", &sweep_csv(&param, &rows))
}

fn cmd_compare(
    config: PathBuf,
    grid: Option<String>,
    out: Option<PathBuf>,
) -> Result<(), HarnessError> {
    let cfg = read_config(&config)?;
    let grid: Vec<f64> = match grid {
        None => vec![0.0, 0.10, 0.20, 0.33],
        Some(g) => g
            .split(',')
            .map(|v| {
                v.trim().parse().map_err(|_| HarnessError::Schema {
                    key: "grid".into(),
                    reason: format!("cannot parse `{v}`"),
                })
            })
            .collect::<Result<_, _>>()?,
    };
    let rows = compare_grid(&cfg, &grid)?;
    write_out(&out, "compare.csv", &compare_csv(&rows))?;
    // The top-adversary gear distribution, for the overlap/gear plots.
    let mut gear_cfg = GearConfig::default();
    gear_cfg.shard_count = cfg.gearbox_shards;
    gear_cfg.block_bytes = cfg.params.block_bytes;
    gear_cfg.tx_per_block = cfg.params.tx_per_block;
    let top = grid.iter().copied().fold(0.0f64, f64::max);
    let dist = gearbox_find_gears(cfg.params.n, top, cfg.seed, cfg.gearbox_trials, &gear_cfg)?;
    write_out(&out, "gear_distribution.csv", &gear_distribution_csv(&dist))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Params { fine_grid, pa, pf } => cmd_params(fine_grid, pa, pf),
        Command::Simulate { config, out } => cmd_simulate(config, out),
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => cmd_sweep(config, param, values, out),
        Command::Compare { config, grid, out } => cmd_compare(config, grid, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
