//! Golden-file test: the emitted CSV bytes for a tiny scenario are frozen
//! here. Any change to the schema, float formatting or engine evolution
//! shows up as a byte diff.

use reticulum_core::harness::{
    events_csv, metrics_csv, run_scenario, summary_text, ScenarioConfig,
};

const CONFIG: &str = "\
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
epochs = 3
strategy = worst
corrupt_per_shard = 1
seed = 2024
system = reticulum
";

const EXPECTED_METRICS: &str = "\
epoch,system,tx_committed,epoch_length_s,throughput_tx_s,storage_bytes_total,storage_per_tx,silent_nodes_global,expelled_cumulative,bb_messages,upload_bytes_max_node
0,reticulum,704,336.000,2.09524,297984,423.273,19,0,4223,42860
1,reticulum,1280,136.000,9.41176,122880,96.0000,0,0,6160,42860
2,reticulum,1280,136.000,9.41176,122880,96.0000,0,0,6160,42860
";

const EXPECTED_SUMMARY: &str = "\
system: reticulum
epochs: 3
tx_total: 3264
mean_epoch_length_s: 202.667
mean_throughput_tx_s: 6.97292
mean_storage_per_tx_bytes: 205.091
rp_measured_all: 0.683333
rp_measured_corrupted: 0.666667
violations_total: 19
expelled_total: 0
";

#[test]
fn tiny_scenario_bytes_are_stable() {
    let cfg = ScenarioConfig::parse(CONFIG).unwrap();
    let out = run_scenario(&cfg).unwrap();
    assert_eq!(metrics_csv(&out.metrics), EXPECTED_METRICS);
    assert_eq!(summary_text(&out.summary), EXPECTED_SUMMARY);
    // 19 first-mark violations at epoch 0, nothing afterwards.
    let events = events_csv(&out.events);
    assert_eq!(events.lines().count(), 20);
    assert!(events.starts_with("epoch,node,event,shard\n"));
    assert!(events
        .lines()
        .skip(1)
        .all(|l| l.starts_with("0,") && l.contains(",violation,")));
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = ScenarioConfig::parse(CONFIG).unwrap();
    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&cfg).unwrap();
    assert_eq!(metrics_csv(&a.metrics), metrics_csv(&b.metrics));
    assert_eq!(events_csv(&a.events), events_csv(&b.events));
    assert_eq!(summary_text(&a.summary), summary_text(&b.summary));
}

#[test]
fn full_mode_with_cross_traffic_reruns_identically() {
    // The richer path: real signed transfers, cross-shard legs, proofs.
    let text = CONFIG.replace("strategy = worst", "strategy = none").to_string()
        + "tx_mode = full\naccounts_per_shard = 6\nintra_tx_per_block = 6\ncross_tx_fraction = 0.5\nepochs = 8\n";
    let cfg = ScenarioConfig::parse(&text).unwrap();
    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&cfg).unwrap();
    assert_eq!(metrics_csv(&a.metrics), metrics_csv(&b.metrics));
    assert!(a.metrics.iter().skip(2).any(|m| m.tx_committed > 0));
}
