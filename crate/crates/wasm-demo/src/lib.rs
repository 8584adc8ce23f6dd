//! Browser bindings for the parameter explorer: shard sizing, the tau/Rp
//! trade-off and the analytic throughput/storage comparison. Each function
//! returns a JSON string; `www/index.html` renders the plots.

use wasm_bindgen::prelude::*;

use reticulum_core::compare::baseline_analytics;
use reticulum_core::params::{
    analytic_throughput_storage, control_shard_failure, control_shard_size, liveness_rate, min_tau,
    process_shard_size, ProtocolParams,
};

fn err_json(e: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": e.to_string() }).to_string()
}

/// Shard sizes and the achieved failure tails for one (pa, pf) point, plus
/// the five-column table at the standard adversarial fractions.
#[wasm_bindgen]
pub fn sizing_json(pa: f64, pf_exponent: i32) -> String {
    let pf = 10f64.powi(-pf_exponent);
    let point = (|| -> Result<serde_json::Value, reticulum_core::params::ParamError> {
        let np = process_shard_size(pa, pf)?;
        let nc = control_shard_size(pa, pf)?;
        Ok(serde_json::json!({
            "pa": pa,
            "pf": pf,
            "np": np,
            "nc": nc,
            "process_tail": pa.powi(np as i32),
            "control_tail": control_shard_failure(nc, pa)?,
        }))
    })();
    let point = match point {
        Ok(v) => v,
        Err(e) => return err_json(e),
    };
    let mut table = Vec::new();
    for pa in [0.15, 0.20, 0.25, 0.30, 0.33] {
        match (process_shard_size(pa, pf), control_shard_size(pa, pf)) {
            (Ok(np), Ok(nc)) => table.push(serde_json::json!({ "pa": pa, "np": np, "nc": nc })),
            (Err(e), _) | (_, Err(e)) => return err_json(e),
        }
    }
    serde_json::json!({ "point": point, "table": table }).to_string()
}

/// Worst-case liveness rate as a function of tau for a given shard size,
/// with the smallest tau meeting a few common targets.
#[wasm_bindgen]
pub fn liveness_json(np: u32, tau_max: u32) -> String {
    if np < 2 {
        return err_json("np must be >= 2");
    }
    let mut curve = Vec::new();
    let hi = tau_max.max(np).min(np.saturating_add(2000));
    for tau in np..=hi {
        match liveness_rate(tau, np - 1) {
            Ok(rp) => curve.push(serde_json::json!({ "tau": tau, "rp": rp })),
            Err(e) => return err_json(e),
        }
    }
    let mut anchors = Vec::new();
    for target in [0.40, 0.50, 0.70, 0.90, 0.95] {
        match min_tau(np, target) {
            Ok(tau) => anchors.push(serde_json::json!({ "target": target, "tau": tau })),
            Err(e) => return err_json(e),
        }
    }
    serde_json::json!({ "np": np, "curve": curve, "anchors": anchors }).to_string()
}

/// Analytic throughput and storage versus the liveness rate for the
/// reference configuration, with the one-layer baseline for comparison.
#[wasm_bindgen]
pub fn throughput_json(steps: u32) -> String {
    let p = ProtocolParams::default();
    let steps = steps.clamp(2, 400);
    let mut points = Vec::new();
    for i in 0..=steps {
        let rp = i as f64 / steps as f64;
        match analytic_throughput_storage(&p, rp) {
            Ok(a) => points.push(serde_json::json!({
                "rp": rp,
                "tx_per_sec": a.tx_per_sec,
                "storage_per_tx_kb": a.storage_per_tx_kb,
                "e_time_s": a.e_time_s,
            })),
            Err(e) => return err_json(e),
        }
    }
    let base = match baseline_analytics(&p) {
        Ok(b) => b,
        Err(e) => return err_json(e),
    };
    serde_json::json!({
        "points": points,
        "baseline": {
            "tx_per_sec": base.tx_total_s,
            "storage_per_tx_kb": base.storage_per_tx_kb,
            "e_time_s": base.e_time_s,
        }
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizing_json_carries_reference_point() {
        let v: serde_json::Value = serde_json::from_str(&sizing_json(0.33, 5)).unwrap();
        assert_eq!(v["point"]["np"], 11);
        assert_eq!(v["point"]["nc"], 149);
        assert_eq!(v["table"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn liveness_json_has_anchor_140() {
        let v: serde_json::Value = serde_json::from_str(&liveness_json(15, 200)).unwrap();
        let anchors = v["anchors"].as_array().unwrap();
        let at90 = anchors.iter().find(|a| a["target"] == 0.9).unwrap();
        assert_eq!(at90["tau"], 140);
    }

    #[test]
    fn throughput_json_endpoints() {
        let v: serde_json::Value = serde_json::from_str(&throughput_json(4)).unwrap();
        let points = v["points"].as_array().unwrap();
        assert_eq!(points.len(), 5);
        let first = points[0]["tx_per_sec"].as_f64().unwrap();
        let last = points[4]["tx_per_sec"].as_f64().unwrap();
        assert!(last > first);
    }

    #[test]
    fn bad_input_reports_error() {
        let v: serde_json::Value = serde_json::from_str(&sizing_json(1.5, 5)).unwrap();
        assert!(v["error"].is_string());
    }
}
