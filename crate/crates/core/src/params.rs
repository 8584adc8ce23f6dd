//! Shard sizing, failure probability, liveness rate, bandwidth and
//! time-bound formulas.
//!
//! All functions here are pure and callable concurrently. Sizes in KB/MB are
//! binary (1 KB = 1024 bytes) throughout; that convention is what makes the
//! bandwidth chain come out at 952.708 KB/s for the reference configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 2 MiB process block, carrying 4096 transactions.
pub const DEFAULT_BLOCK_BYTES: u64 = 2 * 1024 * 1024;
/// 256 KiB per-shard state snapshot.
pub const DEFAULT_STATE_BYTES: u64 = 256 * 1024;
/// Transactions per process block.
pub const TX_PER_BLOCK: u32 = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no control shard size up to {cap} reaches failure rate below {pfc}")]
    IterationCap { cap: u32, pfc: f64 },
    #[error("no grid value satisfies the failure bound {bound}")]
    NoSolution { bound: f64 },
    #[error("division error: worst-case T2 {t2} must exceed delta {delta}")]
    DegenerateWindow { t2: f64, delta: f64 },
}

/// Global protocol constants. `beta`, `Lambda` and `E_shard` are derived
/// accessors rather than stored fields so they can never drift out of sync.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Total node count N.
    pub n: u32,
    /// Process shard size Np.
    pub np: u32,
    /// Control shard size Nc.
    pub nc: u32,
    /// Maximum global adversarial fraction Pa, in [0, 1).
    pub pa: f64,
    /// Security parameter sigma (bits); the global failure budget is 2^-sigma.
    pub sigma: u32,
    /// Liveness window tau (epochs); one abstention allowed per window.
    pub tau: u32,
    /// T2 unit lambda, virtual seconds.
    pub lambda_s: f64,
    /// Message delay bound Delta, virtual seconds.
    pub delta_s: f64,
    /// Phase-1 bound T1, virtual seconds.
    pub t1_s: f64,
    /// Process block size Bs in bytes.
    pub block_bytes: u64,
    /// Per-shard state size in bytes.
    pub state_bytes: u64,
    /// Transactions carried by one process block.
    pub tx_per_block: u32,
}

impl Default for ProtocolParams {
    /// The N=5000 reference configuration (Pa=33%, sigma for 1e-7-scale
    /// budgets, Np=21, Nc=329, lambda=50s, Delta=10s, T1=86s).
    fn default() -> Self {
        ProtocolParams {
            n: 5000,
            np: 21,
            nc: 329,
            pa: 0.33,
            sigma: 23,
            tau: 40,
            lambda_s: 50.0,
            delta_s: 10.0,
            t1_s: 86.0,
            block_bytes: DEFAULT_BLOCK_BYTES,
            state_bytes: DEFAULT_STATE_BYTES,
            tx_per_block: TX_PER_BLOCK,
        }
    }
}

impl ProtocolParams {
    /// beta = floor(N / Np): number of process shards.
    pub fn process_shard_count(&self) -> u32 {
        self.n / self.np
    }

    /// Lambda = floor(N / Nc): number of control shards.
    pub fn control_shard_count(&self) -> u32 {
        self.n / self.nc
    }

    /// E_shard = floor(Nc / Np): process shards per control shard.
    pub fn shards_per_control(&self) -> u32 {
        self.nc / self.np
    }

    /// Global failure budget 2^-sigma.
    pub fn pf_threshold(&self) -> f64 {
        2f64.powi(-(self.sigma as i32))
    }

    /// E_tx = E_shard * tx_per_block: transactions logged per control-shard
    /// epoch.
    pub fn e_tx(&self) -> u64 {
        self.shards_per_control() as u64 * self.tx_per_block as u64
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.np < 1 {
            return Err(ParamError::Domain("n_p must be >= 1".into()));
        }
        if self.nc < self.np {
            return Err(ParamError::Domain("n_c must be >= n_p".into()));
        }
        if self.n < self.nc {
            return Err(ParamError::Domain("n must be >= n_c".into()));
        }
        if self.tau < self.np {
            return Err(ParamError::Domain("tau must be >= n_p".into()));
        }
        if !(0.0..1.0).contains(&self.pa) {
            return Err(ParamError::Domain("p_a must be in [0, 1)".into()));
        }
        if self.lambda_s <= 0.0 || self.delta_s <= 0.0 || self.t1_s <= 0.0 {
            return Err(ParamError::Domain(
                "lambda, delta_s and t1_s must be positive".into(),
            ));
        }
        if self.tx_per_block == 0 || self.block_bytes == 0 {
            return Err(ParamError::Domain(
                "block_bytes and tx_per_block must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Joint sizing output: a common per-shard failure probability and the shard
/// sizes it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingResult {
    pub np: u32,
    pub nc: u32,
    /// Per-process-shard failure probability (equals `pfc`).
    pub pfp: f64,
    /// Per-control-shard failure probability (equals `pfp`).
    pub pfc: f64,
    /// Achieved approximate global failure probability
    /// `pfp*floor(N/Np) + pfc*floor(N/Nc)`.
    pub pf_approx: f64,
}

/// Smallest process shard size Np with `Pa^Np <= Pfp`, i.e.
/// `ceil(log(Pfp) / log(Pa))`.
pub fn process_shard_size(pa: f64, pfp: f64) -> Result<u32, ParamError> {
    if !(pa > 0.0 && pa < 1.0) {
        return Err(ParamError::Domain("p_a must be in (0, 1)".into()));
    }
    if !(pfp > 0.0 && pfp < 1.0) {
        return Err(ParamError::Domain("p_fp must be in (0, 1)".into()));
    }
    let ratio = pfp.ln() / pa.ln();
    // Absorb float noise at integer boundaries (e.g. 0.1^3 = 1e-3 computes
    // as 3.0000000000000004) before taking the ceiling.
    let np = (ratio - 1e-9).ceil().max(1.0);
    Ok(np as u32)
}

/// Binomial tail `P[X >= ceil(Nc/2)]` for `X ~ Binomial(Nc, Pa)`: the
/// probability that adversaries reach at least half of a control shard.
///
/// With L = S < 50%, a shard already fails when the adversary holds exactly
/// half the seats — no honest majority can form, so liveness is gone even
/// though safety is intact. For odd sizes (every size the sizing search
/// selects) this is the same sum as the strict-majority tail
/// `sum_{i=floor(Nc/2)+1}^{Nc} C(Nc,i) Pa^i (1-Pa)^(Nc-i)`.
///
/// Computed in log space with compensated summation; stable to well over 12
/// significant digits for the shard sizes in play.
pub fn control_shard_failure(nc: u32, pa: f64) -> Result<f64, ParamError> {
    if nc < 1 {
        return Err(ParamError::Domain("n_c must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&pa) {
        return Err(ParamError::Domain("p_a must be in [0, 1]".into()));
    }
    if pa == 0.0 {
        return Ok(0.0);
    }
    if pa == 1.0 {
        return Ok(1.0);
    }
    let n = nc as u64;
    let first = n.div_ceil(2); // ceil(Nc/2)
    let ln_p = pa.ln();
    let ln_q = (1.0 - pa).ln();

    // ln C(n, first) by summing the ratio ln((n-j+1)/j).
    let mut ln_choose = 0.0f64;
    for j in 1..=first {
        ln_choose += ((n - j + 1) as f64).ln() - (j as f64).ln();
    }

    // Scale by the first (largest, since first > mean for pa < 1/2; for
    // pa >= 1/2 the sum is large anyway) term to avoid underflow.
    let ln_first_term = ln_choose + first as f64 * ln_p + (n - first) as f64 * ln_q;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64; // Kahan compensation
    let mut ln_c = ln_choose;
    for i in first..=n {
        if i > first {
            ln_c += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        let ln_term = ln_c + i as f64 * ln_p + (n - i) as f64 * ln_q;
        let term = (ln_term - ln_first_term).exp();
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    Ok((ln_first_term.exp() * sum).min(1.0))
}

/// Upper bound for the `control_shard_size` scan.
pub const CONTROL_SIZE_SCAN_CAP: u32 = 100_000;

/// Smallest Nc whose majority-failure tail is strictly below `pfc`.
///
/// The tail is not globally monotone in Nc (even sizes waste a vote), so
/// this is a linear scan from 1, not a bisection.
pub fn control_shard_size(pa: f64, pfc: f64) -> Result<u32, ParamError> {
    if !(pa > 0.0 && pa < 0.5) {
        return Err(ParamError::Domain(
            "p_a must be in (0, 0.5) for a majority threshold".into(),
        ));
    }
    if !(pfc > 0.0 && pfc < 1.0) {
        return Err(ParamError::Domain("p_fc must be in (0, 1)".into()));
    }
    for nc in 1..=CONTROL_SIZE_SCAN_CAP {
        if control_shard_failure(nc, pa)? < pfc {
            return Ok(nc);
        }
    }
    Err(ParamError::IterationCap {
        cap: CONTROL_SIZE_SCAN_CAP,
        pfc,
    })
}

/// Search grid for the common per-shard failure probability in
/// [`joint_sizes`]. Candidates are `mantissa * 10^exp` for every mantissa in
/// `mantissas` and `exp` in `min_exp..=max_exp`.
///
/// The default is decade-only (`mantissas = [1]`) over 1e-16..=1e-3, which
/// reproduces the reference joint sizing table; a finer mantissa set is
/// available as a knob and picks slightly more aggressive sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingGrid {
    pub mantissas: Vec<u32>,
    pub min_exp: i32,
    pub max_exp: i32,
}

impl Default for SizingGrid {
    fn default() -> Self {
        SizingGrid {
            mantissas: vec![1],
            min_exp: -16,
            max_exp: -3,
        }
    }
}

impl SizingGrid {
    pub fn fine() -> Self {
        SizingGrid {
            mantissas: (1..=9).collect(),
            min_exp: -16,
            max_exp: -3,
        }
    }

    /// Candidate probabilities in descending order.
    pub fn candidates_desc(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for exp in (self.min_exp..=self.max_exp).rev() {
            let mut ms: Vec<u32> = self.mantissas.clone();
            ms.sort_unstable();
            for m in ms.into_iter().rev() {
                v.push(m as f64 * 10f64.powi(exp));
            }
        }
        v
    }
}

/// Finds the largest grid probability `i` such that
/// `i*floor(N/GetNp(i)) + i*floor(N/GetNc(i)) <= bound`, and returns the
/// implied shard sizes.
pub fn joint_sizes(
    n: u32,
    pa: f64,
    pf_approx_bound: f64,
    grid: &SizingGrid,
) -> Result<SizingResult, ParamError> {
    if n < 1 {
        return Err(ParamError::Domain("n must be >= 1".into()));
    }
    for i in grid.candidates_desc() {
        if i >= 1.0 {
            continue;
        }
        let np = process_shard_size(pa, i)?;
        let nc = control_shard_size(pa, i)?;
        let beta = (n / np) as f64;
        let lambda = (n / nc) as f64;
        let pf_approx = i * beta + i * lambda;
        if pf_approx <= pf_approx_bound {
            return Ok(SizingResult {
                np,
                nc,
                pfp: i,
                pfc: i,
                pf_approx,
            });
        }
    }
    Err(ParamError::NoSolution {
        bound: pf_approx_bound,
    })
}

/// Rate of successfully accepting a process block: `(tau - a) / tau`, where
/// `a` is the number of adversarial nodes in the shard. The worst case uses
/// `a = Np - 1`.
pub fn liveness_rate(tau: u32, a: u32) -> Result<f64, ParamError> {
    if tau < 1 {
        return Err(ParamError::Domain("tau must be >= 1".into()));
    }
    if a > tau {
        return Err(ParamError::Domain(format!(
            "a ({a}) must not exceed tau ({tau})"
        )));
    }
    Ok((tau - a) as f64 / tau as f64)
}

/// Smallest `tau >= Np` such that the worst-case liveness rate
/// `(tau - Np + 1) / tau` meets `rp_target`.
///
/// The comparison is done on the same f64 division that [`liveness_rate`]
/// uses, so decimal targets like 0.9 land on the boundary value (140 for
/// Np = 15) instead of being pushed one past it by binary rounding.
pub fn min_tau(np: u32, rp_target: f64) -> Result<u32, ParamError> {
    if !(rp_target > 0.0 && rp_target < 1.0) {
        return Err(ParamError::Domain("rp_target must be in (0, 1)".into()));
    }
    if np < 1 {
        return Err(ParamError::Domain("n_p must be >= 1".into()));
    }
    let a = (np - 1) as f64;
    // Closed-form jump near ceil((Np-1)/(1-rp)), then verify by scanning.
    let approx = (a / (1.0 - rp_target)).floor() as i64 - 2;
    let mut tau = (np as i64).max(approx).max(1) as u32;
    loop {
        let rate = (tau - np + 1) as f64 / tau as f64;
        if rate >= rp_target {
            return Ok(tau);
        }
        tau += 1;
    }
}

/// Phase-2 time-bound `lambda * (E_shard - Ns + 1)` (Eq. form with the count
/// of succeeded process shards `Ns`).
pub fn t2_bound(lambda_s: f64, e_shard: u32, ns: u32) -> Result<f64, ParamError> {
    if ns > e_shard {
        return Err(ParamError::Domain(format!(
            "n_s ({ns}) must not exceed e_shard ({e_shard})"
        )));
    }
    Ok(t2_bound_real(lambda_s, e_shard as f64, ns as f64))
}

/// Real-valued form of [`t2_bound`], used by the expectation model where a
/// fractional expected success count is meaningful.
pub fn t2_bound_real(lambda_s: f64, e_shard: f64, ns: f64) -> f64 {
    lambda_s * (e_shard - ns + 1.0)
}

/// Derived upload-bandwidth requirement and epoch time bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthTimebounds {
    /// Upload bandwidth requirement, KB/s (KB = 1024 bytes).
    pub ub_kb_s: f64,
    /// Phase-1 bound: `ceil(Bs*Np/UB + 4*Delta)` seconds.
    pub t1_s: f64,
    /// Best-case epoch: `T1 + lambda`.
    pub e_time_best_s: f64,
    /// Worst-case epoch: `T1 + lambda*(E_shard + 1)`.
    pub e_time_worst_s: f64,
    /// One-layer baseline epoch at the same upload bandwidth:
    /// `Bs*Nc/UB - Delta` (unrounded).
    pub baseline_e_time_s: f64,
}

/// Derives UB, T1 and the epoch-length bounds from a full parameter set.
///
/// `UB = (Bs*Nc + (Nc-Np)*state) / (T2_worst - Delta)` where
/// `T2_worst = lambda*(E_shard+1)`.
pub fn derive_bandwidth_and_timebounds(
    params: &ProtocolParams,
) -> Result<BandwidthTimebounds, ParamError> {
    let e_shard = params.shards_per_control();
    let t2_worst = t2_bound(params.lambda_s, e_shard, 0)?;
    if t2_worst <= params.delta_s {
        return Err(ParamError::DegenerateWindow {
            t2: t2_worst,
            delta: params.delta_s,
        });
    }
    let kb = 1024.0;
    let bs_kb = params.block_bytes as f64 / kb;
    let state_kb = params.state_bytes as f64 / kb;
    let nc = params.nc as f64;
    let np = params.np as f64;
    let ub = (bs_kb * nc + (nc - np) * state_kb) / (t2_worst - params.delta_s);
    let t1 = (bs_kb * np / ub + 4.0 * params.delta_s).ceil();
    Ok(BandwidthTimebounds {
        ub_kb_s: ub,
        t1_s: t1,
        e_time_best_s: t1 + params.lambda_s,
        e_time_worst_s: t1 + t2_worst,
        baseline_e_time_s: bs_kb * nc / ub - params.delta_s,
    })
}

/// Expectation-model throughput and storage at a given liveness rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPoint {
    /// System transactions per second: `Lambda * E_tx / E_time`.
    pub tx_per_sec: f64,
    /// Expected storage per transaction, KB (KB = 1024 bytes).
    pub storage_per_tx_kb: f64,
    /// Expected epoch length, seconds.
    pub e_time_s: f64,
}

/// Expectation model over Rp: a fraction `1 - Rp` of the `E_shard` process
/// shards fail per epoch (real-valued), failed blocks are stored by the
/// whole control shard plus the synced state, successful ones only by their
/// process shard.
pub fn analytic_throughput_storage(
    params: &ProtocolParams,
    rp: f64,
) -> Result<AnalyticPoint, ParamError> {
    if !(0.0..=1.0).contains(&rp) {
        return Err(ParamError::Domain("rp must be in [0, 1]".into()));
    }
    let e_shard = params.shards_per_control() as f64;
    let failures = e_shard * (1.0 - rp);
    let ns = e_shard - failures;
    let e_time = params.t1_s + t2_bound_real(params.lambda_s, e_shard, ns);
    let e_tx = e_shard * params.tx_per_block as f64;
    let kb = 1024.0;
    let bs_kb = params.block_bytes as f64 / kb;
    let state_kb = params.state_bytes as f64 / kb;
    let np = params.np as f64;
    let nc = params.nc as f64;
    let storage = (ns * bs_kb * np + failures * (bs_kb * nc + (nc - np) * state_kb)) / e_tx;
    Ok(AnalyticPoint {
        tx_per_sec: params.control_shard_count() as f64 * e_tx / e_time,
        storage_per_tx_kb: storage,
        e_time_s: e_time,
    })
}

/// One row of the per-(Pa, Pf) sizing table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingCell {
    pub pa: f64,
    pub pf: f64,
    pub np: u32,
    pub nc: u32,
}

/// Reproduces the shard-size table over Pa in {15, 20, 25, 30, 33}% and
/// Pfp = Pfc in {1e-5, 1e-6, 1e-7}.
pub fn sizing_table() -> Result<Vec<SizingCell>, ParamError> {
    let mut out = Vec::new();
    for &pf in &[1e-5, 1e-6, 1e-7] {
        for &pa in &[0.15, 0.20, 0.25, 0.30, 0.33] {
            out.push(SizingCell {
                pa,
                pf,
                np: process_shard_size(pa, pf)?,
                nc: control_shard_size(pa, pf)?,
            });
        }
    }
    Ok(out)
}

/// One row of the joint sizing table (common per-shard probability chosen
/// against a global bound).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSizingCell {
    pub n: u32,
    pub bound: f64,
    pub result: SizingResult,
}

/// Reproduces the joint sizing table at Pa = 33% over
/// N in {500, 1000, 5000, 10000, 20000} and bounds {1e-5, 1e-6, 1e-7}.
pub fn joint_sizing_table(grid: &SizingGrid) -> Result<Vec<JointSizingCell>, ParamError> {
    let mut out = Vec::new();
    for &bound in &[1e-5, 1e-6, 1e-7] {
        for &n in &[500u32, 1000, 5000, 10_000, 20_000] {
            out.push(JointSizingCell {
                n,
                bound,
                result: joint_sizes(n, 0.33, bound, grid)?,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn process_shard_size_reference_points() {
        assert_eq!(process_shard_size(0.33, 1e-5).unwrap(), 11);
        assert_eq!(process_shard_size(0.15, 1e-7).unwrap(), 9);
        assert_eq!(process_shard_size(0.5, 0.25).unwrap(), 2);
    }

    #[test]
    fn process_shard_size_exact_power_boundary() {
        // 0.1^3 = 1e-3 exactly; float noise must not push this to 4.
        assert_eq!(process_shard_size(0.1, 1e-3).unwrap(), 3);
    }

    #[test]
    fn process_shard_size_domain_errors() {
        assert!(process_shard_size(0.0, 0.5).is_err());
        assert!(process_shard_size(1.0, 0.5).is_err());
        assert!(process_shard_size(0.3, 0.0).is_err());
        assert!(process_shard_size(0.3, 1.0).is_err());
    }

    #[test]
    fn control_shard_failure_trivial_points() {
        assert!((control_shard_failure(1, 0.33).unwrap() - 0.33).abs() < 1e-12);
        assert!((control_shard_failure(3, 0.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn control_shard_size_reference_points() {
        assert_eq!(control_shard_size(0.33, 1e-5).unwrap(), 149);
        assert_eq!(control_shard_size(0.25, 1e-6).unwrap(), 79);
        assert_eq!(control_shard_size(0.33, 1e-7).unwrap(), 221);
    }

    #[test]
    fn liveness_rate_points() {
        assert_eq!(liveness_rate(40, 20).unwrap(), 0.5);
        let r = liveness_rate(411, 20).unwrap();
        assert!((r - 391.0 / 411.0).abs() < 1e-15);
        assert_eq!((r * 100.0).round() as u32, 95);
        assert_eq!(liveness_rate(17, 0).unwrap(), 1.0);
        assert!(liveness_rate(10, 11).is_err());
    }

    #[test]
    fn min_tau_anchor_points() {
        assert_eq!(min_tau(15, 0.40).unwrap(), 24);
        assert_eq!(min_tau(15, 0.70).unwrap(), 47);
        assert_eq!(min_tau(15, 0.90).unwrap(), 140);
    }

    #[test]
    fn min_tau_clamps_to_np() {
        // Tiny targets are already met at tau = Np.
        assert_eq!(min_tau(15, 0.01).unwrap(), 15);
    }

    #[test]
    fn t2_bound_points() {
        assert_eq!(t2_bound(50.0, 15, 15).unwrap(), 50.0);
        assert_eq!(t2_bound(50.0, 15, 0).unwrap(), 800.0);
        assert_eq!(t2_bound(7.0, 4, 4).unwrap(), 7.0);
        assert!(t2_bound(50.0, 15, 16).is_err());
    }

    #[test]
    fn bandwidth_chain_reference_configuration() {
        let p = ProtocolParams::default();
        let b = derive_bandwidth_and_timebounds(&p).unwrap();
        // 752640 KB over 790 s.
        assert!((b.ub_kb_s - 752_640.0 / 790.0).abs() < 1e-9);
        assert!((b.ub_kb_s - 952.708).abs() <= 0.001);
        assert_eq!(b.t1_s, 86.0);
        assert_eq!(b.e_time_best_s, 136.0);
        assert_eq!(b.e_time_worst_s, 886.0);
        assert!((b.baseline_e_time_s - 698.0).abs() <= 1.0);
    }

    #[test]
    fn degenerate_window_is_rejected() {
        // lambda so small the worst-case phase-two window closes before
        // the delay bound: no finite upload bandwidth can satisfy it.
        let p = ProtocolParams {
            lambda_s: 0.5,
            ..ProtocolParams::default()
        };
        assert!(matches!(
            derive_bandwidth_and_timebounds(&p),
            Err(ParamError::DegenerateWindow { .. })
        ));
    }

    #[test]
    fn analytic_model_endpoints() {
        let p = ProtocolParams::default();
        let best = analytic_throughput_storage(&p, 1.0).unwrap();
        assert!((best.tx_per_sec - 15.0 * 61440.0 / 136.0).abs() < 1e-9);
        assert!((best.storage_per_tx_kb - 10.5).abs() < 1e-12);
        let worst = analytic_throughput_storage(&p, 0.0).unwrap();
        assert!((worst.tx_per_sec - 921_600.0 / 886.0).abs() < 1e-9);
        assert!((worst.storage_per_tx_kb - 183.75).abs() < 1e-12);
    }

    #[test]
    fn analytic_model_interior_points() {
        let p = ProtocolParams::default();
        let at95 = analytic_throughput_storage(&p, 0.95).unwrap();
        assert!((at95.storage_per_tx_kb - 19.1625).abs() < 1e-9);
        let at50 = analytic_throughput_storage(&p, 0.5).unwrap();
        assert!((at50.storage_per_tx_kb - 97.125).abs() < 1e-9);
    }

    #[test]
    fn params_validation() {
        let mut p = ProtocolParams::default();
        assert!(p.validate().is_ok());
        p.tau = 10;
        let err = p.validate().unwrap_err();
        assert_eq!(err, ParamError::Domain("tau must be >= n_p".into()));
    }

    #[test]
    fn derived_counts() {
        let p = ProtocolParams::default();
        assert_eq!(p.process_shard_count(), 238);
        assert_eq!(p.control_shard_count(), 15);
        assert_eq!(p.shards_per_control(), 15);
        assert_eq!(p.e_tx(), 61_440);
    }

    #[test]
    fn joint_sizes_reference_points() {
        let grid = SizingGrid::default();
        let r = joint_sizes(5000, 0.33, 1e-7, &grid).unwrap();
        assert_eq!((r.np, r.nc), (21, 329));
        let r = joint_sizes(500, 0.33, 1e-5, &grid).unwrap();
        assert_eq!((r.np, r.nc), (15, 221));
        let r = joint_sizes(20_000, 0.33, 1e-6, &grid).unwrap();
        assert_eq!((r.np, r.nc), (21, 329));
    }

    #[test]
    fn joint_sizes_bound_is_respected() {
        let grid = SizingGrid::default();
        let r = joint_sizes(5000, 0.33, 1e-7, &grid).unwrap();
        assert!(r.pf_approx <= 1e-7);
        let recomputed = r.pfp * (5000 / r.np) as f64 + r.pfc * (5000 / r.nc) as f64;
        assert!((r.pf_approx - recomputed).abs() < 1e-20);
    }

    #[test]
    fn joint_sizes_no_solution() {
        let grid = SizingGrid::default();
        let err = joint_sizes(1_000_000_000, 0.33, 1e-12, &grid).unwrap_err();
        assert!(matches!(err, ParamError::NoSolution { .. }));
    }
}
