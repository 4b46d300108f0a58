//! Replay gain statistics and confidence certification.
//!
//! For a candidate/comparator pair, each sample is a per-path gain
//! `Z_l = cost(comparator) - cost(candidate)` bounded by `B`. From `m`
//! samples we form:
//!
//! ```text
//! mean     = (1/m) sum Z_l
//! variance = (1/m) sum (Z_l - mean)^2          (biased form)
//! radius   = B * sqrt(2 * ln(2N/delta) / m)    (Hoeffding, union over N pairs)
//! ```
//!
//! and the bounds `lcb = mean - radius`, `ucb = mean + radius`. For short
//! replay windows a blockwise Student-t radius is available: daily gains
//! are aggregated into blocks of `b = max(7, L+1)` days to damp short-range
//! dependence, and the radius is a t-quantile at level `1 - delta/(2N)` on
//! the block means. Comparing a policy against itself yields mean = radius
//! = 0 by convention.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::policy::PolicySpec;

// ── Gain samples ────────────────────────────────────────────────────────

/// Per-pair replay gain samples with their boundedness constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSamples {
    pub candidate: PolicySpec,
    pub comparator: PolicySpec,
    /// Gain samples `Z_l`, comparator cost minus candidate cost.
    pub samples: Vec<f64>,
    /// Bound with `|Z_l| <= bound` for every sample.
    pub bound: f64,
}

impl GainSamples {
    pub fn new(candidate: PolicySpec, comparator: PolicySpec, samples: Vec<f64>, bound: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("gain samples must be non-empty".into()));
        }
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(Error::InvalidInput(format!("gain bound must be positive, got {bound}")));
        }
        if samples.iter().any(|z| !z.is_finite() || z.abs() > bound) {
            return Err(Error::InvalidInput("gain sample outside [-bound, bound]".into()));
        }
        Ok(Self { candidate, comparator, samples, bound })
    }

    pub fn is_self_comparison(&self) -> bool {
        self.candidate.canonical_key() == self.comparator.canonical_key()
    }
}

/// Replay mean and biased empirical variance of the gain samples.
pub fn replay_mean_var(g: &GainSamples) -> (f64, f64) {
    let m = g.samples.len() as f64;
    let mean = g.samples.iter().sum::<f64>() / m;
    let var = g.samples.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / m;
    (mean, var)
}

// ── Confidence bounds ───────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertMethod {
    Hoeffding,
    BlockwiseT,
}

/// Mean, variance, radius and the derived confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBound {
    pub mean: f64,
    pub variance: f64,
    pub radius: f64,
    pub lcb: f64,
    pub ucb: f64,
    pub method: CertMethod,
    /// Set when a blockwise-t request had too few blocks and fell back to
    /// the Hoeffding radius.
    pub fallback: bool,
}

impl ConfidenceBound {
    fn around(mean: f64, variance: f64, radius: f64, method: CertMethod, fallback: bool) -> Self {
        Self { mean, variance, radius, lcb: mean - radius, ucb: mean + radius, method, fallback }
    }

    /// The self-comparison convention: mean = radius = 0.
    pub fn self_comparison(method: CertMethod) -> Self {
        Self::around(0.0, 0.0, 0.0, method, false)
    }
}

/// Hoeffding confidence radius `B * sqrt(2 ln(2N/delta) / m)` for one of
/// `N` simultaneously certified pairs.
pub fn hoeffding_radius(bound: f64, m: usize, n_pairs: usize, delta: f64) -> Result<f64> {
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(Error::InvalidInput(format!("bound must be positive, got {bound}")));
    }
    if m == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    if n_pairs == 0 {
        return Err(Error::InvalidInput("pair budget must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta out of (0,1), got {delta}")));
    }
    Ok(bound * (2.0 * (2.0 * n_pairs as f64 / delta).ln() / m as f64).sqrt())
}

/// Student-t quantile (inverse CDF) with `dof` degrees of freedom.
pub fn t_quantile(prob: f64, dof: usize) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::InvalidInput(format!("probability out of (0,1), got {prob}")));
    }
    if dof == 0 {
        return Err(Error::InvalidInput("degrees of freedom must be at least 1".into()));
    }
    let dist = StudentsT::new(0.0, 1.0, dof as f64)
        .map_err(|e| Error::InvalidInput(format!("student-t: {e}")))?;
    Ok(dist.inverse_cdf(prob))
}

/// Block size for blockwise aggregation: `max(7, L+1)`.
pub fn block_size(lead_time: usize) -> usize {
    7.max(lead_time + 1)
}

/// Blockwise Student-t confidence bound.
///
/// Samples are split into `floor(m/b)` blocks of length `b`; a remainder
/// shorter than a block is merged into the last one. With fewer than two
/// blocks the Hoeffding radius is used instead and `fallback` is set.
pub fn blockwise_t_radius(
    g: &GainSamples,
    lead_time: usize,
    n_pairs: usize,
    delta: f64,
) -> Result<ConfidenceBound> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta out of (0,1), got {delta}")));
    }
    let b = block_size(lead_time);
    let m = g.samples.len();
    let k = m / b;
    if k < 2 {
        let (mean, var) = replay_mean_var(g);
        let radius = hoeffding_radius(g.bound, m, n_pairs, delta)?;
        return Ok(ConfidenceBound::around(mean, var, radius, CertMethod::Hoeffding, true));
    }

    let mut block_means = Vec::with_capacity(k);
    for i in 0..k {
        let start = i * b;
        let end = if i == k - 1 { m } else { start + b };
        let block = &g.samples[start..end];
        block_means.push(block.iter().sum::<f64>() / block.len() as f64);
    }
    let kf = k as f64;
    let mean = block_means.iter().sum::<f64>() / kf;
    let s2 = block_means.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (kf - 1.0);
    let quantile = t_quantile(1.0 - delta / (2.0 * n_pairs as f64), k - 1)?;
    let radius = quantile * s2.sqrt() / kf.sqrt();
    Ok(ConfidenceBound::around(mean, s2, radius, CertMethod::BlockwiseT, false))
}

/// Per-epoch cap on evaluated pairs: `(|A0| - 1) + 2J`.
pub fn evaluation_budget(initial_pool_size: usize, proposal_rounds: usize) -> Result<usize> {
    if initial_pool_size < 1 {
        return Err(Error::InvalidInput("initial pool must contain at least the reference".into()));
    }
    if proposal_rounds < 1 {
        return Err(Error::InvalidInput("proposal rounds must be at least 1".into()));
    }
    Ok((initial_pool_size - 1) + 2 * proposal_rounds)
}

/// Composes mean/variance with the chosen radius, honoring the
/// self-comparison convention.
pub fn confidence_bound(
    g: &GainSamples,
    n_pairs: usize,
    delta: f64,
    method: CertMethod,
    lead_time: usize,
) -> Result<ConfidenceBound> {
    if g.is_self_comparison() {
        return Ok(ConfidenceBound::self_comparison(method));
    }
    match method {
        CertMethod::Hoeffding => {
            let (mean, var) = replay_mean_var(g);
            let radius = hoeffding_radius(g.bound, g.samples.len(), n_pairs, delta)?;
            Ok(ConfidenceBound::around(mean, var, radius, CertMethod::Hoeffding, false))
        }
        CertMethod::BlockwiseT => blockwise_t_radius(g, lead_time, n_pairs, delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicySpec;

    fn pair() -> (PolicySpec, PolicySpec) {
        (
            PolicySpec::constant_order(1.0).unwrap(),
            PolicySpec::constant_order(2.0).unwrap(),
        )
    }

    fn gains(samples: Vec<f64>, bound: f64) -> GainSamples {
        let (a, b) = pair();
        GainSamples::new(a, b, samples, bound).unwrap()
    }

    #[test]
    fn replay_mean_var_matches_hand_computation() {
        let (m, v) = replay_mean_var(&gains(vec![2.0, 4.0], 5.0));
        assert_eq!((m, v), (3.0, 1.0));
        let (m, v) = replay_mean_var(&gains(vec![1.5, 1.5, 1.5], 2.0));
        assert_eq!((m, v), (1.5, 0.0));
        let (m, v) = replay_mean_var(&gains(vec![-1.0, 0.0, 1.0], 2.0));
        assert_eq!(m, 0.0);
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hoeffding_radius_matches_formula_evaluation() {
        // 10 * sqrt(2 ln(1000) / 100) = 3.7170 to 4 places.
        let r = hoeffding_radius(10.0, 100, 25, 0.05).unwrap();
        assert!((r - 3.7170).abs() < 1e-3);
    }

    #[test]
    fn hoeffding_radius_scaling_identities() {
        let r1 = hoeffding_radius(1.0, 50, 10, 0.1).unwrap();
        let r4 = hoeffding_radius(1.0, 200, 10, 0.1).unwrap();
        assert!((r1 - 2.0 * r4).abs() < 1e-12);

        // m = 2 ln(2N/delta) makes the radius exactly 1.
        let n = 25;
        let delta = 0.05;
        let m = 2.0 * (2.0 * n as f64 / delta).ln();
        let r = 1.0 * (2.0 * (2.0 * n as f64 / delta).ln() / m).sqrt();
        assert!((r - 1.0).abs() < 1e-12);

        assert!(hoeffding_radius(0.0, 10, 10, 0.1).is_err());
        assert!(hoeffding_radius(1.0, 10, 0, 0.1).is_err());
        assert!(hoeffding_radius(1.0, 10, 10, 1.0).is_err());
    }

    #[test]
    fn hoeffding_radius_is_monotone_in_each_argument() {
        let base = hoeffding_radius(2.0, 100, 20, 0.05).unwrap();
        assert!(hoeffding_radius(2.0, 200, 20, 0.05).unwrap() < base);
        assert!(hoeffding_radius(3.0, 100, 20, 0.05).unwrap() > base);
        assert!(hoeffding_radius(2.0, 100, 40, 0.05).unwrap() > base);
        assert!(hoeffding_radius(2.0, 100, 20, 0.01).unwrap() > base);
    }

    #[test]
    fn t_quantile_matches_reference_values() {
        assert!(t_quantile(0.5, 7).unwrap().abs() < 1e-9);
        assert!((t_quantile(0.975, 13).unwrap() - 2.1604).abs() < 1e-3);
        // Closed form for one degree of freedom: tan(pi (p - 1/2)).
        let closed = (std::f64::consts::PI * 0.45).tan();
        assert!((t_quantile(0.95, 1).unwrap() - closed).abs() < 1e-3);
        assert!(t_quantile(0.0, 3).is_err());
        assert!(t_quantile(0.5, 0).is_err());
    }

    #[test]
    fn t_quantile_approaches_the_normal_quantile() {
        let normal_975 = 1.959964;
        let gap_100 = (t_quantile(0.975, 100).unwrap() - normal_975).abs();
        let gap_1000 = (t_quantile(0.975, 1000).unwrap() - normal_975).abs();
        // The exact quantile at dof 1000 sits 2.375e-3 above the normal.
        assert!(gap_1000 < 2.5e-3, "gap {gap_1000}");
        assert!(gap_1000 < gap_100);
    }

    #[test]
    fn block_sizes_follow_lead_time() {
        assert_eq!(block_size(4), 7);
        assert_eq!(block_size(9), 10);
    }

    #[test]
    fn blockwise_handles_constant_samples_and_remainders() {
        let g = gains(vec![3.0; 21], 4.0);
        let cb = blockwise_t_radius(&g, 0, 5, 0.05).unwrap();
        assert_eq!(cb.radius, 0.0);
        assert_eq!((cb.lcb, cb.ucb), (3.0, 3.0));
        assert_eq!(cb.method, CertMethod::BlockwiseT);
        assert!(!cb.fallback);

        // 100 daily samples with lead time <= 6: 14 blocks, remainder of 2
        // merged into the last.
        let samples: Vec<f64> = (0..100).map(|i| ((i % 5) as f64) - 2.0).collect();
        let g = gains(samples.clone(), 3.0);
        let cb = blockwise_t_radius(&g, 5, 10, 0.05).unwrap();
        let k = 100 / 7;
        assert_eq!(k, 14);
        // Recompute the expected block mean layout by hand.
        let mut means = Vec::new();
        for i in 0..k {
            let start = i * 7;
            let end = if i == k - 1 { 100 } else { start + 7 };
            means.push(samples[start..end].iter().sum::<f64>() / (end - start) as f64);
        }
        let expect = means.iter().sum::<f64>() / k as f64;
        assert!((cb.mean - expect).abs() < 1e-12);
    }

    #[test]
    fn blockwise_falls_back_below_two_blocks() {
        let g = gains(vec![1.0; 10], 2.0);
        let cb = blockwise_t_radius(&g, 0, 5, 0.05).unwrap();
        assert!(cb.fallback);
        assert_eq!(cb.method, CertMethod::Hoeffding);
        let expect = hoeffding_radius(2.0, 10, 5, 0.05).unwrap();
        assert!((cb.radius - expect).abs() < 1e-12);
    }

    #[test]
    fn evaluation_budget_formula() {
        assert_eq!(evaluation_budget(6, 60).unwrap(), 125);
        assert_eq!(evaluation_budget(1, 1).unwrap(), 2);
        assert!(evaluation_budget(2, 0).is_err());
    }

    #[test]
    fn confidence_bound_composes_and_honors_self_comparison() {
        let (a, _) = pair();
        let self_pair = GainSamples::new(a.clone(), a.clone(), vec![0.0; 4], 1.0).unwrap();
        let cb = confidence_bound(&self_pair, 10, 0.05, CertMethod::Hoeffding, 0).unwrap();
        assert_eq!((cb.mean, cb.radius, cb.lcb, cb.ucb), (0.0, 0.0, 0.0, 0.0));

        // Canonical equality, not structural equality: a capped base stock
        // with a slack cap is the same policy as the plain base stock.
        let slack = PolicySpec::capped_base_stock(5.0, 50.0).unwrap();
        let plain = PolicySpec::base_stock(5.0).unwrap();
        let g = GainSamples::new(slack, plain, vec![0.0; 4], 1.0).unwrap();
        assert!(g.is_self_comparison());

        let g = gains(vec![2.0, 4.0], 5.0);
        let cb = confidence_bound(&g, 1, 0.5, CertMethod::Hoeffding, 0).unwrap();
        assert!((cb.lcb - (3.0 - cb.radius)).abs() < 1e-12);
        assert!((cb.ucb - (3.0 + cb.radius)).abs() < 1e-12);

        let single = gains(vec![0.0], 1.0);
        let cb = confidence_bound(&single, 1, 0.5, CertMethod::Hoeffding, 0).unwrap();
        assert_eq!(cb.mean, 0.0);
        assert!((cb.lcb + cb.ucb).abs() < 1e-12);
    }

    #[test]
    fn gain_samples_reject_unbounded_or_empty_input() {
        let (a, b) = pair();
        assert!(GainSamples::new(a.clone(), b.clone(), vec![], 1.0).is_err());
        assert!(GainSamples::new(a.clone(), b.clone(), vec![2.0], 1.0).is_err());
        assert!(GainSamples::new(a, b, vec![0.5], 0.0).is_err());
    }

    #[test]
    fn joint_hoeffding_coverage_exceeds_nominal_level() {
        use rand::{Rng, SeedableRng};
        // Smaller sibling of the acceptance-scale run: 25 pairs, 50 bounded
        // i.i.d. gains each, known mean zero.
        let n_pairs = 25;
        let m = 50;
        let delta = 0.05;
        let reps = 2000;
        let radius = hoeffding_radius(1.0, m, n_pairs, delta).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut joint_hits = 0usize;
        for _ in 0..reps {
            let all = (0..n_pairs).all(|_| {
                let mean: f64 = (0..m).map(|_| rng.random_range(-1.0..=1.0)).sum::<f64>() / m as f64;
                mean.abs() <= radius
            });
            joint_hits += usize::from(all);
        }
        let freq = joint_hits as f64 / reps as f64;
        let sigma = (0.95_f64 * 0.05 / reps as f64).sqrt();
        assert!(freq >= 0.95 - 3.0 * sigma, "coverage {freq}");
    }
}
