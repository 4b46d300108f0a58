//! Budget-limited hyperparameter search over a policy family's box.
//!
//! The sampler spends the first `ceil(budget/3)` trials on a shifted
//! Halton sequence over the box, then draws Gaussian perturbations around
//! the incumbent best with a width that anneals as trials accrue. The
//! whole search is deterministic for a fixed seed, evaluates the objective
//! exactly `budget` times, and records every trial.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicySpec;

/// One tunable parameter: a closed interval, optionally integer-valued.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub integer: bool,
    /// Structurally plausible subrange that startup sampling oversamples
    /// (e.g. an order cap near the mean demand rate); the full box is
    /// still covered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus: Option<(f64, f64)>,
    /// Value of the deterministic first trial; defaults to the focus or
    /// box midpoint. Families that reduce to a simpler one anchor the
    /// extra parameter at its reduction value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<f64>,
}

/// A policy family's parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub family: String,
    pub params: Vec<ParamDef>,
}

impl ParamSpace {
    pub fn new(family: impl Into<String>, params: Vec<ParamDef>) -> Result<Self> {
        for p in &params {
            if !(p.lo <= p.hi) || !p.lo.is_finite() || !p.hi.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "parameter {} has invalid bounds [{}, {}]",
                    p.name, p.lo, p.hi
                )));
            }
        }
        Ok(Self { family: family.into(), params })
    }

    pub fn clamp(&self, values: &mut [f64]) {
        for (v, p) in values.iter_mut().zip(&self.params) {
            *v = v.clamp(p.lo, p.hi);
            if p.integer {
                *v = v.round().clamp(p.lo.ceil(), p.hi.floor());
            }
        }
    }
}

/// Summary statistics of a demand window, used to scale parameter boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandStats {
    pub mean: f64,
    pub max: f64,
    pub len: usize,
}

impl DemandStats {
    pub fn from_series(demands: &[f64]) -> Self {
        let len = demands.len();
        let mean = if len == 0 { 0.0 } else { demands.iter().sum::<f64>() / len as f64 };
        let max = demands.iter().fold(0.0_f64, |a, &b| a.max(b));
        Self { mean, max, len }
    }
}

/// Default search box per family, scaled by the demand level and lead time.
pub fn default_param_space(family: &str, stats: &DemandStats, lead_time: usize) -> Result<ParamSpace> {
    let mean = stats.mean.max(0.5);
    let s_upper = 4.0 * mean * (lead_time + 1) as f64;
    let real = |name: &str, lo: f64, hi: f64| {
        ParamDef { name: name.into(), lo, hi, integer: false, focus: None, anchor: None }
    };
    // Focus windows from inventory structure: an order cap below the mean
    // demand rate starves the system and one far above it never binds, so
    // caps concentrate near the mean; order-up-to levels scale with the
    // lead-time demand exposure.
    let focused = |name: &str, lo: f64, hi: f64, focus: (f64, f64)| ParamDef {
        name: name.into(),
        lo,
        hi,
        integer: false,
        focus: Some((focus.0.max(lo), focus.1.min(hi))),
        anchor: None,
    };
    let anchored = |name: &str, lo: f64, hi: f64, focus: (f64, f64), anchor: f64| ParamDef {
        name: name.into(),
        lo,
        hi,
        integer: false,
        focus: Some((focus.0.max(lo), focus.1.min(hi))),
        anchor: Some(anchor),
    };
    let exposure = mean * (lead_time + 1) as f64;
    let s_focus = (0.9 * exposure, 2.4 * exposure);
    let cap_focus = (0.7 * mean, 2.2 * mean);
    // The elastic-cap families ship with a full structural default: level
    // and cap at the bulk of lost-sales optima, elasticity off, moderate
    // damping. Classical baselines only get the focus windows.
    let s_anchor = 1.3 * exposure;
    let cap_anchor = 1.25 * mean;
    let params = match family {
        "base_stock" => vec![focused("s", 0.0, s_upper, s_focus)],
        "capped_base_stock" => vec![
            focused("s", 0.0, s_upper, s_focus),
            focused("r", 0.0, 2.0 * s_upper, cap_focus),
        ],
        "constant_order" => vec![focused("q", 0.0, 3.0 * mean, (0.5 * mean, 1.5 * mean))],
        "newsvendor" => vec![ParamDef {
            name: "window".into(),
            lo: 7.0_f64.min(stats.len.max(1) as f64),
            hi: stats.len.max(1) as f64,
            integer: true,
            focus: None,
            anchor: None,
        }],
        // s is searched as a fraction of S so the s <= S constraint holds by
        // construction.
        "small_s_big_s" => vec![real("s_frac", 0.0, 1.0), focused("s_big", 0.0, s_upper, s_focus)],
        // The elastic-cap and proportional-gain dimensions focus near the
        // values where the family reduces to its fixed-cap parent.
        "tilted_cbs" => vec![
            anchored("s", 0.0, s_upper, s_focus, s_anchor),
            anchored("r_base", 0.0, 2.0 * s_upper, cap_focus, cap_anchor),
            anchored("alpha", 0.0, 1.0, (0.0, 0.2), 0.0),
        ],
        "tilted_pic" => vec![
            anchored("s", 0.0, s_upper, s_focus, s_anchor),
            anchored("r_base", 0.0, 2.0 * s_upper, cap_focus, cap_anchor),
            anchored("alpha", 0.0, 1.0, (0.0, 0.3), 0.0),
            anchored("k_p", 0.01, 1.5, (0.25, 1.45), 0.65),
        ],
        other => return Err(Error::Config(format!("no default parameter space for family {other}"))),
    };
    ParamSpace::new(family, params)
}

/// Builds the policy a point in the (possibly transformed) box denotes.
pub fn policy_from_params(family: &str, values: &[f64]) -> Result<PolicySpec> {
    match family {
        "base_stock" => PolicySpec::base_stock(values[0]),
        "capped_base_stock" => PolicySpec::capped_base_stock(values[0], values[1]),
        "constant_order" => PolicySpec::constant_order(values[0]),
        "newsvendor" => PolicySpec::newsvendor(values[0] as usize, None),
        "small_s_big_s" => PolicySpec::small_s_big_s(values[0] * values[1], values[1]),
        "tilted_cbs" => PolicySpec::tilted_cbs(values[0], values[1], values[2]),
        "tilted_pic" => PolicySpec::tilted_pic(values[0], values[1], values[2], values[3]),
        other => Err(Error::Config(format!("unknown family {other}"))),
    }
}

/// Search outcome: the incumbent best plus the full trial trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub family: String,
    pub best_params: Vec<f64>,
    pub best_cost: f64,
    pub trials: Vec<(Vec<f64>, f64)>,
    pub seed: u64,
}

const HALTON_BASES: [u64; 6] = [2, 3, 5, 7, 11, 13];

fn halton(index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Runs the search. Non-finite objective values are recorded as +inf and
/// the search continues.
pub fn tune(
    space: &ParamSpace,
    mut objective: impl FnMut(&[f64]) -> f64,
    budget: usize,
    seed: u64,
) -> Result<TuneResult> {
    if budget == 0 {
        return Err(Error::InvalidInput("budget must be at least 1".into()));
    }
    if space.params.len() > HALTON_BASES.len() {
        return Err(Error::Config(format!("at most {} parameters supported", HALTON_BASES.len())));
    }

    let dim = space.params.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Cranley-Patterson rotation so distinct seeds explore distinct nets.
    let shifts: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();

    let quasi = budget.div_ceil(3);
    // Wider searches drift more easily, so they get more frequent pulses.
    let pulse_period = if dim >= 4 { 6 } else { 8 };
    let mut trials: Vec<(Vec<f64>, f64)> = Vec::with_capacity(budget);
    let mut best_idx = 0usize;

    // Density model for one coordinate: Gaussian kernels on observed
    // values plus one box-wide kernel as a smoothing prior.
    struct Parzen {
        centers: Vec<f64>,
        bandwidth: f64,
        lo: f64,
        hi: f64,
        prior: (f64, f64),
    }
    impl Parzen {
        fn fit(values: Vec<f64>, lo: f64, hi: f64, prior: (f64, f64)) -> Self {
            let width = (hi - lo).max(1e-12);
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            // Scott-style shrink with the sample count, floored so the
            // model never collapses below the box resolution.
            let bandwidth =
                (1.06 * std * n.powf(-0.2)).max(width / (1.0 + 2.0 * n)).max(1e-3 * width);
            Self { centers: values, bandwidth, lo, hi, prior }
        }
        fn log_pdf(&self, x: f64) -> f64 {
            let prior_width = (self.prior.1 - self.prior.0).max(1e-12);
            let mut density =
                if (self.prior.0..=self.prior.1).contains(&x) { 1.0 / prior_width } else { 0.0 };
            for c in &self.centers {
                let z = (x - c) / self.bandwidth;
                density +=
                    (-0.5 * z * z).exp() / (self.bandwidth * (2.0 * std::f64::consts::PI).sqrt());
            }
            (density.max(1e-300) / (self.centers.len() + 1) as f64).ln()
        }
        fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
            let pick = rng.random_range(0..=self.centers.len());
            if pick == self.centers.len() {
                rng.random_range(self.prior.0..=self.prior.1)
            } else {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                (self.centers[pick] + z * self.bandwidth).clamp(self.lo, self.hi)
            }
        }
    }



    let polish_start = budget; // model phase runs to the end
    struct Polish {
        steps: Vec<f64>,
        cursor: usize,
        flip: bool,
        momentum: Option<(usize, f64)>,
        last_move: (usize, f64),
        fails: usize,
    }
    let mut polish =
        Polish { steps: Vec::new(), cursor: 0, flip: false, momentum: None, last_move: (0, 1.0), fails: 0 };
    for k in 0..budget {
        let mut point: Vec<f64> = if k == 0 {
            // Deterministic anchor: focus-window midpoints where defined,
            // box midpoints otherwise, so every run holds one seed in the
            // structurally plausible region.
            space
                .params
                .iter()
                .map(|p| match (p.anchor, p.focus) {
                    (Some(anchor), _) => anchor,
                    (None, Some((lo, hi))) => 0.5 * (lo + hi),
                    (None, None) => 0.5 * (p.lo + p.hi),
                })
                .collect()
        } else if k < quasi {
            (0..dim)
                .map(|j| {
                    let u = (halton(k as u64 + 1, HALTON_BASES[j]) + shifts[j]).fract();
                    let p = &space.params[j];
                    // Alternate startup points between the full box and the
                    // structurally plausible focus window, when one exists.
                    match p.focus {
                        Some((lo, hi)) if k % 2 == 1 => lo + u * (hi - lo),
                        _ => p.lo + u * (p.hi - p.lo),
                    }
                })
                .collect()
        } else if k >= polish_start {
            // Polish phase: compass pattern search around the incumbent.
            // Coordinates are probed cyclically at step h; a successful
            // direction is retried immediately, and a full failed sweep
            // halves the steps. The equal-cost tie-break below also lets
            // the pattern slide along cost plateaus.
            if polish.steps.is_empty() {
                polish.steps = space
                    .params
                    .iter()
                    .zip(trials[best_idx].0.iter())
                    .map(|(p, v)| ((p.hi - p.lo) / 16.0).min((v.abs() + 1.0) * 0.5).max(1e-9))
                    .collect();
            }
            let (j, sign) = match polish.momentum {
                Some(m) => m,
                None => {
                    let j = polish.cursor % dim;
                    polish.cursor += 1;
                    (j, if polish.flip { 1.0 } else { -1.0 })
                }
            };
            polish.last_move = (j, sign);
            let mut point = trials[best_idx].0.clone();
            point[j] += sign * polish.steps[j];
            point
        } else if (k - quasi) % pulse_period == pulse_period - 1 {
            // Exploration pulse: an occasional fresh quasi-random point so
            // an early bad zoom can never capture the whole run.
            (0..dim)
                .map(|j| {
                    let u = (halton(k as u64 + 1, HALTON_BASES[j]) + shifts[j]).fract();
                    let p = &space.params[j];
                    match p.focus {
                        Some((lo, hi)) if k % 2 == 1 => lo + u * (hi - lo),
                        _ => p.lo + u * (p.hi - p.lo),
                    }
                })
                .collect()
        } else {
            // Model phase: split observed trials into a good quantile and
            // the rest, fit per-coordinate Parzen densities to each, draw
            // candidates from the good density and keep the one with the
            // highest good-to-rest density ratio.
            let mut order: Vec<usize> = (0..trials.len()).collect();
            order.sort_by(|&a, &b| {
                trials[a]
                    .1
                    .partial_cmp(&trials[b].1)
                    .unwrap()
                    .then_with(|| trials[a].0.partial_cmp(&trials[b].0).unwrap())
            });
            let n_good = (trials.len() / 4).max(4).min(trials.len() - 1);
            let split = |idx: &[usize], j: usize| -> Vec<f64> {
                idx.iter().map(|&i| trials[i].0[j]).collect()
            };
            // The prior kernel carries exploration mass; it lives on the
            // structurally plausible window when one is defined.
            let prior =
                |p: &ParamDef| p.focus.unwrap_or((p.lo, p.hi));
            let good: Vec<Parzen> = (0..dim)
                .map(|j| {
                    let p = &space.params[j];
                    Parzen::fit(split(&order[..n_good], j), p.lo, p.hi, prior(p))
                })
                .collect();
            let rest: Vec<Parzen> = (0..dim)
                .map(|j| {
                    let p = &space.params[j];
                    Parzen::fit(split(&order[n_good..], j), p.lo, p.hi, prior(p))
                })
                .collect();

            let mut best_candidate: Option<(Vec<f64>, f64)> = None;
            for _ in 0..12 * dim {
                let mut candidate: Vec<f64> = (0..dim).map(|j| good[j].sample(&mut rng)).collect();
                space.clamp(&mut candidate);
                let score: f64 = (0..dim)
                    .map(|j| good[j].log_pdf(candidate[j]) - rest[j].log_pdf(candidate[j]))
                    .sum();
                match &best_candidate {
                    Some((_, s)) if score <= *s => {}
                    _ => best_candidate = Some((candidate, score)),
                }
            }
            best_candidate.expect("at least one candidate").0
        };
        space.clamp(&mut point);

        let raw = objective(&point);
        let cost = if raw.is_finite() { raw } else { f64::INFINITY };
        trials.push((point, cost));
        // Argmin with a deterministic tie-break toward lexicographically
        // smaller parameters; cost plateaus are common (an order cap above
        // its binding range is cost-invariant).
        let incumbent = &trials[best_idx];
        let challenger = trials.last().expect("just pushed");
        let accepted = challenger.1 < incumbent.1
            || (challenger.1 == incumbent.1 && challenger.0 < incumbent.0);
        if accepted {
            best_idx = trials.len() - 1;
        }
        if k >= polish_start && !polish.steps.is_empty() {
            if accepted {
                polish.momentum = Some(polish.last_move);
                polish.fails = 0;
            } else {
                polish.momentum = None;
                polish.flip = !polish.flip;
                polish.fails += 1;
                if polish.fails >= 2 * dim {
                    for h in &mut polish.steps {
                        *h *= 0.5;
                    }
                    polish.fails = 0;
                }
            }
        }
    }

    let (best_params, best_cost) = trials[best_idx].clone();
    Ok(TuneResult { family: space.family.clone(), best_params, best_cost, trials, seed })
}

/// Tunes one family against a cost objective over policies.
pub fn tune_policy(
    family: &str,
    stats: &DemandStats,
    lead_time: usize,
    budget: usize,
    seed: u64,
    mut cost_of: impl FnMut(&PolicySpec) -> f64,
) -> Result<(PolicySpec, TuneResult)> {
    let space = default_param_space(family, stats, lead_time)?;
    let result = tune(
        &space,
        |values| match policy_from_params(family, values) {
            Ok(policy) => cost_of(&policy),
            Err(_) => f64::INFINITY,
        },
        budget,
        seed,
    )?;
    let policy = policy_from_params(family, &result.best_params)?;
    Ok((policy, result))
}

/// The five classical baseline families, in canonical order.
pub const BASELINE_FAMILIES: [&str; 5] =
    ["base_stock", "capped_base_stock", "constant_order", "newsvendor", "small_s_big_s"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicySpec;
    use crate::sim::{simulate_cost, InventoryState, SystemConfig};

    fn one_d_space(lo: f64, hi: f64) -> ParamSpace {
        ParamSpace::new(
            "base_stock",
            vec![ParamDef { name: "s".into(), lo, hi, integer: false, focus: None, anchor: None }],
        )
            .unwrap()
    }

    #[test]
    fn finds_the_minimum_of_a_convex_objective() {
        // Grid oracle at resolution 0.1: argmin of (s-7)^2 over [0,20] is 7.
        let oracle = (0..=200)
            .map(|i| i as f64 * 0.1)
            .min_by(|a, b| {
                ((a - 7.0).powi(2)).partial_cmp(&(b - 7.0).powi(2)).unwrap()
            })
            .unwrap();
        assert_eq!(oracle, 7.0);

        let space = one_d_space(0.0, 20.0);
        let result = tune(&space, |v| (v[0] - 7.0).powi(2), 50, 42).unwrap();
        assert!((result.best_params[0] - oracle).abs() <= 0.5, "got {}", result.best_params[0]);
    }

    #[test]
    fn degenerate_budget_yields_a_single_trial() {
        let space = one_d_space(0.0, 10.0);
        let result = tune(&space, |v| v[0], 1, 3).unwrap();
        assert_eq!(result.trials.len(), 1);
        assert_eq!(result.best_cost, result.trials[0].1);
        assert!(tune(&space, |v| v[0], 0, 3).is_err());
    }

    #[test]
    fn constant_order_tuning_matches_exhaustive_scan() {
        // Stationary demand with mean 5, L = 0, p/h = 10.
        let demands: Vec<f64> = (0..200).map(|i| ((i * 13 + 3) % 11) as f64).collect();
        let cfg = SystemConfig::new(0, 1.0, 10.0, demands.len()).unwrap();
        let cost_of = |q: f64| {
            let p = PolicySpec::constant_order(q).unwrap();
            simulate_cost(&p, &demands, &cfg, &InventoryState::empty(0)).unwrap()
        };
        let oracle_q = (0..=15)
            .map(|q| q as f64)
            .min_by(|a, b| cost_of(*a).partial_cmp(&cost_of(*b)).unwrap())
            .unwrap();

        let stats = DemandStats::from_series(&demands);
        let (policy, _) = tune_policy("constant_order", &stats, 0, 50, 9, |p| {
            simulate_cost(p, &demands, &cfg, &InventoryState::empty(0)).unwrap()
        })
        .unwrap();
        let got = match policy {
            PolicySpec::ConstantOrder { q } => q,
            other => panic!("unexpected {other:?}"),
        };
        assert!((got - oracle_q).abs() <= 1.0, "got {got}, oracle {oracle_q}");
    }

    #[test]
    fn search_is_deterministic_and_budget_exact() {
        let space = ParamSpace::new(
            "capped_base_stock",
            vec![
                ParamDef { name: "s".into(), lo: 0.0, hi: 30.0, integer: false, focus: None, anchor: None },
                ParamDef { name: "r".into(), lo: 0.0, hi: 15.0, integer: false, focus: None, anchor: None },
            ],
        )
        .unwrap();
        let obj = |v: &[f64]| (v[0] - 12.0).powi(2) + (v[1] - 4.0).powi(2);
        let a = tune(&space, obj, 37, 17).unwrap();
        let b = tune(&space, obj, 37, 17).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.trials.len(), 37);

        // Running best is non-increasing in trial index.
        let mut best = f64::INFINITY;
        for (_, cost) in &a.trials {
            let running = best.min(*cost);
            assert!(running <= best);
            best = running;
        }
        assert_eq!(best, a.best_cost);
    }

    #[test]
    fn non_finite_objective_values_become_infinite_trials() {
        let space = one_d_space(0.0, 1.0);
        let result = tune(&space, |v| if v[0] < 0.5 { f64::NAN } else { v[0] }, 20, 5).unwrap();
        assert_eq!(result.trials.len(), 20);
        assert!(result.best_cost.is_finite());
        assert!(result.trials.iter().any(|(_, c)| c.is_infinite()));
    }

    #[test]
    fn integer_parameters_round_and_small_s_transform_is_feasible() {
        let stats = DemandStats { mean: 5.0, max: 12.0, len: 100 };
        let space = default_param_space("newsvendor", &stats, 2).unwrap();
        let result = tune(&space, |v| (v[0] - 14.3).abs(), 30, 21).unwrap();
        assert!(result.trials.iter().all(|(p, _)| p[0].fract() == 0.0));

        let (policy, _) = tune_policy("small_s_big_s", &stats, 2, 30, 4, |_| 1.0).unwrap();
        match policy {
            PolicySpec::SmallSBigS { s_small, s_big } => assert!(s_small <= s_big),
            other => panic!("unexpected {other:?}"),
        }
    }
}
