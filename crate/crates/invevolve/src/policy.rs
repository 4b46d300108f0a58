//! The canonical white-box policy space: a closed, typed DSL.
//!
//! Every policy is a named family with a small set of real parameters.
//! Decisions depend only on the inventory state, the demand history, and
//! the cost configuration, so any policy can be replayed deterministically
//! and audited line by line.
//!
//! With `gap = max(0, S - IP)`:
//!
//! | family            | order                                              |
//! |-------------------|----------------------------------------------------|
//! | base_stock        | gap                                                |
//! | capped_base_stock | min(gap, r)                                        |
//! | constant_order    | q                                                  |
//! | newsvendor        | max(0, Q* - IP), Q* from an empirical quantile     |
//! | small_s_big_s     | S - IP if IP < s else 0                            |
//! | tilted_cbs        | min(gap, r_base + alpha * gap)                     |
//! | tilted_pic        | max(0, min(round(k_p * gap), r_base + alpha * gap))|
//!
//! `round` is round-half-to-even. Canonicalization merges parameterizations
//! that define the same decision rule and snaps parameters to a 1e-4 grid,
//! which makes the policy space effectively countable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{inventory_position, InventoryState, SystemConfig};

/// Named exogenous features for one period. A `BTreeMap` keeps the
/// serialized order deterministic.
pub type FeatureMap = std::collections::BTreeMap<String, f64>;

/// Grid resolution defining canonical parameter equality.
pub const PARAM_GRID: f64 = 1e-4;

/// A policy in the closed DSL. Serializes as
/// `{"family": "<name>", "params": {...}}`; unknown families are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum PolicySpec {
    BaseStock { s: f64 },
    CappedBaseStock { s: f64, r: f64 },
    ConstantOrder { q: f64 },
    Newsvendor {
        window: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ratio: Option<f64>,
    },
    SmallSBigS { s_small: f64, s_big: f64 },
    TiltedCbs { s: f64, r_base: f64, alpha: f64 },
    TiltedPic { s: f64, r_base: f64, alpha: f64, k_p: f64 },
}

/// Structural-validity verdict: `valid` is the indicator g(pi).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub violations: Vec<String>,
}

impl PolicySpec {
    pub fn base_stock(s: f64) -> Result<Self> {
        Self::validated(PolicySpec::BaseStock { s })
    }

    pub fn capped_base_stock(s: f64, r: f64) -> Result<Self> {
        Self::validated(PolicySpec::CappedBaseStock { s, r })
    }

    pub fn constant_order(q: f64) -> Result<Self> {
        Self::validated(PolicySpec::ConstantOrder { q })
    }

    pub fn newsvendor(window: usize, ratio: Option<f64>) -> Result<Self> {
        Self::validated(PolicySpec::Newsvendor { window, ratio })
    }

    pub fn small_s_big_s(s_small: f64, s_big: f64) -> Result<Self> {
        Self::validated(PolicySpec::SmallSBigS { s_small, s_big })
    }

    pub fn tilted_cbs(s: f64, r_base: f64, alpha: f64) -> Result<Self> {
        Self::validated(PolicySpec::TiltedCbs { s, r_base, alpha })
    }

    pub fn tilted_pic(s: f64, r_base: f64, alpha: f64, k_p: f64) -> Result<Self> {
        Self::validated(PolicySpec::TiltedPic { s, r_base, alpha, k_p })
    }

    fn validated(spec: PolicySpec) -> Result<Self> {
        let violations = spec.parameter_violations();
        if violations.is_empty() {
            Ok(spec)
        } else {
            Err(Error::Policy(violations.join("; ")))
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            PolicySpec::BaseStock { .. } => "base_stock",
            PolicySpec::CappedBaseStock { .. } => "capped_base_stock",
            PolicySpec::ConstantOrder { .. } => "constant_order",
            PolicySpec::Newsvendor { .. } => "newsvendor",
            PolicySpec::SmallSBigS { .. } => "small_s_big_s",
            PolicySpec::TiltedCbs { .. } => "tilted_cbs",
            PolicySpec::TiltedPic { .. } => "tilted_pic",
        }
    }

    fn parameter_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut nonneg = |name: &str, x: f64| {
            if !x.is_finite() || x < 0.0 {
                v.push(format!("{name} must be a non-negative finite real, got {x}"));
            }
        };
        match self {
            PolicySpec::BaseStock { s } => nonneg("s", *s),
            PolicySpec::CappedBaseStock { s, r } => {
                nonneg("s", *s);
                nonneg("r", *r);
            }
            PolicySpec::ConstantOrder { q } => nonneg("q", *q),
            PolicySpec::Newsvendor { window, ratio } => {
                if *window < 1 {
                    v.push("window must be at least 1".into());
                }
                if let Some(ratio) = ratio {
                    if !ratio.is_finite() || *ratio <= 0.0 || *ratio >= 1.0 {
                        v.push(format!("ratio out of (0,1), got {ratio}"));
                    }
                }
            }
            PolicySpec::SmallSBigS { s_small, s_big } => {
                nonneg("s_small", *s_small);
                nonneg("s_big", *s_big);
                if s_small.is_finite() && s_big.is_finite() && s_small > s_big {
                    v.push(format!("s_small {s_small} exceeds s_big {s_big}"));
                }
            }
            PolicySpec::TiltedCbs { s, r_base, alpha } => {
                nonneg("s", *s);
                nonneg("r_base", *r_base);
                if !alpha.is_finite() || !(0.0..=1.0).contains(alpha) {
                    v.push(format!("alpha out of [0,1], got {alpha}"));
                }
            }
            PolicySpec::TiltedPic { s, r_base, alpha, k_p } => {
                nonneg("s", *s);
                nonneg("r_base", *r_base);
                if !alpha.is_finite() || !(0.0..=1.0).contains(alpha) {
                    v.push(format!("alpha out of [0,1], got {alpha}"));
                }
                if !k_p.is_finite() || *k_p <= 0.0 || *k_p > 1.5 {
                    v.push(format!("k_p out of (0,1.5], got {k_p}"));
                }
            }
        }
        v
    }

    /// Order decision for the current (post-arrival) state.
    ///
    /// `demand_history` holds realized demand from past periods, oldest
    /// first. Features are accepted for interface completeness; no family
    /// in the closed DSL reads them.
    pub fn decide(
        &self,
        state: &InventoryState,
        _features: Option<&FeatureMap>,
        demand_history: &[f64],
        cfg: &SystemConfig,
    ) -> Result<f64> {
        let ip = inventory_position(state);
        let order = match self {
            PolicySpec::BaseStock { s } => (s - ip).max(0.0),
            PolicySpec::CappedBaseStock { s, r } => (s - ip).max(0.0).min(*r),
            PolicySpec::ConstantOrder { q } => *q,
            PolicySpec::Newsvendor { window, ratio } => {
                if demand_history.is_empty() {
                    return Ok(0.0);
                }
                let w = (*window).min(demand_history.len());
                let recent = &demand_history[demand_history.len() - w..];
                let level = ratio.unwrap_or_else(|| cfg.critical_ratio());
                let per_period = empirical_quantile(recent, level);
                let target = per_period * (cfg.lead_time + 1) as f64;
                (target - ip).max(0.0)
            }
            PolicySpec::SmallSBigS { s_small, s_big } => {
                if ip < *s_small {
                    s_big - ip
                } else {
                    0.0
                }
            }
            PolicySpec::TiltedCbs { s, r_base, alpha } => {
                let gap = (s - ip).max(0.0);
                gap.min(r_base + alpha * gap)
            }
            PolicySpec::TiltedPic { s, r_base, alpha, k_p } => {
                let gap = (s - ip).max(0.0);
                let cap = r_base + alpha * gap;
                (k_p * gap).round_ties_even().min(cap).max(0.0)
            }
        };
        Ok(order)
    }

    /// Reduces the family when parameters make it coincide with a simpler
    /// one, then snaps all real parameters to the canonical grid.
    ///
    /// Parameters are snapped before the reduction checks so that values
    /// within half a grid cell of a reduction boundary (e.g. k_p =
    /// 0.99997) land on the same canonical policy as the boundary itself;
    /// this keeps canonicalization idempotent.
    pub fn canonicalize(&self) -> PolicySpec {
        let g = |x: f64| (x / PARAM_GRID).round() * PARAM_GRID;
        let mut spec = match *self {
            PolicySpec::BaseStock { s } => PolicySpec::BaseStock { s: g(s) },
            PolicySpec::CappedBaseStock { s, r } => PolicySpec::CappedBaseStock { s: g(s), r: g(r) },
            PolicySpec::ConstantOrder { q } => PolicySpec::ConstantOrder { q: g(q) },
            PolicySpec::Newsvendor { window, ratio } => {
                PolicySpec::Newsvendor { window, ratio: ratio.map(g) }
            }
            PolicySpec::SmallSBigS { s_small, s_big } => {
                PolicySpec::SmallSBigS { s_small: g(s_small), s_big: g(s_big) }
            }
            PolicySpec::TiltedCbs { s, r_base, alpha } => {
                PolicySpec::TiltedCbs { s: g(s), r_base: g(r_base), alpha: g(alpha) }
            }
            PolicySpec::TiltedPic { s, r_base, alpha, k_p } => {
                PolicySpec::TiltedPic { s: g(s), r_base: g(r_base), alpha: g(alpha), k_p: g(k_p) }
            }
        };
        if let PolicySpec::TiltedPic { s, r_base, alpha, k_p } = spec {
            if k_p == 1.0 {
                spec = PolicySpec::TiltedCbs { s, r_base, alpha };
            }
        }
        if let PolicySpec::TiltedCbs { s, r_base, alpha } = spec {
            if alpha == 0.0 {
                spec = PolicySpec::CappedBaseStock { s, r: r_base };
            }
        }
        if let PolicySpec::CappedBaseStock { s, r } = spec {
            if r >= s {
                spec = PolicySpec::BaseStock { s };
            }
        }
        if let PolicySpec::SmallSBigS { s_small, s_big } = spec {
            if s_small == s_big {
                spec = PolicySpec::BaseStock { s: s_big };
            }
        }
        spec
    }

    /// Canonical serialization; two specs denote the same policy iff their
    /// keys are equal. Also used as a deterministic tie-break ordering.
    pub fn canonical_key(&self) -> String {
        serde_json::to_string(&self.canonicalize()).expect("policy spec serializes")
    }

    /// Structural validity g(pi): parameter bounds plus finite,
    /// non-negative decisions on every probe state.
    pub fn check_validity(&self, probe_states: &[InventoryState]) -> ValidityReport {
        let mut violations = self.parameter_violations();
        if violations.is_empty() {
            let cfg = SystemConfig::new(0, 1.0, 10.0, 1).expect("probe config");
            let history = [0.0, 1.0, 2.0, 3.0, 4.0];
            for state in probe_states {
                match self.decide(state, None, &history, &cfg) {
                    Ok(order) if order.is_finite() && order >= 0.0 => {}
                    Ok(order) => {
                        violations.push(format!(
                            "decision {order} on probe IP={} is not a finite non-negative order",
                            inventory_position(state)
                        ));
                        break;
                    }
                    Err(e) => {
                        violations.push(format!("decision failed on probe: {e}"));
                        break;
                    }
                }
            }
        }
        ValidityReport { valid: violations.is_empty(), violations }
    }

    /// `check_validity` over the default probe grid IP in {0, ..., 3S}.
    pub fn check_validity_default(&self) -> ValidityReport {
        self.check_validity(&default_probe_states(self))
    }

    /// The stock-level parameter a probe grid should scale with.
    fn probe_level(&self) -> f64 {
        match self {
            PolicySpec::BaseStock { s }
            | PolicySpec::CappedBaseStock { s, .. }
            | PolicySpec::TiltedCbs { s, .. }
            | PolicySpec::TiltedPic { s, .. } => *s,
            PolicySpec::SmallSBigS { s_big, .. } => *s_big,
            PolicySpec::ConstantOrder { q } => *q,
            PolicySpec::Newsvendor { .. } => 10.0,
        }
    }
}

/// Integer-IP probe grid over {0, ..., 3S}, capped at 10k probes.
pub fn default_probe_states(policy: &PolicySpec) -> Vec<InventoryState> {
    let level = policy.probe_level();
    let top = if level.is_finite() { (3.0 * level).ceil().max(1.0) } else { 1.0 };
    let top = (top as usize).min(10_000);
    (0..=top).map(|ip| InventoryState { on_hand: ip as f64, pipeline: vec![] }).collect()
}

/// Conservative empirical quantile: the smallest order statistic whose
/// empirical CDF reaches `level`.
pub fn empirical_quantile(values: &[f64], level: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    let k = (level * n as f64).ceil().max(1.0) as usize;
    sorted[k.min(n) - 1]
}
