//! Pluggable policy-proposal generation.
//!
//! The engine asks a [`ProposalSource`] for one candidate per round,
//! handing it a [`ProposalContext`] digest: demand summary, cost
//! parameters, the current champion, the active pool, per-pair replay
//! statistics and every gate decision so far. Three sources ship here:
//!
//! - [`MutationProposer`]: seeded Gaussian parameter perturbation of the
//!   champion with occasional switches to an adjacent family;
//! - [`ScriptedProposer`]: replays a fixed candidate list (test fixture);
//! - [`ExternalProposer`]: POSTs the digest to an HTTP endpoint that
//!   returns a policy in DSL JSON.
//!
//! External proposals must be DSL JSON, not code; a malformed or
//! non-2xx response degrades to a failed round, never an error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{EpochState, GateDecision};
use crate::error::{Error, Result};
use crate::policy::PolicySpec;
use crate::tuner::{default_param_space, DemandStats, ParamSpace};

/// Outcome of one proposal draw.
#[derive(Debug, Clone, PartialEq)]
pub enum Proposal {
    Candidate(PolicySpec),
    /// No usable candidate this round; the reason is logged and the round
    /// is skipped.
    Failed(String),
}

pub trait ProposalSource {
    fn propose(&mut self, ctx: &ProposalContext) -> Proposal;
}

impl<F: FnMut(&ProposalContext) -> Proposal> ProposalSource for F {
    fn propose(&mut self, ctx: &ProposalContext) -> Proposal {
        self(ctx)
    }
}

// ── Context digest ──────────────────────────────────────────────────────

/// Demand and cost summary of the historical window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySummary {
    pub demand_mean: f64,
    /// Coefficient of variation; 0 by convention for an all-zero series.
    pub demand_cv: f64,
    pub zero_ratio: f64,
    /// Mean of the last 28 days minus the mean of the 28 days before them;
    /// 0 when the window is too short.
    pub trend_28d: f64,
    pub window_len: usize,
    pub lead_time: usize,
    pub holding_cost: f64,
    pub penalty_cost: f64,
}

impl HistorySummary {
    pub fn from_series(demands: &[f64], lead_time: usize, holding_cost: f64, penalty_cost: f64) -> Self {
        let n = demands.len();
        let mean = if n == 0 { 0.0 } else { demands.iter().sum::<f64>() / n as f64 };
        let cv = if mean > 0.0 {
            let var = demands.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
            var.sqrt() / mean
        } else {
            0.0
        };
        let zero_ratio =
            if n == 0 { 0.0 } else { demands.iter().filter(|d| **d == 0.0).count() as f64 / n as f64 };
        let trend_28d = if n >= 56 {
            let last: f64 = demands[n - 28..].iter().sum::<f64>() / 28.0;
            let prev: f64 = demands[n - 56..n - 28].iter().sum::<f64>() / 28.0;
            last - prev
        } else {
            0.0
        };
        Self {
            demand_mean: mean,
            demand_cv: cv,
            zero_ratio,
            trend_28d,
            window_len: n,
            lead_time,
            holding_cost,
            penalty_cost,
        }
    }

    fn demand_stats(&self) -> DemandStats {
        DemandStats { mean: self.demand_mean, max: 0.0, len: self.window_len }
    }
}

/// One evaluated pair, compacted for the digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDigest {
    pub candidate: String,
    pub comparator: String,
    pub mean: f64,
    pub lcb: f64,
    pub ucb: f64,
}

/// One gate decision, compacted for the digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionDigest {
    pub round: usize,
    pub candidate: Option<String>,
    pub valid: bool,
    pub promoted: bool,
}

/// Everything a proposer may condition on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalContext {
    /// 1-based index of the round about to run.
    pub round: usize,
    pub summary: HistorySummary,
    pub champion: PolicySpec,
    pub pool: Vec<PolicySpec>,
    /// Covers exactly the pairs evaluated so far.
    pub stats: Vec<PairDigest>,
    pub decisions: Vec<DecisionDigest>,
}

fn compact_policy(spec: &PolicySpec) -> String {
    let round6 = |x: f64| format!("{}", (x * 1e6).round() / 1e6);
    match spec {
        PolicySpec::BaseStock { s } => format!("base_stock(s={})", round6(*s)),
        PolicySpec::CappedBaseStock { s, r } => {
            format!("capped_base_stock(s={},r={})", round6(*s), round6(*r))
        }
        PolicySpec::ConstantOrder { q } => format!("constant_order(q={})", round6(*q)),
        PolicySpec::Newsvendor { window, ratio } => match ratio {
            Some(ratio) => format!("newsvendor(window={window},ratio={})", round6(*ratio)),
            None => format!("newsvendor(window={window})"),
        },
        PolicySpec::SmallSBigS { s_small, s_big } => {
            format!("small_s_big_s(s={},S={})", round6(*s_small), round6(*s_big))
        }
        PolicySpec::TiltedCbs { s, r_base, alpha } => {
            format!("tilted_cbs(s={},r_base={},alpha={})", round6(*s), round6(*r_base), round6(*alpha))
        }
        PolicySpec::TiltedPic { s, r_base, alpha, k_p } => format!(
            "tilted_pic(s={},r_base={},alpha={},k_p={})",
            round6(*s),
            round6(*r_base),
            round6(*alpha),
            round6(*k_p)
        ),
    }
}

/// Builds the round context from the engine state.
pub fn context_digest(
    state: &EpochState,
    decisions: &[GateDecision],
    summary: &HistorySummary,
) -> Result<ProposalContext> {
    let round3 = |x: f64| (x * 1e3).round() / 1e3;
    let stats = state
        .stats
        .values()
        .map(|p| PairDigest {
            candidate: compact_policy(&p.candidate),
            comparator: compact_policy(&p.comparator),
            mean: round3(p.cb.mean),
            lcb: round3(p.cb.lcb),
            ucb: round3(p.cb.ucb),
        })
        .collect();
    let decisions = decisions
        .iter()
        .map(|d| DecisionDigest {
            round: d.round,
            candidate: d.candidate.as_ref().map(compact_policy),
            valid: d.valid,
            promoted: d.promoted,
        })
        .collect();
    Ok(ProposalContext {
        round: state.round + 1,
        summary: summary.clone(),
        champion: state.champion.clone(),
        pool: state.pool.clone(),
        stats,
        decisions,
    })
}

/// Hard cap on the textual form sent over the wire.
pub const WIRE_DIGEST_LIMIT: usize = 16 * 1024;

#[derive(Debug, Clone, Serialize)]
struct WireContext<'a> {
    round: usize,
    summary: &'a HistorySummary,
    champion: &'a PolicySpec,
    pool: &'a [PolicySpec],
    stats: &'a [PairDigest],
    decisions: &'a [DecisionDigest],
    truncated: bool,
}

impl ProposalContext {
    /// JSON form bounded to [`WIRE_DIGEST_LIMIT`] bytes; oldest stats and
    /// pool entries are dropped first when over budget.
    pub fn wire_json(&self) -> String {
        let mut stats_keep = self.stats.len();
        let mut pool_keep = self.pool.len();
        loop {
            let wire = WireContext {
                round: self.round,
                summary: &self.summary,
                champion: &self.champion,
                pool: &self.pool[self.pool.len() - pool_keep..],
                stats: &self.stats[self.stats.len() - stats_keep..],
                decisions: &self.decisions,
                truncated: stats_keep < self.stats.len() || pool_keep < self.pool.len(),
            };
            let json = serde_json::to_string(&wire).expect("context serializes");
            if json.len() <= WIRE_DIGEST_LIMIT || (stats_keep == 0 && pool_keep == 0) {
                return json;
            }
            if stats_keep > 0 {
                stats_keep = stats_keep.saturating_sub(8);
            } else {
                pool_keep = pool_keep.saturating_sub(4);
            }
        }
    }
}

// ── Mutation proposer ───────────────────────────────────────────────────

/// Seeded mutation of the current champion: Gaussian parameter noise with
/// per-parameter scale (a fraction of the search-box width), or, with some
/// probability, a hop to an adjacent family that inherits shared
/// parameters and initializes the rest at box midpoints.
#[derive(Debug, Clone)]
pub struct MutationProposer {
    rng: ChaCha8Rng,
    /// Perturbation scale as a fraction of each parameter's box width.
    pub mutation_scale: f64,
    pub family_switch_prob: f64,
}

impl MutationProposer {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), mutation_scale: 0.1, family_switch_prob: 0.15 }
    }

    pub fn with_rates(mut self, mutation_scale: f64, family_switch_prob: f64) -> Self {
        self.mutation_scale = mutation_scale;
        self.family_switch_prob = family_switch_prob.clamp(0.0, 1.0);
        self
    }

    fn adjacent_families(family: &str) -> &'static [&'static str] {
        match family {
            "base_stock" => &["capped_base_stock"],
            "capped_base_stock" => &["base_stock", "tilted_cbs"],
            "tilted_cbs" => &["capped_base_stock", "tilted_pic"],
            "tilted_pic" => &["tilted_cbs"],
            "constant_order" => &["capped_base_stock"],
            "newsvendor" => &["base_stock"],
            "small_s_big_s" => &["base_stock"],
            _ => &[],
        }
    }

    /// Current parameter values of a spec in its search-box coordinates.
    fn params_of(spec: &PolicySpec) -> Vec<f64> {
        match spec {
            PolicySpec::BaseStock { s } => vec![*s],
            PolicySpec::CappedBaseStock { s, r } => vec![*s, *r],
            PolicySpec::ConstantOrder { q } => vec![*q],
            PolicySpec::Newsvendor { window, .. } => vec![*window as f64],
            PolicySpec::SmallSBigS { s_small, s_big } => {
                let frac = if *s_big > 0.0 { s_small / s_big } else { 0.0 };
                vec![frac, *s_big]
            }
            PolicySpec::TiltedCbs { s, r_base, alpha } => vec![*s, *r_base, *alpha],
            PolicySpec::TiltedPic { s, r_base, alpha, k_p } => vec![*s, *r_base, *alpha, *k_p],
        }
    }

    /// Values inherited when hopping from `spec` into `target`, with box
    /// midpoints for anything the source family does not carry.
    fn inherit(spec: &PolicySpec, target: &ParamSpace) -> Vec<f64> {
        let mid =
            |def: &crate::tuner::ParamDef| def.lo + 0.5 * (def.hi - def.lo);
        target
            .params
            .iter()
            .map(|def| match (def.name.as_str(), spec) {
                ("s", PolicySpec::BaseStock { s })
                | ("s", PolicySpec::CappedBaseStock { s, .. })
                | ("s", PolicySpec::TiltedCbs { s, .. })
                | ("s", PolicySpec::TiltedPic { s, .. }) => *s,
                ("s", PolicySpec::SmallSBigS { s_big, .. }) => *s_big,
                ("s_big", PolicySpec::BaseStock { s }) => *s,
                ("r", PolicySpec::TiltedCbs { r_base, .. })
                | ("r", PolicySpec::TiltedPic { r_base, .. }) => *r_base,
                ("r", PolicySpec::CappedBaseStock { r, .. }) => *r,
                ("r_base", PolicySpec::CappedBaseStock { r, .. }) => *r,
                ("r_base", PolicySpec::TiltedCbs { r_base, .. })
                | ("r_base", PolicySpec::TiltedPic { r_base, .. }) => *r_base,
                ("alpha", PolicySpec::TiltedCbs { alpha, .. })
                | ("alpha", PolicySpec::TiltedPic { alpha, .. }) => *alpha,
                ("k_p", PolicySpec::TiltedPic { k_p, .. }) => *k_p,
                ("q", PolicySpec::ConstantOrder { q }) => *q,
                _ => mid(def),
            })
            .collect()
    }
}

impl ProposalSource for MutationProposer {
    fn propose(&mut self, ctx: &ProposalContext) -> Proposal {
        let champion = &ctx.champion;
        let stats = ctx.summary.demand_stats();
        let lead_time = ctx.summary.lead_time;

        let switch = self.rng.random_range(0.0..1.0) < self.family_switch_prob;
        let neighbors = Self::adjacent_families(champion.family_name());
        let target_family = if switch && !neighbors.is_empty() {
            neighbors[self.rng.random_range(0..neighbors.len())]
        } else {
            champion.family_name()
        };
        let space = match default_param_space(target_family, &stats, lead_time) {
            Ok(s) => s,
            Err(e) => return Proposal::Failed(e.to_string()),
        };
        let mut values = if target_family == champion.family_name() {
            Self::params_of(champion)
        } else {
            Self::inherit(champion, &space)
        };

        for (j, v) in values.iter_mut().enumerate() {
            let def = &space.params[j];
            let width = (def.hi - def.lo).max(1e-12);
            let z: f64 = self.rng.sample(rand_distr::StandardNormal);
            *v += z * self.mutation_scale * width;
        }
        space.clamp(&mut values);
        match crate::tuner::policy_from_params(&space.family, &values) {
            Ok(policy) => Proposal::Candidate(policy),
            Err(e) => Proposal::Failed(e.to_string()),
        }
    }
}

// ── Scripted proposer ───────────────────────────────────────────────────

/// Replays a fixed candidate sequence; exhausted scripts fail the round.
#[derive(Debug, Clone)]
pub struct ScriptedProposer {
    script: Vec<PolicySpec>,
    next: usize,
}

impl ScriptedProposer {
    pub fn new(script: Vec<PolicySpec>) -> Self {
        Self { script, next: 0 }
    }
}

impl ProposalSource for ScriptedProposer {
    fn propose(&mut self, _ctx: &ProposalContext) -> Proposal {
        match self.script.get(self.next) {
            Some(spec) => {
                self.next += 1;
                Proposal::Candidate(spec.clone())
            }
            None => Proposal::Failed("script exhausted".into()),
        }
    }
}

// ── External proposer ───────────────────────────────────────────────────

pub const PROPOSER_URL_ENV: &str = "INVEVOLVE_PROPOSER_URL";
pub const PROPOSER_TOKEN_ENV: &str = "INVEVOLVE_PROPOSER_TOKEN";

/// JSON schema blurb sent alongside each request so the endpoint knows the
/// accepted families and parameter names.
pub const POLICY_SCHEMA_JSON: &str = r#"{
  "policy": {"family": "string", "params": "object"},
  "families": {
    "base_stock": {"s": ">=0"},
    "capped_base_stock": {"s": ">=0", "r": ">=0"},
    "constant_order": {"q": ">=0"},
    "newsvendor": {"window": "int >=1", "ratio": "optional, (0,1)"},
    "small_s_big_s": {"s_small": ">=0, <= s_big", "s_big": ">=0"},
    "tilted_cbs": {"s": ">=0", "r_base": ">=0", "alpha": "[0,1]"},
    "tilted_pic": {"s": ">=0", "r_base": ">=0", "alpha": "[0,1]", "k_p": "(0,1.5]"}
  }
}"#;

#[derive(Debug, Deserialize)]
struct WireResponse {
    policy: serde_json::Value,
    #[serde(default)]
    #[allow(dead_code)]
    rationale: String,
}

/// Requests one proposal per round from an HTTP endpoint. Single request
/// in flight; every failure mode maps to `Proposal::Failed`.
pub struct ExternalProposer {
    url: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl ExternalProposer {
    pub fn new(url: String, token: Option<String>, timeout: std::time::Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self { url, token, agent }
    }

    /// Reads endpoint and auth from `INVEVOLVE_PROPOSER_URL` and
    /// `INVEVOLVE_PROPOSER_TOKEN`.
    pub fn from_env(timeout: std::time::Duration) -> Result<Self> {
        let url = std::env::var(PROPOSER_URL_ENV)
            .map_err(|_| Error::Proposal(format!("{PROPOSER_URL_ENV} is not set")))?;
        let token = std::env::var(PROPOSER_TOKEN_ENV).ok();
        Ok(Self::new(url, token, timeout))
    }
}

impl ProposalSource for ExternalProposer {
    fn propose(&mut self, ctx: &ProposalContext) -> Proposal {
        let body = format!(
            r#"{{"context":{},"policy_schema":{},"round":{}}}"#,
            ctx.wire_json(),
            POLICY_SCHEMA_JSON,
            ctx.round
        );
        let mut request = self.agent.post(&self.url).set("Content-Type", "application/json");
        if let Some(token) = &self.token {
            request = request.set("Authorization", &format!("Bearer {token}"));
        }
        let response = match request.send_string(&body) {
            Ok(r) => r,
            Err(e) => return Proposal::Failed(format!("proposal request failed: {e}")),
        };
        let text = match response.into_string() {
            Ok(t) => t,
            Err(e) => return Proposal::Failed(format!("proposal response unreadable: {e}")),
        };
        let wire: WireResponse = match serde_json::from_str(&text) {
            Ok(w) => w,
            Err(e) => return Proposal::Failed(format!("proposal response malformed: {e}")),
        };
        match serde_json::from_value::<PolicySpec>(wire.policy) {
            Ok(spec) => Proposal::Candidate(spec),
            Err(e) => Proposal::Failed(format!("proposal policy malformed: {e}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary() -> HistorySummary {
        HistorySummary {
            demand_mean: 5.0,
            demand_cv: 0.4,
            zero_ratio: 0.1,
            trend_28d: 0.2,
            window_len: 100,
            lead_time: 2,
            holding_cost: 1.0,
            penalty_cost: 10.0,
        }
    }

    fn ctx_with(champion: PolicySpec) -> ProposalContext {
        ProposalContext {
            round: 1,
            summary: summary(),
            champion,
            pool: vec![],
            stats: vec![],
            decisions: vec![],
        }
    }

    #[test]
    fn mutation_is_deterministic_for_a_fixed_seed() {
        let champion = PolicySpec::capped_base_stock(10.0, 3.0).unwrap();
        let draw = |seed| {
            let mut p = MutationProposer::new(seed);
            (0..5).map(|_| p.propose(&ctx_with(champion.clone()))).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn mutation_outputs_always_pass_validity() {
        let mut p = MutationProposer::new(3).with_rates(0.3, 0.4);
        let mut champion = PolicySpec::tilted_pic(12.0, 2.0, 0.5, 0.7).unwrap();
        for _ in 0..300 {
            match p.propose(&ctx_with(champion.clone())) {
                Proposal::Candidate(spec) => {
                    assert!(spec.check_validity_default().valid, "{spec:?}");
                    champion = spec;
                }
                Proposal::Failed(e) => panic!("mutation failed: {e}"),
            }
        }
    }

    #[test]
    fn family_switch_inherits_shared_parameters() {
        // Force a switch; with no parameter noise the inherited values are
        // exact: capped_base_stock -> tilted_cbs keeps s, maps r -> r_base
        // and initializes alpha at the box midpoint.
        let mut p = MutationProposer::new(1).with_rates(0.0, 1.0);
        let champion = PolicySpec::capped_base_stock(10.0, 3.0).unwrap();
        let mut saw_tilted = false;
        for _ in 0..20 {
            if let Proposal::Candidate(PolicySpec::TiltedCbs { s, r_base, alpha }) =
                p.propose(&ctx_with(champion.clone()))
            {
                assert_eq!((s, r_base, alpha), (10.0, 3.0, 0.5));
                saw_tilted = true;
                break;
            }
        }
        assert!(saw_tilted, "never hopped to tilted_cbs");
    }

    #[test]
    fn scripted_proposer_replays_then_fails() {
        let fixture = PolicySpec::base_stock(7.0).unwrap();
        let mut p = ScriptedProposer::new(vec![fixture.clone()]);
        assert_eq!(p.propose(&ctx_with(fixture.clone())), Proposal::Candidate(fixture.clone()));
        assert!(matches!(p.propose(&ctx_with(fixture)), Proposal::Failed(_)));
    }

    #[test]
    fn summary_conventions_for_degenerate_series() {
        let s = HistorySummary::from_series(&[0.0; 30], 1, 1.0, 10.0);
        assert_eq!(s.demand_mean, 0.0);
        assert_eq!(s.demand_cv, 0.0);
        assert_eq!(s.zero_ratio, 1.0);
        assert_eq!(s.trend_28d, 0.0);

        let rising: Vec<f64> = (0..60).map(|i| i as f64).collect();
        let s = HistorySummary::from_series(&rising, 1, 1.0, 10.0);
        assert!(s.trend_28d > 0.0);
    }

    #[test]
    fn wire_digest_respects_the_size_cap() {
        let mut ctx = ctx_with(PolicySpec::base_stock(10.0).unwrap());
        for i in 0..4000 {
            ctx.stats.push(PairDigest {
                candidate: format!("tilted_pic(s={i},r_base=2,alpha=0.5,k_p=0.8)"),
                comparator: "base_stock(s=10)".into(),
                mean: 1.234,
                lcb: 0.5,
                ucb: 2.0,
            });
        }
        let json = ctx.wire_json();
        assert!(json.len() <= WIRE_DIGEST_LIMIT, "wire digest {} bytes", json.len());
        assert!(json.contains("\"truncated\":true"));
    }
}
