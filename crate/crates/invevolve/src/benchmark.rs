//! The stationary capped-base-stock benchmark.
//!
//! A 6 x 4 x 4 grid: six demand distributions, lead times {1,2,3,4} and
//! penalty ratios p/h in {4,9,19,39} with h = 1, 96 scenarios in all.
//! Each scenario samples one 2000-period demand path (shared by every
//! policy) and tunes seven policy families on it with the same 50-trial
//! budget. Comparisons against the tuned capped base stock use the +-2%
//! win/tie/loss rule.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::stationary::{stationary_sampler, StationaryFamily, ALL_FAMILIES};
use crate::error::Result;
use crate::sim::{simulate_cost, InventoryState, SystemConfig};
use crate::tuner::{tune_policy, DemandStats, BASELINE_FAMILIES};

pub const BENCH_HORIZON: usize = 2000;
pub const BENCH_TUNE_BUDGET: usize = 50;
pub const LEAD_TIMES: [usize; 4] = [1, 2, 3, 4];
pub const PENALTY_RATIOS: [f64; 4] = [4.0, 9.0, 19.0, 39.0];

/// The seven tuned policies: five classical baselines plus the two
/// elastic-cap extensions.
pub const BENCH_POLICIES: [&str; 7] = [
    "base_stock",
    "capped_base_stock",
    "constant_order",
    "newsvendor",
    "small_s_big_s",
    "tilted_cbs",
    "tilted_pic",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub index: usize,
    pub distribution: StationaryFamily,
    pub lead_time: usize,
    /// p/h with h fixed at 1.
    pub penalty_ratio: f64,
}

/// Enumerates the 96 scenarios in distribution-major order.
pub fn scenario_grid() -> Vec<Scenario> {
    let mut grid = Vec::with_capacity(96);
    let mut index = 0;
    for distribution in ALL_FAMILIES {
        for lead_time in LEAD_TIMES {
            for penalty_ratio in PENALTY_RATIOS {
                grid.push(Scenario { index, distribution, lead_time, penalty_ratio });
                index += 1;
            }
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub master_seed: u64,
    pub budget: usize,
    pub horizon: usize,
    /// Demand paths per scenario; costs average over them.
    pub paths: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { master_seed: 0, budget: BENCH_TUNE_BUDGET, horizon: BENCH_HORIZON, paths: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    /// Tuned average cost per policy family.
    pub costs: BTreeMap<String, f64>,
    /// Tuned parameters per policy family, in search-box order.
    pub params: BTreeMap<String, Vec<f64>>,
}

fn scenario_seed(master: u64, index: usize, stream: u64) -> u64 {
    master ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream.wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

/// Tunes all seven policies on one scenario's shared demand path(s).
pub fn run_scenario(scenario: &Scenario, cfg: &BenchConfig) -> Result<ScenarioResult> {
    let sys = SystemConfig::new(scenario.lead_time, 1.0, scenario.penalty_ratio, cfg.horizon)?;
    let paths: Vec<Vec<f64>> = (0..cfg.paths.max(1))
        .map(|p| {
            stationary_sampler(
                scenario.distribution,
                cfg.horizon,
                scenario_seed(cfg.master_seed, scenario.index, p as u64),
            )
        })
        .collect();
    let stats = DemandStats::from_series(&paths[0]);
    let init = InventoryState::empty(scenario.lead_time);

    let mut costs = BTreeMap::new();
    let mut params = BTreeMap::new();
    for (fi, family) in BENCH_POLICIES.iter().enumerate() {
        let tune_seed = scenario_seed(cfg.master_seed, scenario.index, 100 + fi as u64);
        let (_, result) = tune_policy(family, &stats, scenario.lead_time, cfg.budget, tune_seed, |p| {
            let total: f64 = paths
                .iter()
                .map(|path| simulate_cost(p, path, &sys, &init).unwrap_or(f64::INFINITY))
                .sum();
            total / paths.len() as f64
        })?;
        costs.insert(family.to_string(), result.best_cost);
        params.insert(family.to_string(), result.best_params);
    }
    Ok(ScenarioResult { scenario: *scenario, costs, params })
}

/// Runs the whole grid, scenarios in parallel.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<ScenarioResult>> {
    let grid = scenario_grid();
    let mut results: Vec<ScenarioResult> =
        grid.par_iter().map(|s| run_scenario(s, cfg)).collect::<Result<Vec<_>>>()?;
    results.sort_by_key(|r| r.scenario.index);
    Ok(results)
}

// ── Win/tie/loss classification ─────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    W,
    T,
    L,
}

/// +-2% rule relative to the capped-base-stock cost.
pub fn verdict(cost: f64, cbs_cost: f64) -> Verdict {
    if cost < 0.98 * cbs_cost {
        Verdict::W
    } else if cost > 1.02 * cbs_cost {
        Verdict::L
    } else {
        Verdict::T
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WtlRecord {
    pub scenario: Scenario,
    pub policy: String,
    pub cost: f64,
    pub cbs_cost: f64,
    pub relative_change_pct: f64,
    pub verdict: Verdict,
}

pub fn wtl_records(results: &[ScenarioResult], policy: &str) -> Vec<WtlRecord> {
    results
        .iter()
        .map(|r| {
            let cost = r.costs[policy];
            let cbs_cost = r.costs["capped_base_stock"];
            WtlRecord {
                scenario: r.scenario,
                policy: policy.to_string(),
                cost,
                cbs_cost,
                relative_change_pct: (cost / cbs_cost - 1.0) * 100.0,
                verdict: verdict(cost, cbs_cost),
            }
        })
        .collect()
}

// ── Tables ──────────────────────────────────────────────────────────────

/// Scenario counts (out of 16 per distribution) where each baseline
/// achieves the lowest cost among the five baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceTable {
    /// Rows per distribution: counts aligned with [`BASELINE_FAMILIES`].
    pub rows: Vec<(StationaryFamily, [usize; 5])>,
    pub totals: [usize; 5],
}

pub fn dominance_table(results: &[ScenarioResult]) -> DominanceTable {
    let mut rows: Vec<(StationaryFamily, [usize; 5])> =
        ALL_FAMILIES.iter().map(|f| (*f, [0; 5])).collect();
    let mut totals = [0usize; 5];
    for r in results {
        let winner = BASELINE_FAMILIES
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| r.costs[**a].partial_cmp(&r.costs[**b]).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let row = rows
            .iter_mut()
            .find(|(f, _)| *f == r.scenario.distribution)
            .expect("distribution row");
        row.1[winner] += 1;
        totals[winner] += 1;
    }
    DominanceTable { rows, totals }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub policy: String,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub beat_or_tie_pct: f64,
    pub mean_change_pct: f64,
    pub worst_change_pct: f64,
}

pub fn aggregate_row(records: &[WtlRecord]) -> AggregateRow {
    let wins = records.iter().filter(|r| r.verdict == Verdict::W).count();
    let ties = records.iter().filter(|r| r.verdict == Verdict::T).count();
    let losses = records.len() - wins - ties;
    let mean = records.iter().map(|r| r.relative_change_pct).sum::<f64>() / records.len() as f64;
    let worst = records.iter().map(|r| r.relative_change_pct).fold(f64::NEG_INFINITY, f64::max);
    AggregateRow {
        policy: records[0].policy.clone(),
        wins,
        ties,
        losses,
        beat_or_tie_pct: 100.0 * (wins + ties) as f64 / records.len() as f64,
        mean_change_pct: mean,
        worst_change_pct: worst,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerDistributionRow {
    pub distribution: StationaryFamily,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub mean_change_pct: f64,
    pub best_change_pct: f64,
    pub worst_change_pct: f64,
}

pub fn per_distribution_rows(records: &[WtlRecord]) -> Vec<PerDistributionRow> {
    ALL_FAMILIES
        .iter()
        .map(|dist| {
            let rs: Vec<&WtlRecord> =
                records.iter().filter(|r| r.scenario.distribution == *dist).collect();
            let wins = rs.iter().filter(|r| r.verdict == Verdict::W).count();
            let ties = rs.iter().filter(|r| r.verdict == Verdict::T).count();
            PerDistributionRow {
                distribution: *dist,
                wins,
                ties,
                losses: rs.len() - wins - ties,
                mean_change_pct: rs.iter().map(|r| r.relative_change_pct).sum::<f64>()
                    / rs.len() as f64,
                best_change_pct: rs
                    .iter()
                    .map(|r| r.relative_change_pct)
                    .fold(f64::INFINITY, f64::min),
                worst_change_pct: rs
                    .iter()
                    .map(|r| r.relative_change_pct)
                    .fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

/// Tuned proportional-gain structure behind the lead-time and penalty
/// sweeps: averages of the tilted_pic gain over the remaining grid axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainStructure {
    pub by_lead_time: Vec<(usize, f64)>,
    pub by_penalty_ratio: Vec<(f64, f64)>,
}

pub fn gain_structure(results: &[ScenarioResult]) -> GainStructure {
    let kp = |r: &ScenarioResult| r.params["tilted_pic"][3];
    let by_lead_time = LEAD_TIMES
        .iter()
        .map(|l| {
            let xs: Vec<f64> =
                results.iter().filter(|r| r.scenario.lead_time == *l).map(kp).collect();
            (*l, xs.iter().sum::<f64>() / xs.len() as f64)
        })
        .collect();
    let by_penalty_ratio = PENALTY_RATIOS
        .iter()
        .map(|p| {
            let xs: Vec<f64> =
                results.iter().filter(|r| r.scenario.penalty_ratio == *p).map(kp).collect();
            (*p, xs.iter().sum::<f64>() / xs.len() as f64)
        })
        .collect();
    GainStructure { by_lead_time, by_penalty_ratio }
}

/// Mean relative cost change of a policy per (lead time, penalty ratio)
/// cell, averaged over distributions; heatmap source data.
pub fn change_heatmap(records: &[WtlRecord]) -> Vec<(usize, f64, f64)> {
    let mut cells = Vec::new();
    for l in LEAD_TIMES {
        for p in PENALTY_RATIOS {
            let xs: Vec<f64> = records
                .iter()
                .filter(|r| r.scenario.lead_time == l && r.scenario.penalty_ratio == p)
                .map(|r| r.relative_change_pct)
                .collect();
            cells.push((l, p, xs.iter().sum::<f64>() / xs.len() as f64));
        }
    }
    cells
}

// ── Emission ────────────────────────────────────────────────────────────

pub fn dominance_csv(t: &DominanceTable) -> String {
    let mut out = String::from("distribution,base_stock,capped_base_stock,constant_order,newsvendor,small_s_big_s\n");
    for (dist, counts) in &t.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            dist.name(),
            counts[0],
            counts[1],
            counts[2],
            counts[3],
            counts[4]
        ));
    }
    out.push_str(&format!(
        "total,{},{},{},{},{}\n",
        t.totals[0], t.totals[1], t.totals[2], t.totals[3], t.totals[4]
    ));
    out
}

pub fn dominance_markdown(t: &DominanceTable) -> String {
    let mut out = String::from(
        "| Distribution | BS | CBS | CO | NV | (s,S) |\n|---|---|---|---|---|---|\n",
    );
    for (dist, counts) in &t.rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            dist.label(),
            counts[0],
            counts[1],
            counts[2],
            counts[3],
            counts[4]
        ));
    }
    out.push_str(&format!(
        "| **Total (96)** | {} | {} | {} | {} | {} |\n",
        t.totals[0], t.totals[1], t.totals[2], t.totals[3], t.totals[4]
    ));
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("policy,wins,ties,losses,beat_or_tie_pct,mean_change_pct,worst_change_pct\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.2},{:.3},{:.3}\n",
            r.policy, r.wins, r.ties, r.losses, r.beat_or_tie_pct, r.mean_change_pct, r.worst_change_pct
        ));
    }
    out
}

pub fn aggregate_markdown(rows: &[AggregateRow]) -> String {
    let mut out = String::from(
        "| Policy | W | T | L | Beat-or-Tie | Mean % | Worst % |\n|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {:.1}% | {:+.2}% | {:+.2}% |\n",
            r.policy, r.wins, r.ties, r.losses, r.beat_or_tie_pct, r.mean_change_pct, r.worst_change_pct
        ));
    }
    out
}

pub fn per_distribution_csv(rows: &[PerDistributionRow]) -> String {
    let mut out =
        String::from("distribution,wins,ties,losses,mean_change_pct,best_change_pct,worst_change_pct\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{:.3}\n",
            r.distribution.name(),
            r.wins,
            r.ties,
            r.losses,
            r.mean_change_pct,
            r.best_change_pct,
            r.worst_change_pct
        ));
    }
    out
}

pub fn per_distribution_markdown(rows: &[PerDistributionRow]) -> String {
    let mut out = String::from(
        "| Distribution | W | T | L | Mean % | Best % | Worst % |\n|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {:+.2}% | {:+.2}% | {:+.2}% |\n",
            r.distribution.label(),
            r.wins,
            r.ties,
            r.losses,
            r.mean_change_pct,
            r.best_change_pct,
            r.worst_change_pct
        ));
    }
    out
}

pub fn gain_structure_csv(g: &GainStructure) -> String {
    let mut out = String::from("axis,value,mean_k_p\n");
    for (l, kp) in &g.by_lead_time {
        out.push_str(&format!("lead_time,{l},{kp:.4}\n"));
    }
    for (p, kp) in &g.by_penalty_ratio {
        out.push_str(&format!("penalty_ratio,{p},{kp:.4}\n"));
    }
    out
}

pub fn gain_structure_markdown(g: &GainStructure) -> String {
    let mut out = String::from("| Lead time | mean k_p |\n|---|---|\n");
    for (l, kp) in &g.by_lead_time {
        out.push_str(&format!("| {l} | {kp:.3} |\n"));
    }
    out.push_str("\n| p/h | mean k_p |\n|---|---|\n");
    for (p, kp) in &g.by_penalty_ratio {
        out.push_str(&format!("| {p} | {kp:.3} |\n"));
    }
    out
}

pub fn scenario_costs_csv(results: &[ScenarioResult]) -> String {
    let mut out = String::from("index,distribution,lead_time,penalty_ratio");
    for family in BENCH_POLICIES {
        out.push_str(&format!(",{family}"));
    }
    out.push('\n');
    for r in results {
        out.push_str(&format!(
            "{},{},{},{}",
            r.scenario.index,
            r.scenario.distribution.name(),
            r.scenario.lead_time,
            r.scenario.penalty_ratio
        ));
        for family in BENCH_POLICIES {
            out.push_str(&format!(",{:.6}", r.costs[family]));
        }
        out.push('\n');
    }
    out
}

/// Minimal static SVG line chart of the tuned gain structure.
pub fn gain_structure_svg(g: &GainStructure) -> String {
    let (w, h, pad) = (420.0, 240.0, 40.0);
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    svg.push_str(&format!(
        r#"<rect width="{w}" height="{h}" fill="white"/><line x1="{pad}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#,
        h - pad,
        w - pad,
        h - pad,
        h - pad
    ));
    let series = [(&g.by_lead_time, "#1f77b4", "k_p vs L"), (&{
        // Reuse the lead-time scale positions for the four ratio points.
        let pts: Vec<(usize, f64)> =
            g.by_penalty_ratio.iter().enumerate().map(|(i, (_, kp))| (i + 1, *kp)).collect();
        pts
    }, "#d62728", "k_p vs p/h")];
    for (points, color, _label) in &series {
        let path: Vec<String> = points
            .iter()
            .map(|(i, kp)| {
                let x = pad + (*i as f64 - 1.0) / 3.0 * (w - 2.0 * pad);
                let y = (h - pad) - kp.clamp(0.0, 1.5) / 1.5 * (h - 2.0 * pad);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        svg.push_str(&format!(
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        ));
    }
    svg.push_str(&format!(
        r#"<text x="{pad}" y="20" font-size="12">tuned k_p: blue by lead time (1-4), red by p/h (4,9,19,39)</text></svg>"#
    ));
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_enumerates_96_scenarios() {
        let grid = scenario_grid();
        assert_eq!(grid.len(), 96);
        let mut seen = std::collections::BTreeSet::new();
        for s in &grid {
            seen.insert((s.distribution.name(), s.lead_time, s.penalty_ratio as u64));
        }
        assert_eq!(seen.len(), 96);
    }

    #[test]
    fn verdict_thresholds_are_exact() {
        assert_eq!(verdict(0.979, 1.0), Verdict::W);
        assert_eq!(verdict(0.99, 1.0), Verdict::T);
        assert_eq!(verdict(1.021, 1.0), Verdict::L);
        assert_eq!(verdict(0.98, 1.0), Verdict::T);
        assert_eq!(verdict(1.02, 1.0), Verdict::T);
    }

    #[test]
    fn single_scenario_runs_and_orders_policies_sensibly() {
        let scenario =
            Scenario { index: 5, distribution: StationaryFamily::Poisson, lead_time: 2, penalty_ratio: 9.0 };
        let cfg = BenchConfig { master_seed: 7, budget: 24, horizon: 400, paths: 1 };
        let result = run_scenario(&scenario, &cfg).unwrap();
        assert_eq!(result.costs.len(), 7);
        // The capped base stock can reproduce the plain base stock, so a
        // sane tuner keeps it within a modest factor.
        let cbs = result.costs["capped_base_stock"];
        let bs = result.costs["base_stock"];
        assert!(cbs <= bs * 1.15, "cbs {cbs} vs bs {bs}");
        for family in BENCH_POLICIES {
            assert!(result.costs[family].is_finite());
        }
        // Same seed, same result.
        let again = run_scenario(&scenario, &cfg).unwrap();
        assert_eq!(result, again);
    }

    #[test]
    fn wtl_and_tables_compose() {
        let scenario =
            Scenario { index: 0, distribution: StationaryFamily::Uniform, lead_time: 1, penalty_ratio: 4.0 };
        let mk = |cbs: f64, pic: f64| {
            let mut costs = BTreeMap::new();
            for family in BENCH_POLICIES {
                costs.insert(family.to_string(), 10.0);
            }
            costs.insert("capped_base_stock".into(), cbs);
            costs.insert("tilted_pic".into(), pic);
            let mut params = BTreeMap::new();
            params.insert("tilted_pic".into(), vec![10.0, 2.0, 0.5, 0.8]);
            ScenarioResult { scenario, costs, params }
        };
        let results = vec![mk(10.0, 9.0), mk(10.0, 10.1), mk(10.0, 10.5)];
        let records = wtl_records(&results, "tilted_pic");
        let agg = aggregate_row(&records);
        assert_eq!((agg.wins, agg.ties, agg.losses), (1, 1, 1));
        assert!((agg.worst_change_pct - 5.0).abs() < 1e-9);

        let per = per_distribution_rows(&records);
        let uniform = per.iter().find(|r| r.distribution == StationaryFamily::Uniform).unwrap();
        assert_eq!((uniform.wins, uniform.ties, uniform.losses), (1, 1, 1));

        let dom = dominance_table(&results);
        assert_eq!(dom.totals.iter().sum::<usize>(), 3);
        let csv = dominance_csv(&dom);
        assert!(csv.lines().count() == 8);
        assert!(dominance_markdown(&dom).contains("Total"));
    }
}

