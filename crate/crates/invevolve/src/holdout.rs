//! Holdout evaluation of a policy against the tuned baselines.
//!
//! Each policy is warmed up over the full historical window and then
//! scored on the evaluation window that search never saw, carrying its
//! end-of-history inventory state (and the demand history, for
//! history-based policies) across the boundary.

use serde::{Deserialize, Serialize};

use crate::engine::TunedBaseline;
use crate::error::{Error, Result};
use crate::policy::PolicySpec;
use crate::sim::{simulate_ext, InventoryState, SystemConfig};
use crate::workspace::Workspace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub policy: PolicySpec,
    /// Average per-period cost of the evaluated policy on the holdout.
    pub policy_cost: f64,
    pub baseline_costs: Vec<(String, f64)>,
    pub best_baseline: String,
    pub best_baseline_cost: f64,
    /// `(policy_cost / best_baseline_cost - 1) * 100`.
    pub relative_change_pct: f64,
    /// Strictly below the best baseline.
    pub success: bool,
    pub evaluation_days: usize,
}

/// Average holdout cost of one policy, warm-started through the history.
pub fn holdout_cost(workspace: &Workspace, policy: &PolicySpec) -> Result<f64> {
    let evaluation = workspace
        .evaluation
        .as_ref()
        .ok_or_else(|| Error::Workspace("workspace loaded without its evaluation window".into()))?;
    let history = workspace.history_demands();
    let eval_demands: Vec<f64> = evaluation.iter().map(|d| d.demand).collect();

    let warm_cfg = workspace.system_config(history.len())?;
    let warm = simulate_ext(policy, &history, None, &warm_cfg, &InventoryState::empty(warm_cfg.lead_time), &[], 0)?;

    let eval_cfg = SystemConfig::new(
        warm_cfg.lead_time,
        warm_cfg.holding_cost,
        warm_cfg.penalty_cost,
        eval_demands.len(),
    )?;
    let result = simulate_ext(policy, &eval_demands, None, &eval_cfg, &warm.final_state, &history, 0)?;
    Ok(result.avg_cost)
}

/// Scores a policy and the tuned baselines on the holdout window.
pub fn evaluate_on_holdout(
    workspace: &Workspace,
    policy: &PolicySpec,
    baselines: &[TunedBaseline],
) -> Result<HoldoutReport> {
    if baselines.is_empty() {
        return Err(Error::Config("holdout evaluation needs at least one baseline".into()));
    }
    let policy_cost = holdout_cost(workspace, policy)?;
    let mut baseline_costs = Vec::with_capacity(baselines.len());
    for b in baselines {
        baseline_costs.push((b.family.clone(), holdout_cost(workspace, &b.policy)?));
    }
    let (best_baseline, best_baseline_cost) = baseline_costs
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite costs"))
        .cloned()
        .expect("non-empty baselines");
    Ok(HoldoutReport {
        policy: policy.clone(),
        policy_cost,
        relative_change_pct: (policy_cost / best_baseline_cost - 1.0) * 100.0,
        success: policy_cost < best_baseline_cost,
        baseline_costs,
        best_baseline,
        best_baseline_cost,
        evaluation_days: workspace.config.evaluation_days,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workspace::{write_workspace, DayRecord, WorkspaceConfig, WORKSPACE_SCHEMA_VERSION};
    use chrono::NaiveDate;

    fn workspace(history: &[f64], evaluation: &[f64], lead_time: usize) -> (tempfile::TempDir, Workspace) {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let day = |i: usize, demand: f64| DayRecord {
            date: start + chrono::Days::new(i as u64),
            demand,
            features: Default::default(),
            note: None,
        };
        let history: Vec<DayRecord> = history.iter().enumerate().map(|(i, d)| day(i, *d)).collect();
        let evaluation: Vec<DayRecord> =
            evaluation.iter().enumerate().map(|(i, d)| day(history.len() + i, *d)).collect();
        let config = WorkspaceConfig {
            schema_version: WORKSPACE_SCHEMA_VERSION,
            seed_id: 0,
            archetype: "test".into(),
            slice_start: 0,
            lead_time,
            holding_cost: 1.0,
            penalty_cost: 10.0,
            history_days: history.len(),
            evaluation_days: evaluation.len(),
        };
        let dir = tempfile::tempdir().unwrap();
        write_workspace(dir.path(), &config, "t", &history, &evaluation, &[]).unwrap();
        let ws = Workspace::load_full(dir.path()).unwrap();
        (dir, ws)
    }

    #[test]
    fn self_comparison_reports_zero_change() {
        let history: Vec<f64> = (0..40).map(|i| ((i * 7 + 1) % 9) as f64).collect();
        let eval: Vec<f64> = (0..30).map(|i| ((i * 5 + 2) % 9) as f64).collect();
        let (_dir, ws) = workspace(&history, &eval, 2);
        let policy = PolicySpec::base_stock(12.0).unwrap();
        let baselines = vec![TunedBaseline {
            family: "base_stock".into(),
            policy: policy.clone(),
            fit_cost: 1.0,
        }];
        let report = evaluate_on_holdout(&ws, &policy, &baselines).unwrap();
        assert_eq!(report.relative_change_pct, 0.0);
        assert!(!report.success, "equal cost is not a strict improvement");
    }

    #[test]
    fn average_is_total_over_evaluation_days() {
        let history: Vec<f64> = (0..40).map(|i| (i % 6) as f64).collect();
        let eval: Vec<f64> = (0..30).map(|i| ((i * 3 + 1) % 6) as f64).collect();
        let (_dir, ws) = workspace(&history, &eval, 1);
        let policy = PolicySpec::capped_base_stock(8.0, 4.0).unwrap();
        let cost = holdout_cost(&ws, &policy).unwrap();

        // Recompute by hand: warm through history, then sum the 30 daily
        // costs.
        let warm_cfg = ws.system_config(40).unwrap();
        let warm = simulate_ext(&policy, &history, None, &warm_cfg, &InventoryState::empty(1), &[], 0).unwrap();
        let eval_cfg = SystemConfig::new(1, 1.0, 10.0, 30).unwrap();
        let full = simulate_ext(&policy, &eval, None, &eval_cfg, &warm.final_state, &history, 0).unwrap();
        assert!((cost - full.total_cost / 30.0).abs() <= 1e-9 * full.total_cost.abs().max(1.0));
    }

    #[test]
    fn success_requires_a_strict_win() {
        let history: Vec<f64> = (0..60).map(|i| ((i * 11 + 3) % 10) as f64).collect();
        let eval: Vec<f64> = (0..30).map(|i| ((i * 7 + 5) % 10) as f64).collect();
        let (_dir, ws) = workspace(&history, &eval, 1);
        let weak = PolicySpec::constant_order(0.0).unwrap();
        let strong = PolicySpec::base_stock(11.0).unwrap();
        let baselines = vec![TunedBaseline {
            family: "constant_order".into(),
            policy: weak,
            fit_cost: 1.0,
        }];
        let report = evaluate_on_holdout(&ws, &strong, &baselines).unwrap();
        assert_eq!(report.success, report.policy_cost < report.best_baseline_cost);
        assert!(report.success, "stocking beats ordering nothing under p/h = 10");
    }
}
