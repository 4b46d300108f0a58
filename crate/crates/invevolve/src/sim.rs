//! Lost-sales inventory dynamics with lead time.
//!
//! Period event sequence (fixed convention):
//!
//! 1. the oldest pipeline order arrives and is added to on-hand stock;
//! 2. the new order enters the tail of the pipeline (with zero lead time it
//!    is received immediately, i.e. added to on-hand before demand);
//! 3. demand arrives, sales = min(on_hand, demand), unmet demand is lost;
//! 4. period cost = h * end-of-period on-hand + p * lost units.
//!
//! Holding cost is charged on end-of-period on-hand only; pipeline units
//! incur no holding cost. All functions here are pure and deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{FeatureMap, PolicySpec};

/// Cost and timing parameters of the inventory system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Lead time in periods; orders arrive after `lead_time` periods.
    pub lead_time: usize,
    /// Holding cost per unit of end-of-period on-hand inventory.
    pub holding_cost: f64,
    /// Penalty per unit of lost demand.
    pub penalty_cost: f64,
    /// Number of periods simulated.
    pub horizon: usize,
}

impl SystemConfig {
    pub fn new(lead_time: usize, holding_cost: f64, penalty_cost: f64, horizon: usize) -> Result<Self> {
        if !(holding_cost > 0.0) || !holding_cost.is_finite() {
            return Err(Error::InvalidInput(format!("holding cost must be positive, got {holding_cost}")));
        }
        if !(penalty_cost > 0.0) || !penalty_cost.is_finite() {
            return Err(Error::InvalidInput(format!("penalty cost must be positive, got {penalty_cost}")));
        }
        if horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        Ok(Self { lead_time, holding_cost, penalty_cost, horizon })
    }

    /// Newsvendor critical ratio p / (p + h).
    pub fn critical_ratio(&self) -> f64 {
        self.penalty_cost / (self.penalty_cost + self.holding_cost)
    }
}

/// On-hand stock plus the in-transit pipeline. `pipeline[i]` arrives after
/// `i + 1` periods; the pipeline always has exactly `lead_time` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryState {
    pub on_hand: f64,
    pub pipeline: Vec<f64>,
}

impl InventoryState {
    pub fn new(on_hand: f64, pipeline: Vec<f64>) -> Result<Self> {
        if !(on_hand >= 0.0) || !on_hand.is_finite() {
            return Err(Error::InvalidInput(format!("on-hand must be non-negative, got {on_hand}")));
        }
        if pipeline.iter().any(|q| !(*q >= 0.0) || !q.is_finite()) {
            return Err(Error::InvalidInput("pipeline entries must be non-negative".into()));
        }
        Ok(Self { on_hand, pipeline })
    }

    /// Empty system matching a given lead time: zero on-hand, zero pipeline.
    pub fn empty(lead_time: usize) -> Self {
        Self { on_hand: 0.0, pipeline: vec![0.0; lead_time] }
    }
}

/// Inventory position: on-hand plus everything in transit.
pub fn inventory_position(state: &InventoryState) -> f64 {
    state.on_hand + state.pipeline.iter().sum::<f64>()
}

/// One simulated period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub order: f64,
    pub sales: f64,
    pub lost: f64,
    pub end_on_hand: f64,
    pub cost: f64,
}

/// Full-trajectory simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Sum of per-period costs over the counted periods.
    pub total_cost: f64,
    /// `total_cost` divided by the number of counted periods.
    pub avg_cost: f64,
    pub per_period: Vec<PeriodRecord>,
    pub final_state: InventoryState,
}

/// Advances the system by one period given an order decision.
///
/// Returns the next state together with (period cost, sales, lost units).
pub fn step(
    state: &InventoryState,
    order: f64,
    demand: f64,
    cfg: &SystemConfig,
) -> Result<(InventoryState, f64, f64, f64)> {
    if !(order >= 0.0) || !order.is_finite() {
        return Err(Error::InvalidInput(format!("order must be non-negative, got {order}")));
    }
    if !(demand >= 0.0) || !demand.is_finite() {
        return Err(Error::InvalidInput(format!("demand must be non-negative, got {demand}")));
    }
    if state.pipeline.len() != cfg.lead_time {
        return Err(Error::InvalidInput(format!(
            "pipeline length {} does not match lead time {}",
            state.pipeline.len(),
            cfg.lead_time
        )));
    }

    let mut on_hand = state.on_hand;
    let mut pipeline = state.pipeline.clone();
    if cfg.lead_time == 0 {
        on_hand += order;
    } else {
        on_hand += pipeline[0];
        pipeline.rotate_left(1);
        pipeline[cfg.lead_time - 1] = order;
    }

    let sales = on_hand.min(demand);
    let lost = demand - sales;
    on_hand -= sales;

    let cost = cfg.holding_cost * on_hand + cfg.penalty_cost * lost;
    Ok((InventoryState { on_hand, pipeline }, cost, sales, lost))
}

/// The post-arrival state a policy observes when deciding: the oldest
/// pipeline order has been received and its slot vacated. The inventory
/// position is unchanged by this view.
fn decision_view(state: &InventoryState, lead_time: usize) -> InventoryState {
    if lead_time == 0 {
        return state.clone();
    }
    let mut pipeline: Vec<f64> = state.pipeline[1..].to_vec();
    pipeline.push(0.0);
    InventoryState { on_hand: state.on_hand + state.pipeline[0], pipeline }
}

/// Simulates a policy over a demand path. Deterministic for fixed inputs.
///
/// A non-finite or negative policy decision is a structural-validity
/// failure and surfaces as `Error::Policy`.
pub fn simulate(
    policy: &PolicySpec,
    demands: &[f64],
    features: Option<&[FeatureMap]>,
    cfg: &SystemConfig,
    init: &InventoryState,
) -> Result<SimResult> {
    simulate_ext(policy, demands, features, cfg, init, &[], 0)
}

/// `simulate` with a demand-history prefix (visible to history-based
/// policies before the first simulated period) and a warm-up count whose
/// periods are simulated but excluded from cost accounting.
pub fn simulate_ext(
    policy: &PolicySpec,
    demands: &[f64],
    features: Option<&[FeatureMap]>,
    cfg: &SystemConfig,
    init: &InventoryState,
    history_prefix: &[f64],
    warmup: usize,
) -> Result<SimResult> {
    if demands.len() != cfg.horizon {
        return Err(Error::InvalidInput(format!(
            "demand path length {} does not match horizon {}",
            demands.len(),
            cfg.horizon
        )));
    }
    if let Some(f) = features {
        if f.len() != demands.len() {
            return Err(Error::InvalidInput("features not aligned with demands".into()));
        }
    }
    if warmup >= cfg.horizon {
        return Err(Error::InvalidInput(format!("warm-up {} must be below horizon {}", warmup, cfg.horizon)));
    }

    let mut state = init.clone();
    let mut history: Vec<f64> = history_prefix.to_vec();
    let mut per_period = Vec::with_capacity(cfg.horizon);
    let mut total_cost = 0.0;

    for (n, &demand) in demands.iter().enumerate() {
        let view = decision_view(&state, cfg.lead_time);
        let feat = features.map(|f| &f[n]);
        let order = policy.decide(&view, feat, &history, cfg)?;
        if !order.is_finite() || order < 0.0 {
            return Err(Error::Policy(format!("policy produced decision {order} at period {n}")));
        }
        let (next, cost, sales, lost) = step(&state, order, demand, cfg)?;
        if n >= warmup {
            total_cost += cost;
        }
        per_period.push(PeriodRecord { order, sales, lost, end_on_hand: next.on_hand, cost });
        history.push(demand);
        state = next;
    }

    let counted = (cfg.horizon - warmup) as f64;
    Ok(SimResult { total_cost, avg_cost: total_cost / counted, per_period, final_state: state })
}

/// Average per-period cost only; the lean path used by tuning loops.
pub fn simulate_cost(
    policy: &PolicySpec,
    demands: &[f64],
    cfg: &SystemConfig,
    init: &InventoryState,
) -> Result<f64> {
    simulate_cost_ext(policy, demands, cfg, init, &[])
}

/// `simulate_cost` with a demand-history prefix.
pub fn simulate_cost_ext(
    policy: &PolicySpec,
    demands: &[f64],
    cfg: &SystemConfig,
    init: &InventoryState,
    history_prefix: &[f64],
) -> Result<f64> {
    Ok(per_period_costs(policy, demands, cfg, init, history_prefix)?.iter().sum::<f64>()
        / demands.len() as f64)
}

/// Sorted rolling window over the most recent demands, answering
/// order-statistic queries in O(1) with O(window) updates.
struct RollingQuantile {
    window: usize,
    recent: std::collections::VecDeque<f64>,
    sorted: Vec<f64>,
}

impl RollingQuantile {
    fn new(window: usize, prefix: &[f64]) -> Self {
        let keep = prefix.len().min(window);
        let mut rq = Self {
            window,
            recent: std::collections::VecDeque::with_capacity(window + 1),
            sorted: Vec::with_capacity(window + 1),
        };
        for &d in &prefix[prefix.len() - keep..] {
            rq.push(d);
        }
        rq
    }

    fn push(&mut self, demand: f64) {
        if self.recent.len() == self.window {
            let old = self.recent.pop_front().expect("non-empty window");
            let at = self.sorted.partition_point(|x| *x < old);
            self.sorted.remove(at);
        }
        self.recent.push_back(demand);
        let at = self.sorted.partition_point(|x| *x < demand);
        self.sorted.insert(at, demand);
    }

    /// Smallest order statistic with empirical CDF >= level.
    fn quantile(&self, level: f64) -> Option<f64> {
        if self.sorted.is_empty() {
            return None;
        }
        let n = self.sorted.len();
        let k = (level * n as f64).ceil().max(1.0) as usize;
        Some(self.sorted[k.min(n) - 1])
    }
}

/// Per-period cost series along the path; used by replay evaluation where
/// daily cost differences form the gain samples. The newsvendor family
/// gets a rolling-window quantile so long horizons stay cheap; every
/// other family is stateless in the demand history.
pub fn per_period_costs(
    policy: &PolicySpec,
    demands: &[f64],
    cfg: &SystemConfig,
    init: &InventoryState,
    history_prefix: &[f64],
) -> Result<Vec<f64>> {
    if demands.len() != cfg.horizon {
        return Err(Error::InvalidInput(format!(
            "demand path length {} does not match horizon {}",
            demands.len(),
            cfg.horizon
        )));
    }
    let mut state = init.clone();
    let mut costs = Vec::with_capacity(cfg.horizon);

    if let PolicySpec::Newsvendor { window, ratio } = policy {
        let level = ratio.unwrap_or_else(|| cfg.critical_ratio());
        let scale = (cfg.lead_time + 1) as f64;
        let mut rolling = RollingQuantile::new(*window, history_prefix);
        for &demand in demands {
            let order = match rolling.quantile(level) {
                Some(q) => (q * scale - inventory_position(&state)).max(0.0),
                None => 0.0,
            };
            let (next, cost, _, _) = step(&state, order, demand, cfg)?;
            costs.push(cost);
            rolling.push(demand);
            state = next;
        }
        return Ok(costs);
    }

    for (n, &demand) in demands.iter().enumerate() {
        let view = decision_view(&state, cfg.lead_time);
        let order = policy.decide(&view, None, &[], cfg)?;
        if !order.is_finite() || order < 0.0 {
            return Err(Error::Policy(format!("policy produced decision {order} at period {n}")));
        }
        let (next, cost, _, _) = step(&state, order, demand, cfg)?;
        costs.push(cost);
        state = next;
    }
    Ok(costs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicySpec;

    fn cfg(lead_time: usize, h: f64, p: f64, horizon: usize) -> SystemConfig {
        SystemConfig::new(lead_time, h, p, horizon).unwrap()
    }

    #[test]
    fn inventory_position_sums_on_hand_and_pipeline() {
        let s = InventoryState::new(3.0, vec![2.0, 0.0]).unwrap();
        assert_eq!(inventory_position(&s), 5.0);
        let empty = InventoryState::new(0.0, vec![]).unwrap();
        assert_eq!(inventory_position(&empty), 0.0);
        let s = InventoryState::new(1.5, vec![0.5, 1.0, 2.0]).unwrap();
        assert_eq!(inventory_position(&s), 5.0);
    }

    #[test]
    fn step_receives_orders_then_serves_demand() {
        let c = cfg(1, 1.0, 10.0, 1);
        let s = InventoryState::new(3.0, vec![2.0]).unwrap();

        // Receive 2 -> on-hand 5; order 4 enters pipeline; demand 6 -> 1 lost.
        let (next, cost, sales, lost) = step(&s, 4.0, 6.0, &c).unwrap();
        assert_eq!(next.on_hand, 0.0);
        assert_eq!(next.pipeline, vec![4.0]);
        assert_eq!(sales, 5.0);
        assert_eq!(lost, 1.0);
        assert_eq!(cost, 10.0);

        let (next, cost, _, _) = step(&s, 0.0, 0.0, &c).unwrap();
        assert_eq!(next.on_hand, 5.0);
        assert_eq!(next.pipeline, vec![0.0]);
        assert_eq!(cost, 5.0);

        let empty = InventoryState::empty(1);
        let (_, cost, _, _) = step(&empty, 0.0, 0.0, &c).unwrap();
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn step_rejects_negative_inputs() {
        let c = cfg(1, 1.0, 10.0, 1);
        let s = InventoryState::empty(1);
        assert!(step(&s, -1.0, 0.0, &c).is_err());
        assert!(step(&s, 0.0, -0.5, &c).is_err());
        assert!(step(&s, f64::NAN, 0.0, &c).is_err());
    }

    #[test]
    fn simulate_null_trajectory_costs_nothing() {
        let c = cfg(2, 1.0, 10.0, 4);
        let policy = PolicySpec::constant_order(0.0).unwrap();
        let r = simulate(&policy, &[0.0; 4], None, &c, &InventoryState::empty(2)).unwrap();
        assert_eq!(r.total_cost, 0.0);
        assert_eq!(r.avg_cost, 0.0);
    }

    #[test]
    fn simulate_constant_order_matches_demand_exactly() {
        // L=0: each period receive 5, sell 5, zero holding, zero lost.
        let c = cfg(0, 1.0, 10.0, 3);
        let policy = PolicySpec::constant_order(5.0).unwrap();
        let r = simulate(&policy, &[5.0, 5.0, 5.0], None, &c, &InventoryState::empty(0)).unwrap();
        assert_eq!(r.total_cost, 0.0);
        for p in &r.per_period {
            assert_eq!(p.sales, 5.0);
            assert_eq!(p.lost, 0.0);
        }
    }

    #[test]
    fn simulate_base_stock_single_period_trace() {
        let c = cfg(0, 1.0, 2.0, 1);
        let policy = PolicySpec::base_stock(5.0).unwrap();
        let r = simulate(&policy, &[3.0], None, &c, &InventoryState::empty(0)).unwrap();
        assert_eq!(r.per_period[0].order, 5.0);
        assert_eq!(r.per_period[0].sales, 3.0);
        assert_eq!(r.total_cost, 2.0);
        assert!((r.avg_cost * c.horizon as f64 - r.total_cost).abs() <= 1e-9 * r.total_cost.abs().max(1.0));
    }

    #[test]
    fn mass_conservation_and_cost_sign_along_random_trace() {
        let c = cfg(3, 2.0, 9.0, 60);
        let policy = PolicySpec::capped_base_stock(12.0, 4.0).unwrap();
        let demands: Vec<f64> = (0..60).map(|i| ((i * 37 + 11) % 13) as f64 / 2.0).collect();
        let r = simulate(&policy, &demands, None, &c, &InventoryState::empty(3)).unwrap();

        let mut state = InventoryState::empty(3);
        let mut total = 0.0;
        for (n, p) in r.per_period.iter().enumerate() {
            let arrival = state.pipeline[0];
            // on_hand_before + arrival - sales = on_hand_after, exactly.
            assert_eq!(state.on_hand + arrival - p.sales, p.end_on_hand);
            assert!(p.cost >= 0.0);
            assert!(p.sales >= 0.0 && p.lost >= 0.0);
            let (next, cost, _, _) = step(&state, p.order, demands[n], &c).unwrap();
            assert_eq!(cost, p.cost);
            total += cost;
            state = next;
        }
        assert_eq!(total, r.total_cost);
        assert_eq!(state, r.final_state);
    }

    #[test]
    fn raising_demand_never_reduces_cumulative_lost_sales() {
        let c = cfg(2, 1.0, 5.0, 40);
        let orders: Vec<f64> = (0..40).map(|i| ((i * 7) % 9) as f64).collect();
        let base: Vec<f64> = (0..40).map(|i| ((i * 5 + 3) % 11) as f64).collect();

        let run = |demands: &[f64]| -> f64 {
            let mut state = InventoryState::empty(2);
            let mut lost_total = 0.0;
            for (o, d) in orders.iter().zip(demands) {
                let (next, _, _, lost) = step(&state, *o, *d, &c).unwrap();
                lost_total += lost;
                state = next;
            }
            lost_total
        };

        let lost0 = run(&base);
        for bump_at in [0, 13, 39] {
            let mut bumped = base.clone();
            bumped[bump_at] += 2.5;
            assert!(run(&bumped) >= lost0);
        }
    }

    #[test]
    fn base_stock_with_ample_target_never_loses_sales_at_zero_lead_time() {
        let c = cfg(0, 1.0, 10.0, 50);
        let demands: Vec<f64> = (0..50).map(|i| ((i * 31 + 7) % 8) as f64).collect();
        let policy = PolicySpec::base_stock(8.0).unwrap();
        let r = simulate(&policy, &demands, None, &c, &InventoryState::empty(0)).unwrap();
        assert!(r.per_period.iter().all(|p| p.lost == 0.0));
    }

    #[test]
    fn simulate_is_bit_deterministic() {
        let c = cfg(4, 1.3, 11.0, 80);
        let policy = PolicySpec::tilted_pic(20.0, 3.0, 0.4, 0.8).unwrap();
        let demands: Vec<f64> = (0..80).map(|i| ((i * 17 + 5) % 19) as f64 * 0.7).collect();
        let a = simulate(&policy, &demands, None, &c, &InventoryState::empty(4)).unwrap();
        let b = simulate(&policy, &demands, None, &c, &InventoryState::empty(4)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn warmup_periods_are_excluded_from_cost() {
        let c = cfg(1, 1.0, 10.0, 6);
        let policy = PolicySpec::constant_order(2.0).unwrap();
        let demands = [0.0, 0.0, 1.0, 2.0, 3.0, 4.0];
        let full = simulate(&policy, &demands, None, &c, &InventoryState::empty(1)).unwrap();
        let warm = simulate_ext(&policy, &demands, None, &c, &InventoryState::empty(1), &[], 2).unwrap();
        let skipped: f64 = full.per_period[..2].iter().map(|p| p.cost).sum();
        assert!((full.total_cost - skipped - warm.total_cost).abs() < 1e-12);
        assert!((warm.avg_cost - warm.total_cost / 4.0).abs() < 1e-12);
    }

    #[test]
    fn lean_cost_path_agrees_with_full_simulation() {
        let c = cfg(3, 1.0, 9.0, 70);
        let demands: Vec<f64> = (0..70).map(|i| ((i * 23 + 2) % 12) as f64).collect();
        for policy in [
            PolicySpec::newsvendor(14, None).unwrap(),
            PolicySpec::small_s_big_s(4.0, 16.0).unwrap(),
            PolicySpec::tilted_cbs(18.0, 3.0, 0.5).unwrap(),
        ] {
            let full = simulate(&policy, &demands, None, &c, &InventoryState::empty(3)).unwrap();
            let lean = simulate_cost(&policy, &demands, &c, &InventoryState::empty(3)).unwrap();
            assert!((full.avg_cost - lean).abs() < 1e-12);
        }
    }

    #[test]
    fn rolling_newsvendor_path_matches_generic_decisions_with_prefix() {
        let c = cfg(2, 1.0, 9.0, 50);
        let demands: Vec<f64> = (0..50).map(|i| ((i * 17 + 3) % 9) as f64).collect();
        let prefix: Vec<f64> = (0..37).map(|i| ((i * 11 + 1) % 8) as f64).collect();
        for window in [1usize, 5, 20, 200] {
            let policy = PolicySpec::newsvendor(window, None).unwrap();
            let lean = simulate_cost_ext(&policy, &demands, &c, &InventoryState::empty(2), &prefix)
                .unwrap();
            let full =
                simulate_ext(&policy, &demands, None, &c, &InventoryState::empty(2), &prefix, 0)
                    .unwrap();
            assert!((full.avg_cost - lean).abs() < 1e-12, "window {window}");
        }
    }
}
