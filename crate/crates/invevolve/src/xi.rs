//! Estimators for the replay-to-deployment discrepancy budget.
//!
//! The budget enters the promotion gate and the deployment rule as a
//! safety margin subtracted from confidence lower bounds. Online it must
//! be estimated from historical replay-to-forward discrepancies; this
//! module provides the historical-quantile and shift-conditioned
//! estimators plus the retrospective oracle used only for calibration.
//! The operational budget is always the conservative combination
//! `max(historical, shift-conditioned)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::empirical_quantile;

/// Combined discrepancy budget and its components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiBudget {
    pub xi_hist: f64,
    pub xi_shift: f64,
    /// `max(xi_hist, xi_shift)`.
    pub xi: f64,
    pub alpha: f64,
    /// Number of recent periods pooled by the historical estimator.
    pub history_periods: usize,
    /// Set when no calibration data was available and the budget is a
    /// cold-start zero.
    pub cold_start: bool,
}

impl XiBudget {
    pub fn combine(xi_hist: f64, xi_shift: f64, alpha: f64, history_periods: usize) -> Self {
        Self { xi_hist, xi_shift, xi: xi_hist.max(xi_shift), alpha, history_periods, cold_start: false }
    }

    pub fn cold_start(alpha: f64) -> Self {
        Self { xi_hist: 0.0, xi_shift: 0.0, xi: 0.0, alpha, history_periods: 0, cold_start: true }
    }
}

/// Conservative empirical `(1-alpha)`-quantile of pooled historical
/// discrepancies. An empty pool is a cold start and yields zero.
pub fn xi_historical(pooled_discrepancies: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha out of (0,1), got {alpha}")));
    }
    if pooled_discrepancies.is_empty() {
        return Ok(0.0);
    }
    if pooled_discrepancies.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::InvalidInput("discrepancies must be non-negative finite reals".into()));
    }
    Ok(empirical_quantile(pooled_discrepancies, 1.0 - alpha))
}

/// One calibration observation: shift features paired with the realized
/// oracle discrepancy of that period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftObservation {
    pub features: Vec<f64>,
    pub xi: f64,
}

const PINBALL_ITERATIONS: usize = 2000;
const MIN_SHIFT_PAIRS: usize = 5;

/// Shift-conditioned upper-quantile estimate at level `1-alpha`.
///
/// Fits a linear quantile model by pinball-loss subgradient descent
/// (least-squares warm start, 2000 full-batch iterations, step
/// `0.01/sqrt(iter)`, inputs standardized), evaluates it at `probe`, adds
/// the inflation term and clamps at zero. With fewer than five calibration
/// pairs it falls back to the historical quantile of the calibration
/// targets.
pub fn xi_shift(
    calibration: &[ShiftObservation],
    probe: &[f64],
    alpha: f64,
    inflation: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha out of (0,1), got {alpha}")));
    }
    if !(inflation >= 0.0) || !inflation.is_finite() {
        return Err(Error::InvalidInput(format!("inflation must be non-negative, got {inflation}")));
    }
    if calibration.len() < MIN_SHIFT_PAIRS {
        let targets: Vec<f64> = calibration.iter().map(|c| c.xi).collect();
        return xi_historical(&targets, alpha);
    }
    let dim = probe.len();
    if calibration.iter().any(|c| c.features.len() != dim) {
        return Err(Error::InvalidInput("calibration feature dimension does not match probe".into()));
    }

    let fit = PinballFit::fit(calibration, dim, 1.0 - alpha);
    Ok((fit.predict(probe) + inflation).max(0.0))
}

/// Linear quantile model on standardized inputs.
struct PinballFit {
    weights: Vec<f64>, // intercept first
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
}

impl PinballFit {
    fn fit(calibration: &[ShiftObservation], dim: usize, level: f64) -> Self {
        let n = calibration.len();
        let nf = n as f64;

        let mut x_mean = vec![0.0; dim];
        let mut x_scale = vec![0.0; dim];
        for c in calibration {
            for (j, v) in c.features.iter().enumerate() {
                x_mean[j] += v / nf;
            }
        }
        for c in calibration {
            for (j, v) in c.features.iter().enumerate() {
                x_scale[j] += (v - x_mean[j]).powi(2) / nf;
            }
        }
        for s in &mut x_scale {
            *s = s.sqrt().max(1e-12);
        }
        let y_mean = calibration.iter().map(|c| c.xi).sum::<f64>() / nf;
        let y_scale = (calibration.iter().map(|c| (c.xi - y_mean).powi(2)).sum::<f64>() / nf)
            .sqrt()
            .max(1e-12);

        let xs: Vec<Vec<f64>> = calibration
            .iter()
            .map(|c| c.features.iter().enumerate().map(|(j, v)| (v - x_mean[j]) / x_scale[j]).collect())
            .collect();
        let ys: Vec<f64> = calibration.iter().map(|c| (c.xi - y_mean) / y_scale).collect();

        let mut weights = least_squares_warm_start(&xs, &ys, dim);
        // Full-batch pinball subgradient refinement toward the target level.
        for iter in 1..=PINBALL_ITERATIONS {
            let step = 0.01 / (iter as f64).sqrt();
            let mut grad = vec![0.0; dim + 1];
            for (x, &y) in xs.iter().zip(&ys) {
                let pred = weights[0] + x.iter().zip(&weights[1..]).map(|(a, b)| a * b).sum::<f64>();
                let residual = y - pred;
                let slope = if residual > 0.0 {
                    -level
                } else if residual < 0.0 {
                    1.0 - level
                } else {
                    0.0
                };
                grad[0] += slope / nf;
                for (j, v) in x.iter().enumerate() {
                    grad[j + 1] += slope * v / nf;
                }
            }
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w -= step * g;
            }
        }

        Self { weights, x_mean, x_scale, y_mean, y_scale }
    }

    fn predict(&self, probe: &[f64]) -> f64 {
        let z = self.weights[0]
            + probe
                .iter()
                .enumerate()
                .map(|(j, v)| (v - self.x_mean[j]) / self.x_scale[j] * self.weights[j + 1])
                .sum::<f64>();
        self.y_scale * z + self.y_mean
    }
}

/// Ridge-regularized least squares via Gauss elimination; small systems only.
fn least_squares_warm_start(xs: &[Vec<f64>], ys: &[f64], dim: usize) -> Vec<f64> {
    let d = dim + 1;
    let mut ata = vec![vec![0.0; d]; d];
    let mut atb = vec![0.0; d];
    for (x, &y) in xs.iter().zip(ys) {
        let mut row = Vec::with_capacity(d);
        row.push(1.0);
        row.extend_from_slice(x);
        for i in 0..d {
            atb[i] += row[i] * y;
            for j in 0..d {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, row) in ata.iter_mut().enumerate() {
        row[i] += 1e-8;
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&a, &b| ata[a][col].abs().partial_cmp(&ata[b][col].abs()).unwrap())
            .unwrap();
        ata.swap(col, pivot);
        atb.swap(col, pivot);
        let diag = ata[col][col];
        if diag.abs() < 1e-14 {
            continue;
        }
        for row in col + 1..d {
            let factor = ata[row][col] / diag;
            for k in col..d {
                ata[row][k] -= factor * ata[col][k];
            }
            atb[row] -= factor * atb[col];
        }
    }
    let mut w = vec![0.0; d];
    for row in (0..d).rev() {
        let mut acc = atb[row];
        for k in row + 1..d {
            acc -= ata[row][k] * w[k];
        }
        w[row] = if ata[row][row].abs() < 1e-14 { 0.0 } else { acc / ata[row][row] };
    }
    w
}

/// Default configuration for the combined budget.
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_HISTORY_PERIODS: usize = 8;

/// On-disk calibration data for the discrepancy budget, stored as
/// `xi_calibration.json` next to a workspace. `shift_pairs` features use
/// the convention `[mean demand, demand std, zero ratio, 28-day trend]`
/// of the period's replay window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiCalibration {
    pub schema_version: u32,
    pub alpha: f64,
    pub inflation: f64,
    pub history_periods: usize,
    /// Pooled replay-to-forward discrepancies from recent periods.
    pub discrepancies: Vec<f64>,
    #[serde(default)]
    pub shift_pairs: Vec<ShiftObservation>,
}

/// Combined budget from calibration data and the current window's probe
/// features. Missing calibration is a cold start yielding zero.
pub fn auto_budget(calibration: Option<&XiCalibration>, probe: &[f64]) -> Result<XiBudget> {
    let Some(cal) = calibration else {
        return Ok(XiBudget::cold_start(DEFAULT_ALPHA));
    };
    let hist = xi_historical(&cal.discrepancies, cal.alpha)?;
    let shift = xi_shift(&cal.shift_pairs, probe, cal.alpha, cal.inflation)?;
    Ok(XiBudget::combine(hist, shift, cal.alpha, cal.history_periods))
}

/// Probe feature vector for shift-conditioned calibration.
pub fn probe_features(demands: &[f64]) -> Vec<f64> {
    let n = demands.len().max(1) as f64;
    let mean = demands.iter().sum::<f64>() / n;
    let var = demands.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    let zero_ratio = demands.iter().filter(|d| **d == 0.0).count() as f64 / n;
    let trend = if demands.len() >= 56 {
        let k = demands.len();
        let last: f64 = demands[k - 28..].iter().sum::<f64>() / 28.0;
        let prev: f64 = demands[k - 56..k - 28].iter().sum::<f64>() / 28.0;
        last - prev
    } else {
        0.0
    };
    vec![mean, var.sqrt(), zero_ratio, trend]
}

/// Retrospective oracle discrepancy over evaluated pairs: absolute
/// forward-minus-replay gain differences, reduced by max (`beta = 0`) or
/// the conservative `(1-beta)`-quantile. Never used by the online gate.
pub fn xi_oracle(
    replay_gains: &std::collections::BTreeMap<String, f64>,
    forward_gains: &std::collections::BTreeMap<String, f64>,
    beta: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidInput(format!("beta out of [0,1), got {beta}")));
    }
    if replay_gains.len() != forward_gains.len()
        || replay_gains.keys().any(|k| !forward_gains.contains_key(k))
    {
        return Err(Error::InvalidInput("replay and forward gain maps must share keys".into()));
    }
    if replay_gains.is_empty() {
        return Err(Error::InvalidInput("gain maps must be non-empty".into()));
    }
    let discrepancies: Vec<f64> =
        replay_gains.iter().map(|(k, rep)| (forward_gains[k] - rep).abs()).collect();
    if beta == 0.0 {
        Ok(discrepancies.iter().fold(0.0_f64, |a, &b| a.max(b)))
    } else {
        Ok(empirical_quantile(&discrepancies, 1.0 - beta))
    }
}
