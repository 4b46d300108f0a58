//! Synthetic seed-dataset generation and workspace slicing.
//!
//! Each seed dataset spans 731 daily observations (2024-01-01 through
//! 2025-12-31). Demand follows a log-linear conditional mean
//!
//! ```text
//! log mu_r = beta0(r) + beta(r)' x_r + gamma' z_r + delta' e_r
//! ```
//!
//! where `x_r` are generated covariates (seasonal weather, promotions,
//! macro trends, weekly cycles), `z_r` a sticky latent regime, and `e_r` a
//! latent event-state vector that decays over an event's duration. A
//! textual note is recorded only on the first day of an *observed* event;
//! the impact persists unannotated. Demand families: negative binomial,
//! zero-inflated, two-component mixture, and continuous positive.
//!
//! Slicing carves 130-day windows (100 history + 30 evaluation) out of a
//! seed series, with start positions at least 15 days apart.
//!
//! Everything is deterministic given the seed configuration and the
//! master RNG seed; regeneration is byte-identical.

pub mod archetypes;
pub mod stationary;

use std::collections::BTreeSet;
use std::path::Path;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{FeatureMap, PolicySpec};
use crate::workspace::{write_workspace, DayRecord, WorkspaceConfig, WORKSPACE_SCHEMA_VERSION};

pub const SPAN_DAYS: usize = 731;
pub const HISTORY_DAYS: usize = 100;
pub const EVALUATION_DAYS: usize = 30;
pub const SLICE_DAYS: usize = HISTORY_DAYS + EVALUATION_DAYS;
pub const MIN_SLICE_SEPARATION: usize = 15;
pub const CALENDAR_START: (i32, u32, u32) = (2024, 1, 1);

/// Log-mean clamp guarding against coefficient blow-ups.
const LOG_MEAN_RANGE: (f64, f64) = (-10.0, 15.0);

// ── Configuration ───────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovariateKind {
    /// Yearly sinusoid plus AR(1) disturbance and rare shocks:
    /// `base + amplitude * sin(2 pi (doy - phase) / 365.25) + u_r + shock`.
    Seasonal {
        base: f64,
        amplitude: f64,
        phase_day: f64,
        ar_rho: f64,
        ar_sigma: f64,
        shock_prob: f64,
        shock_scale: f64,
    },
    /// Event-centered promotional windows with exponentially decaying
    /// intensity.
    PromoPulse { daily_prob: f64, duration: (usize, usize), peak: f64, half_life: f64 },
    /// Stochastic trend with occasional spikes or drawdowns.
    Trend { drift: f64, sigma: f64, spike_prob: f64, spike_scale: f64 },
    /// 1 on Saturday/Sunday, 0 otherwise.
    Weekend,
    /// `amplitude * sin(2 pi (dow + phase) / 7)`.
    WeeklyCycle { amplitude: f64, phase: f64 },
}

/// One covariate with its (possibly drifting) demand coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: CovariateKind,
    pub beta_start: f64,
    pub beta_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub n_states: usize,
    pub stay_prob: f64,
    /// Log-mean offset per state; state 0 is the base regime with offset 0.
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTypeSpec {
    pub name: String,
    pub note_text: String,
    pub daily_onset_prob: f64,
    pub duration_range: (usize, usize),
    pub intensity_range: (f64, f64),
    /// Exponential decay half-life in days: `omega(d) = 0.5^(d / half_life)`.
    pub half_life: f64,
    pub observe_prob: f64,
    /// Log-mean effect coefficient; sign is curated per archetype.
    pub delta: f64,
    /// Test hook: force one onset at this day in addition to stochastic ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced_onset_day: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DemandFamily {
    NegBinomial { dispersion: f64 },
    ZeroInflated { p_zero: f64, dispersion: f64 },
    /// Two negative-binomial components sharing the base mean; the second
    /// scales it by `mean_boost`. `w_high_*` give the high component's
    /// weight at the span's start and end.
    Mixture {
        dispersion_low: f64,
        dispersion_high: f64,
        mean_boost: f64,
        w_high_start: f64,
        w_high_end: f64,
    },
    /// Gamma with fixed shape and mean `mu` (power loads, request rates).
    ContinuousPositive { shape: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    /// Additional log-mean slope per 365 days.
    pub baseline_drift: f64,
    /// Interpolate feature coefficients from `beta_start` to `beta_end`.
    pub coefficient_drift: bool,
    /// Abrupt log-mean jumps applied from the given day onward.
    pub structural_breaks: Vec<(usize, f64)>,
    /// Whether mixture weights interpolate over the span.
    pub mixture_weight_drift: bool,
}

impl DriftSpec {
    pub fn none() -> Self {
        Self {
            baseline_drift: 0.0,
            coefficient_drift: false,
            structural_breaks: Vec::new(),
            mixture_weight_drift: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedConfig {
    pub seed_id: u32,
    pub archetype: String,
    pub sku_blurb: String,
    pub family: DemandFamily,
    /// Piecewise-linear knots of the time-varying log-baseline.
    pub beta0_knots: Vec<(usize, f64)>,
    pub features: Vec<FeatureSpec>,
    pub regimes: RegimeSpec,
    pub events: Vec<EventTypeSpec>,
    pub drift: DriftSpec,
    /// Probability each feature is retained in the emitted schema.
    pub retention_prob: f64,
    pub lead_time: usize,
    pub holding_cost: f64,
    pub penalty_cost: f64,
}

// ── Generation ──────────────────────────────────────────────────────────

fn stream_rng(master_seed: u64, seed_id: u32, tag: u64) -> ChaCha8Rng {
    let mixed = master_seed
        ^ (seed_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03);
    ChaCha8Rng::seed_from_u64(mixed)
}

pub fn calendar_start() -> NaiveDate {
    let (y, m, d) = CALENDAR_START;
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar start")
}

/// Daily covariate table plus the seeded retained-feature subset.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    /// All generated features per day; demand depends on these.
    pub all: Vec<FeatureMap>,
    /// Names surfaced in the emitted schema.
    pub retained: BTreeSet<String>,
}

pub fn gen_covariates(cfg: &SeedConfig, master_seed: u64) -> CovariateTable {
    let start = calendar_start();
    let mut all: Vec<FeatureMap> = vec![FeatureMap::new(); SPAN_DAYS];

    for (fi, feature) in cfg.features.iter().enumerate() {
        let mut rng = stream_rng(master_seed, cfg.seed_id, 0x100 + fi as u64);
        match &feature.kind {
            CovariateKind::Seasonal { base, amplitude, phase_day, ar_rho, ar_sigma, shock_prob, shock_scale } => {
                let mut ar = 0.0;
                for (r, day) in all.iter_mut().enumerate() {
                    let date = start + chrono::Days::new(r as u64);
                    let doy = chrono::Datelike::ordinal(&date) as f64;
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    ar = ar_rho * ar + ar_sigma * z;
                    let shock = if rng.random_range(0.0..1.0) < *shock_prob {
                        let s: f64 = rng.sample(rand_distr::StandardNormal);
                        s * shock_scale
                    } else {
                        0.0
                    };
                    let seasonal =
                        amplitude * (2.0 * std::f64::consts::PI * (doy - phase_day) / 365.25).sin();
                    day.insert(feature.name.clone(), base + seasonal + ar + shock);
                }
            }
            CovariateKind::PromoPulse { daily_prob, duration, peak, half_life } => {
                let mut active_until = 0usize;
                let mut onset = 0usize;
                let mut intensity = 0.0;
                for r in 0..SPAN_DAYS {
                    if r >= active_until && rng.random_range(0.0..1.0) < *daily_prob {
                        onset = r;
                        let len = rng.random_range(duration.0..=duration.1);
                        active_until = r + len.max(1);
                        intensity = peak * rng.random_range(0.5..1.0);
                    }
                    let value = if r < active_until {
                        intensity * 0.5_f64.powf((r - onset) as f64 / half_life)
                    } else {
                        0.0
                    };
                    all[r].insert(feature.name.clone(), value);
                }
            }
            CovariateKind::Trend { drift, sigma, spike_prob, spike_scale } => {
                let mut level = 0.0;
                for day in all.iter_mut() {
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    level += drift + sigma * z;
                    if rng.random_range(0.0..1.0) < *spike_prob {
                        let s: f64 = rng.sample(rand_distr::StandardNormal);
                        level += s * spike_scale;
                    }
                    day.insert(feature.name.clone(), level);
                }
            }
            CovariateKind::Weekend => {
                for (r, day) in all.iter_mut().enumerate() {
                    let date = start + chrono::Days::new(r as u64);
                    let dow = chrono::Datelike::weekday(&date).num_days_from_monday();
                    day.insert(feature.name.clone(), if dow >= 5 { 1.0 } else { 0.0 });
                }
            }
            CovariateKind::WeeklyCycle { amplitude, phase } => {
                for (r, day) in all.iter_mut().enumerate() {
                    let date = start + chrono::Days::new(r as u64);
                    let dow = chrono::Datelike::weekday(&date).num_days_from_monday() as f64;
                    let value =
                        amplitude * (2.0 * std::f64::consts::PI * (dow + phase) / 7.0).sin();
                    day.insert(feature.name.clone(), value);
                }
            }
        }
    }

    // Feature-subset randomization: retain a seeded random subset of the
    // schema. Demand, dates and notes are always kept.
    let mut rng = stream_rng(master_seed, cfg.seed_id, 0x200);
    let mut retained = BTreeSet::new();
    for feature in &cfg.features {
        if rng.random_range(0.0..1.0) < cfg.retention_prob {
            retained.insert(feature.name.clone());
        }
    }
    if retained.is_empty() && !cfg.features.is_empty() {
        retained.insert(cfg.features[0].name.clone());
    }
    CovariateTable { all, retained }
}

/// Per-day generation internals, recorded for assertions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayDiagnostics {
    pub mu: f64,
    pub log_mu_raw: f64,
    pub clamped: bool,
    pub regime: usize,
    /// Latent event impact per event type.
    pub event_impact: Vec<f64>,
    pub onsets: usize,
    pub observed_onsets: usize,
    pub note_emitted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandSeries {
    pub demand: Vec<f64>,
    pub notes: Vec<Option<String>>,
    pub diagnostics: Vec<DayDiagnostics>,
    /// Whether any day hit the log-mean clamp.
    pub clamp_warning: bool,
}

fn interp_knots(knots: &[(usize, f64)], r: usize) -> f64 {
    debug_assert!(!knots.is_empty());
    let rf = r as f64;
    if rf <= knots[0].0 as f64 {
        return knots[0].1;
    }
    for pair in knots.windows(2) {
        let (d0, v0) = pair[0];
        let (d1, v1) = pair[1];
        if r <= d1 {
            let t = (rf - d0 as f64) / ((d1 - d0).max(1) as f64);
            return v0 + t * (v1 - v0);
        }
    }
    knots.last().expect("non-empty knots").1
}

fn sample_neg_binomial(rng: &mut ChaCha8Rng, mu: f64, dispersion: f64) -> f64 {
    // NB(mu, kappa) as a gamma-poisson mixture: variance mu + mu^2/kappa.
    let shape = dispersion.max(1e-6);
    let gamma = rand_distr::Gamma::new(shape, mu / shape).expect("gamma params");
    let lambda: f64 = gamma.sample(rng);
    if lambda <= 0.0 {
        return 0.0;
    }
    let poisson = rand_distr::Poisson::new(lambda.max(1e-12)).expect("poisson rate");
    poisson.sample(rng)
}

pub fn gen_demand(cfg: &SeedConfig, covariates: &CovariateTable, master_seed: u64) -> Result<DemandSeries> {
    if covariates.all.len() != SPAN_DAYS {
        return Err(Error::InvalidInput(format!(
            "covariate table covers {} days, expected {SPAN_DAYS}",
            covariates.all.len()
        )));
    }

    // Latent regime chain.
    let mut rng_regime = stream_rng(master_seed, cfg.seed_id, 0x300);
    let n_states = cfg.regimes.n_states.max(1);
    let mut regime = 0usize;
    let mut regimes = Vec::with_capacity(SPAN_DAYS);
    for _ in 0..SPAN_DAYS {
        regimes.push(regime);
        if n_states > 1 && rng_regime.random_range(0.0..1.0) >= cfg.regimes.stay_prob {
            let jump = rng_regime.random_range(1..n_states);
            regime = (regime + jump) % n_states;
        }
    }

    // Event processes: one independent stream per type, non-overlapping
    // within a type.
    struct ActiveEvent {
        onset: usize,
        duration: usize,
        intensity: f64,
    }
    let mut impacts = vec![vec![0.0; SPAN_DAYS]; cfg.events.len()];
    let mut onsets = vec![0usize; SPAN_DAYS];
    let mut observed_onsets = vec![0usize; SPAN_DAYS];
    let mut notes: Vec<Option<String>> = vec![None; SPAN_DAYS];
    for (ei, event) in cfg.events.iter().enumerate() {
        let mut rng = stream_rng(master_seed, cfg.seed_id, 0x400 + ei as u64);
        let mut active: Option<ActiveEvent> = None;
        for r in 0..SPAN_DAYS {
            let expired = active.as_ref().is_some_and(|a| r >= a.onset + a.duration);
            if expired {
                active = None;
            }
            let forced = event.forced_onset_day == Some(r);
            if active.is_none() && (forced || rng.random_range(0.0..1.0) < event.daily_onset_prob) {
                let duration = rng.random_range(event.duration_range.0..=event.duration_range.1).max(1);
                let intensity = rng.random_range(event.intensity_range.0..=event.intensity_range.1);
                active = Some(ActiveEvent { onset: r, duration, intensity });
                onsets[r] += 1;
                if forced || rng.random_range(0.0..1.0) < event.observe_prob {
                    observed_onsets[r] += 1;
                    // One note per day; later event types append.
                    notes[r] = Some(match notes[r].take() {
                        Some(existing) => format!("{existing}; {}", event.note_text),
                        None => event.note_text.clone(),
                    });
                }
            }
            if let Some(a) = &active {
                impacts[ei][r] = a.intensity * 0.5_f64.powf((r - a.onset) as f64 / event.half_life);
            }
        }
    }

    let mut rng_demand = stream_rng(master_seed, cfg.seed_id, 0x500);
    let mut demand = Vec::with_capacity(SPAN_DAYS);
    let mut diagnostics = Vec::with_capacity(SPAN_DAYS);
    let mut clamp_warning = false;

    for r in 0..SPAN_DAYS {
        let progress = r as f64 / (SPAN_DAYS - 1) as f64;
        let mut log_mu = interp_knots(&cfg.beta0_knots, r);
        log_mu += cfg.drift.baseline_drift * (r as f64 / 365.0);
        for (day, jump) in &cfg.drift.structural_breaks {
            if r >= *day {
                log_mu += jump;
            }
        }
        for feature in &cfg.features {
            let beta = if cfg.drift.coefficient_drift {
                feature.beta_start + progress * (feature.beta_end - feature.beta_start)
            } else {
                feature.beta_start
            };
            log_mu += beta * covariates.all[r][&feature.name];
        }
        let state = regimes[r];
        log_mu += cfg.regimes.gamma.get(state).copied().unwrap_or(0.0);
        for (ei, event) in cfg.events.iter().enumerate() {
            log_mu += event.delta * impacts[ei][r];
        }

        let log_mu_raw = log_mu;
        let clamped = !(LOG_MEAN_RANGE.0..=LOG_MEAN_RANGE.1).contains(&log_mu);
        if clamped {
            clamp_warning = true;
            log_mu = log_mu.clamp(LOG_MEAN_RANGE.0, LOG_MEAN_RANGE.1);
        }
        let mu = log_mu.exp();

        let y = match &cfg.family {
            DemandFamily::NegBinomial { dispersion } => sample_neg_binomial(&mut rng_demand, mu, *dispersion),
            DemandFamily::ZeroInflated { p_zero, dispersion } => {
                if rng_demand.random_range(0.0..1.0) < *p_zero {
                    0.0
                } else {
                    sample_neg_binomial(&mut rng_demand, mu, *dispersion)
                }
            }
            DemandFamily::Mixture { dispersion_low, dispersion_high, mean_boost, w_high_start, w_high_end } => {
                let w_high = if cfg.drift.mixture_weight_drift {
                    w_high_start + progress * (w_high_end - w_high_start)
                } else {
                    *w_high_start
                };
                if rng_demand.random_range(0.0..1.0) < w_high {
                    sample_neg_binomial(&mut rng_demand, mu * mean_boost, *dispersion_high)
                } else {
                    sample_neg_binomial(&mut rng_demand, mu, *dispersion_low)
                }
            }
            DemandFamily::ContinuousPositive { shape } => {
                let gamma = rand_distr::Gamma::new(shape.max(1e-6), mu / shape.max(1e-6))
                    .expect("gamma params");
                let v: f64 = gamma.sample(&mut rng_demand);
                (v * 100.0).round() / 100.0
            }
        };

        demand.push(y);
        diagnostics.push(DayDiagnostics {
            mu,
            log_mu_raw,
            clamped,
            regime: state,
            event_impact: impacts.iter().map(|imp| imp[r]).collect(),
            onsets: onsets[r],
            observed_onsets: observed_onsets[r],
            note_emitted: notes[r].is_some(),
        });
    }

    Ok(DemandSeries { demand, notes, diagnostics, clamp_warning })
}

/// A fully generated seed dataset: emitted day records plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedDataset {
    pub config: SeedConfig,
    pub days: Vec<DayRecord>,
    pub diagnostics: Vec<DayDiagnostics>,
    pub retained: BTreeSet<String>,
    pub clamp_warning: bool,
}

pub fn gen_seed_dataset(cfg: &SeedConfig, master_seed: u64) -> Result<SeedDataset> {
    let covariates = gen_covariates(cfg, master_seed);
    let series = gen_demand(cfg, &covariates, master_seed)?;
    let start = calendar_start();
    let days = (0..SPAN_DAYS)
        .map(|r| {
            let features: FeatureMap = covariates.all[r]
                .iter()
                .filter(|(name, _)| covariates.retained.contains(*name))
                .map(|(name, value)| (name.clone(), (value * 1e6).round() / 1e6))
                .collect();
            DayRecord {
                date: start + chrono::Days::new(r as u64),
                demand: series.demand[r],
                features,
                note: series.notes[r].clone(),
            }
        })
        .collect();
    Ok(SeedDataset {
        config: cfg.clone(),
        days,
        diagnostics: series.diagnostics,
        retained: covariates.retained,
        clamp_warning: series.clamp_warning,
    })
}

// ── Slicing ─────────────────────────────────────────────────────────────

/// One 130-day workspace slice.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceSlice {
    pub seed_id: u32,
    pub slice_index: usize,
    pub start: usize,
    pub history: Vec<DayRecord>,
    pub evaluation: Vec<DayRecord>,
    pub archetype: String,
    pub sku_blurb: String,
    pub lead_time: usize,
    pub holding_cost: f64,
    pub penalty_cost: f64,
}

const SLICE_RETRY_CAP: usize = 10_000;

/// Samples `n_slices` start positions uniformly, any two at least
/// [`MIN_SLICE_SEPARATION`] days apart, and packages the slices.
pub fn slice(dataset: &SeedDataset, n_slices: usize, master_seed: u64) -> Result<Vec<WorkspaceSlice>> {
    if dataset.days.len() != SPAN_DAYS {
        return Err(Error::InvalidInput(format!("seed series must cover {SPAN_DAYS} days")));
    }
    if n_slices == 0 {
        return Err(Error::InvalidInput("slice count must be positive".into()));
    }
    let max_start = SPAN_DAYS - SLICE_DAYS;
    let mut rng = stream_rng(master_seed, dataset.config.seed_id, 0x600);
    let mut starts: Vec<usize> = Vec::with_capacity(n_slices);
    let mut attempts = 0usize;
    while starts.len() < n_slices {
        attempts += 1;
        if attempts > SLICE_RETRY_CAP {
            return Err(Error::InvalidInput(format!(
                "could not place {n_slices} slices with {MIN_SLICE_SEPARATION}-day separation \
                 after {SLICE_RETRY_CAP} attempts"
            )));
        }
        let candidate = rng.random_range(0..=max_start);
        if starts.iter().all(|s| s.abs_diff(candidate) >= MIN_SLICE_SEPARATION) {
            starts.push(candidate);
        }
    }

    let cfg = &dataset.config;
    Ok(starts
        .into_iter()
        .enumerate()
        .map(|(slice_index, start)| WorkspaceSlice {
            seed_id: cfg.seed_id,
            slice_index,
            start,
            history: dataset.days[start..start + HISTORY_DAYS].to_vec(),
            evaluation: dataset.days[start + HISTORY_DAYS..start + SLICE_DAYS].to_vec(),
            archetype: cfg.archetype.clone(),
            sku_blurb: cfg.sku_blurb.clone(),
            lead_time: cfg.lead_time,
            holding_cost: cfg.holding_cost,
            penalty_cost: cfg.penalty_cost,
        })
        .collect())
}

// ── Emission ────────────────────────────────────────────────────────────

fn problem_description(slice: &WorkspaceSlice) -> String {
    format!(
        "# Inventory problem: {}\n\n{}\n\n\
         ## Cost structure\n\n\
         - unit holding cost h = {}\n\
         - unit lost-sales penalty p = {}\n\
         - replenishment lead time L = {} days\n\n\
         ## Data\n\n\
         `data/historical_sequence.json` holds the {}-day historical window \
         (daily demand, exogenous features, occasional textual notes). The \
         {}-day evaluation window in `data/evaluation_sequence.json` is \
         reserved for final scoring and must not inform policy search. \
         Tuned classical policies live in `baseline_policies/`.\n",
        slice.archetype,
        slice.sku_blurb,
        slice.holding_cost,
        slice.penalty_cost,
        slice.lead_time,
        HISTORY_DAYS,
        EVALUATION_DAYS,
    )
}

/// Writes one slice as a workspace directory.
pub fn emit_workspace(
    slice: &WorkspaceSlice,
    root: &Path,
    baselines: &[(String, PolicySpec)],
) -> Result<()> {
    let config = WorkspaceConfig {
        schema_version: WORKSPACE_SCHEMA_VERSION,
        seed_id: slice.seed_id,
        archetype: slice.archetype.clone(),
        slice_start: slice.start,
        lead_time: slice.lead_time,
        holding_cost: slice.holding_cost,
        penalty_cost: slice.penalty_cost,
        history_days: slice.history.len(),
        evaluation_days: slice.evaluation.len(),
    };
    write_workspace(
        root,
        &config,
        &problem_description(slice),
        &slice.history,
        &slice.evaluation,
        baselines,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config(seed_id: u32) -> SeedConfig {
        SeedConfig {
            seed_id,
            archetype: "test".into(),
            sku_blurb: "test sku".into(),
            family: DemandFamily::NegBinomial { dispersion: 5.0 },
            beta0_knots: vec![(0, 0.0), (SPAN_DAYS - 1, 0.0)],
            features: vec![],
            regimes: RegimeSpec { n_states: 1, stay_prob: 1.0, gamma: vec![0.0] },
            events: vec![],
            drift: DriftSpec::none(),
            retention_prob: 1.0,
            lead_time: 5,
            holding_cost: 1.0,
            penalty_cost: 10.0,
        }
    }

    fn seasonal_feature(amplitude: f64, ar_sigma: f64, shock_prob: f64) -> FeatureSpec {
        FeatureSpec {
            name: "temp_c".into(),
            kind: CovariateKind::Seasonal {
                base: 14.0,
                amplitude,
                phase_day: 0.0,
                ar_rho: 0.7,
                ar_sigma,
                shock_prob,
                shock_scale: 5.0,
            },
            beta_start: 0.01,
            beta_end: 0.01,
        }
    }

    #[test]
    fn degenerate_seasonal_generator_is_constant() {
        let mut cfg = minimal_config(1);
        cfg.features = vec![seasonal_feature(0.0, 0.0, 0.0)];
        let table = gen_covariates(&cfg, 7);
        assert!(table.all.iter().all(|d| d["temp_c"] == 14.0));
    }

    #[test]
    fn zero_phase_sinusoid_peaks_near_day_91() {
        let mut cfg = minimal_config(2);
        cfg.features = vec![seasonal_feature(10.0, 0.0, 0.0)];
        let table = gen_covariates(&cfg, 7);
        let (argmax, _) = table.all[..365]
            .iter()
            .enumerate()
            .map(|(r, d)| (r, d["temp_c"]))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        // Day-of-year 365.25/4 ~ 91.3; r is zero-based so ordinal = r + 1.
        assert!((89..=93).contains(&(argmax + 1)), "peak ordinal {}", argmax + 1);
    }

    #[test]
    fn full_retention_keeps_the_whole_schema() {
        let mut cfg = minimal_config(3);
        cfg.features = vec![
            seasonal_feature(5.0, 1.0, 0.01),
            FeatureSpec {
                name: "weekend".into(),
                kind: CovariateKind::Weekend,
                beta_start: 0.2,
                beta_end: 0.2,
            },
        ];
        cfg.retention_prob = 1.0;
        let table = gen_covariates(&cfg, 7);
        assert_eq!(table.retained.len(), 2);

        cfg.retention_prob = 0.0;
        let table = gen_covariates(&cfg, 7);
        // At least one feature always survives.
        assert_eq!(table.retained.len(), 1);
    }

    #[test]
    fn unit_mean_demand_obeys_the_law_of_large_numbers() {
        // All coefficients zero, NB with mu = exp(0) = 1.
        let cfg = minimal_config(4);
        let table = gen_covariates(&cfg, 11);
        let series = gen_demand(&cfg, &table, 11).unwrap();
        let mean = series.demand.iter().sum::<f64>() / SPAN_DAYS as f64;
        // var = mu + mu^2 / kappa = 1.2; 3 sigma of the sample mean.
        let tol = 3.0 * (1.2_f64 / SPAN_DAYS as f64).sqrt();
        assert!((mean - 1.0).abs() <= tol, "mean {mean}, tol {tol}");
        assert!(!series.clamp_warning);
    }

    #[test]
    fn certain_zero_inflation_gives_an_all_zero_series() {
        let mut cfg = minimal_config(5);
        cfg.family = DemandFamily::ZeroInflated { p_zero: 1.0, dispersion: 4.0 };
        let table = gen_covariates(&cfg, 3);
        let series = gen_demand(&cfg, &table, 3).unwrap();
        assert!(series.demand.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn event_impact_matches_the_log_linear_formula() {
        let mut cfg = minimal_config(6);
        cfg.beta0_knots = vec![(0, 2.0), (SPAN_DAYS - 1, 2.0)];
        cfg.events = vec![EventTypeSpec {
            name: "typhoon".into(),
            note_text: "typhoon made landfall".into(),
            daily_onset_prob: 0.0,
            duration_range: (5, 5),
            intensity_range: (0.8, 0.8),
            half_life: 3.0,
            observe_prob: 1.0,
            delta: 0.5,
            forced_onset_day: Some(100),
        }];
        let table = gen_covariates(&cfg, 9);
        let series = gen_demand(&cfg, &table, 9).unwrap();

        let at_onset = &series.diagnostics[100];
        assert_eq!(at_onset.event_impact[0], 0.8);
        assert!(at_onset.note_emitted);
        // mu ratio versus the no-event counterfactual: exp(delta * kappa).
        let counterfactual = 2.0_f64.exp();
        let ratio = at_onset.mu / counterfactual;
        assert!((ratio - (0.5_f64 * 0.8).exp()).abs() < 1e-9, "ratio {ratio}");

        // Persistence without notes: days 101..104 carry impact, no note.
        for r in 101..105 {
            let d = &series.diagnostics[r];
            assert!(d.event_impact[0] > 0.0);
            assert!(!d.note_emitted);
            assert!(series.notes[r].is_none());
        }
        assert_eq!(series.diagnostics[105].event_impact[0], 0.0);
    }

    #[test]
    fn notes_appear_exactly_at_observed_onsets() {
        let mut cfg = minimal_config(7);
        cfg.events = vec![
            EventTypeSpec {
                name: "strike".into(),
                note_text: "supplier strike started".into(),
                daily_onset_prob: 0.01,
                duration_range: (2, 6),
                intensity_range: (0.3, 0.9),
                half_life: 4.0,
                observe_prob: 0.6,
                delta: -0.4,
                forced_onset_day: None,
            },
            EventTypeSpec {
                name: "spike".into(),
                note_text: "demand spike reported".into(),
                daily_onset_prob: 0.008,
                duration_range: (1, 4),
                intensity_range: (0.2, 0.7),
                half_life: 2.0,
                observe_prob: 0.5,
                delta: 0.6,
                forced_onset_day: None,
            },
        ];
        let table = gen_covariates(&cfg, 13);
        let series = gen_demand(&cfg, &table, 13).unwrap();
        let notes = series.notes.iter().filter(|n| n.is_some()).count();
        let observed_days = series.diagnostics.iter().filter(|d| d.observed_onsets > 0).count();
        let observed_total: usize = series.diagnostics.iter().map(|d| d.observed_onsets).sum();
        assert_eq!(notes, observed_days);
        assert!(observed_total >= observed_days);
        assert!(notes > 0, "the stochastic config should produce some notes");
        // Impacts persist on plenty of un-annotated days.
        let impact_days = series
            .diagnostics
            .iter()
            .filter(|d| d.event_impact.iter().any(|x| *x > 0.0) && !d.note_emitted)
            .count();
        assert!(impact_days > notes);
    }

    #[test]
    fn drift_knobs_are_independently_effective() {
        // All drift off: first/second half means agree within 3 sigma.
        let cfg = minimal_config(8);
        let table = gen_covariates(&cfg, 21);
        let series = gen_demand(&cfg, &table, 21).unwrap();
        let half = SPAN_DAYS / 2;
        let (a, b) = series.demand.split_at(half);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(a), mean(b));
        let z = (ma - mb).abs() / (var(a, ma) / a.len() as f64 + var(b, mb) / b.len() as f64).sqrt();
        assert!(z < 3.0, "stationary halves differ by {z} sigma");

        // A structural break at day 366 produces a detectable shift.
        let mut cfg = minimal_config(8);
        cfg.beta0_knots = vec![(0, 2.0), (SPAN_DAYS - 1, 2.0)];
        cfg.drift.structural_breaks = vec![(366, 0.6)];
        let table = gen_covariates(&cfg, 21);
        let series = gen_demand(&cfg, &table, 21).unwrap();
        let (a, b) = series.demand.split_at(366);
        let (ma, mb) = (mean(a), mean(b));
        let z = (mb - ma) / (var(a, ma) / a.len() as f64 + var(b, mb) / b.len() as f64).sqrt();
        assert!(z > 5.0, "break shift only {z} sigma");
    }

    #[test]
    fn slicing_respects_separation_and_counts() {
        let dataset = gen_seed_dataset(&minimal_config(9), 5).unwrap();
        let slices = slice(&dataset, 10, 5).unwrap();
        assert_eq!(slices.len(), 10);
        for s in &slices {
            assert_eq!(s.history.len(), HISTORY_DAYS);
            assert_eq!(s.evaluation.len(), EVALUATION_DAYS);
            assert!(s.start + SLICE_DAYS <= SPAN_DAYS);
        }
        for i in 0..slices.len() {
            for j in i + 1..slices.len() {
                assert!(slices[i].start.abs_diff(slices[j].start) >= MIN_SLICE_SEPARATION);
            }
        }
        let single = slice(&dataset, 1, 17).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = archetypes::seed_configs()[0].clone();
        let a = gen_seed_dataset(&cfg, 99).unwrap();
        let b = gen_seed_dataset(&cfg, 99).unwrap();
        assert_eq!(a.days, b.days);
        let c = gen_seed_dataset(&cfg, 100).unwrap();
        assert_ne!(a.days, c.days);
    }

    #[test]
    fn emitted_workspace_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = gen_seed_dataset(&minimal_config(10), 31).unwrap();
        let slices = slice(&dataset, 2, 31).unwrap();
        emit_workspace(&slices[0], dir.path(), &[]).unwrap();
        let ws = crate::workspace::Workspace::load_full(dir.path()).unwrap();
        assert_eq!(ws.history, slices[0].history);
        assert_eq!(ws.evaluation.as_deref(), Some(&slices[0].evaluation[..]));
        assert_eq!(ws.config.slice_start, slices[0].start);
    }
}
