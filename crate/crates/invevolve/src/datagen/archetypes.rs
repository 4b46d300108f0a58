//! The shipped seed-dataset catalog: 47 configurations across 15 domains.
//!
//! Each domain template fixes the demand family, the covariate schema with
//! curated coefficient signs and ranges, and the disruptive-event types
//! with their effect directions. Per-seed magnitudes are drawn inside the
//! curated ranges from an RNG keyed only by the seed id, so the catalog is
//! a fixed artifact independent of any run-time seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    CovariateKind, DemandFamily, DriftSpec, EventTypeSpec, FeatureSpec, RegimeSpec, SeedConfig,
    SPAN_DAYS,
};

/// Curated feature entry: generator shape plus a signed coefficient range.
struct FeatureTemplate {
    name: &'static str,
    kind: fn(&mut ChaCha8Rng) -> CovariateKind,
    beta_range: (f64, f64),
}

struct EventTemplate {
    name: &'static str,
    note: &'static str,
    onset_prob: (f64, f64),
    duration: (usize, usize),
    delta_range: (f64, f64),
}

enum FamilyKind {
    NegBinomial,
    ZeroInflated,
    Mixture,
    ContinuousPositive,
}

struct DomainTemplate {
    archetype: &'static str,
    seeds: usize,
    blurb: &'static str,
    family: FamilyKind,
    /// Log baseline demand range (e.g. 3.0 means mean demand ~ e^3 = 20).
    base_log_mean: (f64, f64),
    features: &'static [FeatureTemplate],
    events: &'static [EventTemplate],
}

fn seasonal_weather(rng: &mut ChaCha8Rng) -> CovariateKind {
    CovariateKind::Seasonal {
        base: rng.random_range(8.0..16.0),
        amplitude: rng.random_range(6.0..12.0),
        phase_day: rng.random_range(-20.0..20.0),
        ar_rho: rng.random_range(0.5..0.9),
        ar_sigma: rng.random_range(0.5..1.5),
        shock_prob: rng.random_range(0.005..0.02),
        shock_scale: rng.random_range(3.0..6.0),
    }
}

fn promo(rng: &mut ChaCha8Rng) -> CovariateKind {
    CovariateKind::PromoPulse {
        daily_prob: rng.random_range(0.02..0.06),
        duration: (3, 10),
        peak: 1.0,
        half_life: rng.random_range(2.0..5.0),
    }
}

fn macro_index(rng: &mut ChaCha8Rng) -> CovariateKind {
    CovariateKind::Trend {
        drift: rng.random_range(-0.002..0.002),
        sigma: rng.random_range(0.01..0.04),
        spike_prob: rng.random_range(0.002..0.01),
        spike_scale: rng.random_range(0.1..0.3),
    }
}

fn utilization(rng: &mut ChaCha8Rng) -> CovariateKind {
    // Utilization-like proxy: slow trend, mild noise, no spikes.
    CovariateKind::Trend {
        drift: rng.random_range(-0.001..0.001),
        sigma: rng.random_range(0.005..0.02),
        spike_prob: 0.0,
        spike_scale: 0.0,
    }
}

fn weekend(_rng: &mut ChaCha8Rng) -> CovariateKind {
    CovariateKind::Weekend
}

fn weekly(rng: &mut ChaCha8Rng) -> CovariateKind {
    CovariateKind::WeeklyCycle {
        amplitude: rng.random_range(0.5..1.0),
        phase: rng.random_range(0.0..7.0),
    }
}

const DOMAINS: &[DomainTemplate] = &[
    DomainTemplate {
        archetype: "consumer_grocery",
        seeds: 5,
        blurb: "High-turnover packaged grocery SKU sold through a regional chain; \
                demand responds to weather, promotions and weekend traffic.",
        family: FamilyKind::NegBinomial,
        base_log_mean: (2.8, 4.4),
        features: &[
            FeatureTemplate { name: "temp_c", kind: seasonal_weather, beta_range: (0.004, 0.015) },
            FeatureTemplate { name: "promo_intensity", kind: promo, beta_range: (0.15, 0.45) },
            FeatureTemplate { name: "is_weekend", kind: weekend, beta_range: (0.08, 0.25) },
            FeatureTemplate { name: "dow_cycle", kind: weekly, beta_range: (0.03, 0.12) },
        ],
        events: &[
            EventTemplate { name: "food_safety_rumor", note: "food safety rumor circulating about this category", onset_prob: (0.002, 0.006), duration: (4, 12), delta_range: (-0.9, -0.4) },
            EventTemplate { name: "festival_rush", note: "festival rush began in the region", onset_prob: (0.003, 0.007), duration: (3, 8), delta_range: (0.3, 0.8) },
        ],
    },
    DomainTemplate {
        archetype: "consumer_apparel",
        seeds: 3,
        blurb: "Seasonal apparel item in an online store; sensitive to temperature \
                swings, promotions and macro sentiment.",
        family: FamilyKind::NegBinomial,
        base_log_mean: (2.2, 3.6),
        features: &[
            FeatureTemplate { name: "temp_c", kind: seasonal_weather, beta_range: (-0.02, -0.006) },
            FeatureTemplate { name: "promo_intensity", kind: promo, beta_range: (0.2, 0.5) },
            FeatureTemplate { name: "consumer_index", kind: macro_index, beta_range: (0.2, 0.6) },
        ],
        events: &[
            EventTemplate { name: "viral_trend", note: "item trending on social media", onset_prob: (0.002, 0.005), duration: (3, 10), delta_range: (0.4, 1.0) },
        ],
    },
    DomainTemplate {
        archetype: "restaurant_ingredient",
        seeds: 4,
        blurb: "Perishable ingredient for a restaurant group; weekend dining peaks \
                and weather drive consumption.",
        family: FamilyKind::NegBinomial,
        base_log_mean: (2.5, 4.0),
        features: &[
            FeatureTemplate { name: "temp_c", kind: seasonal_weather, beta_range: (0.003, 0.012) },
            FeatureTemplate { name: "is_weekend", kind: weekend, beta_range: (0.15, 0.4) },
            FeatureTemplate { name: "promo_intensity", kind: promo, beta_range: (0.1, 0.3) },
        ],
        events: &[
            EventTemplate { name: "food_safety_rumor", note: "hygiene complaint reported nearby", onset_prob: (0.002, 0.005), duration: (5, 14), delta_range: (-0.8, -0.3) },
            EventTemplate { name: "typhoon", note: "typhoon warning issued for the coast", onset_prob: (0.001, 0.004), duration: (2, 6), delta_range: (-1.0, -0.4) },
        ],
    },
    DomainTemplate {
        archetype: "medical_supply",
        seeds: 4,
        blurb: "Disposable clinical supply for a hospital network; admissions and \
                seasonal illness indices set the pace.",
        family: FamilyKind::NegBinomial,
        base_log_mean: (3.0, 4.6),
        features: &[
            FeatureTemplate { name: "admissions_idx", kind: utilization, beta_range: (1.0, 3.0) },
            FeatureTemplate { name: "flu_index", kind: seasonal_weather, beta_range: (0.005, 0.02) },
            FeatureTemplate { name: "dow_cycle", kind: weekly, beta_range: (-0.15, -0.05) },
        ],
        events: &[
            EventTemplate { name: "pandemic_wave", note: "respiratory admissions surging", onset_prob: (0.001, 0.004), duration: (10, 25), delta_range: (0.4, 1.1) },
            EventTemplate { name: "recall", note: "lot recall notice received", onset_prob: (0.001, 0.003), duration: (5, 12), delta_range: (-0.9, -0.4) },
        ],
    },
    DomainTemplate {
        archetype: "pharma_otc",
        seeds: 3,
        blurb: "Over-the-counter cold remedy at a pharmacy chain; winter-skewed \
                with illness-driven spikes.",
        family: FamilyKind::NegBinomial,
        base_log_mean: (2.0, 3.4),
        features: &[
            FeatureTemplate { name: "flu_index", kind: seasonal_weather, beta_range: (0.008, 0.025) },
            FeatureTemplate { name: "temp_c", kind: seasonal_weather, beta_range: (-0.015, -0.004) },
        ],
        events: &[
            EventTemplate { name: "pandemic_wave", note: "flu wave declared by health authority", onset_prob: (0.002, 0.005), duration: (8, 20), delta_range: (0.5, 1.2) },
        ],
    },
    DomainTemplate {
        archetype: "industrial_spares",
        seeds: 4,
        blurb: "Slow-moving spare part for production-line equipment; intermittent \
                demand tied to utilization and maintenance cycles.",
        family: FamilyKind::ZeroInflated,
        base_log_mean: (0.2, 1.2),
        features: &[
            FeatureTemplate { name: "util_rate", kind: utilization, beta_range: (1.5, 4.0) },
            FeatureTemplate { name: "maintenance_idx", kind: promo, beta_range: (0.3, 0.8) },
        ],
        events: &[
            EventTemplate { name: "line_outage", note: "production line outage reported", onset_prob: (0.002, 0.005), duration: (2, 7), delta_range: (0.6, 1.4) },
            EventTemplate { name: "strike", note: "plant labor strike began", onset_prob: (0.001, 0.003), duration: (5, 15), delta_range: (-1.2, -0.5) },
        ],
    },
    DomainTemplate {
        archetype: "construction_material",
        seeds: 3,
        blurb: "Bagged construction material at a builders' depot; weather windows \
                and macro construction activity dominate.",
        family: FamilyKind::NegBinomial,
        base_log_mean: (2.6, 4.2),
        features: &[
            FeatureTemplate { name: "temp_c", kind: seasonal_weather, beta_range: (0.006, 0.02) },
            FeatureTemplate { name: "construction_idx", kind: macro_index, beta_range: (0.3, 0.8) },
            FeatureTemplate { name: "precip_mm", kind: seasonal_weather, beta_range: (-0.012, -0.003) },
        ],
        events: &[
            EventTemplate { name: "strike", note: "haulage strike disrupting deliveries", onset_prob: (0.001, 0.004), duration: (4, 10), delta_range: (-1.0, -0.4) },
            EventTemplate { name: "typhoon", note: "storm damage repairs starting", onset_prob: (0.001, 0.004), duration: (4, 12), delta_range: (0.4, 1.0) },
        ],
    },
    DomainTemplate {
        archetype: "ev_battery",
        seeds: 3,
        blurb: "EV battery module in an OEM supply chain; subsidy policy and \
                macro demand steer orders.",
        family: FamilyKind::NegBinomial,
        base_log_mean: (1.8, 3.2),
        features: &[
            FeatureTemplate { name: "subsidy_idx", kind: macro_index, beta_range: (0.4, 1.0) },
            FeatureTemplate { name: "auto_demand_idx", kind: macro_index, beta_range: (0.3, 0.8) },
        ],
        events: &[
            EventTemplate { name: "supplier_disruption", note: "cell supplier flagged force majeure", onset_prob: (0.001, 0.004), duration: (5, 15), delta_range: (-1.1, -0.5) },
        ],
    },
    DomainTemplate {
        archetype: "electronics_component",
        seeds: 3,
        blurb: "Commodity electronics component at a distributor; launch cycles \
                flip demand between calm and bursty regimes.",
        family: FamilyKind::Mixture,
        base_log_mean: (2.4, 3.8),
        features: &[
            FeatureTemplate { name: "launch_promo", kind: promo, beta_range: (0.2, 0.6) },
            FeatureTemplate { name: "sector_idx", kind: macro_index, beta_range: (0.2, 0.7) },
        ],
        events: &[
            EventTemplate { name: "supplier_disruption", note: "fab allocation tightened", onset_prob: (0.001, 0.004), duration: (6, 18), delta_range: (-0.9, -0.4) },
            EventTemplate { name: "design_win", note: "large design win announced", onset_prob: (0.001, 0.004), duration: (5, 12), delta_range: (0.4, 0.9) },
        ],
    },
    DomainTemplate {
        archetype: "cloud_compute",
        seeds: 3,
        blurb: "Burstable compute capacity pool; business-day traffic with launch \
                spikes, measured as a continuous daily demand index.",
        family: FamilyKind::ContinuousPositive,
        base_log_mean: (4.5, 6.0),
        features: &[
            FeatureTemplate { name: "traffic_idx", kind: macro_index, beta_range: (0.3, 0.8) },
            FeatureTemplate { name: "is_weekend", kind: weekend, beta_range: (-0.3, -0.1) },
        ],
        events: &[
            EventTemplate { name: "product_launch", note: "tenant launch event scheduled", onset_prob: (0.002, 0.006), duration: (2, 6), delta_range: (0.3, 0.8) },
            EventTemplate { name: "regional_outage", note: "upstream region degraded", onset_prob: (0.001, 0.003), duration: (1, 3), delta_range: (-0.8, -0.3) },
        ],
    },
    DomainTemplate {
        archetype: "power_grid",
        seeds: 3,
        blurb: "Regional power load served by a utility; strong seasonality and \
                heat events, continuous-valued daily energy demand.",
        family: FamilyKind::ContinuousPositive,
        base_log_mean: (5.5, 6.8),
        features: &[
            FeatureTemplate { name: "temp_c", kind: seasonal_weather, beta_range: (0.006, 0.018) },
            FeatureTemplate { name: "is_weekend", kind: weekend, beta_range: (-0.15, -0.05) },
        ],
        events: &[
            EventTemplate { name: "heatwave", note: "heatwave alert issued", onset_prob: (0.002, 0.005), duration: (3, 9), delta_range: (0.2, 0.6) },
            EventTemplate { name: "grid_maintenance", note: "planned transmission maintenance", onset_prob: (0.001, 0.003), duration: (2, 5), delta_range: (-0.4, -0.15) },
        ],
    },
    DomainTemplate {
        archetype: "cosmetics",
        seeds: 3,
        blurb: "Color cosmetics SKU with influencer-driven demand; promotion and \
                trend indices dominate.",
        family: FamilyKind::NegBinomial,
        base_log_mean: (2.0, 3.4),
        features: &[
            FeatureTemplate { name: "promo_intensity", kind: promo, beta_range: (0.25, 0.6) },
            FeatureTemplate { name: "social_trend", kind: macro_index, beta_range: (0.3, 0.9) },
        ],
        events: &[
            EventTemplate { name: "viral_trend", note: "shade going viral on short video", onset_prob: (0.002, 0.006), duration: (3, 9), delta_range: (0.5, 1.2) },
            EventTemplate { name: "recall", note: "batch recall initiated", onset_prob: (0.001, 0.002), duration: (6, 14), delta_range: (-1.1, -0.5) },
        ],
    },
    DomainTemplate {
        archetype: "leafy_greens",
        seeds: 2,
        blurb: "Bagged leafy greens with short shelf life; weather-sensitive with \
                contamination scares.",
        family: FamilyKind::NegBinomial,
        base_log_mean: (2.6, 3.8),
        features: &[
            FeatureTemplate { name: "temp_c", kind: seasonal_weather, beta_range: (0.004, 0.014) },
            FeatureTemplate { name: "is_weekend", kind: weekend, beta_range: (0.1, 0.3) },
        ],
        events: &[
            EventTemplate { name: "contamination_scare", note: "e. coli advisory for leafy greens", onset_prob: (0.001, 0.003), duration: (6, 16), delta_range: (-1.3, -0.6) },
        ],
    },
    DomainTemplate {
        archetype: "tshirt_print",
        seeds: 2,
        blurb: "Print-on-demand t-shirt design; sporadic orders with viral bursts.",
        family: FamilyKind::ZeroInflated,
        base_log_mean: (0.8, 2.0),
        features: &[
            FeatureTemplate { name: "promo_intensity", kind: promo, beta_range: (0.2, 0.6) },
            FeatureTemplate { name: "social_trend", kind: macro_index, beta_range: (0.3, 0.9) },
        ],
        events: &[
            EventTemplate { name: "viral_trend", note: "design reposted by large account", onset_prob: (0.002, 0.005), duration: (2, 7), delta_range: (0.6, 1.4) },
        ],
    },
    DomainTemplate {
        archetype: "logistics_packaging",
        seeds: 2,
        blurb: "Corrugated packaging consumed by a fulfilment center; tracks \
                shipping volumes and promotions upstream.",
        family: FamilyKind::NegBinomial,
        base_log_mean: (3.2, 4.6),
        features: &[
            FeatureTemplate { name: "shipping_idx", kind: macro_index, beta_range: (0.3, 0.8) },
            FeatureTemplate { name: "promo_intensity", kind: promo, beta_range: (0.1, 0.35) },
        ],
        events: &[
            EventTemplate { name: "strike", note: "carrier strike slowing outbound", onset_prob: (0.001, 0.004), duration: (4, 10), delta_range: (-0.9, -0.4) },
        ],
    },
];

/// Number of domain tags in the catalog.
pub fn domain_count() -> usize {
    DOMAINS.len()
}

/// Builds the full fixed catalog of 47 seed configurations.
pub fn seed_configs() -> Vec<SeedConfig> {
    let mut configs = Vec::new();
    let mut seed_id: u32 = 0;
    for domain in DOMAINS {
        for _ in 0..domain.seeds {
            configs.push(build_config(domain, seed_id));
            seed_id += 1;
        }
    }
    configs
}

fn build_config(domain: &DomainTemplate, seed_id: u32) -> SeedConfig {
    // Catalog parameters depend only on the seed id, never on run seeds.
    let mut rng = ChaCha8Rng::seed_from_u64(0xA5EE_D000 ^ seed_id as u64);

    let base = rng.random_range(domain.base_log_mean.0..domain.base_log_mean.1);
    // Four interior knots per year plus endpoints, wiggling around the base.
    let knot_days = [0usize, 91, 182, 274, 366, 457, 548, 640, SPAN_DAYS - 1];
    let beta0_knots = knot_days
        .iter()
        .map(|&d| (d, base + rng.random_range(-0.25..0.25)))
        .collect();

    let features = domain
        .features
        .iter()
        .map(|ft| {
            let beta_start = rng.random_range(ft.beta_range.0..ft.beta_range.1);
            let beta_end = beta_start * rng.random_range(0.6..1.4);
            FeatureSpec { name: ft.name.into(), kind: (ft.kind)(&mut rng), beta_start, beta_end }
        })
        .collect();

    let events = domain
        .events
        .iter()
        .map(|et| EventTypeSpec {
            name: et.name.into(),
            note_text: et.note.into(),
            daily_onset_prob: rng.random_range(et.onset_prob.0..et.onset_prob.1),
            duration_range: et.duration,
            intensity_range: (rng.random_range(0.3..0.6), rng.random_range(0.6..1.0)),
            half_life: rng.random_range(2.0..10.0),
            observe_prob: rng.random_range(0.5..0.9),
            delta: rng.random_range(et.delta_range.0..et.delta_range.1),
            forced_onset_day: None,
        })
        .collect();

    let family = match domain.family {
        FamilyKind::NegBinomial => DemandFamily::NegBinomial { dispersion: rng.random_range(2.0..12.0) },
        FamilyKind::ZeroInflated => DemandFamily::ZeroInflated {
            p_zero: rng.random_range(0.25..0.6),
            dispersion: rng.random_range(1.5..6.0),
        },
        FamilyKind::Mixture => DemandFamily::Mixture {
            dispersion_low: rng.random_range(4.0..12.0),
            dispersion_high: rng.random_range(1.0..3.0),
            mean_boost: rng.random_range(1.8..3.5),
            w_high_start: rng.random_range(0.1..0.3),
            w_high_end: rng.random_range(0.2..0.5),
        },
        FamilyKind::ContinuousPositive => {
            DemandFamily::ContinuousPositive { shape: rng.random_range(8.0..30.0) }
        }
    };

    let drift = DriftSpec {
        baseline_drift: rng.random_range(-0.25..0.25),
        coefficient_drift: rng.random_range(0.0..1.0) < 0.6,
        structural_breaks: if rng.random_range(0.0..1.0) < 0.4 {
            vec![(rng.random_range(120..620), rng.random_range(0.2..0.5) * if rng.random_range(0.0..1.0) < 0.5 { -1.0 } else { 1.0 })]
        } else {
            vec![]
        },
        mixture_weight_drift: matches!(domain.family, FamilyKind::Mixture)
            && rng.random_range(0.0..1.0) < 0.7,
    };

    let holding_cost = rng.random_range(0.5..2.0);
    SeedConfig {
        seed_id,
        archetype: domain.archetype.into(),
        sku_blurb: domain.blurb.into(),
        family,
        beta0_knots,
        features,
        regimes: RegimeSpec {
            n_states: 2,
            stay_prob: rng.random_range(0.9..0.98),
            gamma: vec![0.0, rng.random_range(-0.3..0.3)],
        },
        events,
        drift,
        retention_prob: rng.random_range(0.7..1.0),
        lead_time: 5,
        holding_cost,
        penalty_cost: 10.0 * holding_cost,
    }
}
