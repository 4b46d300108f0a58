//! The six stationary benchmark demand distributions.
//!
//! All have mean approximately 5 and produce non-negative integer demand:
//!
//! | family              | mean | CV    |
//! |---------------------|------|-------|
//! | Geometric(1/6)      | 5    | ~1.10 |
//! | Poisson(5)          | 5    | ~0.45 |
//! | Binomial(10, 0.5)   | 5    | ~0.32 |
//! | Gamma(k=2, mu=5)    | ~5   | ~0.71 |
//! | HalfNormal(mu~5)    | ~5   | ~0.76 |
//! | Uniform{0..10}      | 5    | ~0.63 |
//!
//! Geometric uses the {0, 1, 2, ...} support convention, so its mean is
//! (1-p)/p = 5 exactly at p = 1/6. The half-normal scale is 5*sqrt(pi/2),
//! making the folded mean 5 before rounding. Gamma and half-normal draws
//! are rounded to the nearest integer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryFamily {
    Geometric,
    Poisson,
    Binomial,
    Gamma,
    HalfNormal,
    Uniform,
}

pub const ALL_FAMILIES: [StationaryFamily; 6] = [
    StationaryFamily::Geometric,
    StationaryFamily::Poisson,
    StationaryFamily::Binomial,
    StationaryFamily::Gamma,
    StationaryFamily::HalfNormal,
    StationaryFamily::Uniform,
];

impl StationaryFamily {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "geometric" => Ok(Self::Geometric),
            "poisson" => Ok(Self::Poisson),
            "binomial" => Ok(Self::Binomial),
            "gamma" => Ok(Self::Gamma),
            "halfnormal" | "half_normal" => Ok(Self::HalfNormal),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidInput(format!("unknown demand distribution {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Geometric => "geometric",
            Self::Poisson => "poisson",
            Self::Binomial => "binomial",
            Self::Gamma => "gamma",
            Self::HalfNormal => "halfnormal",
            Self::Uniform => "uniform",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Geometric => "Geometric(p=1/6)",
            Self::Poisson => "Poisson(5)",
            Self::Binomial => "Binomial(10, 0.5)",
            Self::Gamma => "Gamma(k=2, mu=5)",
            Self::HalfNormal => "HalfNormal(mu~5)",
            Self::Uniform => "Uniform{0..10}",
        }
    }
}

/// Draws an i.i.d. integer demand path of the given length.
pub fn stationary_sampler(family: StationaryFamily, horizon: usize, rng_seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    match family {
        StationaryFamily::Geometric => {
            let d = rand_distr::Geometric::new(1.0 / 6.0).expect("geometric p");
            (0..horizon).map(|_| d.sample(&mut rng) as f64).collect()
        }
        StationaryFamily::Poisson => {
            let d = rand_distr::Poisson::new(5.0_f64).expect("poisson rate");
            (0..horizon).map(|_| d.sample(&mut rng)).collect()
        }
        StationaryFamily::Binomial => {
            let d = rand_distr::Binomial::new(10, 0.5).expect("binomial params");
            (0..horizon).map(|_| d.sample(&mut rng) as f64).collect()
        }
        StationaryFamily::Gamma => {
            let d = rand_distr::Gamma::new(2.0_f64, 2.5).expect("gamma params");
            (0..horizon).map(|_| d.sample(&mut rng).round()).collect()
        }
        StationaryFamily::HalfNormal => {
            let sigma = 5.0 * (std::f64::consts::PI / 2.0).sqrt();
            let d = rand_distr::Normal::new(0.0, sigma).expect("normal params");
            (0..horizon).map(|_| d.sample(&mut rng).abs().round()).collect()
        }
        StationaryFamily::Uniform => {
            let d = rand_distr::Uniform::new_inclusive(0u32, 10).expect("uniform range");
            (0..horizon).map(|_| d.sample(&mut rng) as f64).collect()
        }
    }
}
