//! Named one-dimensional densities used as hyperpriors and limiting posteriors.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardDensity {
    Beta { alpha: f64, beta: f64 },
    /// Shape–rate parameterization.
    Gamma { shape: f64, rate: f64 },
    /// Density ∝ x^(−shape−1) exp(−scale/x).
    InverseGamma { shape: f64, scale: f64 },
    Normal { mean: f64, variance: f64 },
}

impl StandardDensity {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StandardDensity::Beta { alpha, beta } => alpha > 0.0 && beta > 0.0,
            StandardDensity::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
            StandardDensity::InverseGamma { shape, scale } => shape > 0.0 && scale > 0.0,
            StandardDensity::Normal { mean, variance } => mean.is_finite() && variance > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("improper density {self:?}")))
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            StandardDensity::Beta { .. } => (0.0, 1.0),
            StandardDensity::Gamma { .. } | StandardDensity::InverseGamma { .. } => {
                (0.0, f64::INFINITY)
            }
            StandardDensity::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x > lo && x < hi) {
            return f64::NEG_INFINITY;
        }
        match *self {
            StandardDensity::Beta { alpha, beta } => {
                (alpha - 1.0) * x.ln() + (beta - 1.0) * (-x).ln_1p() - ln_beta(alpha, beta)
            }
            StandardDensity::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            StandardDensity::InverseGamma { shape, scale } => {
                shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
            }
            StandardDensity::Normal { mean, variance } => {
                -0.5 * (LN_2PI + variance.ln() + (x - mean).powi(2) / variance)
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn mean(&self) -> f64 {
        match *self {
            StandardDensity::Beta { alpha, beta } => alpha / (alpha + beta),
            StandardDensity::Gamma { shape, rate } => shape / rate,
            StandardDensity::InverseGamma { shape, scale } => {
                if shape > 1.0 {
                    scale / (shape - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            StandardDensity::Normal { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            StandardDensity::Beta { alpha, beta } => {
                let s = alpha + beta;
                alpha * beta / (s * s * (s + 1.0))
            }
            StandardDensity::Gamma { shape, rate } => shape / (rate * rate),
            StandardDensity::InverseGamma { shape, scale } => {
                if shape > 2.0 {
                    scale * scale / ((shape - 1.0).powi(2) * (shape - 2.0))
                } else {
                    f64::INFINITY
                }
            }
            StandardDensity::Normal { variance, .. } => variance,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            StandardDensity::Beta { alpha, beta } => Beta::new(alpha, beta)
                .expect("validated beta parameters")
                .sample(rng),
            StandardDensity::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate)
                .expect("validated gamma parameters")
                .sample(rng),
            StandardDensity::InverseGamma { shape, scale } => {
                1.0 / Gamma::new(shape, 1.0 / scale)
                    .expect("validated inverse-gamma parameters")
                    .sample(rng)
            }
            StandardDensity::Normal { mean, variance } => Normal::new(mean, variance.sqrt())
                .expect("validated normal parameters")
                .sample(rng),
        }
    }
}
