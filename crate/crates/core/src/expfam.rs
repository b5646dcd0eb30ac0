//! Exponential-family primitives.
//!
//! All four families are used with unit dispersion and their canonical link,
//! so the linear predictor is the canonical parameter itself.

use std::fmt;

use statrs::function::gamma::ln_gamma;

use crate::error::{check_len, Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Bernoulli,
    Poisson,
    /// Exponential-rate gamma: shape 1, θ = −1/μ.
    Gamma,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToMean,
    ToCanonical,
}

/// Bounds of the open mean domain ḃ(Θ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanDomain {
    pub lower: f64,
    pub upper: f64,
}

impl MeanDomain {
    pub fn contains(&self, mu: f64) -> bool {
        mu > self.lower && mu < self.upper
    }

    /// Closure of the domain, restricted to finite values.
    pub fn contains_closure(&self, mu: f64) -> bool {
        mu.is_finite() && mu >= self.lower && mu <= self.upper
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bernoulli" | "logistic" | "binomial" => Ok(Family::Bernoulli),
            "poisson" => Ok(Family::Poisson),
            "gamma" | "exponential" => Ok(Family::Gamma),
            "normal" | "gaussian" => Ok(Family::Normal),
            other => Err(Error::InvalidArgument(format!("unknown family '{other}'"))),
        }
    }
}

/// log(1 + e^x) without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Bernoulli,
        Family::Poisson,
        Family::Gamma,
        Family::Normal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Bernoulli => "bernoulli",
            Family::Poisson => "poisson",
            Family::Gamma => "gamma",
            Family::Normal => "normal",
        }
    }

    pub fn dispersion(self) -> f64 {
        1.0
    }

    pub fn mean_domain(self) -> MeanDomain {
        match self {
            Family::Bernoulli => MeanDomain {
                lower: 0.0,
                upper: 1.0,
            },
            Family::Poisson | Family::Gamma => MeanDomain {
                lower: 0.0,
                upper: f64::INFINITY,
            },
            Family::Normal => MeanDomain {
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
            },
        }
    }

    pub fn check_mean(self, mu: f64) -> Result<()> {
        if self.mean_domain().contains(mu) {
            Ok(())
        } else {
            Err(Error::MeanDomain { family: self, mu })
        }
    }

    pub fn check_canonical(self, theta: f64) -> Result<()> {
        let ok = match self {
            Family::Gamma => theta < 0.0,
            _ => theta.is_finite(),
        };
        if ok && theta.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidCanonical {
                family: self,
                theta,
            })
        }
    }

    /// b(θ).
    pub fn cumulant(self, theta: f64) -> Result<f64> {
        self.check_canonical(theta)?;
        Ok(self.cumulant_unchecked(theta))
    }

    pub(crate) fn cumulant_unchecked(self, theta: f64) -> f64 {
        match self {
            Family::Bernoulli => softplus(theta),
            Family::Poisson => theta.exp(),
            Family::Gamma => -(-theta).ln(),
            Family::Normal => 0.5 * theta * theta,
        }
    }

    /// ḃ(θ).
    pub fn mean(self, theta: f64) -> Result<f64> {
        self.check_canonical(theta)?;
        Ok(self.mean_unchecked(theta))
    }

    pub(crate) fn mean_unchecked(self, theta: f64) -> f64 {
        match self {
            Family::Bernoulli => logistic(theta),
            Family::Poisson => theta.exp(),
            Family::Gamma => -1.0 / theta,
            Family::Normal => theta,
        }
    }

    /// ḃ⁻¹(μ), which is also the canonical link g.
    pub fn canonical(self, mu: f64) -> Result<f64> {
        self.check_mean(mu)?;
        Ok(self.canonical_unchecked(mu))
    }

    pub(crate) fn canonical_unchecked(self, mu: f64) -> f64 {
        match self {
            Family::Bernoulli => (mu / (1.0 - mu)).ln(),
            Family::Poisson => mu.ln(),
            Family::Gamma => -1.0 / mu,
            Family::Normal => mu,
        }
    }

    /// b̈(θ).
    pub fn cumulant_second(self, theta: f64) -> Result<f64> {
        self.check_canonical(theta)?;
        Ok(self.cumulant_second_unchecked(theta))
    }

    pub(crate) fn cumulant_second_unchecked(self, theta: f64) -> f64 {
        match self {
            Family::Bernoulli => {
                let p = logistic(theta);
                let q = logistic(-theta);
                p * q
            }
            Family::Poisson => theta.exp(),
            Family::Gamma => 1.0 / (theta * theta),
            Family::Normal => 1.0,
        }
    }

    /// Third derivative of b, needed for the derivative of log-determinants.
    pub fn cumulant_third(self, theta: f64) -> Result<f64> {
        self.check_canonical(theta)?;
        Ok(self.cumulant_third_unchecked(theta))
    }

    pub(crate) fn cumulant_third_unchecked(self, theta: f64) -> f64 {
        match self {
            Family::Bernoulli => {
                let p = logistic(theta);
                let q = logistic(-theta);
                p * q * (q - p)
            }
            Family::Poisson => theta.exp(),
            Family::Gamma => -2.0 / (theta * theta * theta),
            Family::Normal => 0.0,
        }
    }

    /// v(μ) = b̈(ḃ⁻¹(μ)).
    pub fn variance(self, mu: f64) -> Result<f64> {
        self.check_mean(mu)?;
        Ok(self.variance_unchecked(mu))
    }

    pub(crate) fn variance_unchecked(self, mu: f64) -> f64 {
        match self {
            Family::Bernoulli => mu * (1.0 - mu),
            Family::Poisson => mu,
            Family::Gamma => mu * mu,
            Family::Normal => 1.0,
        }
    }

    /// v'(μ).
    pub(crate) fn variance_derivative(self, mu: f64) -> f64 {
        match self {
            Family::Bernoulli => 1.0 - 2.0 * mu,
            Family::Poisson => 1.0,
            Family::Gamma => 2.0 * mu,
            Family::Normal => 0.0,
        }
    }

    pub fn link(self, mu: f64) -> Result<f64> {
        self.canonical(mu)
    }

    pub fn inverse_link(self, eta: f64) -> Result<f64> {
        self.mean(eta)
    }

    /// ġ(μ); for a canonical link this is 1/v(μ).
    pub fn link_derivative(self, mu: f64) -> Result<f64> {
        Ok(1.0 / self.variance(mu)?)
    }

    /// Whether `y` is a possible observation.
    pub fn in_support(self, y: f64) -> bool {
        match self {
            Family::Bernoulli => y == 0.0 || y == 1.0,
            Family::Poisson => y >= 0.0 && y.is_finite() && y.fract() == 0.0,
            Family::Gamma => y > 0.0 && y.is_finite(),
            Family::Normal => y.is_finite(),
        }
    }

    /// Whether `r` is an admissible (possibly fractional) pseudo-response.
    pub fn in_response_hull(self, r: f64) -> bool {
        match self {
            Family::Gamma => r > 0.0 && r.is_finite(),
            _ => self.mean_domain().contains_closure(r),
        }
    }

    /// c(y; 1).
    pub fn log_base_measure(self, y: f64) -> f64 {
        match self {
            Family::Bernoulli | Family::Gamma => 0.0,
            Family::Poisson => -ln_gamma(y + 1.0),
            Family::Normal => -0.5 * y * y - LN_SQRT_2PI,
        }
    }

    /// Log density of one observation at canonical parameter θ.
    pub fn log_density(self, y: f64, theta: f64) -> Result<f64> {
        if !self.in_support(y) {
            return Err(Error::DataSupport {
                family: self,
                index: 0,
                value: y,
            });
        }
        Ok(y * theta - self.cumulant(theta)? + self.log_base_measure(y))
    }
}

pub fn cumulant(family: Family, theta: f64) -> Result<f64> {
    family.cumulant(theta)
}

pub fn mean_canonical_bijection(family: Family, value: f64, direction: Direction) -> Result<f64> {
    match direction {
        Direction::ToMean => family.mean(value),
        Direction::ToCanonical => family.canonical(value),
    }
}

pub fn variance_function(family: Family, mu: f64) -> Result<f64> {
    family.variance(mu)
}

/// Check every response against the family's support.
pub fn check_responses(family: Family, y: &[f64]) -> Result<()> {
    for (index, &value) in y.iter().enumerate() {
        if !family.in_support(value) {
            return Err(Error::DataSupport {
                family,
                index,
                value,
            });
        }
    }
    Ok(())
}

/// Σ [yᵢηᵢ − b(ηᵢ)] + Σ c(yᵢ).
pub fn log_likelihood(family: Family, y: &[f64], eta: &[f64]) -> Result<f64> {
    check_len("linear predictor", y.len(), eta.len())?;
    check_responses(family, y)?;
    let mut total = 0.0;
    for (&yi, &ei) in y.iter().zip(eta) {
        total += yi * ei - family.cumulant(ei)? + family.log_base_measure(yi);
    }
    Ok(total)
}
