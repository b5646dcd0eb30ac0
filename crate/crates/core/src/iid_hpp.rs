//! Intercept-only models: the conjugate prior on the mean, its hyperprior,
//! and the posterior of the prior prediction m.

use statrs::function::beta::ln_beta;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::density::StandardDensity;
use crate::error::{Error, Result};
use crate::expfam::Family;
use crate::quadrature::LogDensity;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Conjugate prior on the mean with precision `lambda` and prediction `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyPrior {
    pub lambda: f64,
    pub m: f64,
}

impl DyPrior {
    pub fn new(family: Family, lambda: f64, m: f64) -> Result<Self> {
        check_precision(lambda)?;
        family.check_mean(m)?;
        Ok(Self { lambda, m })
    }
}

/// Hyperprior on m with precision `lambda0` and mean `mu0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperprior {
    pub lambda0: f64,
    pub mu0: f64,
}

impl Hyperprior {
    pub fn new(family: Family, lambda0: f64, mu0: f64) -> Result<Self> {
        check_precision(lambda0)?;
        family.check_mean(mu0)?;
        Ok(Self { lambda0, mu0 })
    }
}

fn check_precision(value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "precision must be positive and finite, got {value}"
        )))
    }
}

fn check_data(family: Family, n: usize, ybar: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one observation".into()));
    }
    let ok = match family {
        Family::Gamma => ybar > 0.0 && ybar.is_finite(),
        _ => family.mean_domain().contains_closure(ybar),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::DataSupport {
            family,
            index: 0,
            value: ybar,
        })
    }
}

/// Posterior of the mean after `n` observations with sample mean `ybar`.
pub fn dy_update(family: Family, n: usize, ybar: f64, prior: DyPrior) -> Result<DyPrior> {
    check_data(family, n, ybar)?;
    let nf = n as f64;
    Ok(DyPrior {
        lambda: nf + prior.lambda,
        m: (nf * ybar + prior.lambda * prior.m) / (nf + prior.lambda),
    })
}

/// log Z(a, c), where Z(a, c) = ∫ exp{cθ − a·b(θ)} dθ and c = a·m.
pub fn log_dy_normalizer(family: Family, a: f64, c: f64) -> Result<f64> {
    let valid = match family {
        Family::Bernoulli => a > 0.0 && c > 0.0 && c < a,
        Family::Poisson | Family::Gamma => a > 0.0 && c > 0.0,
        Family::Normal => a > 0.0 && c.is_finite(),
    };
    if !valid {
        return Err(Error::InvalidArgument(format!(
            "normalizer undefined for a = {a}, c = {c} in the {family} family"
        )));
    }
    let value = match family {
        Family::Bernoulli => ln_beta(c, a - c),
        Family::Poisson => ln_gamma(c) - c * a.ln(),
        Family::Gamma => ln_gamma(a + 1.0) - (a + 1.0) * c.ln(),
        Family::Normal => 0.5 * (LN_2PI - a.ln()) + c * c / (2.0 * a),
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Precision("log normalizer"))
    }
}

/// ∂ log Z(a, c) / ∂c.
pub fn log_dy_normalizer_dc(family: Family, a: f64, c: f64) -> f64 {
    match family {
        Family::Bernoulli => digamma(c) - digamma(a - c),
        Family::Poisson => digamma(c) - a.ln(),
        Family::Gamma => -(a + 1.0) / c,
        Family::Normal => c / a,
    }
}

/// The hyperprior on m expressed as a named density with mean μ₀.
pub fn hyperprior_standard_form(family: Family, hp: Hyperprior) -> StandardDensity {
    let (l0, mu0) = (hp.lambda0, hp.mu0);
    match family {
        Family::Bernoulli => StandardDensity::Beta {
            alpha: l0 * mu0,
            beta: l0 * (1.0 - mu0),
        },
        Family::Poisson => StandardDensity::Gamma {
            shape: l0 * mu0,
            rate: l0,
        },
        Family::Gamma => StandardDensity::InverseGamma {
            shape: l0 + 1.0,
            scale: l0 * mu0,
        },
        Family::Normal => StandardDensity::Normal {
            mean: mu0,
            variance: 1.0 / l0,
        },
    }
}

/// Variance of m under the hyperprior.
pub fn hyperprior_variance(family: Family, lambda0: f64, mu0: f64) -> f64 {
    match family {
        Family::Bernoulli => mu0 * (1.0 - mu0) / (lambda0 + 1.0),
        Family::Poisson => mu0 / lambda0,
        Family::Gamma => mu0 * mu0 / (lambda0 - 1.0),
        Family::Normal => 1.0 / lambda0,
    }
}

/// Unnormalized log posterior of m given `n` observations with mean `ybar`.
pub fn m_log_posterior(
    family: Family,
    m: f64,
    n: usize,
    ybar: f64,
    lambda: f64,
    hp: Hyperprior,
) -> Result<f64> {
    check_data(family, n, ybar)?;
    check_precision(lambda)?;
    family.check_mean(m)?;
    let nf = n as f64;
    let post = log_dy_normalizer(family, lambda + nf, lambda * m + nf * ybar)?;
    let prior = log_dy_normalizer(family, lambda, lambda * m)?;
    let hyper = hyperprior_standard_form(family, hp).ln_pdf(m);
    let value = post - prior + hyper;
    if value.is_nan() || value == f64::INFINITY {
        Err(Error::Precision("posterior of m"))
    } else {
        Ok(value)
    }
}

/// Exact posterior of m for the normal family.
pub fn normal_m_posterior(n: usize, ybar: f64, lambda: f64, hp: Hyperprior) -> StandardDensity {
    let nf = n as f64;
    let data_precision = nf / (1.0 + nf / lambda);
    let precision = hp.lambda0 + data_precision;
    let gamma = hp.lambda0 / precision;
    StandardDensity::Normal {
        mean: gamma * hp.mu0 + (1.0 - gamma) * ybar,
        variance: 1.0 / precision,
    }
}

/// Finite mixture of named densities.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureApprox {
    pub weights: Vec<f64>,
    pub components: Vec<StandardDensity>,
}

impl MixtureApprox {
    fn single(component: StandardDensity) -> Self {
        Self {
            weights: vec![1.0],
            components: vec![component],
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.pdf(x))
            .sum()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.pdf(x).ln()
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.mean())
            .sum()
    }
}

/// The density the posterior of m converges to as λ → ∞: the hyperprior
/// updated with precision n + λ₀ and mean (nȳ + λ₀μ₀)/(n + λ₀).
pub fn conjugate_limit(family: Family, n: usize, ybar: f64, hp: Hyperprior) -> StandardDensity {
    let nf = n as f64;
    let updated = Hyperprior {
        lambda0: nf + hp.lambda0,
        mu0: (nf * ybar + hp.lambda0 * hp.mu0) / (nf + hp.lambda0),
    };
    hyperprior_standard_form(family, updated)
}

/// Weight on the leading gamma component of the large-λ Poisson mixture.
pub fn poisson_mixture_weight(n: usize, ybar: f64, lambda: f64) -> f64 {
    let s = n as f64 * ybar;
    1.0 / (1.0 + s * (s - 1.0) / (2.0 * lambda))
}

/// Large-λ approximation to the posterior of m.
///
/// Poisson weights use the two-term gamma-ratio expansion as printed, which
/// weights the kernels rather than the normalized components. The Bernoulli
/// weights are normalized properly, so each component is a proper beta.
pub fn limiting_m_posterior(
    family: Family,
    n: usize,
    ybar: f64,
    lambda: f64,
    hp: Hyperprior,
) -> Result<MixtureApprox> {
    check_data(family, n, ybar)?;
    check_precision(lambda)?;
    let nf = n as f64;
    let (l0, mu0) = (hp.lambda0, hp.mu0);
    match family {
        Family::Poisson => {
            let s = nf * ybar;
            if s <= 1.0 {
                return Err(Error::ApproximationUnavailable(format!(
                    "the Poisson expansion needs a total count above 1, got {s}"
                )));
            }
            let gamma = poisson_mixture_weight(n, ybar, lambda);
            let rate = nf + l0;
            Ok(MixtureApprox {
                weights: vec![gamma, 1.0 - gamma],
                components: vec![
                    StandardDensity::Gamma {
                        shape: s + l0 * mu0,
                        rate,
                    },
                    StandardDensity::Gamma {
                        shape: s + l0 * mu0 - 1.0,
                        rate,
                    },
                ],
            })
        }
        Family::Bernoulli => {
            if !(ybar > 0.0 && ybar < 1.0) {
                return Err(Error::ApproximationUnavailable(format!(
                    "the Bernoulli expansion needs 0 < ȳ < 1, got {ybar}"
                )));
            }
            let ns = nf * ybar;
            let nfail = nf * (1.0 - ybar);
            let a = ns + l0 * mu0;
            let b = nfail + l0 * (1.0 - mu0);
            let cs = ns * (ns - 1.0) / (2.0 * lambda);
            let cf = nfail * (nfail - 1.0) / (2.0 * lambda);
            // Kernel coefficients times each component's beta normalizer,
            // accumulated relative to the leading component in log space.
            let terms = [
                (1.0, a, b),
                (cs, a - 1.0, b),
                (cf, a, b - 1.0),
                (cs * cf, a - 1.0, b - 1.0),
            ];
            let lead = ln_beta(a, b);
            let mut weights = Vec::with_capacity(4);
            let mut components = Vec::with_capacity(4);
            for (coef, alpha, beta) in terms {
                let w = if coef > 0.0 {
                    (coef.ln() + ln_beta(alpha, beta) - lead).exp()
                } else {
                    0.0
                };
                weights.push(w);
                components.push(StandardDensity::Beta { alpha, beta });
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            Ok(MixtureApprox {
                weights,
                components,
            })
        }
        Family::Gamma => Ok(MixtureApprox::single(StandardDensity::InverseGamma {
            shape: nf + l0 + 1.0,
            scale: nf * ybar + l0 * mu0,
        })),
        Family::Normal => Ok(MixtureApprox::single(normal_m_posterior(
            n, ybar, lambda, hp,
        ))),
    }
}

/// Posterior of m normalized numerically on a window that holds
/// essentially all of its mass.
pub fn m_posterior_density(
    family: Family,
    n: usize,
    ybar: f64,
    lambda: f64,
    hp: Hyperprior,
) -> Result<LogDensity<impl Fn(f64) -> f64>> {
    m_log_posterior(family, hp.mu0, n, ybar, lambda, hp)?;
    let limit = conjugate_limit(family, n, ybar, hp);
    let hints = [hp.mu0, ybar, limit.mean()];
    let (lower, upper) = match family {
        Family::Bernoulli => (0.0, 1.0),
        Family::Poisson | Family::Gamma => {
            let scale = hints
                .iter()
                .filter(|h| h.is_finite())
                .fold(0.0f64, |acc, &h| acc.max(h));
            (0.0, 200.0 * scale.max(1e-3))
        }
        Family::Normal => {
            let exact = normal_m_posterior(n, ybar, lambda, hp);
            let sd = exact.variance().sqrt();
            (exact.mean() - 40.0 * sd, exact.mean() + 40.0 * sd)
        }
    };
    let log_f = move |m: f64| {
        m_log_posterior(family, m, n, ybar, lambda, hp).unwrap_or(f64::NEG_INFINITY)
    };
    Ok(LogDensity::with_hints(log_f, lower, upper, &hints))
}
