//! Hyperparameters for the prediction prior from a previous study's
//! estimates and standard errors.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::expfam::Family;
use crate::glm_priors::HppHyper;
use crate::irls::mle_with_se;

/// Largest precision handed to the sampler. Beyond it the hyperprior is
/// numerically a point mass and the prior coincides with the CI prior.
pub const LAMBDA0_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalSummary {
    pub beta0_hat: DVector<f64>,
    pub se0: DVector<f64>,
}

impl HistoricalSummary {
    pub fn new(beta0_hat: DVector<f64>, se0: DVector<f64>) -> Result<Self> {
        check_len("standard errors", beta0_hat.len(), se0.len())?;
        if se0.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(
                "standard errors must be finite and non-negative".into(),
            ));
        }
        Ok(Self { beta0_hat, se0 })
    }

    /// Summary of a maximum-likelihood fit to historical data.
    pub fn from_data(family: Family, y0: &DVector<f64>, x0: &DMatrix<f64>) -> Result<Self> {
        let fit = mle_with_se(family, y0, x0)?;
        Self::new(fit.fit.beta_hat, fit.standard_errors)
    }
}

/// Delta-method variance of g⁻¹(xᵢ′β̂₀) under a diagonal covariance.
pub fn delta_method_tau(
    x: &DMatrix<f64>,
    summary: &HistoricalSummary,
    family: Family,
) -> Result<DVector<f64>> {
    check_len("summary coefficients", x.ncols(), summary.beta0_hat.len())?;
    let eta = x * &summary.beta0_hat;
    let var_beta = summary.se0.map(|s| s * s);
    let mut tau = DVector::zeros(x.nrows());
    for i in 0..x.nrows() {
        let mu = family
            .mean(eta[i])
            .map_err(|_| Error::Saturation { index: i, eta: eta[i] })?;
        let gdot = family
            .link_derivative(mu)
            .map_err(|_| Error::Saturation { index: i, eta: eta[i] })?;
        let s: f64 = x
            .row(i)
            .iter()
            .zip(var_beta.iter())
            .map(|(xij, v)| xij * xij * v)
            .sum();
        tau[i] = s / (gdot * gdot);
    }
    Ok(tau)
}

/// Precision whose hyperprior variance equals `tau` at mean `mu0`.
///
/// Returns `Ok(f64::INFINITY)` for a zero variance.
pub fn lambda0_from_tau(family: Family, mu0: f64, tau: f64) -> Result<f64> {
    family.check_mean(mu0)?;
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "variance must be non-negative, got {tau}"
        )));
    }
    if tau == 0.0 {
        return Ok(f64::INFINITY);
    }
    let lambda0 = match family {
        Family::Bernoulli => {
            let bound = mu0 * (1.0 - mu0);
            if tau >= bound {
                return Err(Error::InfeasibleVariance { indices: vec![0] });
            }
            bound / tau - 1.0
        }
        Family::Poisson => mu0 / tau,
        Family::Normal => 1.0 / tau,
        Family::Gamma => 1.0 + mu0 * mu0 / tau,
    };
    Ok(lambda0)
}

/// Hyperparameters with a record of which precisions were capped.
#[derive(Debug, Clone, PartialEq)]
pub struct ElicitedHyper {
    pub hyper: HppHyper,
    pub tau: DVector<f64>,
    /// Components whose precision hit [`LAMBDA0_CAP`].
    pub capped: Vec<usize>,
}

/// μ₀ᵢ = g⁻¹(xᵢ′β̂₀) with λ₀ᵢ matched to the delta-method variance.
pub fn build_hpp_from_summary(
    x: &DMatrix<f64>,
    summary: &HistoricalSummary,
    family: Family,
) -> Result<ElicitedHyper> {
    let tau = delta_method_tau(x, summary, family)?;
    let eta = x * &summary.beta0_hat;
    let mut mu0 = DVector::zeros(x.nrows());
    let mut lambda0 = DVector::zeros(x.nrows());
    let mut infeasible = Vec::new();
    let mut capped = Vec::new();
    for i in 0..x.nrows() {
        let mu = family.mean(eta[i])?;
        if !family.mean_domain().contains(mu) {
            return Err(Error::Saturation { index: i, eta: eta[i] });
        }
        mu0[i] = mu;
        match lambda0_from_tau(family, mu, tau[i]) {
            Ok(l) if l >= LAMBDA0_CAP => {
                lambda0[i] = LAMBDA0_CAP;
                capped.push(i);
            }
            Ok(l) => lambda0[i] = l,
            Err(Error::InfeasibleVariance { .. }) => infeasible.push(i),
            Err(e) => return Err(e),
        }
    }
    if !infeasible.is_empty() {
        return Err(Error::InfeasibleVariance {
            indices: infeasible,
        });
    }
    Ok(ElicitedHyper {
        hyper: HppHyper::new(family, lambda0, mu0)?,
        tau,
        capped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iid_hpp::hyperprior_variance;
    use approx::assert_relative_eq;

    #[test]
    fn tau_values() {
        let x = DMatrix::from_row_slice(1, 1, &[1.0]);
        let s = HistoricalSummary::new(DVector::from_vec(vec![0.0]), DVector::from_vec(vec![1.0]))
            .unwrap();
        assert_relative_eq!(delta_method_tau(&x, &s, Family::Bernoulli).unwrap()[0], 1.0 / 16.0);
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let s = HistoricalSummary::new(DVector::zeros(2), DVector::from_vec(vec![0.5, 0.25]))
            .unwrap();
        assert_relative_eq!(delta_method_tau(&x, &s, Family::Poisson).unwrap()[0], 0.5);
        assert_relative_eq!(delta_method_tau(&x, &s, Family::Normal).unwrap()[0], 0.5);
    }

    #[test]
    fn lambda0_inversions() {
        let tau = hyperprior_variance(Family::Bernoulli, 78.8, 0.3);
        assert_relative_eq!(tau, 0.21 / 79.8, max_relative = 1e-14);
        assert_relative_eq!(
            lambda0_from_tau(Family::Bernoulli, 0.3, tau).unwrap(),
            78.8,
            epsilon = 1e-6
        );
        assert_eq!(lambda0_from_tau(Family::Normal, 0.0, 0.25).unwrap(), 4.0);
        assert!(matches!(
            lambda0_from_tau(Family::Bernoulli, 0.3, 0.21),
            Err(Error::InfeasibleVariance { .. })
        ));
        for k in 1..50 {
            let tau = 0.01 * k as f64;
            let l0 = lambda0_from_tau(Family::Poisson, 2.0, tau).unwrap();
            let back = hyperprior_variance(Family::Poisson, l0, 2.0);
            assert!((back - tau).abs() <= 1e-10 * tau);
            let l0 = lambda0_from_tau(Family::Gamma, 2.0, tau).unwrap();
            assert!((hyperprior_variance(Family::Gamma, l0, 2.0) - tau).abs() <= 1e-10 * tau);
        }
    }

    #[test]
    fn identity_normal_design() {
        let x = DMatrix::identity(3, 3);
        let s = HistoricalSummary::new(
            DVector::from_vec(vec![0.5, -1.0, 2.0]),
            DVector::from_element(3, 1.0),
        )
        .unwrap();
        let e = build_hpp_from_summary(&x, &s, Family::Normal).unwrap();
        assert_eq!(e.hyper.mu0, s.beta0_hat);
        assert!(e.hyper.lambda0.iter().all(|&l| l == 1.0));
    }

    #[test]
    fn zero_standard_errors_are_capped() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let s = HistoricalSummary::new(DVector::from_vec(vec![0.1, 0.2]), DVector::zeros(2))
            .unwrap();
        let e = build_hpp_from_summary(&x, &s, Family::Poisson).unwrap();
        assert_eq!(e.capped, vec![0, 1]);
        assert!(e.hyper.lambda0.iter().all(|&l| l == LAMBDA0_CAP));
    }

    #[test]
    fn infeasible_components_are_listed() {
        let x = DMatrix::from_row_slice(3, 1, &[0.1, 5.0, 8.0]);
        let s = HistoricalSummary::new(DVector::from_vec(vec![0.0]), DVector::from_vec(vec![1.0]))
            .unwrap();
        match build_hpp_from_summary(&x, &s, Family::Bernoulli) {
            Err(Error::InfeasibleVariance { indices }) => assert_eq!(indices, vec![1, 2]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
