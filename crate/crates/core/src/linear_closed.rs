//! Closed forms for the normal linear model with unit error variance.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};

/// Mean and covariance of a multivariate normal.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianMoments {
    /// Symmetric to 1e-10 and positive definite.
    pub fn is_valid(&self) -> bool {
        let c = &self.covariance;
        c.is_square()
            && c.nrows() == self.mean.len()
            && (c - c.transpose()).amax() < 1e-10
            && c.clone().cholesky().is_some()
    }

    pub fn sd(&self) -> DVector<f64> {
        self.covariance.diagonal().map(f64::sqrt)
    }

    /// A sampler that reuses one Cholesky factor.
    pub fn sampler(&self) -> Result<GaussianSampler> {
        let chol = self
            .covariance
            .clone()
            .cholesky()
            .ok_or(Error::Singular("covariance matrix"))?;
        Ok(GaussianSampler {
            mean: self.mean.clone(),
            chol,
        })
    }
}

pub struct GaussianSampler {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl GaussianSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + self.chol.l() * z
    }
}

fn xtx_inverse(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok((x.transpose() * x)
        .cholesky()
        .ok_or(Error::Singular("X'X (design is rank deficient)"))?
        .inverse())
}

fn check_inputs(x: &DMatrix<f64>, lambda: f64, lambda0: f64, mu0: &DVector<f64>) -> Result<()> {
    check_len("prior mean", x.nrows(), mu0.len())?;
    for (name, v) in [("lambda", lambda), ("lambda0", lambda0)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    Ok(())
}

/// H = X(X′X)⁻¹X′.
pub fn hat_matrix(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(x * xtx_inverse(x)? * x.transpose())
}

/// λ₀λ/(λ₀ + λ).
pub fn effective_precision(lambda: f64, lambda0: f64) -> f64 {
    lambda0 * lambda / (lambda0 + lambda)
}

/// Joint prior of (β, m), ordered β first.
pub fn lm_joint_prior(
    x: &DMatrix<f64>,
    lambda: f64,
    lambda0: f64,
    mu0: &DVector<f64>,
) -> Result<GaussianMoments> {
    check_inputs(x, lambda, lambda0, mu0)?;
    let (n, p) = x.shape();
    let inv = xtx_inverse(x)?;
    let beta_mu0 = &inv * (x.transpose() * mu0);
    let mut mean = DVector::zeros(p + n);
    mean.rows_mut(0, p).copy_from(&beta_mu0);
    mean.rows_mut(p, n).copy_from(mu0);

    let mut cov = DMatrix::zeros(p + n, p + n);
    cov.view_mut((0, 0), (p, p))
        .copy_from(&(&inv * (1.0 / lambda + 1.0 / lambda0)));
    let cross = &inv * x.transpose() / lambda0;
    cov.view_mut((0, p), (p, n)).copy_from(&cross);
    cov.view_mut((p, 0), (n, p)).copy_from(&cross.transpose());
    cov.view_mut((p, p), (n, n))
        .copy_from(&(DMatrix::identity(n, n) / lambda0));
    Ok(GaussianMoments {
        mean,
        covariance: cov,
    })
}

/// Marginal posterior of β.
pub fn lm_beta_posterior(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    lambda0: f64,
    mu0: &DVector<f64>,
) -> Result<GaussianMoments> {
    check_inputs(x, lambda, lambda0, mu0)?;
    check_len("response", x.nrows(), y.len())?;
    let inv = xtx_inverse(x)?;
    let beta_hat = &inv * (x.transpose() * y);
    let beta_mu0 = &inv * (x.transpose() * mu0);
    let lh = effective_precision(lambda, lambda0);
    let w = 1.0 / (1.0 + lh);
    Ok(GaussianMoments {
        mean: &beta_hat * w + &beta_mu0 * (1.0 - w),
        covariance: inv * w,
    })
}

/// Posterior of m.
pub fn lm_m_posterior(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    lambda0: f64,
    mu0: &DVector<f64>,
) -> Result<GaussianMoments> {
    check_inputs(x, lambda, lambda0, mu0)?;
    check_len("response", x.nrows(), y.len())?;
    let n = x.nrows();
    let h = hat_matrix(x)?;
    let c = lambda / (1.0 + lambda);
    // (λ₀I + cH)⁻¹ = (I − c/(λ₀ + c)·H)/λ₀ because H is a projector.
    let sigma = (DMatrix::identity(n, n) - &h * (c / (lambda0 + c))) / lambda0;
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let y_hat = &h * y;
    let big_lambda = &sigma * lambda0;
    let mean = &big_lambda * mu0 + (DMatrix::identity(n, n) - &big_lambda) * y_hat;
    Ok(GaussianMoments {
        mean,
        covariance: sigma,
    })
}

/// Conditional posterior of β given m.
pub fn lm_beta_given_m(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    m: &DVector<f64>,
) -> Result<GaussianMoments> {
    check_len("response", x.nrows(), y.len())?;
    check_len("prediction vector", x.nrows(), m.len())?;
    let inv = xtx_inverse(x)?;
    let mean = &inv * (x.transpose() * (y + m * lambda)) / (1.0 + lambda);
    Ok(GaussianMoments {
        mean,
        covariance: inv / (1.0 + lambda),
    })
}
