//! Prior kernels for regression coefficients and the prior prediction vector.

use nalgebra::{DMatrix, DVector};

use crate::data::GlmData;
use crate::error::{check_len, Error, Result};
use crate::expfam::Family;
use crate::iid_hpp::{log_dy_normalizer, log_dy_normalizer_dc};
use crate::irls::{irls_with, weighted_gram, FitResult, IrlsOptions};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn check_precision(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

fn check_means(family: Family, m: &DVector<f64>) -> Result<()> {
    m.iter().try_for_each(|&mi| family.check_mean(mi))
}

/// Conjugate prior on β with precision λ and an n-vector prediction m.
#[derive(Debug, Clone, PartialEq)]
pub struct CiPrior {
    pub lambda: f64,
    pub m: DVector<f64>,
}

impl CiPrior {
    pub fn new(family: Family, lambda: f64, m: DVector<f64>) -> Result<Self> {
        check_precision("lambda", lambda)?;
        check_means(family, &m)?;
        Ok(Self { lambda, m })
    }
}

/// Independent conjugate hyperpriors on each component of m.
#[derive(Debug, Clone, PartialEq)]
pub struct HppHyper {
    pub lambda0: DVector<f64>,
    pub mu0: DVector<f64>,
}

impl HppHyper {
    pub fn new(family: Family, lambda0: DVector<f64>, mu0: DVector<f64>) -> Result<Self> {
        check_len("hyperprior precisions", mu0.len(), lambda0.len())?;
        lambda0
            .iter()
            .try_for_each(|&l| check_precision("lambda0", l))?;
        check_means(family, &mu0)?;
        Ok(Self { lambda0, mu0 })
    }

    /// Shared precision for every component.
    pub fn broadcast(family: Family, lambda0: f64, mu0: DVector<f64>) -> Result<Self> {
        let n = mu0.len();
        Self::new(family, DVector::from_element(n, lambda0), mu0)
    }

    pub fn len(&self) -> usize {
        self.mu0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu0.is_empty()
    }
}

/// Which density the hyperprior places on m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HyperpriorForm {
    /// The conjugate density in ν = ḃ⁻¹(m) carried to the m scale, so each
    /// component has mean μ₀ᵢ (for Bernoulli, Beta(λ₀μ₀, λ₀(1−μ₀))).
    #[default]
    Conjugate,
    /// The same kernel without the change-of-variables factor 1/v(m); for
    /// Bernoulli this is Beta(λ₀μ₀ + 1, λ₀(1−μ₀) + 1).
    NoJacobian,
}

/// How log Z(λ, λm) is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormConst {
    #[default]
    Laplace,
    ExactCategorical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerPriorConfig {
    pub a0: f64,
    pub y0: DVector<f64>,
    pub x0: DMatrix<f64>,
}

impl PowerPriorConfig {
    pub fn new(family: Family, a0: f64, y0: DVector<f64>, x0: DMatrix<f64>) -> Result<Self> {
        if !(a0 > 0.0 && a0 <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "power-prior exponent must lie in (0, 1], got {a0}"
            )));
        }
        check_len("historical design rows", y0.len(), x0.nrows())?;
        crate::expfam::check_responses(family, y0.as_slice())?;
        Ok(Self { a0, y0, x0 })
    }
}

/// Diagonal Gaussian prior centred on historical estimates, raised to λ.
#[derive(Debug, Clone, PartialEq)]
pub struct GppConfig {
    pub mu_beta: DVector<f64>,
    pub sigma_beta: DVector<f64>,
    pub lambda: f64,
}

impl GppConfig {
    pub fn new(mu_beta: DVector<f64>, sigma_beta: DVector<f64>, lambda: f64) -> Result<Self> {
        check_len("standard deviations", mu_beta.len(), sigma_beta.len())?;
        if sigma_beta.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(
                "standard deviations must be positive".into(),
            ));
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "discount must lie in (0, 1], got {lambda}"
            )));
        }
        Ok(Self {
            mu_beta,
            sigma_beta,
            lambda,
        })
    }
}

fn linear_predictor(beta: &DVector<f64>, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_len("coefficients", x.ncols(), beta.len())?;
    Ok(x * beta)
}

/// Σ [wᵢηᵢ − a·b(ηᵢ)], with −∞ outside the canonical parameter space.
pub(crate) fn weighted_kernel(family: Family, w: &DVector<f64>, a: f64, eta: &DVector<f64>) -> f64 {
    let mut total = 0.0;
    for (&wi, &ei) in w.iter().zip(eta.iter()) {
        if family.check_canonical(ei).is_err() {
            return f64::NEG_INFINITY;
        }
        total += wi * ei - a * family.cumulant_unchecked(ei);
    }
    total
}

/// X′(w − a·ḃ(η)).
pub(crate) fn weighted_score(
    family: Family,
    w: &DVector<f64>,
    a: f64,
    eta: &DVector<f64>,
    x: &DMatrix<f64>,
) -> DVector<f64> {
    let resid = DVector::from_iterator(
        w.len(),
        w.iter()
            .zip(eta.iter())
            .map(|(&wi, &ei)| wi - a * family.mean_unchecked(ei)),
    );
    x.transpose() * resid
}

/// λ[m′Xβ − J′b(Xβ)].
pub fn ci_log_kernel(
    beta: &DVector<f64>,
    prior: &CiPrior,
    x: &DMatrix<f64>,
    family: Family,
) -> Result<f64> {
    check_len("prediction vector", x.nrows(), prior.m.len())?;
    let eta = linear_predictor(beta, x)?;
    Ok(prior.lambda * weighted_kernel(family, &prior.m, 1.0, &eta))
}

/// Gradient of [`ci_log_kernel`] in β.
pub fn ci_log_kernel_grad(
    beta: &DVector<f64>,
    prior: &CiPrior,
    x: &DMatrix<f64>,
    family: Family,
) -> Result<DVector<f64>> {
    check_len("prediction vector", x.nrows(), prior.m.len())?;
    let eta = linear_predictor(beta, x)?;
    eta.iter().try_for_each(|&e| family.check_canonical(e))?;
    Ok(weighted_score(family, &prior.m, 1.0, &eta, x) * prior.lambda)
}

/// Laplace approximation to log Z(λ, λm) with the inner fit it relied on.
#[derive(Debug, Clone)]
pub struct LaplaceApprox {
    pub log_z: f64,
    pub fit: FitResult,
    /// log|λ·X′WX| at the inner maximizer.
    pub log_det: f64,
}

/// Laplace approximation to log Z(λ, λm).
pub fn laplace_log_normconst(
    lambda: f64,
    m: &DVector<f64>,
    x: &DMatrix<f64>,
    family: Family,
) -> Result<f64> {
    Ok(laplace_normconst(lambda, m, x, family, None)?.log_z)
}

/// Laplace approximation, warm-starting the inner fit from `start`.
pub fn laplace_normconst(
    lambda: f64,
    m: &DVector<f64>,
    x: &DMatrix<f64>,
    family: Family,
    start: Option<&DVector<f64>>,
) -> Result<LaplaceApprox> {
    check_precision("lambda", lambda)?;
    check_len("prediction vector", x.nrows(), m.len())?;
    let fit = irls_with(family, m, x, lambda, start, &IrlsOptions::default())?;
    let chol = fit
        .observed_information
        .clone()
        .cholesky()
        .ok_or(Error::Singular("information matrix in the Laplace approximation"))?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let p = x.ncols() as f64;
    let log_z = 0.5 * p * LN_2PI - 0.5 * log_det + fit.log_kernel_at_max;
    if !log_z.is_finite() {
        return Err(Error::Precision("Laplace normalizing constant"));
    }
    Ok(LaplaceApprox {
        log_z,
        fit,
        log_det,
    })
}

/// Exact gradient in m of the Laplace approximation.
///
/// The inner maximizer moves with m through dβ̂/dm′ = (X′WX)⁻¹X′, so besides
/// the envelope term λXβ̂ the log-determinant contributes
/// −½ X(X′WX)⁻¹X′(b‴(η) ⊙ q) with qᵢ = xᵢ′(X′WX)⁻¹xᵢ.
pub fn laplace_log_normconst_grad(
    approx: &LaplaceApprox,
    lambda: f64,
    x: &DMatrix<f64>,
    family: Family,
) -> Result<DVector<f64>> {
    let eta = x * &approx.fit.beta_hat;
    let w = eta.map(|e| family.cumulant_second_unchecked(e));
    let info = weighted_gram(x, &w);
    let inv = info
        .cholesky()
        .ok_or(Error::Singular("information matrix in the Laplace gradient"))?
        .inverse();
    let xa = x * &inv;
    let third = DVector::from_iterator(
        x.nrows(),
        (0..x.nrows()).map(|i| {
            let q = xa.row(i).dot(&x.row(i));
            family.cumulant_third_unchecked(eta[i]) * q
        }),
    );
    let logdet_grad = &xa * (x.transpose() * third);
    Ok(eta * lambda - logdet_grad * 0.5)
}

/// Σⱼ log Z(λnⱼ, λnⱼmⱼ) for a one-hot design with cell means `m`.
pub fn exact_log_normconst_categorical(
    lambda: f64,
    m: &DVector<f64>,
    group_sizes: &[usize],
    family: Family,
) -> Result<f64> {
    check_precision("lambda", lambda)?;
    check_len("cell sizes", m.len(), group_sizes.len())?;
    check_means(family, m)?;
    let mut total = 0.0;
    for (&mj, &nj) in m.iter().zip(group_sizes) {
        if nj == 0 {
            return Err(Error::UnsupportedDesign("empty cell".into()));
        }
        let a = lambda * nj as f64;
        total += log_dy_normalizer(family, a, a * mj)?;
    }
    Ok(total)
}

/// Exact log Z(λ, λm) for a one-hot design given the cell of every row, and
/// its gradient in the row-level m.
pub fn exact_log_normconst_rows(
    lambda: f64,
    m: &DVector<f64>,
    groups: &[usize],
    n_cells: usize,
    family: Family,
) -> Result<(f64, DVector<f64>)> {
    check_len("cell labels", m.len(), groups.len())?;
    check_means(family, m)?;
    let mut count = vec![0usize; n_cells];
    let mut sum = vec![0.0; n_cells];
    for (&g, &mi) in groups.iter().zip(m.iter()) {
        count[g] += 1;
        sum[g] += mi;
    }
    let mut value = 0.0;
    let mut dc = vec![0.0; n_cells];
    for j in 0..n_cells {
        if count[j] == 0 {
            return Err(Error::UnsupportedDesign(format!("cell {j} has no rows")));
        }
        let a = lambda * count[j] as f64;
        let c = lambda * sum[j];
        value += log_dy_normalizer(family, a, c)?;
        dc[j] = log_dy_normalizer_dc(family, a, c);
    }
    let grad = DVector::from_iterator(m.len(), groups.iter().map(|&g| lambda * dc[g]));
    Ok((value, grad))
}

/// Log density of the hyperprior on m, up to a constant; −∞ when any mᵢ
/// leaves the open mean domain.
pub fn hpp_hyper_log_pdf(m: &DVector<f64>, hyper: &HppHyper, family: Family) -> f64 {
    hpp_hyper_log_pdf_with(m, hyper, family, HyperpriorForm::Conjugate)
}

pub fn hpp_hyper_log_pdf_with(
    m: &DVector<f64>,
    hyper: &HppHyper,
    family: Family,
    form: HyperpriorForm,
) -> f64 {
    let domain = family.mean_domain();
    let mut total = 0.0;
    for i in 0..m.len() {
        let mi = m[i];
        if !domain.contains(mi) {
            return f64::NEG_INFINITY;
        }
        let nu = family.canonical_unchecked(mi);
        total += hyper.lambda0[i] * (nu * hyper.mu0[i] - family.cumulant_unchecked(nu));
        if form == HyperpriorForm::Conjugate {
            total -= family.variance_unchecked(mi).ln();
        }
    }
    total
}

/// Gradient of the hyperprior log density in m.
pub fn hpp_hyper_log_pdf_grad(
    m: &DVector<f64>,
    hyper: &HppHyper,
    family: Family,
    form: HyperpriorForm,
) -> DVector<f64> {
    DVector::from_iterator(
        m.len(),
        (0..m.len()).map(|i| {
            let mi = m[i];
            let v = family.variance_unchecked(mi);
            let mut g = hyper.lambda0[i] * (hyper.mu0[i] - mi) / v;
            if form == HyperpriorForm::Conjugate {
                g -= family.variance_derivative(mi) / v;
            }
            g
        }),
    )
}

/// μ₀ = g⁻¹(X₁α₀), rejecting any component that saturates the mean domain.
pub fn mu0_from_coefficients(
    x1: &DMatrix<f64>,
    alpha0: &DVector<f64>,
    family: Family,
) -> Result<DVector<f64>> {
    let eta = linear_predictor(alpha0, x1)?;
    let mut out = DVector::zeros(eta.len());
    for (index, &e) in eta.iter().enumerate() {
        let mu = family
            .mean(e)
            .map_err(|_| Error::Saturation { index, eta: e })?;
        if !family.mean_domain().contains(mu) || !mu.is_finite() || mu == 0.0 {
            return Err(Error::Saturation { index, eta: e });
        }
        out[index] = mu;
    }
    Ok(out)
}

/// log p(β, m | y) up to a constant.
pub fn joint_log_posterior(
    beta: &DVector<f64>,
    m: &DVector<f64>,
    data: &GlmData,
    lambda: f64,
    hyper: &HppHyper,
    family: Family,
    normconst: NormConst,
) -> Result<f64> {
    joint_log_posterior_with(
        beta,
        m,
        data,
        lambda,
        hyper,
        family,
        normconst,
        HyperpriorForm::Conjugate,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn joint_log_posterior_with(
    beta: &DVector<f64>,
    m: &DVector<f64>,
    data: &GlmData,
    lambda: f64,
    hyper: &HppHyper,
    family: Family,
    normconst: NormConst,
    form: HyperpriorForm,
) -> Result<f64> {
    check_len("prediction vector", data.n(), m.len())?;
    check_len("hyperprior", data.n(), hyper.len())?;
    check_means(family, m)?;
    let eta = linear_predictor(beta, &data.x)?;
    let w = &data.y + m * lambda;
    let kernel = weighted_kernel(family, &w, 1.0 + lambda, &eta);
    let hyper_term = hpp_hyper_log_pdf_with(m, hyper, family, form);
    let log_z = match normconst {
        NormConst::Laplace => laplace_log_normconst(lambda, m, &data.x, family)?,
        NormConst::ExactCategorical => {
            let groups = data.groups.as_ref().ok_or_else(|| {
                Error::UnsupportedDesign("exact normalizer needs a one-hot design".into())
            })?;
            exact_log_normconst_rows(lambda, m, groups, data.p(), family)?.0
        }
    };
    Ok(kernel + hyper_term - log_z)
}

/// a₀[y₀′X₀β − J′b(X₀β)].
pub fn power_prior_log_kernel(
    beta: &DVector<f64>,
    cfg: &PowerPriorConfig,
    family: Family,
) -> Result<f64> {
    let eta = linear_predictor(beta, &cfg.x0)?;
    Ok(cfg.a0 * weighted_kernel(family, &cfg.y0, 1.0, &eta))
}

pub fn power_prior_log_kernel_grad(
    beta: &DVector<f64>,
    cfg: &PowerPriorConfig,
    family: Family,
) -> Result<DVector<f64>> {
    let eta = linear_predictor(beta, &cfg.x0)?;
    Ok(weighted_score(family, &cfg.y0, 1.0, &eta, &cfg.x0) * cfg.a0)
}

/// λ Σⱼ −(βⱼ − μⱼ)²/(2σⱼ²).
pub fn gpp_log_kernel(beta: &DVector<f64>, cfg: &GppConfig) -> Result<f64> {
    check_len("coefficients", cfg.mu_beta.len(), beta.len())?;
    let mut total = 0.0;
    for j in 0..beta.len() {
        let z = (beta[j] - cfg.mu_beta[j]) / cfg.sigma_beta[j];
        total -= 0.5 * z * z;
    }
    Ok(cfg.lambda * total)
}

pub fn gpp_log_kernel_grad(beta: &DVector<f64>, cfg: &GppConfig) -> Result<DVector<f64>> {
    check_len("coefficients", cfg.mu_beta.len(), beta.len())?;
    Ok(DVector::from_iterator(
        beta.len(),
        (0..beta.len()).map(|j| {
            -cfg.lambda * (beta[j] - cfg.mu_beta[j]) / cfg.sigma_beta[j].powi(2)
        }),
    ))
}
