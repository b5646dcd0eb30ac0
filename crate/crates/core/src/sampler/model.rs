//! Posterior targets for regression models.
//!
//! The state is β alone for the flat, CI, power and Gaussian power priors,
//! and (β, m̃) for the prediction prior, where m̃ maps m onto ℝⁿ.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::Target;
use crate::data::GlmData;
use crate::error::{Error, Result};
use crate::expfam::{logistic, Family};
use crate::glm_priors::{
    exact_log_normconst_rows, hpp_hyper_log_pdf_grad, hpp_hyper_log_pdf_with,
    laplace_log_normconst_grad, laplace_normconst, weighted_kernel, weighted_score, CiPrior, GppConfig, HppHyper,
    HyperpriorForm, NormConst, PowerPriorConfig,
};
use crate::iid_hpp::hyperprior_variance;
use crate::irls::{irls, mle_with_se, FitResult};

/// m̃ and the log-Jacobian log|dm/dm̃|.
pub fn transform_m(family: Family, m: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let mut jac = 0.0;
    let mut out = DVector::zeros(m.len());
    for (i, &mi) in m.iter().enumerate() {
        family.check_mean(mi)?;
        out[i] = match family {
            Family::Bernoulli => {
                jac += (mi * (1.0 - mi)).ln();
                (mi / (1.0 - mi)).ln()
            }
            Family::Poisson | Family::Gamma => {
                jac += mi.ln();
                mi.ln()
            }
            Family::Normal => mi,
        };
    }
    Ok((out, jac))
}

/// Inverse of [`transform_m`].
pub fn untransform_m(family: Family, m_tilde: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        m_tilde.len(),
        m_tilde.iter().map(|&t| match family {
            Family::Bernoulli => logistic(t),
            Family::Poisson | Family::Gamma => t.exp(),
            Family::Normal => t,
        }),
    )
}

/// Prior on β alone.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaPrior {
    Flat,
    Ci(CiPrior),
    Power(PowerPriorConfig),
    Gaussian(GppConfig),
}

/// How the gradient of log Z(λ, λm) in m is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormConstGradient {
    /// Differentiates through the inner maximizer, including the
    /// log-determinant term.
    #[default]
    Implicit,
    /// Central differences on the m̃ scale.
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HppModel {
    pub lambda: f64,
    pub hyper: HppHyper,
    pub normconst: NormConst,
    pub form: HyperpriorForm,
    pub gradient: NormConstGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Beta(BetaPrior),
    Hpp(HppModel),
}

#[derive(Debug, Clone, Default)]
struct NormConstCache {
    m_tilde: Vec<f64>,
    log_z: f64,
    grad_m: Option<DVector<f64>>,
    beta_hat: Option<DVector<f64>>,
}

/// Log posterior of a GLM under one of the supported priors.
#[derive(Debug, Clone)]
pub struct GlmPosterior {
    family: Family,
    data: Arc<GlmData>,
    model: Arc<Model>,
    names: Vec<String>,
    init: Vec<f64>,
    scale: Vec<f64>,
    cache: NormConstCache,
}

fn information_scales(fit: &FitResult) -> Option<Vec<f64>> {
    let inv = fit.observed_information.clone().cholesky()?.inverse();
    Some(inv.diagonal().iter().map(|v| v.sqrt()).collect())
}

impl GlmPosterior {
    pub fn new(family: Family, data: Arc<GlmData>, model: Model) -> Result<Self> {
        let (n, p) = (data.n(), data.p());
        match &model {
            Model::Beta(BetaPrior::Ci(ci)) => {
                crate::error::check_len("prediction vector", n, ci.m.len())?
            }
            Model::Beta(BetaPrior::Power(pp)) => {
                crate::error::check_len("historical design columns", p, pp.x0.ncols())?
            }
            Model::Beta(BetaPrior::Gaussian(g)) => {
                crate::error::check_len("prior mean", p, g.mu_beta.len())?
            }
            Model::Hpp(h) => {
                crate::error::check_len("hyperprior", n, h.hyper.len())?;
                if h.normconst == NormConst::ExactCategorical && data.groups.is_none() {
                    return Err(Error::UnsupportedDesign(
                        "exact normalizer needs a one-hot design".into(),
                    ));
                }
            }
            Model::Beta(BetaPrior::Flat) => {}
        }

        let (beta0, beta_scale) = Self::initial_beta(family, &data, &model)?;
        let mut names = data.column_names.clone();
        let mut init = beta0.as_slice().to_vec();
        let mut scale = beta_scale;
        if let Model::Hpp(h) = &model {
            let (m_tilde, _) = transform_m(family, &h.hyper.mu0)?;
            init.extend(m_tilde.iter());
            for i in 0..n {
                let mu0 = h.hyper.mu0[i];
                let sd = hyperprior_variance(family, h.hyper.lambda0[i].max(1.5), mu0).sqrt();
                let dm = match family {
                    Family::Bernoulli => mu0 * (1.0 - mu0),
                    Family::Poisson | Family::Gamma => mu0,
                    Family::Normal => 1.0,
                };
                scale.push((sd / dm).min(2.0));
                names.push(format!("m[{i}]"));
            }
        }
        Ok(Self {
            family,
            data,
            model: Arc::new(model),
            names,
            init,
            scale,
            cache: NormConstCache::default(),
        })
    }

    /// MLE on y when it exists; otherwise the mode of the likelihood combined
    /// with the CI-type prior implied by the model.
    fn initial_beta(family: Family, data: &GlmData, model: &Model) -> Result<(DVector<f64>, Vec<f64>)> {
        if let Ok(mle) = mle_with_se(family, &data.y, &data.x) {
            return Ok((mle.fit.beta_hat, mle.standard_errors.as_slice().to_vec()));
        }
        let (lambda, m) = match model {
            Model::Beta(BetaPrior::Ci(ci)) => (ci.lambda, ci.m.clone()),
            Model::Hpp(h) => (h.lambda, h.hyper.mu0.clone()),
            _ => {
                let ybar = data.y.mean();
                let center = match family {
                    Family::Bernoulli => ybar.clamp(0.05, 0.95),
                    Family::Poisson | Family::Gamma => ybar.max(0.05),
                    Family::Normal => ybar,
                };
                (1.0, DVector::from_element(data.n(), center))
            }
        };
        let r = (&data.y + &m * lambda) / (1.0 + lambda);
        let fit = irls(family, &r, &data.x, 1.0 + lambda)?;
        let scale = information_scales(&fit).ok_or(Error::Singular("information at the start"))?;
        Ok((fit.beta_hat, scale))
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn data(&self) -> &GlmData {
        &self.data
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    fn p(&self) -> usize {
        self.data.p()
    }

    /// Σ (wᵢηᵢ − a·b(ηᵢ)), adding X′(w − a·ḃ(η)) to `grad` when given.
    fn glm_term(&self, w: &DVector<f64>, a: f64, eta: &DVector<f64>, x: &DMatrix<f64>, grad: Option<&mut [f64]>) -> f64 {
        let total = weighted_kernel(self.family, w, a, eta);
        if let (Some(g), true) = (grad, total.is_finite()) {
            let s = weighted_score(self.family, w, a, eta, x);
            for (gj, sj) in g.iter_mut().zip(s.iter()) {
                *gj += sj;
            }
        }
        total
    }

    fn beta_density(&self, prior: &BetaPrior, beta: &DVector<f64>, mut grad: Option<&mut [f64]>) -> f64 {
        let data = &self.data;
        let eta = &data.x * beta;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        match prior {
            BetaPrior::Flat => self.glm_term(&data.y, 1.0, &eta, &data.x, grad),
            BetaPrior::Ci(ci) => {
                let w = &data.y + &ci.m * ci.lambda;
                self.glm_term(&w, 1.0 + ci.lambda, &eta, &data.x, grad)
            }
            BetaPrior::Power(pp) => {
                let lik = self.glm_term(&data.y, 1.0, &eta, &data.x, grad.as_deref_mut());
                let eta0 = &pp.x0 * beta;
                let w0 = &pp.y0 * pp.a0;
                let hist = self.glm_term(&w0, pp.a0, &eta0, &pp.x0, grad);
                lik + hist
            }
            BetaPrior::Gaussian(gpp) => {
                let lik = self.glm_term(&data.y, 1.0, &eta, &data.x, grad.as_deref_mut());
                let mut prior = 0.0;
                for j in 0..beta.len() {
                    let z = (beta[j] - gpp.mu_beta[j]) / gpp.sigma_beta[j];
                    prior -= 0.5 * gpp.lambda * z * z;
                    if let Some(g) = grad.as_deref_mut() {
                        g[j] -= gpp.lambda * z / gpp.sigma_beta[j];
                    }
                }
                lik + prior
            }
        }
    }

    /// log Z(λ, λm) and, when asked, its gradient in m.
    fn log_normconst(&mut self, h: &HppModel, m_tilde: &[f64], m: &DVector<f64>, want_grad: bool) -> Result<(f64, Option<DVector<f64>>)> {
        let cached = self.cache.m_tilde.as_slice() == m_tilde;
        if cached && (!want_grad || self.cache.grad_m.is_some()) {
            return Ok((self.cache.log_z, self.cache.grad_m.clone()));
        }
        let family = self.family;
        let data = Arc::clone(&self.data);
        let (log_z, grad, beta_hat) = match h.normconst {
            NormConst::ExactCategorical => {
                let groups = data.groups.as_ref().expect("checked at construction");
                let (v, g) = exact_log_normconst_rows(h.lambda, m, groups, data.p(), family)?;
                (v, Some(g), None)
            }
            NormConst::Laplace => {
                // A start left behind by a far-out trajectory can be too poor
                // for the inner fit; fall back to the default start.
                let start = self.cache.beta_hat.clone();
                let approx = match laplace_normconst(h.lambda, m, &data.x, family, start.as_ref()) {
                    Err(_) if start.is_some() => laplace_normconst(h.lambda, m, &data.x, family, None)?,
                    other => other?,
                };
                let grad = if want_grad {
                    Some(match h.gradient {
                        NormConstGradient::Implicit => {
                            laplace_log_normconst_grad(&approx, h.lambda, &data.x, family)?
                        }
                        NormConstGradient::FiniteDifference => {
                            self.fd_normconst_grad(h, m_tilde, &approx.fit.beta_hat)?
                        }
                    })
                } else {
                    None
                };
                (approx.log_z, grad, Some(approx.fit.beta_hat))
            }
        };
        self.cache = NormConstCache {
            m_tilde: m_tilde.to_vec(),
            log_z,
            grad_m: grad.clone(),
            beta_hat: beta_hat.or(self.cache.beta_hat.take()),
        };
        Ok((log_z, grad))
    }

    /// ∂ log Z/∂m from central differences in m̃, divided by dm/dm̃.
    fn fd_normconst_grad(&self, h: &HppModel, m_tilde: &[f64], start: &DVector<f64>) -> Result<DVector<f64>> {
        let family = self.family;
        let mut grad = DVector::zeros(m_tilde.len());
        let mut t = m_tilde.to_vec();
        for i in 0..t.len() {
            let step = 1e-5 * (1.0 + t[i].abs());
            let orig = t[i];
            t[i] = orig + step;
            let up = laplace_normconst(h.lambda, &untransform_m(family, &t), &self.data.x, family, Some(start))?.log_z;
            t[i] = orig - step;
            let down = laplace_normconst(h.lambda, &untransform_m(family, &t), &self.data.x, family, Some(start))?.log_z;
            t[i] = orig;
            let d_tilde = (up - down) / (2.0 * step);
            let mi = untransform_m(family, &[orig])[0];
            grad[i] = d_tilde / dm_dtilde(family, mi);
        }
        Ok(grad)
    }

    fn hpp_density(&mut self, h: &HppModel, x: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let p = self.p();
        let family = self.family;
        let m_tilde = &x[p..];
        let m = untransform_m(family, m_tilde);
        let domain = family.mean_domain();
        if m.iter().any(|&mi| !domain.contains(mi)) {
            return Ok(f64::NEG_INFINITY);
        }
        let beta = DVector::from_column_slice(&x[..p]);
        let data = Arc::clone(&self.data);
        let eta = &data.x * &beta;
        let w = &data.y + &m * h.lambda;
        let want_grad = grad.is_some();
        let (log_z, grad_z) = self.log_normconst(h, m_tilde, &m, want_grad)?;
        let hyper = hpp_hyper_log_pdf_with(&m, &h.hyper, family, h.form);
        let log_jac: f64 = match family {
            Family::Bernoulli => m.iter().map(|&mi| (mi * (1.0 - mi)).ln()).sum(),
            Family::Poisson | Family::Gamma => m_tilde.iter().sum(),
            Family::Normal => 0.0,
        };
        let mut beta_grad = grad.as_ref().map(|_| vec![0.0; p]);
        let kernel = self.glm_term(&w, 1.0 + h.lambda, &eta, &data.x, beta_grad.as_deref_mut());
        let value = kernel + hyper - log_z + log_jac;
        if let Some(g) = grad {
            g[..p].copy_from_slice(beta_grad.as_deref().expect("allocated above"));
            let gz = grad_z.expect("requested");
            let gh = hpp_hyper_log_pdf_grad(&m, &h.hyper, family, h.form);
            for i in 0..m.len() {
                let dm = dm_dtilde(family, m[i]);
                let dlogjac = match family {
                    Family::Bernoulli => 1.0 - 2.0 * m[i],
                    Family::Poisson | Family::Gamma => 1.0,
                    Family::Normal => 0.0,
                };
                g[p + i] = (h.lambda * eta[i] + gh[i] - gz[i]) * dm + dlogjac;
            }
        }
        Ok(value)
    }

    fn evaluate(&mut self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let model = Arc::clone(&self.model);
        let value = match model.as_ref() {
            Model::Beta(prior) => {
                let beta = DVector::from_column_slice(x);
                Ok(self.beta_density(prior, &beta, grad))
            }
            Model::Hpp(h) => self.hpp_density(h, x, grad),
        };
        match value {
            Ok(v) if !v.is_nan() => v,
            _ => f64::NEG_INFINITY,
        }
    }
}

fn dm_dtilde(family: Family, m: f64) -> f64 {
    match family {
        Family::Bernoulli => m * (1.0 - m),
        Family::Poisson | Family::Gamma => m,
        Family::Normal => 1.0,
    }
}

impl Target for GlmPosterior {
    fn dim(&self) -> usize {
        self.init.len()
    }

    fn log_density(&mut self, x: &[f64]) -> f64 {
        self.evaluate(x, None)
    }

    fn log_density_and_gradient(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        let v = self.evaluate(x, Some(grad));
        if !v.is_finite() {
            grad.iter_mut().for_each(|g| *g = 0.0);
        }
        v
    }

    fn constrain(&self, x: &[f64], out: &mut [f64]) {
        let p = self.p();
        out[..p].copy_from_slice(&x[..p]);
        if x.len() > p {
            let m = untransform_m(self.family, &x[p..]);
            out[p..].copy_from_slice(m.as_slice());
        }
    }

    fn names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn initial_point(&self) -> Vec<f64> {
        self.init.clone()
    }

    fn initial_scale(&self) -> Vec<f64> {
        self.scale.clone()
    }
}
