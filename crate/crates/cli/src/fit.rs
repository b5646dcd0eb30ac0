//! Turning a run configuration into a posterior and drawing from it.

use std::sync::Arc;

use hpp_core::elicitation::{build_hpp_from_summary, ElicitedHyper, HistoricalSummary};
use hpp_core::glm_priors::{mu0_from_coefficients, CiPrior, GppConfig, HppHyper, PowerPriorConfig};
use hpp_core::linear_closed::{lm_beta_given_m, lm_beta_posterior, GaussianMoments};
use hpp_core::sampler::{
    sample_gaussian, sample_posterior, BetaPrior, Draws, GlmPosterior, HppModel, Model,
};
use hpp_core::{Family, GlmData};
use nalgebra::{DMatrix, DVector};

use crate::config::{Lambda0Spec, Mu0Spec, PriorKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::table::{load_glm_data, read_hyper_file, read_summary, Table};

/// Posterior draws with the facts a report needs.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub draws: Draws,
    /// Number of regression coefficients; they lead every draw.
    pub p: usize,
    /// `"mcmc"` or `"exact"`.
    pub method: &'static str,
    pub warnings: Vec<String>,
}

/// Inputs shared by every prior: the data plus lazily read side files.
struct Inputs<'a> {
    cfg: &'a RunConfig,
    table: Table,
    data: GlmData,
    elicited: Option<ElicitedHyper>,
    summary: Option<HistoricalSummary>,
    file: Option<(DVector<f64>, DVector<f64>)>,
}

impl<'a> Inputs<'a> {
    fn load(cfg: &'a RunConfig) -> CliResult<Self> {
        let (table, data) = load_glm_data(cfg.family, &cfg.data)?;
        Ok(Self {
            cfg,
            table,
            data,
            elicited: None,
            summary: None,
            file: None,
        })
    }

    fn summary(&mut self) -> CliResult<&HistoricalSummary> {
        if self.summary.is_none() {
            let spec = self
                .cfg
                .summary
                .as_ref()
                .ok_or_else(|| CliError::Config("`[summary] path` is not set".into()))?;
            self.summary = Some(read_summary(&spec.path, &self.data.column_names)?);
        }
        Ok(self.summary.as_ref().unwrap())
    }

    fn elicited(&mut self) -> CliResult<&ElicitedHyper> {
        if self.elicited.is_none() {
            let summary = self.summary()?.clone();
            let e = build_hpp_from_summary(&self.data.x, &summary, self.cfg.family)?;
            self.elicited = Some(e);
        }
        Ok(self.elicited.as_ref().unwrap())
    }

    fn file(&mut self) -> CliResult<&(DVector<f64>, DVector<f64>)> {
        if self.file.is_none() {
            let path = self
                .cfg
                .hyper
                .as_ref()
                .and_then(|h| h.file.clone())
                .ok_or_else(|| CliError::Config("`hyper.file` is not set".into()))?;
            let (mu0, lambda0) = read_hyper_file(&path)?;
            if mu0.len() != self.data.n() {
                return Err(CliError::Data(format!(
                    "{} has {} rows but the data have {}",
                    path.display(),
                    mu0.len(),
                    self.data.n()
                )));
            }
            self.file = Some((mu0, lambda0));
        }
        Ok(self.file.as_ref().unwrap())
    }

    fn mu0(&mut self) -> CliResult<DVector<f64>> {
        let n = self.data.n();
        let family = self.cfg.family;
        let spec = self
            .cfg
            .hyper
            .as_ref()
            .and_then(|h| h.mu0.clone())
            .ok_or_else(|| CliError::Config("`[hyper.mu0]` is not set".into()))?;
        let mu0 = match spec {
            Mu0Spec::Constant { value } => DVector::from_element(n, value),
            Mu0Spec::Vector { values } => {
                if values.len() != n {
                    return Err(CliError::Config(format!(
                        "hyper.mu0 has {} values but the data have {n} rows",
                        values.len()
                    )));
                }
                DVector::from_vec(values)
            }
            Mu0Spec::Piecewise {
                column,
                threshold,
                below,
                above,
            } => {
                let raw = self.table.column(&column)?;
                DVector::from_iterator(n, raw.iter().map(|&v| if v < threshold { below } else { above }))
            }
            Mu0Spec::Coefficients { alpha0, columns } => {
                let x1 = match &columns {
                    None => self.data.x.clone(),
                    Some(cols) => select_columns(&self.data, cols)?,
                };
                if alpha0.len() != x1.ncols() {
                    return Err(CliError::Config(format!(
                        "hyper.mu0.alpha0 has {} entries for {} columns",
                        alpha0.len(),
                        x1.ncols()
                    )));
                }
                mu0_from_coefficients(&x1, &DVector::from_vec(alpha0), family)
                    .map_err(CliError::from_config)?
            }
            Mu0Spec::FromSummary => self.elicited()?.hyper.mu0.clone(),
            Mu0Spec::FromFile => self.file()?.0.clone(),
        };
        if let Some(i) = mu0.iter().position(|&m| family.check_mean(m).is_err()) {
            return Err(CliError::Config(format!(
                "mu0 at row {} is {}, outside the mean domain of the {family} family",
                i + 1,
                mu0[i]
            )));
        }
        Ok(mu0)
    }

    fn lambda0(&mut self) -> CliResult<DVector<f64>> {
        let n = self.data.n();
        let spec = self
            .cfg
            .hyper
            .as_ref()
            .and_then(|h| h.lambda0.clone())
            .ok_or_else(|| CliError::Config("`hyper.lambda0` is not set".into()))?;
        let lambda0 = match spec {
            Lambda0Spec::Scalar(v) => DVector::from_element(n, v),
            Lambda0Spec::Vector(v) => {
                if v.len() != n {
                    return Err(CliError::Config(format!(
                        "hyper.lambda0 has {} values but the data have {n} rows",
                        v.len()
                    )));
                }
                DVector::from_vec(v)
            }
            Lambda0Spec::Source(s) if s == "from-summary" => self.elicited()?.hyper.lambda0.clone(),
            Lambda0Spec::Source(_) => self.file()?.1.clone(),
        };
        if lambda0.iter().any(|v| v.is_infinite()) {
            return Err(CliError::Config(
                "an infinite lambda0 fixes m at mu0; use `prior = \"ci\"` for that".into(),
            ));
        }
        Ok(lambda0)
    }
}

fn select_columns(data: &GlmData, cols: &[String]) -> CliResult<DMatrix<f64>> {
    let idx = cols
        .iter()
        .map(|c| {
            data.column_names.iter().position(|n| n == c).ok_or_else(|| {
                CliError::Config(format!(
                    "hyper.mu0.columns: `{c}` is not a model column ({})",
                    data.column_names.join(", ")
                ))
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(data.x.select_columns(idx.iter()))
}

/// Exact posterior of β for the normal family, when one exists.
fn normal_closed_form(
    inputs: &mut Inputs,
    lambda: Option<f64>,
) -> CliResult<Option<GaussianMoments>> {
    let cfg = inputs.cfg;
    let (x, y) = (inputs.data.x.clone(), inputs.data.y.clone());
    let moments = match cfg.prior {
        PriorKind::Flat => Some(lm_beta_given_m(&x, &y, 0.0, &y)?),
        PriorKind::Ci => {
            let m = inputs.mu0()?;
            Some(lm_beta_given_m(&x, &y, lambda.unwrap(), &m)?)
        }
        PriorKind::Hpp => {
            let lambda0 = inputs.lambda0()?;
            let shared = lambda0.iter().all(|&l| l == lambda0[0]);
            if shared {
                let mu0 = inputs.mu0()?;
                Some(lm_beta_posterior(&x, &y, lambda.unwrap(), lambda0[0], &mu0)?)
            } else {
                None
            }
        }
        PriorKind::Pp | PriorKind::Gpp => None,
    };
    Ok(moments)
}

fn model_from_inputs(inputs: &mut Inputs) -> CliResult<(Model, Vec<String>)> {
    let cfg = inputs.cfg;
    let family = cfg.family;
    let mut warnings = Vec::new();
    let model = match cfg.prior {
        PriorKind::Flat => Model::Beta(BetaPrior::Flat),
        PriorKind::Ci => {
            let m = inputs.mu0()?;
            Model::Beta(BetaPrior::Ci(
                CiPrior::new(family, cfg.lambda()?, m).map_err(CliError::from_config)?,
            ))
        }
        PriorKind::Hpp => {
            let hyper_spec = cfg.hyper();
            let mu0 = inputs.mu0()?;
            let lambda0 = inputs.lambda0()?;
            if let Some(e) = &inputs.elicited {
                if !e.capped.is_empty() {
                    warnings.push(format!(
                        "lambda0 capped for rows {:?}: zero standard errors make the hyperprior degenerate",
                        e.capped.iter().map(|i| i + 1).collect::<Vec<_>>()
                    ));
                }
            }
            if family == Family::Gamma {
                if let Some(i) = lambda0.iter().position(|&l| l <= 1.0) {
                    return Err(CliError::Config(format!(
                        "gamma hyperpriors need lambda0 > 1 for a finite variance; row {} has {}",
                        i + 1,
                        lambda0[i]
                    )));
                }
            }
            let hyper = HppHyper::new(family, lambda0, mu0).map_err(CliError::from_config)?;
            Model::Hpp(HppModel {
                lambda: cfg.lambda()?,
                hyper,
                normconst: hyper_spec.normalizer.into(),
                form: hyper_spec.form.into(),
                gradient: cfg.sampler.gradient(),
            })
        }
        PriorKind::Pp => {
            let spec = cfg.historical.as_ref().expect("validated");
            let (_, hist) = load_glm_data(
                family,
                &crate::config::DataSpec {
                    path: spec.path.clone(),
                    ..cfg.data.clone()
                },
            )?;
            let pp = PowerPriorConfig::new(family, cfg.lambda()?, hist.y, hist.x)
                .map_err(CliError::from_config)?;
            Model::Beta(BetaPrior::Power(pp))
        }
        PriorKind::Gpp => {
            let summary = inputs.summary()?.clone();
            let gpp = GppConfig::new(summary.beta0_hat, summary.se0, cfg.lambda()?)
                .map_err(|e| CliError::Data(format!("historical summary: {e}")))?;
            Model::Beta(BetaPrior::Gaussian(gpp))
        }
    };
    Ok((model, warnings))
}

/// Runs the configured analysis.
pub fn run_fit(cfg: &RunConfig) -> CliResult<FitOutput> {
    cfg.validate()?;
    let sampler = cfg.sampler.sampler_config();
    let mut inputs = Inputs::load(cfg)?;
    let p = inputs.data.p();
    if cfg.family == Family::Normal {
        let lambda = if cfg.prior == PriorKind::Flat { None } else { Some(cfg.lambda()?) };
        if let Some(moments) = normal_closed_form(&mut inputs, lambda)? {
            let draws = sample_gaussian(&moments, inputs.data.column_names.clone(), &sampler)?;
            return Ok(FitOutput {
                draws,
                p,
                method: "exact",
                warnings: Vec::new(),
            });
        }
    }
    let (model, warnings) = model_from_inputs(&mut inputs)?;
    let post = GlmPosterior::new(cfg.family, Arc::new(inputs.data), model)?;
    let draws = sample_posterior(&post, &sampler)?;
    Ok(FitOutput {
        draws,
        p,
        method: "mcmc",
        warnings,
    })
}
