//! Prior comparison: one posterior per (prior, λ) cell on shared data.
//!
//! The historical data enter each prior in its own way: the HPP and CI
//! priors take μ₀ = g⁻¹(Xβ̂₀) (the HPP also takes λ₀ from the standard
//! errors), the power prior uses the historical data directly, and the
//! Gaussian prior is centred at β̂₀ with the standard errors as scales.
//! The flat prior is fitted once as a baseline.

use std::fmt::Write as _;
use std::sync::Arc;

use hpp_core::elicitation::{build_hpp_from_summary, HistoricalSummary};
use hpp_core::glm_priors::{CiPrior, GppConfig, PowerPriorConfig};
use hpp_core::sampler::{sample_posterior, BetaPrior, Draws, GlmPosterior, HppModel, Model};
use hpp_core::summary::{summarize_columns, SummaryRow};
use hpp_core::GlmData;

use crate::config::{CompareConfig, DataSpec, PriorKind};
use crate::error::{CliError, CliResult};
use crate::manifest::manifest_text;
use crate::output::{csv_field, write_atomic};
use crate::table::{load_glm_data, write_summary_csv};

pub const COMPARISON_FILE: &str = "comparison.csv";
pub const COMPARISON_DRAWS_FILE: &str = "comparison_draws.csv";
pub const HISTORICAL_SUMMARY_FILE: &str = "historical_summary.csv";

#[derive(Debug, Clone)]
pub struct Cell {
    pub prior: PriorKind,
    /// `None` for the flat baseline.
    pub lambda: Option<f64>,
    pub outcome: Result<CellFit, String>,
}

#[derive(Debug, Clone)]
pub struct CellFit {
    pub row: SummaryRow,
    /// Draws of the compared coefficient, one vector per chain.
    pub chains: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub cells: Vec<Cell>,
    pub historical: HistoricalSummary,
    pub column_names: Vec<String>,
}

impl Comparison {
    pub fn cell(&self, prior: PriorKind, lambda: Option<f64>) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.prior == prior && c.lambda == lambda)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }
}

fn cell_model(
    cfg: &CompareConfig,
    prior: PriorKind,
    lambda: f64,
    current: &GlmData,
    historical: &GlmData,
    summary: &HistoricalSummary,
) -> hpp_core::Result<Model> {
    let family = cfg.family;
    Ok(match prior {
        PriorKind::Flat => Model::Beta(BetaPrior::Flat),
        PriorKind::Hpp => {
            let elicited = build_hpp_from_summary(&current.x, summary, family)?;
            Model::Hpp(HppModel {
                lambda,
                hyper: elicited.hyper,
                normconst: cfg.hyper.normalizer.into(),
                form: cfg.hyper.form.into(),
                gradient: cfg.sampler.gradient(),
            })
        }
        PriorKind::Ci => {
            let elicited = build_hpp_from_summary(&current.x, summary, family)?;
            Model::Beta(BetaPrior::Ci(CiPrior::new(family, lambda, elicited.hyper.mu0)?))
        }
        PriorKind::Pp => Model::Beta(BetaPrior::Power(PowerPriorConfig::new(
            family,
            lambda,
            historical.y.clone(),
            historical.x.clone(),
        )?)),
        PriorKind::Gpp => Model::Beta(BetaPrior::Gaussian(GppConfig::new(
            summary.beta0_hat.clone(),
            summary.se0.clone(),
            lambda,
        )?)),
    })
}

fn fit_cell(
    cfg: &CompareConfig,
    prior: PriorKind,
    lambda: Option<f64>,
    current: &Arc<GlmData>,
    historical: &GlmData,
    summary: &HistoricalSummary,
    column: usize,
) -> Result<CellFit, String> {
    let run = || -> hpp_core::Result<Draws> {
        let model = cell_model(cfg, prior, lambda.unwrap_or(1.0), current, historical, summary)?;
        let post = GlmPosterior::new(cfg.family, Arc::clone(current), model)?;
        sample_posterior(&post, &cfg.sampler.sampler_config())
    };
    let draws = run().map_err(|e| e.to_string())?;
    let row = summarize_columns(&draws, &[column], cfg.level)
        .map_err(|e| e.to_string())?
        .remove(0);
    Ok(CellFit {
        row,
        chains: draws.chain_columns(column),
    })
}

/// Fits every cell, running cells in parallel. Cell failures are recorded,
/// not raised.
pub fn run_compare(cfg: &CompareConfig) -> CliResult<Comparison> {
    cfg.validate()?;
    let (_, current) = load_glm_data(cfg.family, &cfg.data)?;
    let hist_spec = DataSpec {
        path: cfg.historical.path.clone(),
        ..cfg.data.clone()
    };
    let (_, historical) = load_glm_data(cfg.family, &hist_spec)?;
    let column = current
        .column_names
        .iter()
        .position(|c| c == &cfg.coefficient)
        .ok_or_else(|| {
            CliError::Config(format!(
                "coefficient `{}` is not a model column ({})",
                cfg.coefficient,
                current.column_names.join(", ")
            ))
        })?;
    let summary = HistoricalSummary::from_data(cfg.family, &historical.y, &historical.x)
        .map_err(|e| CliError::Numeric(format!("fitting the historical data: {}", CliError::from(e))))?;
    let column_names = current.column_names.clone();
    let current = Arc::new(current);

    let mut plan: Vec<(PriorKind, Option<f64>)> = Vec::new();
    for &prior in &cfg.priors {
        if prior == PriorKind::Flat {
            plan.push((prior, None));
        } else {
            plan.extend(cfg.lambdas.iter().map(|&l| (prior, Some(l))));
        }
    }
    let cells = std::thread::scope(|scope| {
        let handles: Vec<_> = plan
            .iter()
            .map(|&(prior, lambda)| {
                let (current, historical, summary) = (&current, &historical, &summary);
                scope.spawn(move || Cell {
                    prior,
                    lambda,
                    outcome: fit_cell(cfg, prior, lambda, current, historical, summary, column),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("comparison cell panicked"))
            .collect()
    });
    Ok(Comparison {
        cells,
        historical: summary,
        column_names,
    })
}

pub const COMPARISON_HEADER: &str =
    "prior,lambda,mean,sd,hpd_lower,hpd_upper,prob_nonpositive,ess,rhat,mcse,status";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn comparison_csv(cmp: &Comparison) -> String {
    let mut out = format!("{COMPARISON_HEADER}\n");
    for c in &cmp.cells {
        let lambda = opt(c.lambda);
        match &c.outcome {
            Ok(fit) => {
                let r = &fit.row;
                writeln!(
                    out,
                    "{},{lambda},{},{},{},{},{},{},{},{},ok",
                    c.prior.name(),
                    r.mean,
                    r.sd,
                    opt(r.hpd_lower),
                    opt(r.hpd_upper),
                    r.prob_nonpositive,
                    opt(r.ess),
                    opt(r.rhat),
                    opt(r.mcse),
                )
                .unwrap();
            }
            Err(msg) => {
                writeln!(
                    out,
                    "{},{lambda},,,,,,,,,{}",
                    c.prior.name(),
                    csv_field(&format!("failed: {msg}"))
                )
                .unwrap();
            }
        }
    }
    out
}

/// Long format: `prior,lambda,chain,iteration,value`.
pub fn comparison_draws_csv(cmp: &Comparison) -> String {
    let mut out = String::from("prior,lambda,chain,iteration,value\n");
    for c in &cmp.cells {
        if let Ok(fit) = &c.outcome {
            let lambda = opt(c.lambda);
            for (k, chain) in fit.chains.iter().enumerate() {
                for (t, v) in chain.iter().enumerate() {
                    writeln!(out, "{},{lambda},{},{},{v}", c.prior.name(), k + 1, t + 1).unwrap();
                }
            }
        }
    }
    out
}

/// Runs the batch and writes its files. Returns the comparison even when
/// some cells failed; the caller decides the exit status.
pub fn cmd_compare(cfg: &CompareConfig) -> CliResult<Comparison> {
    let cmp = run_compare(cfg)?;
    let dir = &cfg.output.dir;
    write_atomic(&dir.join(COMPARISON_FILE), comparison_csv(&cmp).as_bytes())?;
    write_atomic(&dir.join(COMPARISON_DRAWS_FILE), comparison_draws_csv(&cmp).as_bytes())?;
    write_atomic(
        &dir.join(HISTORICAL_SUMMARY_FILE),
        write_summary_csv(&cmp.historical, &cmp.column_names).as_bytes(),
    )?;
    let inputs = [cfg.data.path.clone(), cfg.historical.path.clone()];
    let manifest = manifest_text(cfg, cfg.sampler.seed, &inputs)?;
    write_atomic(&dir.join(crate::commands::MANIFEST_FILE), manifest.as_bytes())?;
    Ok(cmp)
}
