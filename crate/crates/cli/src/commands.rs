//! The `fit`, `simulate`, `elicit` and `iid` subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hpp_core::elicitation::{build_hpp_from_summary, LAMBDA0_CAP};
use hpp_core::iid_hpp::{conjugate_limit, hyperprior_standard_form, m_posterior_density, Hyperprior};
use hpp_core::summary::{summarize, summarize_columns, SummaryRow};
use hpp_core::Family;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal, Poisson};

use crate::config::{RunConfig, SimSpec};
use crate::error::{CliError, CliResult};
use crate::fit::{run_fit, FitOutput};
use crate::manifest::manifest_text;
use crate::output::{draws_csv, summary_csv, summary_text, write_atomic};
use crate::table::{read_summary, Table};

pub const DRAWS_FILE: &str = "draws.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_TEXT_FILE: &str = "summary.txt";
pub const M_SUMMARY_FILE: &str = "m_summary.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Result of `fit` as written to disk.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub fit: FitOutput,
    pub summary: Vec<SummaryRow>,
    pub text: String,
}

/// Fits `cfg` and writes draws, summaries and the manifest to its output
/// directory.
pub fn cmd_fit(cfg: &RunConfig, m_summary: bool) -> CliResult<FitReport> {
    let fit = run_fit(cfg)?;
    let rows = summarize(&fit.draws, fit.p, cfg.level)?;
    let text = summary_text(&rows, cfg.level, &fit.draws, fit.method);
    let dir = &cfg.output.dir;
    write_atomic(&dir.join(DRAWS_FILE), draws_csv(&fit.draws).as_bytes())?;
    write_atomic(&dir.join(SUMMARY_FILE), summary_csv(&rows).as_bytes())?;
    write_atomic(&dir.join(SUMMARY_TEXT_FILE), text.as_bytes())?;
    if m_summary {
        if fit.draws.dim == fit.p {
            return Err(CliError::Config(
                "this prior has no m parameters to summarize".into(),
            ));
        }
        let cols: Vec<usize> = (fit.p..fit.draws.dim).collect();
        let m_rows = summarize_columns(&fit.draws, &cols, cfg.level)?;
        write_atomic(&dir.join(M_SUMMARY_FILE), summary_csv(&m_rows).as_bytes())?;
    }
    let manifest = manifest_text(cfg, cfg.sampler.seed, &cfg.input_files())?;
    write_atomic(&dir.join(MANIFEST_FILE), manifest.as_bytes())?;
    Ok(FitReport {
        fit,
        summary: rows,
        text,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Current treatment effect equal to the historical one.
    Compatible,
    /// No treatment effect in the current data.
    Incompatible,
}

pub const SIM_HEADER: &str = "y,treatment,race,age";

/// Poisson regression data on (treatment, race, age).
///
/// The historical set uses ChaCha stream 0 and the current set stream 1, so
/// the historical file is the same under both scenarios.
pub fn simulate(spec: &SimSpec, scenario: Scenario) -> CliResult<(String, String)> {
    spec.validate()?;
    let mut current = spec.beta_current.clone();
    if scenario == Scenario::Incompatible {
        current[1] = 0.0;
    }
    let historical = simulate_set(spec, &spec.beta_historical, spec.n0, 0)?;
    let current = simulate_set(spec, &current, spec.n, 1)?;
    Ok((historical, current))
}

fn simulate_set(spec: &SimSpec, beta: &[f64], n: usize, stream: u64) -> CliResult<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let bad = |e: String| CliError::Config(e);
    let treatment = Bernoulli::new(spec.treatment_p).map_err(|e| bad(e.to_string()))?;
    let race = Bernoulli::new(spec.race_p).map_err(|e| bad(e.to_string()))?;
    let age = Normal::new(spec.age_mean, spec.age_sd).map_err(|e| bad(e.to_string()))?;
    let mut out = format!("{SIM_HEADER}\n");
    for _ in 0..n {
        let t = f64::from(u8::from(treatment.sample(&mut rng)));
        let r = f64::from(u8::from(race.sample(&mut rng)));
        let mut a: f64 = age.sample(&mut rng);
        if spec.standardize_age {
            a = (a - spec.age_mean) / spec.age_sd;
        }
        let rate = (beta[0] + beta[1] * t + beta[2] * r + beta[3] * a).exp();
        let y: f64 = if rate > 0.0 {
            Poisson::new(rate)
                .map_err(|e| CliError::Numeric(format!("Poisson mean {rate}: {e}")))?
                .sample(&mut rng)
        } else {
            0.0
        };
        writeln!(out, "{y},{t},{r},{a:.16e}").unwrap();
    }
    Ok(out)
}

pub fn cmd_simulate(spec: &SimSpec, scenario: Scenario, dir: &Path) -> CliResult<(PathBuf, PathBuf)> {
    let (historical, current) = simulate(spec, scenario)?;
    let h = dir.join("historical.csv");
    let c = dir.join("current.csv");
    write_atomic(&h, historical.as_bytes())?;
    write_atomic(&c, current.as_bytes())?;
    Ok((h, c))
}

/// Inputs of `elicit`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElicitArgs {
    pub family: Family,
    pub summary: PathBuf,
    pub data: PathBuf,
    pub covariates: Vec<String>,
    pub intercept: bool,
}

pub const ELICIT_HEADER: &str = "index,mu0,lambda0,tau,capped";

/// Elicited hyperparameters as CSV, plus warnings for capped rows.
pub fn elicit(args: &ElicitArgs) -> CliResult<(String, Vec<String>)> {
    let table = Table::read(&args.data)?;
    let (x, names) = table.design(&args.covariates, args.intercept)?;
    let summary = read_summary(&args.summary, &names)?;
    let elicited = build_hpp_from_summary(&x, &summary, args.family).map_err(|e| match e {
        hpp_core::Error::InfeasibleVariance { indices } => CliError::Data(format!(
            "rows {:?}: the delta-method variance exceeds mu0(1 - mu0), the largest variance a {} hyperprior can have",
            indices.iter().map(|i| i + 1).collect::<Vec<_>>(),
            args.family
        )),
        other => CliError::from(other),
    })?;
    let mut out = format!("{ELICIT_HEADER}\n");
    for i in 0..x.nrows() {
        writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            elicited.hyper.mu0[i],
            elicited.hyper.lambda0[i],
            elicited.tau[i],
            u8::from(elicited.capped.contains(&i))
        )
        .unwrap();
    }
    let mut warnings = Vec::new();
    if !elicited.capped.is_empty() {
        warnings.push(format!(
            "rows {:?} have zero delta-method variance; lambda0 capped at {LAMBDA0_CAP:e}, which makes the hyperprior nearly degenerate",
            elicited.capped.iter().map(|i| i + 1).collect::<Vec<_>>()
        ));
    }
    Ok((out, warnings))
}

/// Intercept-only model: posterior of m beside the hyperprior and the
/// large-λ limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IidArgs {
    pub family: Family,
    pub n: usize,
    pub ybar: f64,
    pub lambda: f64,
    pub lambda0: f64,
    pub mu0: f64,
    pub points: usize,
}

pub const IID_HEADER: &str = "m,posterior,hyperprior,conjugate_limit";

pub fn iid_density(args: &IidArgs) -> CliResult<String> {
    if args.points < 2 {
        return Err(CliError::Config("need at least two grid points".into()));
    }
    let family = args.family;
    let hp = Hyperprior::new(family, args.lambda0, args.mu0).map_err(CliError::from_config)?;
    let post = m_posterior_density(family, args.n, args.ybar, args.lambda, hp)?;
    let prior = hyperprior_standard_form(family, hp);
    let limit = conjugate_limit(family, args.n, args.ybar, hp);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for d in [&prior, &limit] {
        let (m, s) = (d.mean(), d.variance().sqrt());
        if m.is_finite() && s.is_finite() {
            lo = lo.min(m - 6.0 * s);
            hi = hi.max(m + 6.0 * s);
        }
    }
    let domain = family.mean_domain();
    let (dlo, dhi) = (post.lower.max(domain.lower), post.upper.min(domain.upper));
    if !(lo.is_finite() && hi.is_finite()) {
        (lo, hi) = (dlo, dhi);
    }
    let pad = 1e-6 * (hi - lo);
    let lo = lo.max(dlo + pad);
    let hi = hi.min(dhi - pad);
    let mut out = format!("{IID_HEADER}\n");
    for k in 0..args.points {
        let m = lo + (hi - lo) * k as f64 / (args.points - 1) as f64;
        writeln!(out, "{m},{},{},{}", post.pdf(m), prior.pdf(m), limit.pdf(m)).unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulation_is_deterministic_and_shares_history() {
        let spec = SimSpec::default();
        let a = simulate(&spec, Scenario::Compatible).unwrap();
        let b = simulate(&spec, Scenario::Compatible).unwrap();
        let c = simulate(&spec, Scenario::Incompatible).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0, c.0);
        assert_ne!(a.1, c.1);
        let t = Table::from_reader(a.1.as_bytes()).unwrap();
        assert_eq!(t.n_rows(), 75);
    }

    #[test]
    fn iid_grid_stays_inside_the_mean_domain() {
        let args = IidArgs {
            family: Family::Bernoulli,
            n: 20,
            ybar: 0.25,
            lambda: 5.0,
            lambda0: 3.0,
            mu0: 0.4,
            points: 50,
        };
        let text = iid_density(&args).unwrap();
        let t = Table::from_reader(text.as_bytes()).unwrap();
        let m = t.column("m").unwrap();
        assert!(m.iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(t.column("posterior").unwrap().iter().all(|v| v.is_finite()));
    }
}
