//! Run configuration files.
//!
//! Configurations are TOML. Relative paths are resolved against the
//! directory holding the configuration file; the manifest written with every
//! run stores the resolved configuration with absolute paths.

use std::path::{Path, PathBuf};

use hpp_core::glm_priors::{HyperpriorForm, NormConst};
use hpp_core::sampler::{Algorithm, Metric, NormConstGradient, SamplerConfig};
use hpp_core::Family;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

mod family_name {
    use std::str::FromStr;

    use hpp_core::Family;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(family: &Family, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(family.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Family, D::Error> {
        let name = String::deserialize(d)?;
        Family::from_str(&name).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    /// Hierarchical prediction prior on (β, m).
    Hpp,
    /// Conjugate prior with a fixed prediction vector.
    Ci,
    /// Power prior on a historical data set.
    Pp,
    /// Gaussian prior centred at historical estimates.
    Gpp,
    Flat,
}

impl PriorKind {
    pub const ALL: [PriorKind; 5] = [
        PriorKind::Hpp,
        PriorKind::Ci,
        PriorKind::Pp,
        PriorKind::Gpp,
        PriorKind::Flat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PriorKind::Hpp => "hpp",
            PriorKind::Ci => "ci",
            PriorKind::Pp => "pp",
            PriorKind::Gpp => "gpp",
            PriorKind::Flat => "flat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub path: PathBuf,
    pub response: String,
    /// Column names, or `log(name)` for a log-transformed column.
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default = "yes")]
    pub intercept: bool,
}

fn yes() -> bool {
    true
}

/// Hyperprior precision: a number, one number per observation, or a source
/// keyword (`"from-summary"`, `"from-file"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lambda0Spec {
    Scalar(f64),
    Vector(Vec<f64>),
    Source(String),
}

/// Prior prediction μ₀ (also the fixed prediction of the CI prior).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Mu0Spec {
    Constant {
        value: f64,
    },
    Vector {
        values: Vec<f64>,
    },
    /// `below` where the raw data column is under `threshold`, else `above`.
    Piecewise {
        column: String,
        threshold: f64,
        below: f64,
        above: f64,
    },
    /// g⁻¹(X₁α₀) for a subset of the model columns.
    Coefficients {
        alpha0: Vec<f64>,
        #[serde(default)]
        columns: Option<Vec<String>>,
    },
    FromSummary,
    FromFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormSpec {
    #[default]
    Conjugate,
    NoJacobian,
}

impl From<FormSpec> for HyperpriorForm {
    fn from(f: FormSpec) -> Self {
        match f {
            FormSpec::Conjugate => HyperpriorForm::Conjugate,
            FormSpec::NoJacobian => HyperpriorForm::NoJacobian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizerSpec {
    #[default]
    Laplace,
    /// Closed form, available for one-hot designs.
    Exact,
}

impl From<NormalizerSpec> for NormConst {
    fn from(n: NormalizerSpec) -> Self {
        match n {
            NormalizerSpec::Laplace => NormConst::Laplace,
            NormalizerSpec::Exact => NormConst::ExactCategorical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSpec {
    #[serde(default)]
    pub lambda0: Option<Lambda0Spec>,
    #[serde(default)]
    pub form: FormSpec,
    #[serde(default)]
    pub normalizer: NormalizerSpec,
    /// Output of `hpp elicit`, used by the `from-file` sources.
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub mu0: Option<Mu0Spec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    AdaptiveRw,
    AdaptiveBlockRw,
    /// HMC with the implicit gradient of the Laplace normalizer.
    Hmc,
    /// HMC with finite differences for the Laplace normalizer.
    HmcFd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Dense,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default = "default_keep")]
    pub keep: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_algorithm")]
    pub algorithm: AlgorithmName,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_metric")]
    pub metric: MetricName,
    #[serde(default)]
    pub target_accept: Option<f64>,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
}

fn default_chains() -> usize {
    4
}
fn default_warmup() -> usize {
    1000
}
fn default_keep() -> usize {
    6000
}
fn default_seed() -> u64 {
    SamplerConfig::default().seed
}
fn default_algorithm() -> AlgorithmName {
    AlgorithmName::AdaptiveRw
}
fn default_steps() -> usize {
    32
}
fn default_metric() -> MetricName {
    MetricName::Dense
}
fn default_thinning() -> usize {
    1
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self {
            chains: default_chains(),
            warmup: default_warmup(),
            keep: default_keep(),
            seed: default_seed(),
            algorithm: default_algorithm(),
            steps: default_steps(),
            metric: default_metric(),
            target_accept: None,
            thinning: default_thinning(),
        }
    }
}

impl SamplerSpec {
    pub fn sampler_config(&self) -> SamplerConfig {
        let metric = match self.metric {
            MetricName::Dense => Metric::Dense,
            MetricName::Diagonal => Metric::Diagonal,
        };
        let algorithm = match self.algorithm {
            AlgorithmName::AdaptiveRw => Algorithm::AdaptiveRw,
            AlgorithmName::AdaptiveBlockRw => Algorithm::AdaptiveBlockRw,
            AlgorithmName::Hmc | AlgorithmName::HmcFd => Algorithm::Hmc {
                steps: self.steps,
                metric,
            },
        };
        SamplerConfig {
            n_chains: self.chains,
            n_warmup: self.warmup,
            n_keep: self.keep,
            seed: self.seed,
            algorithm,
            target_accept: self.target_accept,
            thinning: self.thinning,
            ..SamplerConfig::default()
        }
    }

    pub fn gradient(&self) -> NormConstGradient {
        match self.algorithm {
            AlgorithmName::HmcFd => NormConstGradient::FiniteDifference,
            _ => NormConstGradient::Implicit,
        }
    }

    fn validate(&self) -> CliResult<()> {
        if self.chains == 0 || self.keep == 0 || self.thinning == 0 || self.steps == 0 {
            return Err(CliError::Config(
                "sampler chains, keep, thinning and steps must be positive".into(),
            ));
        }
        if let Some(a) = self.target_accept {
            if !(a > 0.0 && a < 1.0) {
                return Err(CliError::Config(format!(
                    "sampler.target_accept must lie in (0, 1), got {a}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

fn default_level() -> f64 {
    0.95
}

/// Configuration of a single `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(with = "family_name")]
    pub family: Family,
    pub prior: PriorKind,
    /// Precision λ of the conjugate prior; the power-prior exponent a₀ for
    /// `pp` and the discount for `gpp`.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default = "default_level")]
    pub level: f64,
    pub data: DataSpec,
    #[serde(default)]
    pub hyper: Option<HyperSpec>,
    /// CSV of historical estimates with columns `name,estimate,se`.
    #[serde(default)]
    pub summary: Option<PathSpec>,
    /// Historical data with the same columns as `data`.
    #[serde(default)]
    pub historical: Option<PathSpec>,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn check_level(level: f64) -> CliResult<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("level must lie in (0, 1), got {level}")))
    }
}

fn absolutize(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = normalize(&base.join(&*path));
    }
}

/// Removes `.` and `..` components without touching the file system.
pub fn normalize(path: &Path) -> PathBuf {
    use std::path::Component;
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            other => out.push(other),
        }
    }
    out
}

impl RunConfig {
    pub fn hyper(&self) -> HyperSpec {
        self.hyper.clone().unwrap_or_default()
    }

    pub fn lambda(&self) -> CliResult<f64> {
        let lambda = self.lambda.ok_or_else(|| {
            CliError::Config(format!("prior `{}` needs `lambda`", self.prior.name()))
        })?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(CliError::Config(format!("lambda must be positive, got {lambda}")));
        }
        if matches!(self.prior, PriorKind::Pp | PriorKind::Gpp) && lambda > 1.0 {
            return Err(CliError::Config(format!(
                "prior `{}` uses lambda as a discount in (0, 1], got {lambda}",
                self.prior.name()
            )));
        }
        Ok(lambda)
    }

    /// Checks that every field the chosen prior relies on is present.
    pub fn validate(&self) -> CliResult<()> {
        check_level(self.level)?;
        self.sampler.validate()?;
        if self.prior != PriorKind::Flat {
            self.lambda()?;
        }
        let hyper = self.hyper();
        match self.prior {
            PriorKind::Hpp => {
                if hyper.lambda0.is_none() {
                    return Err(CliError::Config("prior `hpp` needs `hyper.lambda0`".into()));
                }
                if hyper.mu0.is_none() {
                    return Err(CliError::Config("prior `hpp` needs a `[hyper.mu0]` table".into()));
                }
            }
            PriorKind::Ci => {
                if hyper.mu0.is_none() {
                    return Err(CliError::Config(
                        "prior `ci` takes its prediction from a `[hyper.mu0]` table".into(),
                    ));
                }
            }
            PriorKind::Pp => {
                if self.historical.is_none() {
                    return Err(CliError::Config(
                        "prior `pp` needs `[historical] path`".into(),
                    ));
                }
            }
            PriorKind::Gpp => {
                if self.summary.is_none() {
                    return Err(CliError::Config("prior `gpp` needs `[summary] path`".into()));
                }
            }
            PriorKind::Flat => {}
        }
        let uses = |spec: &Lambda0Spec, word: &str| matches!(spec, Lambda0Spec::Source(s) if s == word);
        if let Some(Lambda0Spec::Source(s)) = &hyper.lambda0 {
            if s != "from-summary" && s != "from-file" {
                return Err(CliError::Config(format!(
                    "hyper.lambda0 must be a number, an array, \"from-summary\" or \"from-file\"; got \"{s}\""
                )));
            }
        }
        let needs_summary = hyper.lambda0.as_ref().is_some_and(|l| uses(l, "from-summary"))
            || matches!(hyper.mu0, Some(Mu0Spec::FromSummary));
        if needs_summary && self.summary.is_none() {
            return Err(CliError::Config(
                "`from-summary` hyperparameters need `[summary] path`".into(),
            ));
        }
        let needs_file = hyper.lambda0.as_ref().is_some_and(|l| uses(l, "from-file"))
            || matches!(hyper.mu0, Some(Mu0Spec::FromFile));
        if needs_file && hyper.file.is_none() {
            return Err(CliError::Config(
                "`from-file` hyperparameters need `hyper.file`".into(),
            ));
        }
        Ok(())
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        absolutize(base, &mut self.data.path);
        if let Some(h) = self.hyper.as_mut() {
            if let Some(f) = h.file.as_mut() {
                absolutize(base, f);
            }
        }
        if let Some(s) = self.summary.as_mut() {
            absolutize(base, &mut s.path);
        }
        if let Some(h) = self.historical.as_mut() {
            absolutize(base, &mut h.path);
        }
        absolutize(base, &mut self.output.dir);
    }

    /// Input files whose contents the manifest records.
    pub fn input_files(&self) -> Vec<PathBuf> {
        let mut files = vec![self.data.path.clone()];
        if let Some(f) = self.hyper.as_ref().and_then(|h| h.file.clone()) {
            files.push(f);
        }
        if let Some(s) = &self.summary {
            files.push(s.path.clone());
        }
        if let Some(h) = &self.historical {
            files.push(h.path.clone());
        }
        files
    }
}

/// Configuration of a prior-comparison batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(with = "family_name")]
    pub family: Family,
    /// Model column whose posteriors are compared.
    pub coefficient: String,
    #[serde(default = "all_priors")]
    pub priors: Vec<PriorKind>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_level")]
    pub level: f64,
    pub data: DataSpec,
    /// Historical data; its fit supplies the summary for `hpp`, `ci` and
    /// `gpp`, and the data for `pp`.
    pub historical: PathSpec,
    #[serde(default)]
    pub hyper: HyperSpec,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn all_priors() -> Vec<PriorKind> {
    PriorKind::ALL.to_vec()
}

fn default_lambdas() -> Vec<f64> {
    vec![0.5, 0.75, 1.0]
}

impl CompareConfig {
    pub fn validate(&self) -> CliResult<()> {
        check_level(self.level)?;
        self.sampler.validate()?;
        if self.priors.is_empty() || self.lambdas.is_empty() {
            return Err(CliError::Config("priors and lambdas must be non-empty".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|&&l| !(l > 0.0 && l <= 1.0)) {
            return Err(CliError::Config(format!(
                "comparison lambdas must lie in (0, 1], got {l}"
            )));
        }
        if self.hyper.lambda0.is_some() || self.hyper.mu0.is_some() || self.hyper.file.is_some() {
            return Err(CliError::Config(
                "comparison hyperparameters come from the historical fit; only `form` and `normalizer` may be set".into(),
            ));
        }
        Ok(())
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        absolutize(base, &mut self.data.path);
        absolutize(base, &mut self.historical.path);
        absolutize(base, &mut self.output.dir);
    }
}

/// Settings of the data simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_n0")]
    pub n0: usize,
    /// Historical coefficients: intercept, treatment, race, age.
    #[serde(default = "default_beta0")]
    pub beta_historical: Vec<f64>,
    /// Current coefficients. The incompatible scenario zeroes the treatment
    /// effect.
    #[serde(default = "default_beta0")]
    pub beta_current: Vec<f64>,
    #[serde(default = "default_treatment_p")]
    pub treatment_p: f64,
    #[serde(default = "default_race_p")]
    pub race_p: f64,
    #[serde(default = "default_age_mean")]
    pub age_mean: f64,
    #[serde(default = "default_age_sd")]
    pub age_sd: f64,
    /// Store (age − age_mean)/age_sd instead of the raw age.
    #[serde(default)]
    pub standardize_age: bool,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_n() -> usize {
    75
}
fn default_n0() -> usize {
    50
}
/// Mean counts in the low hundreds, as for CD4 cell counts, with age in
/// years.
fn default_beta0() -> Vec<f64> {
    vec![6.05, 0.048, 0.1, -0.01]
}
fn default_treatment_p() -> f64 {
    0.5
}
fn default_race_p() -> f64 {
    0.5
}
fn default_age_mean() -> f64 {
    30.0
}
fn default_age_sd() -> f64 {
    5.0
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            n: default_n(),
            n0: default_n0(),
            beta_historical: default_beta0(),
            beta_current: default_beta0(),
            treatment_p: default_treatment_p(),
            race_p: default_race_p(),
            age_mean: default_age_mean(),
            age_sd: default_age_sd(),
            standardize_age: false,
            seed: default_seed(),
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.n == 0 || self.n0 == 0 {
            return Err(CliError::Config("sample sizes must be positive".into()));
        }
        if self.beta_historical.len() != 4 || self.beta_current.len() != 4 {
            return Err(CliError::Config(
                "coefficients are (intercept, treatment, race, age)".into(),
            ));
        }
        for (name, p) in [("treatment_p", self.treatment_p), ("race_p", self.race_p)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CliError::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(self.age_sd > 0.0) {
            return Err(CliError::Config("age_sd must be positive".into()));
        }
        Ok(())
    }
}

/// Reads a TOML file, returning the parsed value and the raw text.
pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<(T, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io("read", path, e))?;
    let value = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((value, text))
}

/// Directory relative paths in `path` are resolved against.
pub fn base_dir(path: &Path) -> PathBuf {
    let parent = path.parent().unwrap_or(Path::new("."));
    let parent = if parent.as_os_str().is_empty() {
        Path::new(".")
    } else {
        parent
    };
    normalize(&std::path::absolute(parent).unwrap_or_else(|_| parent.to_path_buf()))
}
