//! Reproducibility manifests.
//!
//! A manifest is the fully resolved run configuration (absolute paths, every
//! default spelled out) plus a `[manifest]` table recording the program
//! version, the seed, a hash of the resolved configuration and a hash of
//! each input file. It is itself a valid configuration: `hpp fit --config
//! manifest.toml` repeats the run after checking the input hashes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{base_dir, normalize, CompareConfig, OutputSpec, RunConfig, SamplerSpec};
use crate::error::{CliError, CliResult};
use crate::output::{sha256_file, sha256_hex};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestInfo {
    pub version: String,
    pub seed: u64,
    /// Hash of the resolved configuration without this table.
    pub config_sha256: String,
    pub inputs: Vec<InputHash>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub warmup: Option<usize>,
    pub keep: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, sampler: &mut SamplerSpec, output: &mut OutputSpec) {
        if let Some(s) = self.seed {
            sampler.seed = s;
        }
        if let Some(c) = self.chains {
            sampler.chains = c;
        }
        if let Some(w) = self.warmup {
            sampler.warmup = w;
        }
        if let Some(k) = self.keep {
            sampler.keep = k;
        }
        if let Some(o) = &self.out {
            output.dir = normalize(&std::path::absolute(o).unwrap_or_else(|_| o.clone()));
        }
    }
}

/// Splits off and checks a `[manifest]` table if the file has one.
pub fn parse_checked<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<(T, Option<ManifestInfo>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let info = match table.remove("manifest") {
        None => None,
        Some(v) => {
            let info: ManifestInfo = v
                .try_into()
                .map_err(|e| CliError::Config(format!("{}: [manifest]: {e}", path.display())))?;
            for input in &info.inputs {
                let now = sha256_file(&input.path)?;
                if now != input.sha256 {
                    return Err(CliError::Data(format!(
                        "{} changed since the manifest was written (sha256 {now}, recorded {})",
                        input.path.display(),
                        input.sha256
                    )));
                }
            }
            Some(info)
        }
    };
    let value: T = toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((value, info))
}

/// Reads a configuration or manifest and resolves its paths.
pub fn load_run_config(path: &Path, overrides: &Overrides) -> CliResult<RunConfig> {
    let (mut cfg, _): (RunConfig, _) = parse_checked(path)?;
    cfg.resolve_paths(&base_dir(path));
    overrides.apply(&mut cfg.sampler, &mut cfg.output);
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_compare_config(path: &Path, overrides: &Overrides) -> CliResult<CompareConfig> {
    let (mut cfg, _): (CompareConfig, _) = parse_checked(path)?;
    cfg.resolve_paths(&base_dir(path));
    overrides.apply(&mut cfg.sampler, &mut cfg.output);
    cfg.validate()?;
    Ok(cfg)
}

/// Serializes `config` with a `[manifest]` table appended.
pub fn manifest_text<T: Serialize>(config: &T, seed: u64, inputs: &[PathBuf]) -> CliResult<String> {
    let body = toml::to_string(config)
        .map_err(|e| CliError::Config(format!("cannot serialize the configuration: {e}")))?;
    let info = ManifestInfo {
        version: VERSION.to_string(),
        seed,
        config_sha256: sha256_hex(body.as_bytes()),
        inputs: inputs
            .iter()
            .map(|p| {
                Ok(InputHash {
                    path: p.clone(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<CliResult<_>>()?,
    };
    #[derive(Serialize)]
    struct Wrapper<'a> {
        manifest: &'a ManifestInfo,
    }
    let tail = toml::to_string(&Wrapper { manifest: &info })
        .map_err(|e| CliError::Config(format!("cannot serialize the manifest: {e}")))?;
    Ok(format!("{body}\n{tail}"))
}
