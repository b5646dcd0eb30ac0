//! Posterior summaries: means, SDs, HPD intervals and MCMC diagnostics.

use crate::error::{Error, Result};
use crate::sampler::Draws;

const MIN_DRAWS: usize = 100;

/// Shortest interval containing ⌈level·N⌉ sorted draws.
pub fn hpd_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    if draws.len() < MIN_DRAWS {
        return Err(Error::InsufficientDraws {
            required: MIN_DRAWS,
            found: draws.len(),
        });
    }
    let sorted = sorted(draws)?;
    let n = sorted.len();
    let k = ((level * n as f64).ceil() as usize).clamp(1, n);
    let (mut best, mut lo) = (f64::INFINITY, 0);
    for i in 0..=n - k {
        let width = sorted[i + k - 1] - sorted[i];
        if width < best {
            best = width;
            lo = i;
        }
    }
    if !(best > 0.0) {
        return Err(Error::InsufficientVariation);
    }
    Ok((sorted[lo], sorted[lo + k - 1]))
}

/// Interval between the (1−level)/2 and (1+level)/2 empirical quantiles.
pub fn equal_tailed_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    if draws.is_empty() {
        return Err(Error::InsufficientDraws {
            required: 1,
            found: 0,
        });
    }
    let sorted = sorted(draws)?;
    let tail = 0.5 * (1.0 - level);
    Ok((quantile(&sorted, tail), quantile(&sorted, 1.0 - tail)))
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "credible level must lie in (0, 1), got {level}"
        )))
    }
}

fn sorted(draws: &[f64]) -> Result<Vec<f64>> {
    if draws.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite draw".into()));
    }
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub hpd_lower: Option<f64>,
    pub hpd_upper: Option<f64>,
    pub ess: Option<f64>,
    pub rhat: Option<f64>,
    /// Share of draws at or below zero.
    pub prob_nonpositive: f64,
    /// Monte Carlo standard error of the mean, sd/√ESS.
    pub mcse: Option<f64>,
    pub flags: Vec<String>,
}

/// Summaries of the columns `columns` of `draws`.
pub fn summarize_columns(draws: &Draws, columns: &[usize], level: f64) -> Result<Vec<SummaryRow>> {
    check_level(level)?;
    columns
        .iter()
        .map(|&j| {
            if j >= draws.dim {
                return Err(Error::Dimension {
                    what: "summary column",
                    expected: draws.dim,
                    found: j,
                });
            }
            let col = draws.column(j);
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let mut flags = Vec::new();
            let (hpd_lower, hpd_upper) = match hpd_interval(&col, level) {
                Ok((a, b)) => (Some(a), Some(b)),
                Err(Error::InsufficientDraws { .. }) => {
                    flags.push("too few draws for an HPD interval".to_string());
                    (None, None)
                }
                Err(Error::InsufficientVariation) => {
                    flags.push("no variation in draws".to_string());
                    (None, None)
                }
                Err(e) => return Err(e),
            };
            let ess = draws.ess(j);
            let rhat = draws.rhat(j);
            if let Some(r) = rhat {
                if r > 1.01 {
                    flags.push(format!("rhat {r:.3} above 1.01"));
                }
            }
            let prob_nonpositive = col.iter().filter(|&&v| v <= 0.0).count() as f64 / n;
            Ok(SummaryRow {
                name: draws.names[j].clone(),
                mean,
                sd,
                hpd_lower,
                hpd_upper,
                ess,
                rhat,
                prob_nonpositive,
                mcse: ess.map(|e| sd / e.sqrt()),
                flags,
            })
        })
        .collect()
}

/// Summaries of the first `p` columns, which hold the regression coefficients.
pub fn summarize(draws: &Draws, p: usize, level: f64) -> Result<Vec<SummaryRow>> {
    let cols: Vec<usize> = (0..p.min(draws.dim)).collect();
    summarize_columns(draws, &cols, level)
}
