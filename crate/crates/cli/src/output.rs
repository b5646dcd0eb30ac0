//! Output files: draws, summary tables and the reproducibility manifest.
//!
//! Every file is written whole to a temporary sibling and renamed into
//! place, so readers never see a partial file. Numbers are printed in the
//! shortest form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hpp_core::sampler::Draws;
use hpp_core::summary::SummaryRow;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io("create", dir, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| CliError::io("write", &tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io("rename", path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io("read", path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Long-to-wide draws: `chain,iteration,<parameter names>`.
pub fn draws_csv(draws: &Draws) -> String {
    let mut out = String::from("chain,iteration");
    for name in &draws.names {
        out.push(',');
        out.push_str(&csv_field(name));
    }
    out.push('\n');
    for (c, chain) in draws.chains.iter().enumerate() {
        for (t, row) in chain.samples.chunks(draws.dim).enumerate() {
            write!(out, "{},{}", c + 1, t + 1).unwrap();
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// Quotes a field holding a comma or quote.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const SUMMARY_HEADER: &str =
    "name,mean,sd,hpd_lower,hpd_upper,prob_nonpositive,ess,rhat,mcse,flags";

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.name),
            r.mean,
            r.sd,
            opt(r.hpd_lower),
            opt(r.hpd_upper),
            r.prob_nonpositive,
            opt(r.ess),
            opt(r.rhat),
            opt(r.mcse),
            csv_field(&r.flags.join("; ")),
        )
        .unwrap();
    }
    out
}

fn fixed(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "-".into())
}

/// Fixed-width table for people.
pub fn summary_text(rows: &[SummaryRow], level: f64, draws: &Draws, method: &str) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(9);
    let pct = format!("{:.0}% HPD", 100.0 * level);
    let mut out = String::new();
    writeln!(
        out,
        "{:<width$} {:>10} {:>9} {:>21} {:>9} {:>9} {:>7}",
        "parameter", "mean", "sd", pct, "P(<=0)", "ess", "rhat"
    )
    .unwrap();
    for r in rows {
        let hpd = match (r.hpd_lower, r.hpd_upper) {
            (Some(a), Some(b)) => format!("({a:.3}, {b:.3})"),
            _ => "-".into(),
        };
        writeln!(
            out,
            "{:<width$} {:>10.4} {:>9.4} {:>21} {:>9.4} {:>9} {:>7}",
            r.name,
            r.mean,
            r.sd,
            hpd,
            r.prob_nonpositive,
            fixed(r.ess, 0),
            fixed(r.rhat, 3),
        )
        .unwrap();
        for f in &r.flags {
            writeln!(out, "  note: {f}").unwrap();
        }
    }
    writeln!(
        out,
        "\n{} chains x {} draws ({method})",
        draws.n_chains(),
        draws.n_per_chain()
    )
    .unwrap();
    if method == "mcmc" {
        for (c, chain) in draws.chains.iter().enumerate() {
            write!(out, "chain {}: acceptance {:.3}", c + 1, chain.acceptance_rate).unwrap();
            if let Some(eps) = chain.step_size {
                write!(out, ", step size {eps:.4}, divergences {}", chain.divergences).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use hpp_core::sampler::ChainDraws;

    fn draws() -> Draws {
        let chain = |v: f64| ChainDraws {
            samples: vec![v, 0.1 + v, 0.2, 1.0 / 3.0],
            log_density: vec![0.0; 2],
            acceptance_rate: 0.5,
            warmup_acceptance: 0.5,
            step_size: None,
            divergences: 0,
        };
        Draws {
            names: vec!["a".into(), "log(b,c)".into()],
            dim: 2,
            chains: vec![chain(1.0), chain(-2.5e-17)],
            seed: 1,
        }
    }

    #[test]
    fn draws_round_trip_exactly() {
        let d = draws();
        let text = draws_csv(&d);
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["chain", "iteration", "a", "log(b,c)"]);
        let values: Vec<f64> = rdr
            .records()
            .flat_map(|r| r.unwrap().iter().skip(2).map(|s| s.parse().unwrap()).collect::<Vec<f64>>())
            .collect();
        let expected: Vec<f64> = d.chains.iter().flat_map(|c| c.samples.clone()).collect();
        assert_eq!(values, expected);
    }

    #[test]
    fn atomic_write_replaces_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/x.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
