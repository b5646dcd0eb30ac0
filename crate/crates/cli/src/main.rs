use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hpp_core::Family;
use hpp_cli::commands::{self, ElicitArgs, IidArgs, Scenario};
use hpp_cli::compare::cmd_compare;
use hpp_cli::config::{read_toml, SimSpec};
use hpp_cli::manifest::{load_compare_config, load_run_config, Overrides};
use hpp_cli::output::write_atomic;
use hpp_cli::{CliError, CliResult};

/// Bayesian GLMs with hierarchical prediction priors.
#[derive(Debug, Parser)]
#[command(name = "hpp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one model from a configuration file or a manifest.
    Fit {
        #[arg(short, long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Also summarize the prediction vector m (m_summary.csv).
        #[arg(long)]
        m_summary: bool,
        /// Do not print the summary table.
        #[arg(short, long)]
        quiet: bool,
    },
    /// Simulate historical and current Poisson regression data.
    Simulate {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        /// Directory for historical.csv and current.csv.
        #[arg(short, long)]
        out: PathBuf,
        /// TOML file with simulator settings; flags override it.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        n0: Option<usize>,
    },
    /// Derive hyperprior means and precisions from historical estimates.
    Elicit {
        #[arg(long, value_parser = parse_family)]
        family: Family,
        /// CSV with columns name,estimate,se.
        #[arg(long)]
        summary: PathBuf,
        /// Current data; only the covariates are read.
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated covariates, e.g. `treatment,log(dose)`.
        #[arg(long, value_delimiter = ',')]
        covariates: Vec<String>,
        #[arg(long)]
        no_intercept: bool,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Compare priors across a grid of borrowing levels.
    Compare {
        #[arg(short, long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Posterior density of m for an intercept-only model.
    Iid {
        #[arg(long, value_parser = parse_family)]
        family: Family,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        ybar: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        lambda0: f64,
        #[arg(long)]
        mu0: f64,
        #[arg(long, default_value_t = 401)]
        points: usize,
        /// Output CSV; standard output when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    /// Kept draws per chain.
    #[arg(long)]
    keep: Option<usize>,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            seed: a.seed,
            chains: a.chains,
            warmup: a.warmup,
            keep: a.keep,
            out: a.out,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Compatible,
    Incompatible,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: hpp_core::Error| e.to_string())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit {
            config,
            overrides,
            m_summary,
            quiet,
        } => {
            let cfg = load_run_config(&config, &overrides.into())?;
            let report = commands::cmd_fit(&cfg, m_summary)?;
            for w in &report.fit.warnings {
                eprintln!("warning: {w}");
            }
            if !quiet {
                print!("{}", report.text);
            }
            eprintln!("wrote {}", cfg.output.dir.display());
        }
        Command::Simulate {
            scenario,
            out,
            config,
            seed,
            n,
            n0,
        } => {
            let mut spec = match config {
                Some(path) => read_toml::<SimSpec>(&path)?.0,
                None => SimSpec::default(),
            };
            spec.seed = seed.unwrap_or(spec.seed);
            spec.n = n.unwrap_or(spec.n);
            spec.n0 = n0.unwrap_or(spec.n0);
            let scenario = match scenario {
                ScenarioArg::Compatible => Scenario::Compatible,
                ScenarioArg::Incompatible => Scenario::Incompatible,
            };
            let (h, c) = commands::cmd_simulate(&spec, scenario, &out)?;
            eprintln!("wrote {} and {}", h.display(), c.display());
        }
        Command::Elicit {
            family,
            summary,
            data,
            covariates,
            no_intercept,
            out,
        } => {
            let args = ElicitArgs {
                family,
                summary,
                data,
                covariates,
                intercept: !no_intercept,
            };
            let (text, warnings) = commands::elicit(&args)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            write_atomic(&out, text.as_bytes())?;
            eprintln!("wrote {}", out.display());
        }
        Command::Compare { config, overrides } => {
            let cfg = load_compare_config(&config, &overrides.into())?;
            let cmp = cmd_compare(&cfg)?;
            print!("{}", hpp_cli::compare::comparison_csv(&cmp));
            eprintln!("wrote {}", cfg.output.dir.display());
            let failed = cmp.failures();
            if failed > 0 {
                return Err(CliError::Numeric(format!(
                    "{failed} of {} comparison cells failed; see comparison.csv",
                    cmp.cells.len()
                )));
            }
        }
        Command::Iid {
            family,
            n,
            ybar,
            lambda,
            lambda0,
            mu0,
            points,
            out,
        } => {
            let text = commands::iid_density(&IidArgs {
                family,
                n,
                ybar,
                lambda,
                lambda0,
                mu0,
                points,
            })?;
            match out {
                Some(path) => write_atomic(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
