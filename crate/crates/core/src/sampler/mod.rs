//! Multi-chain MCMC over an unconstrained parameter vector.

pub mod diagnostics;
mod hmc;
pub mod model;
mod rw;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linear_closed::GaussianMoments;

pub use model::{transform_m, untransform_m, BetaPrior, GlmPosterior, HppModel, Model, NormConstGradient};

/// A log density on ℝᵈ that the samplers can explore.
///
/// Implementations return `f64::NEG_INFINITY` wherever the density is zero
/// or cannot be evaluated; such proposals are rejected.
pub trait Target: Clone + Send {
    fn dim(&self) -> usize;

    fn log_density(&mut self, x: &[f64]) -> f64;

    /// Writes ∇log π(x) into `grad` and returns log π(x).
    fn log_density_and_gradient(&mut self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Map an unconstrained point to the reported parameters.
    fn constrain(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    fn names(&self) -> Vec<String> {
        (0..self.dim()).map(|j| format!("x[{j}]")).collect()
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// Rough posterior scale per coordinate, used for initial proposals.
    fn initial_scale(&self) -> Vec<f64> {
        vec![1.0; self.dim()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Diagonal,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    /// One-at-a-time Gaussian random walk with per-coordinate scales.
    AdaptiveRw,
    /// Joint Gaussian random walk with an adapted covariance.
    AdaptiveBlockRw,
    /// Hamiltonian Monte Carlo with a fixed number of leapfrog steps.
    Hmc { steps: usize, metric: Metric },
}

impl Algorithm {
    pub fn default_target_accept(&self) -> f64 {
        match self {
            Algorithm::AdaptiveRw => 0.44,
            Algorithm::AdaptiveBlockRw => 0.234,
            Algorithm::Hmc { .. } => 0.8,
        }
    }

    pub fn hmc() -> Self {
        Algorithm::Hmc {
            steps: 32,
            metric: Metric::Dense,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_keep: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub target_accept: Option<f64>,
    pub thinning: usize,
    /// Spread of chain starting points in units of the initial scale.
    pub init_jitter: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_warmup: 1000,
            n_keep: 6000,
            seed: 20_240_917,
            algorithm: Algorithm::AdaptiveRw,
            target_accept: None,
            thinning: 1,
            init_jitter: 0.5,
        }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.n_keep == 0 || self.thinning == 0 {
            return Err(Error::InvalidArgument(
                "chains, kept draws and thinning must be positive".into(),
            ));
        }
        if let Some(a) = self.target_accept {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "target acceptance must lie in (0, 1), got {a}"
                )));
            }
        }
        if let Algorithm::Hmc { steps: 0, .. } = self.algorithm {
            return Err(Error::InvalidArgument("HMC needs at least one leapfrog step".into()));
        }
        Ok(())
    }

    pub fn target_accept(&self) -> f64 {
        self.target_accept
            .unwrap_or_else(|| self.algorithm.default_target_accept())
    }
}

/// Kept draws of one chain, row-major (`n_keep × dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub samples: Vec<f64>,
    pub log_density: Vec<f64>,
    pub acceptance_rate: f64,
    pub warmup_acceptance: f64,
    pub step_size: Option<f64>,
    pub divergences: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub names: Vec<String>,
    pub dim: usize,
    pub chains: Vec<ChainDraws>,
    pub seed: u64,
}

impl Draws {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_per_chain(&self) -> usize {
        self.chains.first().map_or(0, |c| c.log_density.len())
    }

    pub fn n_total(&self) -> usize {
        self.chains.iter().map(|c| c.log_density.len()).sum()
    }

    /// Draws of coordinate `j`, one vector per chain.
    pub fn chain_columns(&self, j: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.samples.iter().skip(j).step_by(self.dim).copied().collect())
            .collect()
    }

    /// Draws of coordinate `j` pooled across chains, in chain order.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.chain_columns(j).concat()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn ess(&self, j: usize) -> Option<f64> {
        let cols = self.chain_columns(j);
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        diagnostics::effective_sample_size(&refs)
    }

    pub fn rhat(&self, j: usize) -> Option<f64> {
        let cols = self.chain_columns(j);
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        diagnostics::split_rhat(&refs)
    }
}

pub(crate) struct ChainState {
    pub x: Vec<f64>,
    pub logp: f64,
}

/// One transition kernel, adapted during warmup and frozen afterwards.
pub(crate) trait Kernel<T: Target> {
    /// Advances the state and returns the acceptance statistic.
    fn step(&mut self, target: &mut T, state: &mut ChainState, rng: &mut ChaCha8Rng, warmup: bool) -> f64;
    fn end_warmup(&mut self);
    fn step_size(&self) -> Option<f64> {
        None
    }
    fn divergences(&self) -> usize {
        0
    }
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn initialize<T: Target>(target: &mut T, cfg: &SamplerConfig, chain: usize, rng: &mut ChaCha8Rng) -> Result<ChainState> {
    let center = target.initial_point();
    let scale = target.initial_scale();
    let mut jitter = cfg.init_jitter;
    for _ in 0..100 {
        let x: Vec<f64> = center
            .iter()
            .zip(&scale)
            .map(|(c, s)| c + jitter * s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let logp = target.log_density(&x);
        if logp.is_finite() {
            return Ok(ChainState { x, logp });
        }
        jitter *= 0.5;
    }
    Err(Error::NonFiniteInit { chain })
}

fn run_chain<T: Target>(mut target: T, cfg: &SamplerConfig, chain: usize) -> Result<ChainDraws> {
    let mut rng = chain_rng(cfg.seed, chain);
    let mut state = initialize(&mut target, cfg, chain, &mut rng)?;
    let scale = target.initial_scale();
    let accept = cfg.target_accept();
    let mut kernel: Box<dyn Kernel<T>> = match cfg.algorithm {
        Algorithm::AdaptiveRw => Box::new(rw::ComponentwiseRw::new(&scale, accept)),
        Algorithm::AdaptiveBlockRw => Box::new(rw::BlockRw::new(&scale, accept)),
        Algorithm::Hmc { steps, metric } => Box::new(hmc::Hmc::new(
            &mut target,
            &state,
            &scale,
            steps,
            metric,
            accept,
            cfg.n_warmup,
            &mut rng,
        )?),
    };

    let mut warm_accept = 0.0;
    for _ in 0..cfg.n_warmup {
        warm_accept += kernel.step(&mut target, &mut state, &mut rng, true);
    }
    let warmup_acceptance = if cfg.n_warmup > 0 {
        warm_accept / cfg.n_warmup as f64
    } else {
        f64::NAN
    };
    if cfg.n_warmup > 0 && warmup_acceptance < 0.001 {
        return Err(Error::StuckChain {
            chain,
            rate: warmup_acceptance,
        });
    }
    kernel.end_warmup();

    let dim = target.dim();
    let mut samples = Vec::with_capacity(cfg.n_keep * dim);
    let mut log_density = Vec::with_capacity(cfg.n_keep);
    let mut constrained = vec![0.0; dim];
    let mut accepted = 0.0;
    let total = cfg.n_keep * cfg.thinning;
    for it in 1..=total {
        accepted += kernel.step(&mut target, &mut state, &mut rng, false);
        if it % cfg.thinning == 0 {
            target.constrain(&state.x, &mut constrained);
            samples.extend_from_slice(&constrained);
            log_density.push(state.logp);
        }
    }
    Ok(ChainDraws {
        samples,
        log_density,
        acceptance_rate: accepted / total as f64,
        warmup_acceptance,
        step_size: kernel.step_size(),
        divergences: kernel.divergences(),
    })
}

/// Run `cfg.n_chains` independent chains in parallel.
///
/// Chain `k` draws from the ChaCha stream `k` of the root seed, so results
/// depend only on the target, the configuration and the seed.
pub fn sample_posterior<T: Target>(target: &T, cfg: &SamplerConfig) -> Result<Draws> {
    cfg.validate()?;
    let results: Vec<Result<ChainDraws>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.n_chains)
            .map(|chain| {
                let t = target.clone();
                scope.spawn(move || run_chain(t, cfg, chain))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler thread panicked"))
            .collect()
    });
    let chains = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Draws {
        names: target.names(),
        dim: target.dim(),
        chains,
        seed: cfg.seed,
    })
}

/// Independent draws from a multivariate normal, laid out like MCMC output.
pub fn sample_gaussian(moments: &GaussianMoments, names: Vec<String>, cfg: &SamplerConfig) -> Result<Draws> {
    cfg.validate()?;
    let sampler = moments.sampler()?;
    let dim = moments.mean.len();
    let chains = (0..cfg.n_chains)
        .map(|chain| {
            let mut rng = chain_rng(cfg.seed, chain);
            let mut samples = Vec::with_capacity(cfg.n_keep * dim);
            for _ in 0..cfg.n_keep {
                samples.extend(sampler.sample(&mut rng).iter());
            }
            ChainDraws {
                samples,
                log_density: vec![f64::NAN; cfg.n_keep],
                acceptance_rate: 1.0,
                warmup_acceptance: f64::NAN,
                step_size: None,
                divergences: 0,
            }
        })
        .collect();
    Ok(Draws {
        names,
        dim,
        chains,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Correlated bivariate normal.
    #[derive(Clone)]
    struct Gauss2 {
        rho: f64,
    }

    impl Target for Gauss2 {
        fn dim(&self) -> usize {
            2
        }
        fn log_density(&mut self, x: &[f64]) -> f64 {
            let r = self.rho;
            -(x[0] * x[0] - 2.0 * r * x[0] * x[1] + x[1] * x[1]) / (2.0 * (1.0 - r * r))
        }
        fn log_density_and_gradient(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
            let r = self.rho;
            let d = 1.0 - r * r;
            grad[0] = -(x[0] - r * x[1]) / d;
            grad[1] = -(x[1] - r * x[0]) / d;
            self.log_density(x)
        }
    }

    fn check_moments(algorithm: Algorithm) {
        let cfg = SamplerConfig {
            n_chains: 4,
            n_warmup: 1000,
            n_keep: 5000,
            seed: 7,
            algorithm,
            ..Default::default()
        };
        let draws = sample_posterior(&Gauss2 { rho: 0.8 }, &cfg).unwrap();
        assert_eq!(draws.n_total(), 20000);
        for j in 0..2 {
            let col = draws.column(j);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            let ess = draws.ess(j).unwrap();
            assert!(mean.abs() < 4.0 / ess.sqrt(), "{algorithm:?} mean {mean} ess {ess}");
            assert!((var - 1.0).abs() < 0.1, "{algorithm:?} var {var}");
            assert!(draws.rhat(j).unwrap() < 1.02);
        }
    }

    #[test]
    fn componentwise_rw_targets_the_density() {
        check_moments(Algorithm::AdaptiveRw);
    }

    #[test]
    fn block_rw_targets_the_density() {
        check_moments(Algorithm::AdaptiveBlockRw);
    }

    #[test]
    fn hmc_targets_the_density() {
        check_moments(Algorithm::hmc());
        check_moments(Algorithm::Hmc {
            steps: 16,
            metric: Metric::Diagonal,
        });
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = SamplerConfig {
            n_keep: 500,
            n_warmup: 200,
            algorithm: Algorithm::hmc(),
            ..Default::default()
        };
        let a = sample_posterior(&Gauss2 { rho: 0.5 }, &cfg).unwrap();
        let b = sample_posterior(&Gauss2 { rho: 0.5 }, &cfg).unwrap();
        assert_eq!(a, b);
        let c = sample_posterior(&Gauss2 { rho: 0.5 }, &SamplerConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.chains[0].samples, c.chains[0].samples);
    }

    #[derive(Clone)]
    struct Nowhere;

    impl Target for Nowhere {
        fn dim(&self) -> usize {
            1
        }
        fn log_density(&mut self, x: &[f64]) -> f64 {
            if x[0] == 0.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
        fn log_density_and_gradient(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
            grad[0] = 0.0;
            self.log_density(x)
        }
    }

    #[test]
    fn stuck_chains_are_reported() {
        let cfg = SamplerConfig {
            n_keep: 10,
            n_warmup: 100,
            init_jitter: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            sample_posterior(&Nowhere, &cfg),
            Err(Error::StuckChain { .. })
        ));
    }
}
