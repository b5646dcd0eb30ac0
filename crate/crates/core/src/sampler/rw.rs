//! Random-walk Metropolis kernels with Robbins–Monro scale adaptation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ChainState, Kernel, Target};

fn accept(logp_new: f64, logp_old: f64, rng: &mut ChaCha8Rng) -> f64 {
    if !logp_new.is_finite() {
        return 0.0;
    }
    let ratio = (logp_new - logp_old).min(0.0).exp();
    if rng.random::<f64>() < ratio {
        1.0
    } else {
        0.0
    }
}

fn gain(t: usize) -> f64 {
    (t as f64).powf(-0.6)
}

pub(crate) struct ComponentwiseRw {
    log_scale: Vec<f64>,
    target_accept: f64,
    t: usize,
    proposal: Vec<f64>,
}

impl ComponentwiseRw {
    pub fn new(scale: &[f64], target_accept: f64) -> Self {
        Self {
            log_scale: scale.iter().map(|s| (2.4 * s).ln()).collect(),
            target_accept,
            t: 0,
            proposal: Vec::new(),
        }
    }
}

impl<T: Target> Kernel<T> for ComponentwiseRw {
    fn step(&mut self, target: &mut T, state: &mut ChainState, rng: &mut ChaCha8Rng, warmup: bool) -> f64 {
        if warmup {
            self.t += 1;
        }
        let d = state.x.len();
        self.proposal.clone_from(&state.x);
        let mut total = 0.0;
        for j in 0..d {
            let step = self.log_scale[j].exp() * rng.sample::<f64, _>(StandardNormal);
            self.proposal[j] = state.x[j] + step;
            let logp = target.log_density(&self.proposal);
            let a = accept(logp, state.logp, rng);
            if a > 0.0 {
                state.x[j] = self.proposal[j];
                state.logp = logp;
            } else {
                self.proposal[j] = state.x[j];
            }
            if warmup {
                self.log_scale[j] += gain(self.t) * (a - self.target_accept);
            }
            total += a;
        }
        total / d as f64
    }

    fn end_warmup(&mut self) {}
}

pub(crate) struct BlockRw {
    log_scale: f64,
    target_accept: f64,
    t: usize,
    chol: DMatrix<f64>,
    // Running moments of the warmup draws.
    count: f64,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl BlockRw {
    pub fn new(scale: &[f64], target_accept: f64) -> Self {
        let d = scale.len();
        Self {
            log_scale: (2.38 / (d as f64).sqrt()).ln(),
            target_accept,
            t: 0,
            chol: DMatrix::from_diagonal(&DVector::from_column_slice(scale)),
            count: 0.0,
            mean: DVector::zeros(d),
            m2: DMatrix::zeros(d, d),
        }
    }

    fn observe(&mut self, x: &[f64]) {
        let x = DVector::from_column_slice(x);
        self.count += 1.0;
        let delta = &x - &self.mean;
        self.mean += &delta / self.count;
        let delta2 = &x - &self.mean;
        self.m2 += &delta * delta2.transpose();
    }

    fn refresh_covariance(&mut self) {
        let n = self.count;
        let d = self.mean.len();
        let cov = &self.m2 / (n - 1.0);
        let reg = cov * (n / (n + 5.0)) + DMatrix::identity(d, d) * (1e-3 * 5.0 / (n + 5.0));
        if let Some(c) = reg.cholesky() {
            self.chol = c.l();
        }
    }
}

impl<T: Target> Kernel<T> for BlockRw {
    fn step(&mut self, target: &mut T, state: &mut ChainState, rng: &mut ChaCha8Rng, warmup: bool) -> f64 {
        let d = state.x.len();
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let step = &self.chol * z * self.log_scale.exp();
        let proposal: Vec<f64> = state.x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let logp = target.log_density(&proposal);
        let a = accept(logp, state.logp, rng);
        if a > 0.0 {
            state.x = proposal;
            state.logp = logp;
        }
        if warmup {
            self.t += 1;
            self.log_scale += gain(self.t) * (a - self.target_accept);
            self.observe(&state.x);
            // Refresh the proposal shape on a doubling schedule.
            if self.t >= 100 && self.t.is_power_of_two() {
                self.refresh_covariance();
            }
        }
        a
    }

    fn end_warmup(&mut self) {}
}
