//! Static-length HMC with dual-averaging step size and windowed metric
//! adaptation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ChainState, Kernel, Metric, Target};
use crate::error::{Error, Result};

const DIVERGENCE: f64 = 1000.0;

struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    t: f64,
}

impl DualAveraging {
    fn new(eps: f64) -> Self {
        Self {
            mu: (10.0 * eps).ln(),
            h_bar: 0.0,
            log_eps: eps.ln(),
            log_eps_bar: 0.0,
            t: 0.0,
        }
    }

    fn update(&mut self, accept_stat: f64, delta: f64) {
        const GAMMA: f64 = 0.05;
        const T0: f64 = 10.0;
        const KAPPA: f64 = 0.75;
        self.t += 1.0;
        let eta = 1.0 / (self.t + T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (delta - accept_stat);
        self.log_eps = self.mu - self.t.sqrt() / GAMMA * self.h_bar;
        let w = self.t.powf(-KAPPA);
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar;
    }
}

/// Inverse metric M⁻¹ (a covariance estimate) with its Cholesky factor.
struct InvMetric {
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl InvMetric {
    fn diagonal(var: &DVector<f64>) -> Self {
        Self {
            cov: DMatrix::from_diagonal(var),
            chol: DMatrix::from_diagonal(&var.map(f64::sqrt)),
        }
    }

    /// p ~ N(0, M) with M = (LL′)⁻¹, i.e. p = L⁻ᵀz.
    fn draw_momentum(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let z = DVector::from_fn(self.cov.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
        self.chol
            .transpose()
            .solve_upper_triangular(&z)
            .expect("metric factor has a positive diagonal")
    }

    fn kinetic(&self, p: &DVector<f64>) -> f64 {
        let v = self.chol.transpose() * p;
        0.5 * v.norm_squared()
    }

    fn velocity(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.cov * p
    }
}

/// Covariance accumulator for one adaptation window.
struct Welford {
    count: f64,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl Welford {
    fn new(d: usize) -> Self {
        Self {
            count: 0.0,
            mean: DVector::zeros(d),
            m2: DMatrix::zeros(d, d),
        }
    }

    fn add(&mut self, x: &[f64]) {
        let x = DVector::from_column_slice(x);
        self.count += 1.0;
        let delta = &x - &self.mean;
        self.mean += &delta / self.count;
        let delta2 = &x - &self.mean;
        self.m2 += &delta * delta2.transpose();
    }

    /// Sample covariance shrunk toward 1e-3·I.
    fn regularized(&self, kind: Metric) -> Option<InvMetric> {
        let n = self.count;
        if n < 3.0 {
            return None;
        }
        let d = self.mean.len();
        let shrink = n / (n + 5.0);
        let ridge = 1e-3 * 5.0 / (n + 5.0);
        let cov = &self.m2 / (n - 1.0);
        match kind {
            Metric::Diagonal => {
                let var = cov.diagonal().map(|v| shrink * v + ridge);
                Some(InvMetric::diagonal(&var))
            }
            Metric::Dense => {
                let reg = cov * shrink + DMatrix::identity(d, d) * ridge;
                let chol = reg.clone().cholesky()?.l();
                Some(InvMetric { cov: reg, chol })
            }
        }
    }
}

/// Warmup iterations that close a metric-adaptation window.
fn window_ends(n_warmup: usize) -> (usize, Vec<usize>) {
    if n_warmup < 20 {
        return (n_warmup, Vec::new());
    }
    let (mut init, mut term, mut base) = (75, 50, 25);
    if init + term + base > n_warmup {
        init = (0.15 * n_warmup as f64) as usize;
        term = (0.1 * n_warmup as f64) as usize;
        base = n_warmup - init - term;
    }
    let last = n_warmup - term;
    let mut ends = Vec::new();
    let (mut start, mut size) = (init, base);
    loop {
        let mut end = start + size;
        if end + 2 * size > last {
            end = last;
        }
        ends.push(end);
        if end >= last {
            break;
        }
        start = end;
        size *= 2;
    }
    (init, ends)
}

pub(crate) struct Hmc {
    steps: usize,
    kind: Metric,
    target_accept: f64,
    metric: InvMetric,
    eps: f64,
    da: DualAveraging,
    window: Welford,
    init_buffer: usize,
    ends: Vec<usize>,
    iteration: usize,
    grad: Vec<f64>,
    divergences: usize,
}

impl Hmc {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Target>(
        target: &mut T,
        state: &ChainState,
        scale: &[f64],
        steps: usize,
        kind: Metric,
        target_accept: f64,
        n_warmup: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let d = state.x.len();
        let var = DVector::from_iterator(d, scale.iter().map(|s| s * s));
        let mut grad = vec![0.0; d];
        target.log_density_and_gradient(&state.x, &mut grad);
        let (init_buffer, ends) = window_ends(n_warmup);
        let mut hmc = Self {
            steps,
            kind,
            target_accept,
            metric: InvMetric::diagonal(&var),
            eps: 1.0,
            da: DualAveraging::new(1.0),
            window: Welford::new(d),
            init_buffer,
            ends,
            iteration: 0,
            grad,
            divergences: 0,
        };
        hmc.eps = hmc.find_step_size(target, state, rng)?;
        hmc.da = DualAveraging::new(hmc.eps);
        Ok(hmc)
    }

    /// Double or halve ε until one leapfrog step crosses acceptance 0.8.
    fn find_step_size<T: Target>(&mut self, target: &mut T, state: &ChainState, rng: &mut ChaCha8Rng) -> Result<f64> {
        let mut eps = self.eps;
        let mut direction = 0.0;
        for _ in 0..100 {
            let p = self.metric.draw_momentum(rng);
            let h0 = -state.logp + self.metric.kinetic(&p);
            let mut x = DVector::from_column_slice(&state.x);
            let mut grad = DVector::from_column_slice(&self.grad);
            let (logp, p1) = self.leapfrog(target, &mut x, &mut grad, p, eps, 1);
            let h1 = if logp.is_finite() {
                -logp + self.metric.kinetic(&p1)
            } else {
                f64::INFINITY
            };
            let delta = h0 - h1;
            let good = delta > 0.8f64.ln();
            if direction == 0.0 {
                direction = if good { 1.0 } else { -1.0 };
            } else if (direction > 0.0) != good {
                return Ok(eps);
            }
            eps = if direction > 0.0 { 2.0 * eps } else { 0.5 * eps };
            if !(1e-12..=1e7).contains(&eps) {
                break;
            }
        }
        if eps > 1e-12 && eps.is_finite() {
            Ok(eps.min(1e7))
        } else {
            Err(Error::Precision("initial HMC step size"))
        }
    }

    /// `n` leapfrog steps; returns the final log density and momentum.
    fn leapfrog<T: Target>(
        &self,
        target: &mut T,
        x: &mut DVector<f64>,
        grad: &mut DVector<f64>,
        mut p: DVector<f64>,
        eps: f64,
        n: usize,
    ) -> (f64, DVector<f64>) {
        let mut logp = f64::NEG_INFINITY;
        p += &*grad * (0.5 * eps);
        for step in 0..n {
            *x += self.metric.velocity(&p) * eps;
            logp = target.log_density_and_gradient(x.as_slice(), grad.as_mut_slice());
            if !logp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return (f64::NEG_INFINITY, p);
            }
            let w = if step + 1 == n { 0.5 } else { 1.0 };
            p += &*grad * (w * eps);
        }
        (logp, p)
    }

    fn adapt_metric<T: Target>(&mut self, target: &mut T, state: &ChainState, rng: &mut ChaCha8Rng) {
        if let Some(m) = self.window.regularized(self.kind) {
            self.metric = m;
            if let Ok(eps) = self.find_step_size(target, state, rng) {
                self.eps = eps;
            }
            self.da = DualAveraging::new(self.eps);
        }
        self.window = Welford::new(state.x.len());
    }
}

impl<T: Target> Kernel<T> for Hmc {
    fn step(&mut self, target: &mut T, state: &mut ChainState, rng: &mut ChaCha8Rng, warmup: bool) -> f64 {
        let eps = if warmup { self.da.log_eps.exp() } else { self.eps };
        let eps = eps * rng.random_range(0.9..1.1);
        let p0 = self.metric.draw_momentum(rng);
        let h0 = -state.logp + self.metric.kinetic(&p0);
        let mut x = DVector::from_column_slice(&state.x);
        let mut grad = DVector::from_column_slice(&self.grad);
        let (logp, p1) = self.leapfrog(target, &mut x, &mut grad, p0, eps, self.steps);
        let h1 = if logp.is_finite() {
            -logp + self.metric.kinetic(&p1)
        } else {
            f64::INFINITY
        };
        let log_ratio = h0 - h1;
        let accept_stat = if log_ratio.is_nan() {
            0.0
        } else {
            log_ratio.min(0.0).exp()
        };
        if !warmup && !(log_ratio > -DIVERGENCE) {
            self.divergences += 1;
        }
        if accept_stat > 0.0 && rng.random::<f64>() < accept_stat {
            state.x.copy_from_slice(x.as_slice());
            state.logp = logp;
            self.grad.copy_from_slice(grad.as_slice());
        }

        if warmup {
            self.iteration += 1;
            self.da.update(accept_stat, self.target_accept);
            let it = self.iteration;
            if it > self.init_buffer && self.ends.last().is_some_and(|&last| it <= last) {
                self.window.add(&state.x);
            }
            if self.ends.contains(&it) {
                self.adapt_metric(target, state, rng);
            }
        }
        accept_stat
    }

    fn end_warmup(&mut self) {
        if self.da.t > 0.0 {
            self.eps = self.da.log_eps_bar.exp();
        }
    }

    fn step_size(&self) -> Option<f64> {
        Some(self.eps)
    }

    fn divergences(&self) -> usize {
        self.divergences
    }
}
