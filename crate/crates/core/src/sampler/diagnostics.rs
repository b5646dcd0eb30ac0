//! Split-R̂ and multi-chain effective sample size.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Autocovariances at lags 0..n, divided by n.
pub fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / (len as f64 * n as f64);
    buf[..n].iter().map(|c| c.re * scale).collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Split every chain into halves, trimming to a common even length.
fn split_chains(chains: &[&[f64]]) -> Option<Vec<Vec<f64>>> {
    let n = chains.iter().map(|c| c.len()).min()?;
    let half = n / 2;
    if half < 2 {
        return None;
    }
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        out.push(c[..half].to_vec());
        out.push(c[n - half..].to_vec());
    }
    Some(out)
}

/// Potential scale reduction on split chains; `None` when too short or
/// when every draw is identical.
pub fn split_rhat(chains: &[&[f64]]) -> Option<f64> {
    let split = split_chains(chains)?;
    let n = split[0].len() as f64;
    let means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let w = split.iter().map(|c| sample_variance(c)).sum::<f64>() / split.len() as f64;
    let b_over_n = sample_variance(&means);
    if !(w > 0.0) {
        return None;
    }
    let var_plus = (n - 1.0) / n * w + b_over_n;
    Some((var_plus / w).sqrt())
}

/// Effective sample size with Geyer's initial monotone sequence on split
/// chains. Antithetic chains may exceed the number of draws; the estimate
/// is capped at N·log₁₀N.
pub fn effective_sample_size(chains: &[&[f64]]) -> Option<f64> {
    let split = split_chains(chains)?;
    let m = split.len();
    let n = split[0].len();
    let acov: Vec<Vec<f64>> = split.iter().map(|c| autocovariance(c)).collect();
    let chain_means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let chain_vars: Vec<f64> = acov
        .iter()
        .map(|a| a[0] * n as f64 / (n as f64 - 1.0))
        .collect();
    let mean_var = chain_vars.iter().sum::<f64>() / m as f64;
    let mut var_plus = mean_var * (n as f64 - 1.0) / n as f64;
    if m > 1 {
        var_plus += sample_variance(&chain_means);
    }
    if !(var_plus > 0.0) {
        return None;
    }
    let acov_mean = |t: usize| acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;
    let rho = |t: usize| 1.0 - (mean_var - acov_mean(t)) / var_plus;

    let mut rho_hat = vec![0.0; n + 1];
    let mut rho_even = 1.0;
    let mut rho_odd = rho(1);
    rho_hat[0] = rho_even;
    rho_hat[1] = rho_odd;
    let mut s = 1;
    while s + 4 < n && rho_even + rho_odd > 0.0 {
        rho_even = rho(s + 1);
        rho_odd = rho(s + 2);
        if rho_even + rho_odd >= 0.0 {
            rho_hat[s + 1] = rho_even;
            rho_hat[s + 2] = rho_odd;
        }
        s += 2;
    }
    let max_s = s;
    if rho_even > 0.0 {
        rho_hat[max_s + 1] = rho_even;
    }
    // Initial monotone sequence.
    let mut s = 1;
    while s + 3 <= max_s {
        if rho_hat[s + 1] + rho_hat[s + 2] > rho_hat[s - 1] + rho_hat[s] {
            rho_hat[s + 1] = (rho_hat[s - 1] + rho_hat[s]) / 2.0;
            rho_hat[s + 2] = rho_hat[s + 1];
        }
        s += 2;
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho_hat[..max_s].iter().sum::<f64>() + rho_hat[max_s + 1];
    Some(total / tau.max(1.0 / total.log10()))
}
