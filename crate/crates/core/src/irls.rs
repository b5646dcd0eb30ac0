//! Newton–Raphson (IRLS) maximization of precision·[r′Xβ − J′b(Xβ)].
//!
//! With a canonical link the Fisher and observed information coincide, so
//! each Newton step is one weighted least-squares solve with weights b̈(η).

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::expfam::Family;

#[derive(Debug, Clone, Copy)]
pub struct IrlsOptions {
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Relative change of the log kernel between iterations.
    pub rel_tol: f64,
    /// Sup-norm of the score, scaled by n and the data magnitude.
    pub score_tol: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            max_halvings: 20,
            rel_tol: 1e-10,
            score_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    /// precision·X′WX at the maximizer.
    pub observed_information: DMatrix<f64>,
    pub log_kernel_at_max: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log kernel after each accepted step, starting from the initial value.
    pub kernel_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MleFit {
    pub fit: FitResult,
    pub standard_errors: DVector<f64>,
}

/// precision·Σ[rᵢηᵢ − b(ηᵢ)] at η = Xβ; −∞ outside the parameter space.
pub fn log_kernel(
    family: Family,
    response: &DVector<f64>,
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    precision: f64,
) -> Result<f64> {
    check_len("design rows", response.len(), x.nrows())?;
    check_len("coefficients", x.ncols(), beta.len())?;
    let eta = x * beta;
    Ok(precision * kernel_at(family, response, &eta))
}

fn kernel_at(family: Family, r: &DVector<f64>, eta: &DVector<f64>) -> f64 {
    let mut total = 0.0;
    for (&ri, &ei) in r.iter().zip(eta.iter()) {
        if family.check_canonical(ei).is_err() {
            return f64::NEG_INFINITY;
        }
        total += ri * ei - family.cumulant_unchecked(ei);
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

fn intercept_column(x: &DMatrix<f64>) -> Option<usize> {
    (0..x.ncols()).find(|&j| x.column(j).iter().all(|&v| v == 1.0))
}

fn starting_values(family: Family, r: &DVector<f64>, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = r.len() as f64;
    let p = x.ncols();
    if let Some(j) = intercept_column(x) {
        let mean = r.sum() / n;
        if family.mean_domain().contains(mean) {
            let mut beta = DVector::zeros(p);
            beta[j] = family.canonical_unchecked(mean);
            return Ok(beta);
        }
    }
    // Least squares on the link scale of a slightly shrunken response.
    let z = r.map(|ri| {
        let mu = match family {
            Family::Bernoulli => (ri + 0.5) / 2.0,
            Family::Poisson => ri + 0.1,
            Family::Gamma | Family::Normal => ri,
        };
        family.canonical_unchecked(mu)
    });
    let xtx = x.transpose() * x;
    let chol = xtx
        .cholesky()
        .ok_or(Error::Singular("X'X in the starting-value fit"))?;
    Ok(chol.solve(&(x.transpose() * z)))
}

/// Maximize with default options, starting from the canonical start.
pub fn irls(
    family: Family,
    response: &DVector<f64>,
    x: &DMatrix<f64>,
    precision: f64,
) -> Result<FitResult> {
    irls_with(family, response, x, precision, None, &IrlsOptions::default())
}

/// Maximize, optionally warm-starting from `start`.
pub fn irls_with(
    family: Family,
    response: &DVector<f64>,
    x: &DMatrix<f64>,
    precision: f64,
    start: Option<&DVector<f64>>,
    opts: &IrlsOptions,
) -> Result<FitResult> {
    check_len("design rows", response.len(), x.nrows())?;
    if !(precision > 0.0 && precision.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "precision must be positive, got {precision}"
        )));
    }
    for (index, &value) in response.iter().enumerate() {
        if !family.in_response_hull(value) {
            return Err(Error::DataSupport {
                family,
                index,
                value,
            });
        }
    }

    let xt = x.transpose();
    let mut beta = match start {
        Some(s) if s.len() == x.ncols() && kernel_at(family, response, &(x * s)).is_finite() => {
            s.clone()
        }
        _ => starting_values(family, response, x)?,
    };
    let mut eta = x * &beta;
    let mut kernel = kernel_at(family, response, &eta);
    if !kernel.is_finite() {
        return Err(Error::NonConvergence {
            iterations: 0,
            last_iterate: beta.as_slice().to_vec(),
        });
    }

    let max_r = response.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
    let max_x = x.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
    let score_limit = opts.score_tol * response.len() as f64 * max_r * max_x;

    let mut trace = vec![precision * kernel];
    let mut rel_change = f64::INFINITY;
    let mut iterations = 0;
    loop {
        let mu = eta.map(|e| family.mean_unchecked(e));
        let w = eta.map(|e| family.cumulant_second_unchecked(e));
        let score = &xt * (response - &mu);
        let info = weighted_gram(x, &w);
        let score_norm = score.amax();

        if score_norm <= score_limit && rel_change < opts.rel_tol {
            check_boundary(family, response, &mu)?;
            return Ok(FitResult {
                beta_hat: beta,
                observed_information: info * precision,
                log_kernel_at_max: precision * kernel,
                iterations,
                converged: true,
                kernel_trace: trace,
            });
        }
        if iterations >= opts.max_iter {
            check_boundary(family, response, &mu)?;
            return Err(Error::NonConvergence {
                iterations,
                last_iterate: beta.as_slice().to_vec(),
            });
        }
        iterations += 1;

        let chol = match info.clone().cholesky() {
            Some(c) => c,
            None => {
                check_boundary(family, response, &mu)?;
                return Err(Error::Singular("information matrix in IRLS"));
            }
        };
        let delta = chol.solve(&score);

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let candidate = &beta + &delta * step;
            let cand_eta = x * &candidate;
            let cand_kernel = kernel_at(family, response, &cand_eta);
            if cand_kernel.is_finite() && cand_kernel >= kernel - 1e-13 * (1.0 + kernel.abs()) {
                accepted = Some((candidate, cand_eta, cand_kernel));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((b, e, k)) => {
                rel_change = (k - kernel).abs() / (1.0 + kernel.abs());
                beta = b;
                eta = e;
                kernel = k;
                trace.push(precision * kernel);
            }
            None => {
                // No ascent is possible: the current point is the numerical
                // optimum if the score is small, otherwise the fit failed.
                if score_norm <= score_limit * 1e3 {
                    rel_change = 0.0;
                    continue;
                }
                return Err(Error::NonConvergence {
                    iterations,
                    last_iterate: beta.as_slice().to_vec(),
                });
            }
        }
    }
}

fn check_boundary(family: Family, response: &DVector<f64>, mu: &DVector<f64>) -> Result<()> {
    let diverged = match family {
        Family::Bernoulli => mu
            .iter()
            .zip(response.iter())
            .any(|(&m, _)| m.min(1.0 - m) < 1e-10),
        Family::Poisson => mu.iter().any(|&m| m < 1e-10),
        _ => false,
    };
    if diverged {
        Err(Error::Separation)
    } else {
        Ok(())
    }
}

/// X′ diag(w) X.
pub(crate) fn weighted_gram(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut xw = x.clone();
    for (mut row, &wi) in xw.row_iter_mut().zip(w.iter()) {
        row *= wi;
    }
    x.transpose() * xw
}

/// Maximum-likelihood fit with standard errors from the inverse information.
pub fn mle_with_se(family: Family, y: &DVector<f64>, x: &DMatrix<f64>) -> Result<MleFit> {
    for (index, &value) in y.iter().enumerate() {
        if !family.in_support(value) {
            return Err(Error::DataSupport {
                family,
                index,
                value,
            });
        }
    }
    let fit = irls(family, y, x, 1.0)?;
    let inverse = fit
        .observed_information
        .clone()
        .cholesky()
        .ok_or(Error::Singular("information matrix at the MLE"))?
        .inverse();
    let standard_errors = inverse.diagonal().map(f64::sqrt);
    Ok(MleFit {
        fit,
        standard_errors,
    })
}
