//! Analytic gradients against central finite differences.

use std::sync::Arc;

use hpp_core::data::GlmData;
use hpp_core::expfam::Family;
use hpp_core::glm_priors::{
    ci_log_kernel, ci_log_kernel_grad, gpp_log_kernel, gpp_log_kernel_grad, hpp_hyper_log_pdf_grad,
    hpp_hyper_log_pdf_with, power_prior_log_kernel, power_prior_log_kernel_grad, CiPrior, GppConfig,
    HppHyper, HyperpriorForm, NormConst, PowerPriorConfig,
};
use hpp_core::sampler::{BetaPrior, GlmPosterior, HppModel, Model, NormConstGradient, Target};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const POINTS: usize = 50;

fn assert_gradient<F: FnMut(&[f64]) -> f64>(label: &str, mut f: F, x: &[f64], grad: &[f64]) {
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = 1e-6 * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        let up = f(&xp);
        xp[j] = x[j] - h;
        let down = f(&xp);
        xp[j] = x[j];
        let fd = (up - down) / (2.0 * h);
        let err = (fd - grad[j]).abs() / grad[j].abs().max(1.0);
        assert!(err < 1e-5, "{label} coordinate {j}: analytic {} vs fd {fd}", grad[j]);
    }
}

fn design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { 0.5 * rng.sample::<f64, _>(StandardNormal) })
}

/// Coefficients whose linear predictor stays inside the canonical space.
fn coefficients(family: Family, rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |j, _| {
        let z: f64 = rng.sample(StandardNormal);
        match (family, j) {
            (Family::Gamma, 0) => -2.0 - 0.3 * z.abs(),
            (Family::Gamma, _) => 0.2 * z,
            _ => 0.7 * z,
        }
    })
}

fn means(family: Family, rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let u: f64 = rng.random();
        match family {
            Family::Bernoulli => 0.05 + 0.9 * u,
            Family::Poisson | Family::Gamma => 0.2 + 4.0 * u,
            Family::Normal => 6.0 * u - 3.0,
        }
    })
}

fn responses(family: Family, rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let u: f64 = rng.random();
        match family {
            Family::Bernoulli => f64::from(u < 0.5),
            Family::Poisson => (u * 6.0).floor(),
            Family::Gamma => 0.1 + 3.0 * u,
            Family::Normal => 4.0 * u - 2.0,
        }
    })
}

#[test]
fn ci_kernel_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for family in Family::ALL {
        for _ in 0..POINTS {
            let x = design(&mut rng, 12, 3);
            let prior = CiPrior::new(family, 0.3 + rng.random::<f64>(), means(family, &mut rng, 12)).unwrap();
            let beta = coefficients(family, &mut rng, 3);
            let grad = ci_log_kernel_grad(&beta, &prior, &x, family).unwrap();
            let f = |b: &[f64]| ci_log_kernel(&DVector::from_column_slice(b), &prior, &x, family).unwrap();
            assert_gradient(&format!("ci {family}"), f, beta.as_slice(), grad.as_slice());
        }
    }
}

#[test]
fn hyperprior_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for family in Family::ALL {
        for form in [HyperpriorForm::Conjugate, HyperpriorForm::NoJacobian] {
            for _ in 0..POINTS {
                let n = 6;
                let lambda0 = DVector::from_fn(n, |_, _| 1.5 + 10.0 * rng.random::<f64>());
                let hyper = HppHyper::new(family, lambda0, means(family, &mut rng, n)).unwrap();
                let m = means(family, &mut rng, n);
                let grad = hpp_hyper_log_pdf_grad(&m, &hyper, family, form);
                let f = |v: &[f64]| hpp_hyper_log_pdf_with(&DVector::from_column_slice(v), &hyper, family, form);
                assert_gradient(&format!("hyperprior {family} {form:?}"), f, m.as_slice(), grad.as_slice());
            }
        }
    }
}

#[test]
fn power_prior_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for family in Family::ALL {
        for _ in 0..POINTS {
            let x0 = design(&mut rng, 15, 3);
            let y0 = responses(family, &mut rng, 15);
            let cfg = PowerPriorConfig::new(family, 0.05 + 0.95 * rng.random::<f64>(), y0, x0).unwrap();
            let beta = coefficients(family, &mut rng, 3);
            let grad = power_prior_log_kernel_grad(&beta, &cfg, family).unwrap();
            let f = |b: &[f64]| power_prior_log_kernel(&DVector::from_column_slice(b), &cfg, family).unwrap();
            assert_gradient(&format!("power {family}"), f, beta.as_slice(), grad.as_slice());
        }
    }
}

#[test]
fn gaussian_power_prior_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..POINTS * 4 {
        let mu = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sigma = DVector::from_fn(3, |_, _| 0.1 + rng.random::<f64>());
        let cfg = GppConfig::new(mu, sigma, 0.1 + 0.9 * rng.random::<f64>()).unwrap();
        let beta = DVector::from_fn(3, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        let grad = gpp_log_kernel_grad(&beta, &cfg).unwrap();
        let f = |b: &[f64]| gpp_log_kernel(&DVector::from_column_slice(b), &cfg).unwrap();
        assert_gradient("gpp", f, beta.as_slice(), grad.as_slice());
    }
}

/// One-hot design with three cells of unequal size.
fn categorical_data(family: Family, rng: &mut ChaCha8Rng) -> GlmData {
    let sizes = [4, 6, 5];
    let cell: Vec<usize> = sizes.iter().enumerate().flat_map(|(j, &s)| std::iter::repeat_n(j, s)).collect();
    let n = cell.len();
    let x = DMatrix::from_fn(n, 3, |i, j| f64::from(cell[i] == j));
    GlmData::new(family, responses(family, rng, n), x).unwrap()
}

fn unconstrained_point(post: &GlmPosterior, family: Family, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let p = post.data().p();
    // Every one-hot coefficient is itself a canonical parameter.
    let beta = match family {
        Family::Gamma if post.data().groups.is_some() => DVector::from_fn(p, |_, _| -1.0 - rng.random::<f64>()),
        _ => coefficients(family, rng, p),
    };
    let m = means(family, rng, post.data().n());
    let (m_tilde, _) = hpp_core::sampler::transform_m(family, &m).unwrap();
    beta.iter().chain(m_tilde.iter()).copied().collect()
}

#[test]
fn joint_posterior_gradient_with_exact_normalizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    for family in Family::ALL {
        for form in [HyperpriorForm::Conjugate, HyperpriorForm::NoJacobian] {
            let data = Arc::new(categorical_data(family, &mut rng));
            let n = data.n();
            let hyper = HppHyper::broadcast(family, 4.0, means(family, &mut rng, n)).unwrap();
            let model = Model::Hpp(HppModel {
                lambda: 0.8,
                hyper,
                normconst: NormConst::ExactCategorical,
                form,
                gradient: NormConstGradient::Implicit,
            });
            let post = GlmPosterior::new(family, data, model).unwrap();
            for _ in 0..POINTS / 2 {
                let x = unconstrained_point(&post, family, &mut rng);
                let mut grad = vec![0.0; x.len()];
                let mut target = post.clone();
                let value = target.log_density_and_gradient(&x, &mut grad);
                assert!(value.is_finite());
                let mut eval = post.clone();
                assert_gradient(&format!("joint exact {family}"), |v| eval.log_density(v), &x, &grad);
            }
        }
    }
}

#[test]
fn joint_posterior_gradient_with_laplace_normalizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    for family in Family::ALL {
        let n = 10;
        let x = design(&mut rng, n, 3);
        let data = Arc::new(GlmData::new(family, responses(family, &mut rng, n), x).unwrap());
        let hyper = HppHyper::broadcast(family, 3.0, means(family, &mut rng, n)).unwrap();
        let model = Model::Hpp(HppModel {
            lambda: 1.2,
            hyper,
            normconst: NormConst::Laplace,
            form: HyperpriorForm::Conjugate,
            gradient: NormConstGradient::Implicit,
        });
        let post = GlmPosterior::new(family, data, model).unwrap();
        for _ in 0..POINTS / 5 {
            let x = unconstrained_point(&post, family, &mut rng);
            let mut grad = vec![0.0; x.len()];
            let mut target = post.clone();
            let value = target.log_density_and_gradient(&x, &mut grad);
            assert!(value.is_finite());
            let mut eval = post.clone();
            assert_gradient(&format!("joint laplace {family}"), |v| eval.log_density(v), &x, &grad);
        }
    }
}

#[test]
fn beta_only_posterior_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for family in Family::ALL {
        let n = 12;
        let x = design(&mut rng, n, 3);
        let data = Arc::new(GlmData::new(family, responses(family, &mut rng, n), x).unwrap());
        let priors = vec![
            BetaPrior::Flat,
            BetaPrior::Ci(CiPrior::new(family, 0.7, means(family, &mut rng, n)).unwrap()),
            BetaPrior::Power(
                PowerPriorConfig::new(family, 0.5, responses(family, &mut rng, 9), design(&mut rng, 9, 3)).unwrap(),
            ),
            BetaPrior::Gaussian(
                GppConfig::new(DVector::from_element(3, 0.1), DVector::from_element(3, 0.5), 0.6).unwrap(),
            ),
        ];
        for prior in priors {
            let label = format!("{family} {prior:?}");
            let post = match GlmPosterior::new(family, Arc::clone(&data), Model::Beta(prior)) {
                Ok(p) => p,
                // Small random samples can be separated under a flat prior.
                Err(hpp_core::Error::Separation) => continue,
                Err(e) => panic!("{label}: {e}"),
            };
            for _ in 0..10 {
                let beta = coefficients(family, &mut rng, 3);
                let mut grad = vec![0.0; 3];
                let mut target = post.clone();
                target.log_density_and_gradient(beta.as_slice(), &mut grad);
                let mut eval = post.clone();
                assert_gradient(&label, |v| eval.log_density(v), beta.as_slice(), &grad);
            }
        }
    }
}
