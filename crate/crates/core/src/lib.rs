//! Bayesian generalized linear models under hierarchical prediction priors.
//!
//! The crate covers the exponential-family building blocks, closed-form
//! results for intercept-only and normal linear models, Laplace-approximated
//! normalizing constants for regression, and an MCMC engine with the usual
//! convergence diagnostics.

pub mod data;
pub mod density;
pub mod elicitation;
pub mod error;
pub mod expfam;
pub mod glm_priors;
pub mod iid_hpp;
pub mod irls;
pub mod linear_closed;
pub mod quadrature;
pub mod sampler;
pub mod summary;

pub use data::GlmData;
pub use error::{Error, Result};
pub use expfam::Family;
