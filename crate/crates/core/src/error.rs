use thiserror::Error;

use crate::expfam::Family;

/// Errors produced by the inference library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("canonical parameter {theta} is outside the parameter space of the {family} family")]
    InvalidCanonical { family: Family, theta: f64 },

    #[error("mean value {mu} is outside the open mean domain of the {family} family")]
    MeanDomain { family: Family, mu: f64 },

    #[error("response {value} at index {index} is outside the support of the {family} family")]
    DataSupport {
        family: Family,
        index: usize,
        value: f64,
    },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value while evaluating {0}")]
    Precision(&'static str),

    #[error("limiting approximation unavailable: {0}")]
    ApproximationUnavailable(String),

    #[error("IRLS did not converge within {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        last_iterate: Vec<f64>,
    },

    #[error("fitted means diverge to the boundary of the mean domain (separation)")]
    Separation,

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(&'static str),

    #[error("unsupported design: {0}")]
    UnsupportedDesign(String),

    #[error("inverse link saturates at row {index}: linear predictor {eta} maps to the boundary")]
    Saturation { index: usize, eta: f64 },

    #[error("infeasible hyperprior variance for components {indices:?}")]
    InfeasibleVariance { indices: Vec<usize> },

    #[error("need at least {required} draws, found {found}")]
    InsufficientDraws { required: usize, found: usize },

    #[error("draws show no variation")]
    InsufficientVariation,

    #[error("chain {chain} is stuck: warmup acceptance rate {rate:.5}")]
    StuckChain { chain: usize, rate: f64 },

    #[error("log density is not finite at the initial point of chain {chain}")]
    NonFiniteInit { chain: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            found,
        })
    }
}
