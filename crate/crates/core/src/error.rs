use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("{what} did not converge (achieved error estimate {estimate:e})")]
    Convergence { what: &'static str, estimate: f64 },

    #[error("probability {value} outside [0, 1] at zeta = {zeta}")]
    NumericalIntegrity { zeta: f64, value: f64 },

    #[error("non-finite series coefficient at K = {k}, q = {q}")]
    Overflow { k: usize, q: usize },

    #[error("photon-number truncation reached N = {n_cap} with only {mass} of the probability mass")]
    Truncation { n_cap: usize, mass: f64 },

    #[error("Taylor oracle fit is ill-conditioned (condition number {condition:e})")]
    OracleUnreliable { condition: f64 },

    #[error("coherence g^(K) undefined for a state with zero mean photon number")]
    UndefinedCoherence,

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
