use thiserror::Error;

/// Errors raised by the CBO toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The objective returned a non-finite value at the given particle.
    #[error("objective is not finite at particle {particle} (value {value})")]
    NumericDomain { particle: usize, value: f64 },

    /// A particle left the finite reals during a step.
    #[error("divergence at step {step}: particle {particle} has a non-finite coordinate")]
    Divergence { step: usize, particle: usize },

    #[error("decay rate is infinite for sigma = 0")]
    InfiniteRate,

    #[error("parameters are not contractive: 2*lambda = {two_lambda} <= d*sigma^2 = {d_sigma_sq}")]
    NonContractive { two_lambda: f64, d_sigma_sq: f64 },

    #[error("accuracy eps = {eps} must lie in (0, V0 = {v0}]")]
    InvalidAccuracy { eps: f64, v0: f64 },

    #[error("initial measure puts no mass on the ball of radius {radius}")]
    UnsupportedInitialization { radius: f64 },

    #[error("ball has zero mass; the Laplace bound is vacuous")]
    EmptyBall,
}

pub type Result<T> = std::result::Result<T, Error>;
