use thiserror::Error;

/// Errors raised by the distribution engine, the process kernel and the oracles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid intensity: {0}")]
    InvalidIntensity(String),

    #[error("negative hazard rate {rate} at s = {at}")]
    NegativeRate { at: f64, rate: f64 },

    #[error("quadrature did not converge on [{lo}, {hi}] (error estimate {estimate:e})")]
    QuadratureNonConvergence { lo: f64, hi: f64, estimate: f64 },

    #[error("jump mass {mass} at {location} exceeds remaining survival {available}")]
    JumpExceedsSurvival { location: f64, mass: f64, available: f64 },

    #[error("distribution is mass-deficient: {0}")]
    MassDeficient(String),

    #[error("inversion exceeded its iteration budget of {0}")]
    InversionBudget(usize),

    #[error("moment of order {order} is infinite")]
    InfiniteMoment { order: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("switching delay {delay} exceeds bound {bound}")]
    DelayBound { delay: f64, bound: f64 },

    #[error("time {t} outside trajectory range [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },

    #[error("generator is reducible: {0}")]
    Reducible(String),

    #[error("singular linear system")]
    Singular,

    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
