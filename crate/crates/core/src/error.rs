use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ball under-resolved: {0}")]
    UnderResolved(String),

    #[error("trivial solution on ball (radius {radius})")]
    TrivialSolution { radius: f64 },

    #[error("field vanishes beyond resolution (zero mass at radius {radius})")]
    VanishesBeyondResolution { radius: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unknown case `{name}`; available cases: {available}")]
    UnknownCase { name: String, available: String },

    #[error("masked region is empty: {0}")]
    EmptyMask(String),

    #[error("solver did not converge in {iterations} iterations (last relative residual {last:e})")]
    NoConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
