use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transition matrix row {row} sums to {sum} (or has a negative entry)")]
    NonStochastic { row: usize, sum: f64 },
    #[error("transition matrix is not primitive: no strictly positive power up to {max_power}")]
    NotPrimitive { max_power: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("enumeration budget exceeded: {needed} states > {budget}")]
    BudgetExceeded { needed: f64, budget: f64 },
    #[error("empty set: {0}")]
    EmptySet(String),
    #[error("empty input")]
    EmptyInput,
    #[error("block {block} mixes labels; sets are not separated by gap {gap}")]
    MixedBlock { block: usize, gap: u64 },
    #[error("path of length {len} does not cover index {needed}")]
    PathTooShort { len: usize, needed: u64 },
    #[error("degenerate variance at N = {n}: estimate {estimate} with stderr {stderr}")]
    DegenerateVariance { n: u64, estimate: f64, stderr: f64 },
    #[error("empty sample")]
    EmptySample,
    #[error("need at least {required} replications, got {got}")]
    InsufficientReplications { required: usize, got: usize },
    #[error("d_K estimate {estimate} at N = {n} is below 3 x stderr ({stderr}); increase T")]
    NoiseFloor { n: u64, estimate: f64, stderr: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("{coordinates}: {source}")]
    At {
        coordinates: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn at(coordinates: impl Into<String>, source: Error) -> Self {
        Error::At {
            coordinates: coordinates.into(),
            source: Box::new(source),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
