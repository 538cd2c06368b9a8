use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("population is empty")]
    EmptyPopulation,

    #[error("record {id:?} has {found} trait values, schema declares {expected}")]
    TraitLength {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite score {value} ({context})")]
    NonFinite { value: f64, context: String },

    #[error("bin width must be positive and finite, got {0}")]
    BinWidth(f64),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("probability {0} outside (0, 1]")]
    Probability(f64),

    #[error("theta {0} outside [0, 1]")]
    Theta(f64),

    #[error("transport plan marginal mismatch: {0}")]
    Marginal(String),

    #[error("score {score} is outside the support of the map")]
    OutsideSupport { score: f64 },

    #[error("rank cutoff k = {k} outside 1..={n}")]
    RankCutoff { k: usize, n: usize },

    #[error("negative gain {gain} for {id:?}")]
    NegativeGain { id: String, gain: f64 },

    #[error("group {0} is empty or unknown")]
    EmptyGroup(String),

    #[error("missing score for record {0:?}")]
    MissingScore(String),

    #[error("invalid synthetic spec: {0}")]
    SyntheticSpec(String),

    #[error("{path}: line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("id mismatch: {0}")]
    IdMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
