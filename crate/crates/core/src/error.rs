use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image: {0}")]
    Decode(String),

    #[error("image has zero size")]
    EmptyImage,

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported tiling family `{0}`")]
    UnsupportedFamily(String),

    #[error("frequency has non-finite components")]
    NonFinite,

    #[error("search ball around ({kx}, {ky}) with radius {radius} crosses the Nyquist bound {nyquist}")]
    BeyondNyquist {
        kx: f64,
        ky: f64,
        radius: f64,
        nyquist: f64,
    },

    #[error("analysis set would hold {count} elements, above the cap of {cap}")]
    TooManyElements { count: u128, cap: usize },

    #[error("transformation does not preserve the module (residual {residual:.3e} cycles on fundamental {index})")]
    NotModuleStable { index: usize, residual: f64 },

    #[error("basis is rank-deficient: {0}")]
    RankDeficient(String),

    #[error("need at least {needed} non-DC peaks, found {found}")]
    TooFewPeaks { needed: usize, found: usize },

    #[error("only {coverage:.3} of the peaks are indexed, below the required {required:.3}; choose other fundamental guesses")]
    InsufficientCoverage { coverage: f64, required: f64 },

    #[error("missing phase data: {0}")]
    MissingPhase(String),

    #[error("unsupported session schema version {0}")]
    Schema(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
