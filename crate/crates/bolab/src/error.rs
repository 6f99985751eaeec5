use std::path::PathBuf;

/// Errors raised by the laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("field has a nonzero mean (coefficient at n = 0 is {0}); operator symbol undefined there")]
    NonZeroMean(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed field: {0}")]
    MalformedField(String),

    #[error("term `{term}` needs an evaluation grid of {required} points, cap is {cap}")]
    BandwidthCap {
        term: String,
        required: usize,
        cap: usize,
    },

    #[error("density is not real-valued: {0}")]
    ComplexDensity(String),

    #[error("energy normalisation degenerate for k = {k}: {reason}")]
    DegenerateNormalization { k: usize, reason: String },

    #[error("L2 drift {drift:.3e} exceeded tolerance {tolerance:.1e} at t = {time:.6}; try a smaller dt")]
    DriftExceeded {
        time: f64,
        drift: f64,
        tolerance: f64,
    },

    #[error("time integration did not converge under dt-halving: estimate {estimate:.3e} > {tolerance:.1e}")]
    NonConvergence { estimate: f64, tolerance: f64 },

    #[error("total importance weight is zero; increase R")]
    ZeroTotalWeight,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
