use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("region has {sites} sites, enumeration cutoff is {cutoff}")]
    EnumerationCapacity { sites: usize, cutoff: usize },

    #[error("transfer matrix needs an axis-aligned d=2 box with min side <= {cutoff}: {reason}")]
    UnsupportedShape { cutoff: usize, reason: String },

    #[error("{0}")]
    Domain(String),

    #[error("realization has no Gaussian coordinates (z / u'(z) missing)")]
    MissingGaussianCoordinates,

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
