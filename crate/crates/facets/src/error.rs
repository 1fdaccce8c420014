use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown norm family `{0}` (known: {1})")]
    UnknownFamily(String, String),

    #[error("tension table is not symmetric: {0}")]
    AsymmetricTable(String),

    #[error("tension table does not define a norm: {0}")]
    NotANorm(String),

    #[error("loops {0} and {1} cross")]
    CrossingLoops(usize, usize),

    #[error("optimum uses more than {0} layers; raise l_max")]
    LayerCapExceeded(usize),

    #[error("volume {0} exceeds the exact-tail limit of {1} cells")]
    VolumeTooLarge(u64, u64),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
