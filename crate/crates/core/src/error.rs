use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("degenerate extent: all points coincide")]
    DegenerateExtent,
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
    #[error("requested {requested} items but only {available} are available")]
    TooFew { requested: usize, available: usize },
    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("mesh is not watertight: {} offending edge(s), first {:?}", .0.len(), .0.first())]
    NotWatertight(Vec<(usize, usize)>),
    #[error("empty truncated region")]
    EmptyTruncatedRegion,
    #[error("non-smooth point: cluster assignment changed under perturbation")]
    NonSmoothPoint,
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
