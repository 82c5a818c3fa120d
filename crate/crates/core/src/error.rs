use std::path::PathBuf;

use crate::raster::Class;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {0:?}, expected \"IMTF\"")]
    BadMagic([u8; 4]),
    #[error("unsupported tensor format version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported tensor dtype code {0}")]
    UnsupportedDtype(u8),
    #[error("truncated tensor: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after tensor payload")]
    TrailingBytes(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value at valid pixel ({h}, {v})")]
    NonFinite { h: usize, v: usize },
    #[error("no valid pixels")]
    NoValidPixels,
    #[error("class {0:?} has no training pixels")]
    EmptyClass(Class),
    #[error("unknown class label {0}")]
    UnknownLabel(u8),
    #[error("pixel ({h}, {v}) is invalid or out of bounds")]
    InvalidPixel { h: usize, v: usize },
    #[error("missing feature tensor {0}")]
    MissingFeatures(PathBuf),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
