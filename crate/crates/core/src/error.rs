use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its valid domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("rect {x},{y} {w}x{h} is outside a {width}x{height} image")]
    Bounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },

    /// The dataset cannot support the requested operation (e.g. a class is empty).
    #[error("dataset error: {0}")]
    Dataset(String),

    /// Non-finite or otherwise unusable numeric data.
    #[error("data error: {0}")]
    Data(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("lookup error: no entry for key `{0}`")]
    Lookup(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data or files rather than bad arguments.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Parameter(_) | Error::Config(_))
    }
}
