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

    #[error("row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("label column `{0}` not found in header")]
    MissingColumn(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feature count mismatch: model expects {expected}, data has {found}")]
    FeatureMismatch { expected: usize, found: usize },

    #[error("clustering produced {found} cluster(s) on the {side} side, at least 2 required")]
    TooFewClusters { found: usize, side: &'static str },

    #[error("no comparable samples: every sample is labelled as noise")]
    AllNoise,

    #[error("label {label} is outside the permutation domain 0..{size}")]
    LabelOutOfRange { label: i32, size: usize },

    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("cell k={k:?} fold={fold} rep={rep} failed: {source}")]
    Cell {
        k: Option<usize>,
        fold: usize,
        rep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("k_found < 2 in all cells")]
    NoAutoKGroup,

    #[error("serialization: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
