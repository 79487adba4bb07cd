use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the sampling pipeline.
///
/// Solver non-convergence is not an error: it is reported as a flag on the
/// solver results so callers can decide whether to drop or keep the output.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate triangle{}", face.map(|f| format!(" (face {f})")).unwrap_or_default())]
    DegenerateTriangle { face: Option<usize> },

    #[error("mesh has no non-degenerate face")]
    DegenerateMesh,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("measure has no support")]
    EmptyMeasure,

    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("problem size {size} exceeds the limit of {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("sites {0} and {1} coincide")]
    DuplicateSites(usize, usize),

    #[error("block size {0} outside 1..=30")]
    EllOutOfRange(usize),

    #[error("network parameters contain non-finite values")]
    NonFiniteParams,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("bad magic bytes")]
    BadMagic,

    #[error("unsupported file version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("file truncated")]
    TruncatedFile,

    #[error("all face areas are zero")]
    AllZeroAreas,

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("point cloud has no normals")]
    MissingNormals,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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
