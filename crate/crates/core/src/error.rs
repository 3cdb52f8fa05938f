use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate mesh: total surface area is zero")]
    DegenerateMesh,

    #[error("voxel edge length must be positive, got {0}")]
    InvalidVoxelEdge(f64),

    #[error("invalid contact maps: {0}")]
    InvalidMaps(String),

    #[error("part label {label} out of range for {parts} parts")]
    PartLabelOutOfRange { label: usize, parts: usize },

    #[error("non-finite signed distance for part {part}")]
    NonFiniteSdf { part: usize },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("direction undefined: point coincides with the origin of part {part}")]
    UndefinedDirection { part: usize },

    #[error("part index {index} out of range for {parts} parts")]
    PartIndexOutOfRange { index: usize, parts: usize },

    #[error("empty isosurface")]
    EmptyIsosurface,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("format error in {path:?}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("simulation engine adapter unavailable")]
    AdapterUnavailable,

    #[error("simulation engine adapter failed: {0}")]
    Adapter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
