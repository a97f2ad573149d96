use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("sampling region is empty")]
    EmptyRegion,

    #[error("phantom has no tumor")]
    NoTumor,

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("no points survived filtering")]
    EmptyAfterFilter,

    #[error("point set is degenerate (fewer than 3 non-collinear points)")]
    DegenerateCloud,

    #[error("region of interest contains no triangles")]
    EmptyRoi,

    #[error("grid resolution too coarse: {valid} valid cells on a {nx}x{ny} lattice")]
    ResolutionTooCoarse { nx: usize, ny: usize, valid: usize },

    #[error("cell ({u}, {v}) is outside the grid or masked")]
    InvalidCell { u: usize, v: usize },

    #[error("at least one stiffness sample is required")]
    NoSamples,

    #[error("kernel matrix is not positive definite after jitter")]
    SingularKernel,

    #[error("no unvisited valid cells remain")]
    Exhausted,

    #[error("force reading is in the wrong frame: expected {expected}, got {got}")]
    FrameMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("normalized time {0} outside [0, 1]")]
    OutOfRange(f64),

    #[error("plant speed {speed:.3} m/s exceeds the safety bound of {limit:.3} m/s")]
    NumericalBlowup { speed: f64, limit: f64 },

    #[error("probe never reached the surface within its travel limit")]
    NoContact,

    #[error("no waypoints qualified for reconstruction")]
    EmptyReconstruction,

    #[error("nothing to aggregate")]
    Empty,

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed PLY {path}: {msg}")]
    Ply { path: PathBuf, msg: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_trial(self, trial: usize) -> Self {
        Error::Trial {
            trial,
            source: Box::new(self),
        }
    }
}
