use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the calibration pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Point cloud has too few points or no unique plane (collinear or isotropic).
    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),

    /// Input points cannot support the requested fit.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The normal-equation block M11 is singular (an empty leg).
    #[error("singular normal matrix: at least one partition leg is empty")]
    SingularNormalMatrix,

    /// Polygon with fewer than 3 vertices.
    #[error("malformed polygon: {0} vertices")]
    MalformedPolygon(usize),

    /// Clustering produced no candidate vehicle cluster.
    #[error("no vehicle detected: clustering produced no cluster")]
    NoVehicleDetected,

    /// Query time outside the trace span; the sample is dropped, not extrapolated.
    #[error("timestamp {t} outside trace span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    /// Fewer than 2 detections overlap the trace time span.
    #[error("insufficient overlap: only {pairs} matched pair(s)")]
    InsufficientOverlap { pairs: usize },

    /// Every anchored pair fell below the location-vector length threshold.
    #[error("all location vectors below threshold {theta_beta} m")]
    AllBelowThreshold { theta_beta: f64 },

    /// Two reports do not describe the same sensor set.
    #[error("mismatched sensor ids: {0}")]
    MismatchedSensors(String),

    /// A parameter value outside its validity range, or an unknown parameter key.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A text input file failed to parse.
    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
