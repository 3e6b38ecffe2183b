//! Text file formats: point-cloud frames, pose traces, background boxes,
//! calibration reports, flat key-value configs, and plot-data exports.
//! Everything is line-oriented plain text so recordings diff cleanly and other
//! tooling can produce or consume them.

mod boxes;
mod cloud;
mod config;
mod detections;
mod plots;
mod report;
mod trace;

pub use boxes::{read_boxes, write_boxes};
pub use cloud::{read_frame, read_frames, write_frame, write_frames_dir};
pub use config::{apply_param, parse_kv, SensorInputs, SessionConfig, SimConfig};
pub use detections::{read_detections, write_detections, DetectionRow};
pub use plots::{export_ground_points, export_object_centers};
pub use report::{read_report, write_report};
pub use trace::{read_trace, write_trace};

use std::path::Path;

use crate::error::Error;

pub(crate) fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub(crate) fn parse_f64(path: &Path, line: usize, token: &str) -> Result<f64, Error> {
    token
        .parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("not a number: {token:?}")))
}
