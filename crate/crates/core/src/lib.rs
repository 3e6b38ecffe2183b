//! Extrinsic self-calibration of infrastructure-mounted 3D sensors against a
//! cooperating vehicle that broadcasts its own world-frame pose.
//!
//! The pipeline works in four stages. First the ground plane of an empty
//! background scan is fitted by a principal-component decomposition with
//! iterative off-plane rejection and aligned onto z = 0, which pins three of
//! the six degrees of freedom. Static scene objects above a height threshold
//! become reusable 2D background boxes. In every drive frame the cooperating
//! vehicle is isolated by background subtraction plus density clustering, and
//! an oriented box is fitted to its 2D silhouette through a beam-partitioned
//! orthogonal two-line least squares. Finally the detected box centers are
//! matched by timestamp against the vehicle's communicated pose trace to
//! recover the remaining yaw and planar translation, and the composition
//! yields the full sensor-to-world transform.
//!
//! A labeled synthetic scene generator ([`sim`]) produces ground scans,
//! background objects, and drive-throughs with laserscanner-like noise so the
//! whole pipeline can be verified against a known extrinsic.
//!
//! Per-frame detection, per-frame simulation, and per-sensor sessions run
//! data-parallel by default; disable the `parallel` feature for a sequential
//! build with identical output.

// Validation uses `!(x > 0.0)` so NaN fails the check; `x <= 0.0` would not.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod background;
pub mod error;
pub mod extraction;
pub mod geometry;
pub mod ground;
pub mod io;
pub mod lshape;
pub mod matching;
mod parallel;
pub mod pipeline;
pub mod session;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::{EulerAngles, Point2, Point3, PointCloud, RigidTransform};
pub use lshape::OrientedBox2D;
pub use matching::{CalibrationResult, RepetitionError, SensorTrack, WorldTrace};
pub use pipeline::PipelineParams;
