//! Plot-data exports: transformed ground points and detected object centers in
//! world coordinates, as delimiter-separated text for external plotting.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::geometry::{Point3, PointCloud, RigidTransform};

use super::DetectionRow;

/// Applies the calibration to the frames and writes every point that lands at
/// or below θ_g in world height — the street surface as the sensor saw it.
pub fn export_ground_points(
    path: &Path,
    frames: &[PointCloud],
    transform: &RigidTransform,
    theta_g: f64,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# world ground points: x y z")?;
    for frame in frames {
        for p in &frame.points {
            let world = transform.apply(*p);
            if world.z <= theta_g {
                writeln!(w, "{:.6} {:.6} {:.6}", world.x, world.y, world.z)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Maps detected box centers (ground-aligned frame, z = 0) into the world
/// frame and writes them with their timestamps.
pub fn export_object_centers(
    path: &Path,
    detections: &[DetectionRow],
    transform: &RigidTransform,
    ground_alignment: &RigidTransform,
) -> Result<()> {
    // Detections live in the aligned frame; the full calibration expects raw
    // sensor coordinates, so step back through the alignment first.
    let aligned_to_world = transform.compose(&ground_alignment.invert());
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# detected object centers in world frame: time x y")?;
    for row in detections {
        let world = aligned_to_world.apply(Point3::new(row.bbox.center.x, row.bbox.center.y, 0.0));
        writeln!(w, "{} {:.6} {:.6}", row.time, world.x, world.y)?;
    }
    w.flush()?;
    Ok(())
}
