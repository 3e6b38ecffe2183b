//! The per-frame detection log: one data row per successful detection, a
//! comment row per skipped frame, so the plot exporter and post-mortems can
//! replay what the detector saw.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::geometry::Point2;
use crate::lshape::OrientedBox2D;
use crate::pipeline::FrameLog;

use super::{parse_err, parse_f64};

/// One parsed detection row.
#[derive(Debug, Clone)]
pub struct DetectionRow {
    pub time: f64,
    pub bbox: OrientedBox2D,
    pub cluster_points: usize,
}

pub fn write_detections(path: &Path, logs: &[FrameLog]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(
        w,
        "# detections: time x y half_length half_width yaw_rad raw foreground cluster"
    )?;
    for log in logs {
        match &log.detection {
            Some(b) => writeln!(
                w,
                "{} {} {} {} {} {} {} {} {}",
                log.time,
                b.center.x,
                b.center.y,
                b.half_length,
                b.half_width,
                b.yaw,
                log.raw_points,
                log.foreground_points,
                log.cluster_points,
            )?,
            None => writeln!(
                w,
                "# skip time={} raw={} foreground={} reason={}",
                log.time,
                log.raw_points,
                log.foreground_points,
                log.skip_reason.as_deref().unwrap_or("unknown"),
            )?,
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionRow>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 9 {
            return Err(parse_err(
                path,
                idx + 1,
                format!("expected 9 fields, found {}", tokens.len()),
            ));
        }
        let num = |k: usize| parse_f64(path, idx + 1, tokens[k]);
        rows.push(DetectionRow {
            time: num(0)?,
            bbox: OrientedBox2D {
                center: Point2::new(num(1)?, num(2)?),
                half_length: num(3)?,
                half_width: num(4)?,
                yaw: num(5)?,
            },
            cluster_points: tokens[8]
                .parse()
                .map_err(|_| parse_err(path, idx + 1, "cluster count expected"))?,
        });
    }
    Ok(rows)
}
