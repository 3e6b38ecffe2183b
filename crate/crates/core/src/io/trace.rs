//! The vehicle pose trace file: one sample per line,
//! "timestamp x y heading_deg length width ref_offset_x ref_offset_y".
//! Dimensions and reference offset ride along with every sample the way a
//! periodic broadcast would carry them; the first line wins on read.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector2;

use crate::error::Result;
use crate::geometry::Point2;
use crate::matching::{TraceSample, WorldTrace};

use super::{parse_err, parse_f64};

pub fn write_trace(path: &Path, trace: &WorldTrace) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(
        w,
        "# trace: time x y heading_deg length width ref_offset_x ref_offset_y"
    )?;
    for s in &trace.samples {
        writeln!(
            w,
            "{:.9} {:.9} {:.9} {:.9} {} {} {} {}",
            s.time,
            s.position.x,
            s.position.y,
            s.heading.to_degrees(),
            trace.vehicle_length,
            trace.vehicle_width,
            trace.reference_offset.x,
            trace.reference_offset.y,
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<WorldTrace> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut samples = Vec::new();
    let mut dims: Option<(f64, f64, Vector2<f64>)> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 8 {
            return Err(parse_err(
                path,
                idx + 1,
                format!("expected 8 fields, found {}", tokens.len()),
            ));
        }
        let num = |k: usize| parse_f64(path, idx + 1, tokens[k]);
        samples.push(TraceSample {
            time: num(0)?,
            position: Point2::new(num(1)?, num(2)?),
            heading: num(3)?.to_radians(),
            speed: None,
        });
        if dims.is_none() {
            dims = Some((num(4)?, num(5)?, Vector2::new(num(6)?, num(7)?)));
        }
    }
    let (length, width, offset) =
        dims.ok_or_else(|| parse_err(path, 0, "trace file has no samples"))?;
    WorldTrace::new(samples, length, width, offset)
}
