//! Background-box persistence: one polygon per line — vertex count, x y
//! pairs, then the max height — so a calibration session can reuse a
//! previously learned background.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::background::BackgroundBox;
use crate::error::Result;
use crate::geometry::Point2;

use super::{parse_err, parse_f64};

pub fn write_boxes(path: &Path, boxes: &[BackgroundBox]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# background boxes: vertex_count x1 y1 ... xn yn max_height")?;
    for b in boxes {
        write!(w, "{}", b.polygon.len())?;
        for v in &b.polygon {
            write!(w, " {} {}", v.x, v.y)?;
        }
        writeln!(w, " {}", b.max_height)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads boxes back; the inflation margin is a session parameter, not part of
/// the file.
pub fn read_boxes(path: &Path, margin: f64) -> Result<Vec<BackgroundBox>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut boxes = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let n: usize = tokens[0]
            .parse()
            .map_err(|_| parse_err(path, idx + 1, "vertex count expected"))?;
        if n < 3 || tokens.len() != 2 + 2 * n {
            return Err(parse_err(
                path,
                idx + 1,
                format!("polygon with {n} vertices needs {} fields", 2 + 2 * n),
            ));
        }
        let mut polygon = Vec::with_capacity(n);
        for k in 0..n {
            polygon.push(Point2::new(
                parse_f64(path, idx + 1, tokens[1 + 2 * k])?,
                parse_f64(path, idx + 1, tokens[2 + 2 * k])?,
            ));
        }
        let max_height = parse_f64(path, idx + 1, tokens[1 + 2 * n])?;
        boxes.push(BackgroundBox {
            polygon,
            max_height,
            margin,
        });
    }
    Ok(boxes)
}
