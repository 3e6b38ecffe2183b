//! Point-cloud frame files: one header line "timestamp point-count", then one
//! "x y z" line per point, meters. A recording is a directory of frame files.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::geometry::{Point3, PointCloud};

use super::{parse_err, parse_f64};

pub fn write_frame(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{} {}", cloud.capture_time, cloud.len())?;
    for p in &cloud.points {
        writeln!(w, "{:.6} {:.6} {:.6}", p.x, p.y, p.z)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_frame(path: &Path) -> Result<PointCloud> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let (time, count) = loop {
        let Some((idx, line)) = lines.next() else {
            return Err(parse_err(path, 0, "empty frame file"));
        };
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let time = parse_f64(path, idx + 1, it.next().unwrap_or(""))?;
        let count = it
            .next()
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| parse_err(path, idx + 1, "header needs 'timestamp count'"))?;
        break (time, count);
    };
    let mut points = Vec::with_capacity(count);
    for (idx, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let x = parse_f64(path, idx + 1, it.next().unwrap_or(""))?;
        let y = parse_f64(path, idx + 1, it.next().unwrap_or(""))?;
        let z = parse_f64(path, idx + 1, it.next().unwrap_or(""))?;
        points.push(Point3::new(x, y, z));
    }
    if points.len() != count {
        return Err(parse_err(
            path,
            1,
            format!("header announced {count} points, file has {}", points.len()),
        ));
    }
    let frame_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "frame".into());
    Ok(PointCloud::new(frame_id, time, points))
}

/// Reads a recording: a single frame file, or every regular file in a
/// directory (sorted by name, then by capture time).
pub fn read_frames(path: &Path) -> Result<Vec<PointCloud>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        let mut frames = Vec::with_capacity(files.len());
        for f in files {
            frames.push(read_frame(&f)?);
        }
        frames.sort_by(|a, b| a.capture_time.total_cmp(&b.capture_time));
        Ok(frames)
    } else {
        Ok(vec![read_frame(path)?])
    }
}

/// Writes frames as `<prefix>_NNNNNN.txt` into `dir` (created if missing).
pub fn write_frames_dir(dir: &Path, frames: &[PointCloud], prefix: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, frame) in frames.iter().enumerate() {
        write_frame(&dir.join(format!("{prefix}_{i:06}.txt")), frame)?;
    }
    Ok(())
}
