//! The calibration report: a parameter section (every effective value used),
//! then one block per sensor with the 12-number transform record and the
//! matching diagnostics. Floats are written in shortest round-trip form, so
//! re-running on identical inputs reproduces the file byte for byte and a
//! report compared with itself yields exact zeros.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::geometry::{RigidTransform, RIGID_TOL};
use crate::matching::{CalibrationResult, GroundDiagnostics, ReferenceMode};
use crate::pipeline::PipelineParams;

use super::parse_err;

/// The parameter section in a fixed order.
pub(crate) fn param_lines(params: &PipelineParams) -> Vec<(String, String)> {
    let mode = match params.matching.reference_mode {
        ReferenceMode::BoxCenter => "box-center",
        ReferenceMode::NearestCorner => "nearest-corner",
    };
    vec![
        ("theta_g".into(), params.segmentation.theta_g.to_string()),
        ("reject_distance".into(), params.plane.reject_distance.to_string()),
        ("max_iterations".into(), params.plane.max_iterations.to_string()),
        (
            "convergence_angle_deg".into(),
            params.plane.convergence_angle_deg.to_string(),
        ),
        ("epsilon".into(), params.cluster.epsilon.to_string()),
        ("min_points".into(), params.cluster.min_points.to_string()),
        ("delta_x".into(), params.lshape.delta_x.to_string()),
        ("theta_thresh".into(), params.lshape.theta_thresh.to_string()),
        (
            "histogram_bin_width".into(),
            params.lshape.histogram_bin_width.to_string(),
        ),
        ("flatness_ratio".into(), params.lshape.flatness_ratio.to_string()),
        (
            "min_background_cluster".into(),
            params.background.min_cluster_size.to_string(),
        ),
        ("background_margin".into(), params.background.margin.to_string()),
        ("theta_beta".into(), params.matching.theta_beta.to_string()),
        ("reference_mode".into(), mode.into()),
    ]
}

fn record_string(t: &RigidTransform) -> String {
    t.to_record()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_report(
    path: &Path,
    results: &[CalibrationResult],
    params: &PipelineParams,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# calibration report")?;
    for (k, v) in param_lines(params) {
        writeln!(w, "param.{k} = {v}")?;
    }
    for r in results {
        writeln!(w)?;
        writeln!(w, "sensor = {}", r.sensor_id)?;
        writeln!(w, "transform = {}", record_string(&r.transform))?;
        writeln!(w, "ground_transform = {}", record_string(&r.ground_alignment))?;
        writeln!(w, "beta_diff_deg = {}", r.beta_diff.to_degrees())?;
        writeln!(w, "pair_count = {}", r.pair_count)?;
        writeln!(w, "yaw_inlier_count = {}", r.yaw_inlier_count)?;
        writeln!(w, "rms_residual_m = {}", r.rms_residual)?;
        writeln!(w, "ground_iterations = {}", r.ground.iterations)?;
        writeln!(
            w,
            "ground_retained_fraction = {}",
            r.ground.retained_fraction
        )?;
        writeln!(w, "ground_rms_residual_m = {}", r.ground.rms_residual)?;
        writeln!(w, "mounting_height_m = {}", r.ground.mounting_height)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a report back into results plus the recorded parameter map.
pub fn read_report(path: &Path) -> Result<(Vec<CalibrationResult>, BTreeMap<String, String>)> {
    let text = fs::read_to_string(path)?;
    let mut params = BTreeMap::new();
    let mut results: Vec<CalibrationResult> = Vec::new();
    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    let mut sensor: Option<(String, usize)> = None;

    let flush = |sensor: &Option<(String, usize)>,
                 fields: &BTreeMap<String, String>,
                 results: &mut Vec<CalibrationResult>|
     -> Result<()> {
        let Some((id, line)) = sensor else {
            return Ok(());
        };
        let get = |key: &str| -> Result<&String> {
            fields
                .get(key)
                .ok_or_else(|| parse_err(path, *line, format!("sensor {id} misses {key}")))
        };
        let record = |key: &str| -> Result<RigidTransform> {
            let tokens: Vec<f64> = get(key)?
                .split_whitespace()
                .filter_map(|t| t.parse().ok())
                .collect();
            let arr: [f64; 12] = tokens
                .try_into()
                .map_err(|_| parse_err(path, *line, format!("{key} needs 12 numbers")))?;
            let t = RigidTransform::from_record(&arr);
            if !t.is_rigid(1e-6_f64.max(RIGID_TOL)) {
                return Err(parse_err(path, *line, format!("{key} is not a rigid transform")));
            }
            Ok(t)
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse()
                .map_err(|_| parse_err(path, *line, format!("{key} is not a number")))
        };
        let count = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| parse_err(path, *line, format!("{key} is not a count")))
        };
        results.push(CalibrationResult {
            sensor_id: id.clone(),
            transform: record("transform")?,
            ground_alignment: record("ground_transform")?,
            beta_diff: num("beta_diff_deg")?.to_radians(),
            pair_count: count("pair_count")?,
            yaw_inlier_count: count("yaw_inlier_count")?,
            rms_residual: num("rms_residual_m")?,
            ground: GroundDiagnostics {
                iterations: count("ground_iterations")?,
                retained_fraction: num("ground_retained_fraction")?,
                rms_residual: num("ground_rms_residual_m")?,
                mounting_height: num("mounting_height_m")?,
            },
        });
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(parse_err(path, idx + 1, "expected 'key = value'"));
        };
        let key = key.trim();
        let value = value.trim();
        if let Some(name) = key.strip_prefix("param.") {
            params.insert(name.to_string(), value.to_string());
        } else if key == "sensor" {
            flush(&sensor, &fields, &mut results)?;
            fields.clear();
            sensor = Some((value.to_string(), idx + 1));
        } else {
            fields.insert(key.to_string(), value.to_string());
        }
    }
    flush(&sensor, &fields, &mut results)?;
    Ok((results, params))
}
