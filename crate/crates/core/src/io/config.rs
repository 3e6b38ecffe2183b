//! Flat key-value configuration files ("section.key = value"). Unknown keys
//! are rejected so typos fail fast. Relative paths resolve against the config
//! file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{EulerAngles, Point2, RigidTransform};
use crate::lshape::OrientedBox2D;
use crate::matching::ReferenceMode;
use crate::pipeline::PipelineParams;
use crate::sim::{BackgroundObject, PathPose, SceneConfig};

use super::parse_err;

/// Parses a key-value file into ordered (key, value, line) triples.
pub fn parse_kv(path: &Path) -> Result<Vec<(String, String, usize)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(parse_err(path, idx + 1, "expected 'key = value'"));
        };
        out.push((key.trim().to_string(), value.trim().to_string(), idx + 1));
    }
    Ok(out)
}

/// Applies a named parameter override onto the pipeline parameters.
pub fn apply_param(params: &mut PipelineParams, key: &str, value: &str) -> Result<()> {
    let bad = |what: &str| Error::InvalidParameter(format!("{key}: {what}: {value:?}"));
    let as_f64 = || value.parse::<f64>().map_err(|_| bad("not a number"));
    let as_usize = || value.parse::<usize>().map_err(|_| bad("not a count"));
    match key {
        "theta_g" => params.segmentation.theta_g = as_f64()?,
        "reject_distance" => params.plane.reject_distance = as_f64()?,
        "max_iterations" => params.plane.max_iterations = as_usize()?,
        "convergence_angle_deg" => params.plane.convergence_angle_deg = as_f64()?,
        "epsilon" => params.cluster.epsilon = as_f64()?,
        "min_points" => params.cluster.min_points = as_usize()?,
        "delta_x" => params.lshape.delta_x = as_f64()?,
        "theta_thresh" => params.lshape.theta_thresh = as_f64()?,
        "histogram_bin_width" => params.lshape.histogram_bin_width = as_f64()?,
        "flatness_ratio" => params.lshape.flatness_ratio = as_f64()?,
        "min_background_cluster" => params.background.min_cluster_size = as_usize()?,
        "background_margin" => params.background.margin = as_f64()?,
        "theta_beta" => params.matching.theta_beta = as_f64()?,
        "reference_mode" => {
            params.matching.reference_mode = match value {
                "box-center" => ReferenceMode::BoxCenter,
                "nearest-corner" => ReferenceMode::NearestCorner,
                _ => return Err(bad("expected box-center or nearest-corner")),
            }
        }
        _ => return Err(Error::InvalidParameter(format!("unknown parameter {key:?}"))),
    }
    Ok(())
}

/// Input recordings of one sensor.
#[derive(Debug, Clone)]
pub struct SensorInputs {
    pub id: String,
    pub background_path: PathBuf,
    pub drive_path: PathBuf,
}

/// A calibration session: sensors, the shared trace, and parameters.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub sensors: Vec<SensorInputs>,
    pub trace_path: PathBuf,
    pub params: PipelineParams,
}

impl SessionConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &str| -> PathBuf {
            let candidate = PathBuf::from(p);
            if candidate.is_absolute() {
                candidate
            } else {
                base.join(candidate)
            }
        };
        let mut trace_path: Option<PathBuf> = None;
        let mut params = PipelineParams::default();
        let mut backgrounds: BTreeMap<String, PathBuf> = BTreeMap::new();
        let mut drives: BTreeMap<String, PathBuf> = BTreeMap::new();
        let mut order: Vec<String> = Vec::new();

        for (key, value, line) in parse_kv(path)? {
            if key == "trace" {
                trace_path = Some(resolve(&value));
            } else if let Some(name) = key.strip_prefix("params.") {
                apply_param(&mut params, name, &value)
                    .map_err(|e| parse_err(path, line, e.to_string()))?;
            } else if let Some(rest) = key.strip_prefix("sensor.") {
                let Some((id, field)) = rest.rsplit_once('.') else {
                    return Err(parse_err(path, line, "expected sensor.<id>.<field>"));
                };
                if !order.iter().any(|s| s == id) {
                    order.push(id.to_string());
                }
                match field {
                    "background" => {
                        backgrounds.insert(id.to_string(), resolve(&value));
                    }
                    "drive" => {
                        drives.insert(id.to_string(), resolve(&value));
                    }
                    _ => {
                        return Err(parse_err(
                            path,
                            line,
                            format!("unknown sensor field {field:?}"),
                        ))
                    }
                }
            } else {
                return Err(parse_err(path, line, format!("unknown key {key:?}")));
            }
        }

        let trace_path =
            trace_path.ok_or_else(|| parse_err(path, 0, "missing 'trace' entry"))?;
        let mut sensors = Vec::new();
        for id in order {
            let background_path = backgrounds
                .remove(&id)
                .ok_or_else(|| parse_err(path, 0, format!("sensor {id} misses background")))?;
            let drive_path = drives
                .remove(&id)
                .ok_or_else(|| parse_err(path, 0, format!("sensor {id} misses drive")))?;
            sensors.push(SensorInputs {
                id,
                background_path,
                drive_path,
            });
        }
        if sensors.is_empty() {
            return Err(parse_err(path, 0, "no sensors configured"));
        }
        params.validate()?;
        Ok(Self {
            sensors,
            trace_path,
            params,
        })
    }

    /// Keeps only the listed sensors; unknown ids are a configuration error.
    pub fn retain_sensors(&mut self, ids: &[String]) -> Result<()> {
        if ids.is_empty() {
            return Ok(());
        }
        for id in ids {
            if !self.sensors.iter().any(|s| &s.id == id) {
                return Err(Error::InvalidParameter(format!(
                    "sensor filter {id:?} matches no configured sensor"
                )));
            }
        }
        self.sensors.retain(|s| ids.iter().any(|id| id == &s.id));
        Ok(())
    }

    /// Referenced paths must exist before the run starts.
    pub fn validate_paths(&self) -> Result<()> {
        let mut missing = Vec::new();
        if !self.trace_path.exists() {
            missing.push(self.trace_path.clone());
        }
        for s in &self.sensors {
            for p in [&s.background_path, &s.drive_path] {
                if !p.exists() {
                    missing.push(p.clone());
                }
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "missing input path(s): {}",
                missing
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            )))
        }
    }
}

/// A simulator run: the scene plus the sensor id to emit.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub scene: SceneConfig,
    pub sensor_id: String,
}

impl SimConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut scene = SceneConfig::default();
        let mut sensor_id = "SIM".to_string();
        let mut extrinsic_angles = EulerAngles::new(0.0, 0.0, 0.0);
        let mut extrinsic_xyz = Vector3::new(0.0, 0.0, 6.0);
        let mut path_entries: BTreeMap<usize, PathPose> = BTreeMap::new();
        let mut background_entries: BTreeMap<usize, BackgroundObject> = BTreeMap::new();

        for (key, value, line) in parse_kv(path)? {
            let bad = |what: &str| parse_err(path, line, format!("{key}: {what}: {value:?}"));
            let as_f64 = || value.parse::<f64>().map_err(|_| bad("not a number"));
            match key.as_str() {
                "sim.seed" => scene.seed = value.parse().map_err(|_| bad("not an integer"))?,
                "sim.frame_rate" => scene.frame_rate = as_f64()?,
                "sim.trace_rate" => scene.trace_rate = as_f64()?,
                "sim.range_sigma" => scene.range_sigma = as_f64()?,
                "sim.max_range" => scene.max_range = as_f64()?,
                "sim.angular_sigma_deg" => scene.angular_sigma_deg = as_f64()?,
                "sim.trace_sigma" => scene.trace_sigma = as_f64()?,
                "sim.ground_extent" => scene.ground_extent = as_f64()?,
                "sim.ground_spacing" => scene.ground_spacing = as_f64()?,
                "sim.surface_spacing" => scene.surface_spacing = as_f64()?,
                "sim.sensor_id" => sensor_id = value.clone(),
                "sim.extrinsic.yaw_deg" => extrinsic_angles.psi1 = as_f64()?,
                "sim.extrinsic.pitch_deg" => extrinsic_angles.psi2 = as_f64()?,
                "sim.extrinsic.roll_deg" => extrinsic_angles.psi3 = as_f64()?,
                "sim.extrinsic.x" => extrinsic_xyz.x = as_f64()?,
                "sim.extrinsic.y" => extrinsic_xyz.y = as_f64()?,
                "sim.extrinsic.z" => extrinsic_xyz.z = as_f64()?,
                "sim.vehicle.length" => scene.vehicle_length = as_f64()?,
                "sim.vehicle.width" => scene.vehicle_width = as_f64()?,
                "sim.vehicle.height" => scene.vehicle_height = as_f64()?,
                "sim.vehicle.ref_offset_x" => scene.reference_offset.x = as_f64()?,
                "sim.vehicle.ref_offset_y" => scene.reference_offset.y = as_f64()?,
                _ => {
                    if let Some(k) = key.strip_prefix("sim.path.") {
                        let idx: usize =
                            k.parse().map_err(|_| bad("path index expected"))?;
                        let nums = split_numbers(&value)
                            .map_err(|m| parse_err(path, line, m))?;
                        let [t, x, y, heading_deg] = nums[..] else {
                            return Err(bad("expected 't x y heading_deg'"));
                        };
                        path_entries.insert(
                            idx,
                            PathPose {
                                time: t,
                                position: Point2::new(x, y),
                                heading: heading_deg.to_radians(),
                            },
                        );
                    } else if let Some(k) = key.strip_prefix("sim.background.") {
                        let idx: usize =
                            k.parse().map_err(|_| bad("background index expected"))?;
                        let nums = split_numbers(&value)
                            .map_err(|m| parse_err(path, line, m))?;
                        let (fields, base_height) = match nums[..] {
                            [cx, cy, yaw_deg, length, width, height] => {
                                ([cx, cy, yaw_deg, length, width, height], 0.0)
                            }
                            [cx, cy, yaw_deg, length, width, height, base] => {
                                ([cx, cy, yaw_deg, length, width, height], base)
                            }
                            _ => {
                                return Err(bad(
                                    "expected 'cx cy yaw_deg length width height [base]'",
                                ))
                            }
                        };
                        let [cx, cy, yaw_deg, length, width, height] = fields;
                        background_entries.insert(
                            idx,
                            BackgroundObject {
                                footprint: OrientedBox2D {
                                    center: Point2::new(cx, cy),
                                    half_length: length / 2.0,
                                    half_width: width / 2.0,
                                    yaw: yaw_deg.to_radians(),
                                },
                                height,
                                base_height,
                            },
                        );
                    } else {
                        return Err(parse_err(path, line, format!("unknown key {key:?}")));
                    }
                }
            }
        }
        scene.true_extrinsic = RigidTransform::from_euler(extrinsic_angles, extrinsic_xyz);
        scene.path = path_entries.into_values().collect();
        scene.background_objects = background_entries.into_values().collect();
        scene.validate()?;
        if scene.path.len() < 2 {
            return Err(parse_err(path, 0, "sim.path needs at least 2 waypoints"));
        }
        Ok(Self { scene, sensor_id })
    }
}

fn split_numbers(value: &str) -> std::result::Result<Vec<f64>, String> {
    value
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| format!("not a number: {t:?}"))
        })
        .collect()
}
