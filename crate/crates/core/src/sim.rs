//! Synthetic scene generator with per-point origin labels.
//!
//! Builds ground scans, static background objects, and a vehicle drive-through
//! in the world frame, maps everything into the sensor frame through a known
//! extrinsic, and applies laserscanner-like noise (radial range jitter plus
//! angular jitter of each ray). The matching pose trace is emitted on its own
//! clock so sensor and trace timestamps never coincide. Identical seed and
//! configuration produce bit-identical output.

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point2, Point3, PointCloud, RigidTransform};
use crate::lshape::OrientedBox2D;
use crate::matching::{reference_to_box_center, TraceSample, WorldTrace};
use crate::parallel::{map_indexed, map_indexed_serial};

/// Origin of a synthetic point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLabel {
    Ground,
    /// Index into [`SceneConfig::background_objects`].
    Background(usize),
    /// Face index 0..4 of the vehicle footprint.
    VehicleFace(usize),
}

/// A frame with per-point origin labels.
#[derive(Debug, Clone)]
pub struct LabeledFrame {
    pub cloud: PointCloud,
    pub labels: Vec<PointLabel>,
}

impl LabeledFrame {
    /// Indices of the vehicle faces present in this frame.
    pub fn visible_faces(&self) -> Vec<usize> {
        let mut faces: Vec<usize> = self
            .labels
            .iter()
            .filter_map(|l| match l {
                PointLabel::VehicleFace(k) => Some(*k),
                _ => None,
            })
            .collect();
        faces.sort_unstable();
        faces.dedup();
        faces
    }
}

/// A timestamped world pose on the vehicle path.
#[derive(Debug, Clone, Copy)]
pub struct PathPose {
    pub time: f64,
    pub position: Point2,
    /// Heading, radians.
    pub heading: f64,
}

/// A static scene object: footprint in the world frame plus its vertical
/// extent. `base_height` is the lowest height that returns points (walls
/// reach the ground; barriers and signs start higher).
#[derive(Debug, Clone)]
pub struct BackgroundObject {
    pub footprint: OrientedBox2D,
    pub height: f64,
    pub base_height: f64,
}

/// Scene description and noise profile.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    /// The sensor-to-world transform the calibration should recover. Scene
    /// points are generated in the world frame and mapped into the sensor
    /// frame through its inverse.
    pub true_extrinsic: RigidTransform,
    /// Side length of the square ground patch, centered under the sensor, meters.
    pub ground_extent: f64,
    /// Ground grid spacing, meters.
    pub ground_spacing: f64,
    /// Sample spacing on vertical faces (vehicle and background), meters.
    pub surface_spacing: f64,
    pub background_objects: Vec<BackgroundObject>,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub vehicle_height: f64,
    /// Offset from the communicated reference point to the box center, vehicle frame.
    pub reference_offset: Vector2<f64>,
    pub path: Vec<PathPose>,
    /// Range noise along each ray, meters (1σ).
    pub range_sigma: f64,
    /// Angular jitter of each ray, degrees (1σ).
    pub angular_sigma_deg: f64,
    /// Position noise on the emitted trace, meters (1σ).
    pub trace_sigma: f64,
    /// Maximum sensor range, meters; surfaces beyond it return no points.
    pub max_range: f64,
    /// Sensor frame rate, Hz.
    pub frame_rate: f64,
    /// Trace sample rate, Hz; offset by half a period against the frames.
    pub trace_rate: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            true_extrinsic: RigidTransform::identity(),
            ground_extent: 60.0,
            ground_spacing: 0.5,
            surface_spacing: 0.1,
            background_objects: Vec::new(),
            vehicle_length: 4.5,
            vehicle_width: 1.8,
            vehicle_height: 1.5,
            reference_offset: Vector2::zeros(),
            path: Vec::new(),
            range_sigma: 0.10,
            angular_sigma_deg: 0.5,
            trace_sigma: 0.02,
            max_range: f64::INFINITY,
            frame_rate: 12.5,
            trace_rate: 10.0,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_rate > 0.0) || !(self.trace_rate > 0.0) {
            return Err(Error::InvalidParameter("rates must be positive".into()));
        }
        if self.range_sigma < 0.0 || self.angular_sigma_deg < 0.0 || self.trace_sigma < 0.0 {
            return Err(Error::InvalidParameter("sigmas must not be negative".into()));
        }
        if !(self.ground_spacing > 0.0) || !(self.surface_spacing > 0.0) {
            return Err(Error::InvalidParameter("spacings must be positive".into()));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::InvalidParameter("max_range must be positive".into()));
        }
        if !self.path.windows(2).all(|w| w[0].time < w[1].time) {
            return Err(Error::InvalidParameter(
                "path timestamps must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// The sensor position in the world frame.
    pub fn sensor_world_position(&self) -> Vector3<f64> {
        self.true_extrinsic.translation
    }
}

const BACKGROUND_STREAM: u64 = 0;
const TRACE_STREAM: u64 = 1_000_000_007;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    // splitmix64 scramble keeps nearby streams uncorrelated.
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Inclusive uniform samples over [0, length] with step ≈ `spacing`; both
/// endpoints land exactly.
fn linspace_by_spacing(length: f64, spacing: f64) -> Vec<f64> {
    let intervals = ((length / spacing).round() as usize).max(1);
    (0..=intervals)
        .map(|i| length * i as f64 / intervals as f64)
        .collect()
}

/// Samples the four vertical faces of a box footprint that face the sensor.
/// Points lie exactly on the surface; labels carry the face index.
fn sample_visible_faces(
    footprint: &OrientedBox2D,
    base_height: f64,
    height: f64,
    spacing: f64,
    sensor_xy: Point2,
    mut emit: impl FnMut(Point3, usize),
) {
    let corners = footprint.corners();
    for face in 0..4 {
        let a = corners[face];
        let b = corners[(face + 1) % 4];
        let edge = Point2::new(b.x - a.x, b.y - a.y);
        let len = a.distance(b);
        if len == 0.0 {
            continue;
        }
        // Outward normal of a counter-clockwise outline.
        let normal = Point2::new(edge.y / len, -edge.x / len);
        let mid = Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y));
        let toward_sensor = (sensor_xy.x - mid.x) * normal.x + (sensor_xy.y - mid.y) * normal.y;
        if toward_sensor <= 0.0 {
            continue;
        }
        for u in linspace_by_spacing(len, spacing) {
            let foot = Point2::new(a.x + edge.x * u / len, a.y + edge.y * u / len);
            for dz in linspace_by_spacing(height - base_height, spacing) {
                emit(Point3::new(foot.x, foot.y, base_height + dz), face);
            }
        }
    }
}

/// Range and angular noise along the sensor ray of a point (sensor frame).
/// Zero sigmas leave the point bit-identical.
fn apply_ray_noise(p: Point3, range_sigma: f64, angular_sigma: f64, rng: &mut ChaCha8Rng) -> Point3 {
    if range_sigma == 0.0 && angular_sigma == 0.0 {
        return p;
    }
    let v = p.to_vector();
    let range = v.norm();
    if range == 0.0 {
        return p;
    }
    let dir = v / range;
    let helper = if dir.z.abs() < 0.9 {
        Vector3::z()
    } else {
        Vector3::x()
    };
    let e1 = dir.cross(&helper).normalize();
    let e2 = dir.cross(&e1);
    let dr = Normal::new(0.0, range_sigma).unwrap().sample(rng);
    let ang = Normal::new(0.0, angular_sigma).unwrap();
    let a1: f64 = ang.sample(rng);
    let a2: f64 = ang.sample(rng);
    let jittered = (dir + e1 * a1.tan() + e2 * a2.tan()).normalize();
    Point3::from_vector(jittered * (range + dr))
}

/// Generates the static scene (ground grid plus background objects) in the
/// world frame with labels.
fn static_scene_world(config: &SceneConfig) -> (Vec<Point3>, Vec<PointLabel>) {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let sensor = config.sensor_world_position();
    let half = config.ground_extent / 2.0;
    for dx in linspace_by_spacing(config.ground_extent, config.ground_spacing) {
        for dy in linspace_by_spacing(config.ground_extent, config.ground_spacing) {
            points.push(Point3::new(sensor.x - half + dx, sensor.y - half + dy, 0.0));
            labels.push(PointLabel::Ground);
        }
    }
    let sensor_xy = Point2::new(sensor.x, sensor.y);
    for (k, obj) in config.background_objects.iter().enumerate() {
        sample_visible_faces(
            &obj.footprint,
            obj.base_height,
            obj.height,
            config.surface_spacing,
            sensor_xy,
            |p, _| {
                points.push(p);
                labels.push(PointLabel::Background(k));
            },
        );
    }
    (points, labels)
}

fn into_sensor_frame(
    world_points: Vec<Point3>,
    labels: Vec<PointLabel>,
    config: &SceneConfig,
    frame_id: String,
    time: f64,
    rng: &mut ChaCha8Rng,
) -> LabeledFrame {
    let to_sensor = config.true_extrinsic.invert();
    let angular_sigma = config.angular_sigma_deg.to_radians();
    let mut points = Vec::with_capacity(world_points.len());
    let mut kept_labels = Vec::with_capacity(labels.len());
    for (p, label) in world_points.into_iter().zip(labels) {
        let in_sensor = to_sensor.apply(p);
        if in_sensor.to_vector().norm() > config.max_range {
            continue;
        }
        points.push(apply_ray_noise(
            in_sensor,
            config.range_sigma,
            angular_sigma,
            rng,
        ));
        kept_labels.push(label);
    }
    LabeledFrame {
        cloud: PointCloud::new(frame_id, time, points),
        labels: kept_labels,
    }
}

/// The background measurement: the static scene without any road user.
pub fn simulate_background(config: &SceneConfig) -> LabeledFrame {
    let mut rng = stream_rng(config.seed, BACKGROUND_STREAM);
    let (points, labels) = static_scene_world(config);
    into_sensor_frame(points, labels, config, "background".into(), 0.0, &mut rng)
}

/// Linear pose interpolation on the configured path.
fn path_pose(path: &[PathPose], t: f64) -> PathPose {
    let idx = path.partition_point(|s| s.time <= t);
    if idx == 0 {
        return path[0];
    }
    if idx == path.len() {
        return *path.last().unwrap();
    }
    let a = &path[idx - 1];
    let b = &path[idx];
    let f = (t - a.time) / (b.time - a.time);
    PathPose {
        time: t,
        position: Point2::new(
            a.position.x + f * (b.position.x - a.position.x),
            a.position.y + f * (b.position.y - a.position.y),
        ),
        heading: wrap_angle(a.heading + f * wrap_angle(b.heading - a.heading)),
    }
}

fn drive_frame(config: &SceneConfig, frame_index: usize, time: f64) -> LabeledFrame {
    let mut rng = stream_rng(config.seed, 1 + frame_index as u64);
    let (mut points, mut labels) = static_scene_world(config);
    let pose = path_pose(&config.path, time);
    let center = reference_to_box_center(pose.position, pose.heading, config.reference_offset);
    let footprint = OrientedBox2D {
        center,
        half_length: config.vehicle_length / 2.0,
        half_width: config.vehicle_width / 2.0,
        yaw: pose.heading,
    };
    let sensor = config.sensor_world_position();
    sample_visible_faces(
        &footprint,
        0.0,
        config.vehicle_height,
        config.surface_spacing,
        Point2::new(sensor.x, sensor.y),
        |p, face| {
            points.push(p);
            labels.push(PointLabel::VehicleFace(face));
        },
    );
    into_sensor_frame(
        points,
        labels,
        config,
        format!("drive_{frame_index:06}"),
        time,
        &mut rng,
    )
}

fn frame_times(config: &SceneConfig) -> Vec<f64> {
    let Some(first) = config.path.first() else {
        return Vec::new();
    };
    let last = config.path.last().unwrap();
    let step = 1.0 / config.frame_rate;
    let mut times = Vec::new();
    let mut t = first.time;
    while t <= last.time + 1e-9 {
        times.push(t);
        t += step;
    }
    times
}

fn emit_trace(config: &SceneConfig) -> WorldTrace {
    let mut rng = stream_rng(config.seed, TRACE_STREAM);
    let noise = Normal::new(0.0, config.trace_sigma).unwrap();
    let mut samples = Vec::new();
    if let (Some(first), Some(last)) = (config.path.first(), config.path.last()) {
        // Half-period offset keeps trace and frame clocks apart.
        let step = 1.0 / config.trace_rate;
        let mut t = first.time + step / 2.0;
        while t <= last.time + 1e-9 {
            let pose = path_pose(&config.path, t);
            let position = if config.trace_sigma == 0.0 {
                pose.position
            } else {
                Point2::new(
                    pose.position.x + noise.sample(&mut rng),
                    pose.position.y + noise.sample(&mut rng),
                )
            };
            samples.push(TraceSample {
                time: t,
                position,
                heading: pose.heading,
                speed: None,
            });
            t += step;
        }
    }
    WorldTrace::new(
        samples,
        config.vehicle_length,
        config.vehicle_width,
        config.reference_offset,
    )
    .expect("trace construction from a valid path")
}

/// The drive-through: per-frame labeled scans (static scene re-measured each
/// frame plus the visible vehicle faces) and the asynchronous pose trace.
/// Frames carry per-frame sub-seeded noise, so generation parallelizes without
/// changing the output.
pub fn simulate_drive(config: &SceneConfig) -> Result<(Vec<LabeledFrame>, WorldTrace)> {
    config.validate()?;
    if config.path.is_empty() {
        return Err(Error::InvalidParameter("path must not be empty".into()));
    }
    let times = frame_times(config);
    let frames = map_indexed(&times, |i, &t| drive_frame(config, i, t));
    Ok((frames, emit_trace(config)))
}

/// Sequential twin of [`simulate_drive`]; output is identical.
pub fn simulate_drive_serial(config: &SceneConfig) -> Result<(Vec<LabeledFrame>, WorldTrace)> {
    config.validate()?;
    if config.path.is_empty() {
        return Err(Error::InvalidParameter("path must not be empty".into()));
    }
    let times = frame_times(config);
    let frames = map_indexed_serial(&times, |i, &t| drive_frame(config, i, t));
    Ok((frames, emit_trace(config)))
}
