//! Matching the detected box track against the vehicle's communicated
//! world-frame trace: timestamp association with interpolation, yaw from the
//! mean difference angle of anchored location vectors, translation from the
//! mean residual, and composition with the ground alignment into the full
//! sensor-to-world transform.

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{
    rotation_to_euler, rotation_z, wrap_angle, EulerAngles, Point2, RigidTransform,
};
use crate::lshape::OrientedBox2D;

/// One communicated pose sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub time: f64,
    /// World-frame position of the communicated reference point, meters.
    pub position: Point2,
    /// World-frame heading, radians.
    pub heading: f64,
    /// Optional speed, m/s; carried for completeness, not used by matching.
    pub speed: Option<f64>,
}

/// The vehicle's world-frame pose trace plus its communicated dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldTrace {
    pub samples: Vec<TraceSample>,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Offset from the communicated reference point to the geometric box
    /// center, in the vehicle frame (x forward), meters.
    pub reference_offset: Vector2<f64>,
}

impl WorldTrace {
    pub fn new(
        samples: Vec<TraceSample>,
        vehicle_length: f64,
        vehicle_width: f64,
        reference_offset: Vector2<f64>,
    ) -> Result<Self> {
        if vehicle_length < vehicle_width {
            return Err(Error::InvalidParameter(
                "vehicle length must be at least its width".into(),
            ));
        }
        if !samples.windows(2).all(|w| w[0].time < w[1].time) {
            return Err(Error::InvalidParameter(
                "trace timestamps must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            samples,
            vehicle_length,
            vehicle_width,
            reference_offset,
        })
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => Some((a.time, b.time)),
            _ => None,
        }
    }
}

/// One detected vehicle box in the ground-aligned frame.
#[derive(Debug, Clone)]
pub struct Detection {
    pub time: f64,
    pub bbox: OrientedBox2D,
}

/// Time-ordered detections of one sensor.
#[derive(Debug, Clone, Default)]
pub struct SensorTrack {
    pub detections: Vec<Detection>,
}

/// A timestamp-matched (sensor point, world point) pair.
#[derive(Debug, Clone, Copy)]
pub struct MatchedPair {
    pub sensor: Point2,
    pub world: Point2,
    pub time: f64,
}

/// Matched pairs with the anchor index (the last pair): yaw estimation works
/// on location vectors relative to the anchor.
#[derive(Debug, Clone)]
pub struct MatchedPairs {
    pub pairs: Vec<MatchedPair>,
    pub anchor: usize,
}

/// Linear position interpolation and shortest-arc heading interpolation at
/// time `t`. Queries outside the trace span are refused, never extrapolated.
pub fn interpolate_world_position(trace: &WorldTrace, t: f64) -> Result<(Point2, f64)> {
    let (start, end) = trace.span().ok_or(Error::OutOfRange {
        t,
        start: f64::NAN,
        end: f64::NAN,
    })?;
    if t < start || t > end {
        return Err(Error::OutOfRange { t, start, end });
    }
    let samples = &trace.samples;
    let idx = samples.partition_point(|s| s.time <= t);
    if idx == 0 {
        let s = &samples[0];
        return Ok((s.position, s.heading));
    }
    if idx == samples.len() {
        let s = samples.last().unwrap();
        return Ok((s.position, s.heading));
    }
    let a = &samples[idx - 1];
    let b = &samples[idx];
    let f = (t - a.time) / (b.time - a.time);
    let position = Point2::new(
        a.position.x + f * (b.position.x - a.position.x),
        a.position.y + f * (b.position.y - a.position.y),
    );
    let heading = wrap_angle(a.heading + f * wrap_angle(b.heading - a.heading));
    Ok((position, heading))
}

/// Maps the communicated reference point to the box center:
/// `position + R(heading)·offset`.
pub fn reference_to_box_center(position: Point2, heading: f64, offset: Vector2<f64>) -> Point2 {
    let (s, c) = heading.sin_cos();
    Point2::new(
        position.x + c * offset.x - s * offset.y,
        position.y + s * offset.x + c * offset.y,
    )
}

/// Pairs each detection inside the trace span with the interpolated world box
/// center. Needs at least 2 pairs; the anchor is the last pair.
pub fn build_matched_pairs(track: &SensorTrack, trace: &WorldTrace) -> Result<MatchedPairs> {
    build_pairs_with(track, trace, |det, center, _heading| {
        (det.bbox.center, center)
    })
}

fn build_pairs_with(
    track: &SensorTrack,
    trace: &WorldTrace,
    mut pick: impl FnMut(&Detection, Point2, f64) -> (Point2, Point2),
) -> Result<MatchedPairs> {
    let mut pairs = Vec::new();
    for det in &track.detections {
        let (position, heading) = match interpolate_world_position(trace, det.time) {
            Ok(v) => v,
            Err(Error::OutOfRange { .. }) => continue,
            Err(e) => return Err(e),
        };
        let center = reference_to_box_center(position, heading, trace.reference_offset);
        let (sensor, world) = pick(det, center, heading);
        pairs.push(MatchedPair {
            sensor,
            world,
            time: det.time,
        });
    }
    if pairs.len() < 2 {
        return Err(Error::InsufficientOverlap { pairs: pairs.len() });
    }
    let anchor = pairs.len() - 1;
    Ok(MatchedPairs { pairs, anchor })
}

/// Yaw estimate plus the number of pairs that survived the length threshold.
#[derive(Debug, Clone, Copy)]
pub struct YawEstimate {
    /// Mean difference angle β_diff from sensor to world location vectors, radians.
    pub beta_diff: f64,
    pub inlier_count: usize,
}

/// Mean difference angle between anchored location vectors.
///
/// Pairs whose sensor or world location vector is shorter than θ_β are
/// excluded — short vectors turn position noise into large angle noise. The
/// mean is circular (angle of the summed unit vectors), immune to wrap-around.
pub fn estimate_yaw(pairs: &MatchedPairs, theta_beta: f64) -> Result<YawEstimate> {
    let anchor = &pairs.pairs[pairs.anchor];
    let mut sum_sin = 0.0;
    let mut sum_cos = 0.0;
    let mut inliers = 0usize;
    for (j, pair) in pairs.pairs.iter().enumerate() {
        if j == pairs.anchor {
            continue;
        }
        let vs = Vector2::new(pair.sensor.x - anchor.sensor.x, pair.sensor.y - anchor.sensor.y);
        let vw = Vector2::new(pair.world.x - anchor.world.x, pair.world.y - anchor.world.y);
        if vs.norm() < theta_beta || vw.norm() < theta_beta {
            continue;
        }
        let angle = f64::atan2(vs.x * vw.y - vs.y * vw.x, vs.dot(&vw));
        sum_sin += angle.sin();
        sum_cos += angle.cos();
        inliers += 1;
    }
    if inliers == 0 {
        return Err(Error::AllBelowThreshold { theta_beta });
    }
    Ok(YawEstimate {
        beta_diff: f64::atan2(sum_sin, sum_cos),
        inlier_count: inliers,
    })
}

/// Mean translation over all pairs: `mean(world − R(β_diff)·sensor)`.
pub fn estimate_translation(pairs: &MatchedPairs, beta_diff: f64) -> Vector2<f64> {
    let (s, c) = beta_diff.sin_cos();
    let mut sum = Vector2::zeros();
    for pair in &pairs.pairs {
        let rotated = Vector2::new(
            c * pair.sensor.x - s * pair.sensor.y,
            s * pair.sensor.x + c * pair.sensor.y,
        );
        sum += Vector2::new(pair.world.x, pair.world.y) - rotated;
    }
    sum / pairs.pairs.len() as f64
}

/// Embeds the planar match (yaw about z, in-plane translation, zero height
/// shift) and composes it with the ground alignment into the full
/// sensor-to-world transform.
pub fn compose_calibration(
    beta_diff: f64,
    translation: Vector2<f64>,
    ground_alignment: &RigidTransform,
) -> RigidTransform {
    let planar = RigidTransform::new(
        rotation_z(beta_diff),
        Vector3::new(translation.x, translation.y, 0.0),
    );
    planar.compose(ground_alignment)
}

/// Ground-fit summary carried into the calibration report.
#[derive(Debug, Clone, Copy)]
pub struct GroundDiagnostics {
    pub iterations: usize,
    pub retained_fraction: f64,
    pub rms_residual: f64,
    pub mounting_height: f64,
}

/// The calibration output for one sensor.
#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub sensor_id: String,
    /// The full sensor-to-world transform.
    pub transform: RigidTransform,
    /// The intermediate ground alignment (sensor frame to ground frame).
    pub ground_alignment: RigidTransform,
    /// Yaw recovered by model matching, radians.
    pub beta_diff: f64,
    pub pair_count: usize,
    pub yaw_inlier_count: usize,
    /// Root-mean-square pair distance after applying the planar match, meters.
    pub rms_residual: f64,
    pub ground: GroundDiagnostics,
}

/// How detections are reduced to match points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMode {
    /// Match fitted box centers against world box centers; the visible-surface
    /// bias toward the sensor stays part of the residual.
    BoxCenter,
    /// Second pass matching the detected corner nearest the sensor against the
    /// world box corner nearest the (first-pass) sensor position.
    NearestCorner,
}

/// Matching-stage parameters.
#[derive(Debug, Clone)]
pub struct MatchParams {
    /// Minimum location-vector length for yaw pairs, meters.
    pub theta_beta: f64,
    pub reference_mode: ReferenceMode,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            theta_beta: 5.0,
            reference_mode: ReferenceMode::BoxCenter,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_beta > 0.0) {
            return Err(Error::InvalidParameter(
                "theta_beta must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Runs the full matching stage for one sensor and assembles the result.
pub fn match_track(
    sensor_id: &str,
    track: &SensorTrack,
    trace: &WorldTrace,
    params: &MatchParams,
    ground_alignment: &RigidTransform,
    ground: GroundDiagnostics,
) -> Result<CalibrationResult> {
    params.validate()?;
    let pairs = build_matched_pairs(track, trace)?;
    let yaw = estimate_yaw(&pairs, params.theta_beta)?;
    let translation = estimate_translation(&pairs, yaw.beta_diff);

    let (pairs, yaw, translation) = match params.reference_mode {
        ReferenceMode::BoxCenter => (pairs, yaw, translation),
        ReferenceMode::NearestCorner => {
            // The ground alignment puts the sensor at the planar origin, so
            // the first-pass translation is the sensor's world position.
            let sensor_world = Point2::new(translation.x, translation.y);
            let corner_pairs = build_pairs_with(track, trace, |det, center, heading| {
                let sensor_corner = nearest_corner(&det.bbox, Point2::new(0.0, 0.0));
                let world_box = OrientedBox2D {
                    center,
                    half_length: trace.vehicle_length / 2.0,
                    half_width: trace.vehicle_width / 2.0,
                    yaw: heading,
                };
                (sensor_corner, nearest_corner(&world_box, sensor_world))
            })?;
            let yaw = estimate_yaw(&corner_pairs, params.theta_beta)?;
            let translation = estimate_translation(&corner_pairs, yaw.beta_diff);
            (corner_pairs, yaw, translation)
        }
    };

    let transform = compose_calibration(yaw.beta_diff, translation, ground_alignment);
    let (s, c) = yaw.beta_diff.sin_cos();
    let rms_residual = (pairs
        .pairs
        .iter()
        .map(|p| {
            let rx = c * p.sensor.x - s * p.sensor.y + translation.x;
            let ry = s * p.sensor.x + c * p.sensor.y + translation.y;
            (p.world.x - rx).powi(2) + (p.world.y - ry).powi(2)
        })
        .sum::<f64>()
        / pairs.pairs.len() as f64)
        .sqrt();

    Ok(CalibrationResult {
        sensor_id: sensor_id.to_string(),
        transform,
        ground_alignment: *ground_alignment,
        beta_diff: yaw.beta_diff,
        pair_count: pairs.pairs.len(),
        yaw_inlier_count: yaw.inlier_count,
        rms_residual,
        ground,
    })
}

fn nearest_corner(bbox: &OrientedBox2D, to: Point2) -> Point2 {
    bbox.corners()
        .into_iter()
        .min_by(|a, b| a.distance(to).total_cmp(&b.distance(to)))
        .expect("boxes have corners")
}

/// Component-wise absolute differences between two calibration runs.
#[derive(Debug, Clone, Copy)]
pub struct RepetitionError {
    /// |Δψ1|, |Δψ2|, |Δψ3| in degrees.
    pub d_psi: [f64; 3],
    /// |Δx|, |Δy|, |Δz| in meters.
    pub d_translation: [f64; 3],
}

impl RepetitionError {
    pub fn max_angle(&self) -> f64 {
        self.d_psi.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_translation(&self) -> f64 {
        self.d_translation.iter().copied().fold(0.0, f64::max)
    }
}

/// Repetition error between two independent calibrations of the same sensor:
/// absolute Euler-angle and translation differences. Angle differences are
/// wrapped so near-±180° decompositions do not inflate the result.
pub fn repetition_error(a: &CalibrationResult, b: &CalibrationResult) -> RepetitionError {
    repetition_error_transforms(&a.transform, &b.transform)
}

pub fn repetition_error_transforms(
    a: &RigidTransform,
    b: &RigidTransform,
) -> RepetitionError {
    let (ea, _) = rotation_to_euler(&a.rotation);
    let (eb, _) = rotation_to_euler(&b.rotation);
    let d_angle = |x: f64, y: f64| wrap_angle((x - y).to_radians()).abs().to_degrees();
    RepetitionError {
        d_psi: [
            d_angle(ea.psi1, eb.psi1),
            d_angle(ea.psi2, eb.psi2),
            d_angle(ea.psi3, eb.psi3),
        ],
        d_translation: [
            (a.translation.x - b.translation.x).abs(),
            (a.translation.y - b.translation.y).abs(),
            (a.translation.z - b.translation.z).abs(),
        ],
    }
}

/// Euler decomposition of a result's rotation, degrees.
pub fn result_euler(result: &CalibrationResult) -> EulerAngles {
    rotation_to_euler(&result.transform.rotation).0
}
