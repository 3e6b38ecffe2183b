//! Per-sensor calibration pipeline: background learning on the empty scan,
//! per-frame vehicle detection over the drive recording, model matching.
//! Frames are independent, so the detection loop runs data-parallel.

use crate::background::{extract_background_boxes, segment_by_height, BackgroundBox, BackgroundParams};
use crate::error::{Error, Result};
use crate::extraction::{
    dbscan, project_to_ground, remove_ground_and_background, select_vehicle_cluster, ClusterParams,
};
use crate::geometry::{Point3, PointCloud, RigidTransform};
use crate::ground::{ground_alignment, refine_plane, PlaneFitConfig, RefinedPlaneFit};
use crate::lshape::{fit_vehicle_box, LShapeParams, OrientedBox2D};
use crate::matching::{
    match_track, CalibrationResult, Detection, GroundDiagnostics, MatchParams, SensorTrack,
    WorldTrace,
};
use crate::parallel::{map_indexed, map_indexed_serial};

/// Every tunable of the pipeline, with the working defaults.
#[derive(Debug, Clone, Default)]
pub struct PipelineParams {
    pub segmentation: SegmentationParams,
    pub plane: PlaneFitConfig,
    pub cluster: ClusterParams,
    pub lshape: LShapeParams,
    pub background: BackgroundParams,
    pub matching: MatchParams,
}

/// Ground/static split threshold.
#[derive(Debug, Clone)]
pub struct SegmentationParams {
    /// Height threshold θ_g above the aligned ground plane, meters.
    pub theta_g: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self { theta_g: 0.5 }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.segmentation.theta_g > 0.0) {
            return Err(Error::InvalidParameter("theta_g must be positive".into()));
        }
        self.plane.validate()?;
        self.cluster.validate()?;
        self.lshape.validate()?;
        self.background.validate()?;
        self.matching.validate()
    }
}

/// Everything learned from the background measurement.
#[derive(Debug, Clone)]
pub struct BackgroundModel {
    pub alignment: RigidTransform,
    pub boxes: Vec<BackgroundBox>,
    pub plane: RefinedPlaneFit,
}

impl BackgroundModel {
    pub fn ground_diagnostics(&self) -> GroundDiagnostics {
        GroundDiagnostics {
            iterations: self.plane.iterations,
            retained_fraction: self.plane.retained_fraction(),
            rms_residual: self.plane.rms_residual,
            mounting_height: self.plane.fit.mounting_height(),
        }
    }
}

/// Fits the ground plane on the merged background frames, aligns the scan,
/// and learns boxes around whatever sticks out of the ground.
pub fn learn_background(frames: &[PointCloud], params: &PipelineParams) -> Result<BackgroundModel> {
    params.validate()?;
    let merged: Vec<Point3> = frames.iter().flat_map(|f| f.points.iter().copied()).collect();
    let merged = PointCloud::new("background", frames.first().map_or(0.0, |f| f.capture_time), merged);
    let plane = refine_plane(&merged, &params.plane)?;
    let alignment = ground_alignment(&plane.fit);
    let aligned = PointCloud::new(
        merged.frame_id.clone(),
        merged.capture_time,
        merged.points.iter().map(|p| alignment.apply(*p)).collect(),
    );
    let segmentation = segment_by_height(&aligned, params.segmentation.theta_g);
    let boxes = extract_background_boxes(
        &segmentation.statics,
        &params.cluster,
        &params.lshape,
        &params.background,
    );
    Ok(BackgroundModel {
        alignment,
        boxes,
        plane,
    })
}

/// Per-frame detection record for the detection log.
#[derive(Debug, Clone)]
pub struct FrameLog {
    pub time: f64,
    pub raw_points: usize,
    /// Points left after ground and background removal.
    pub foreground_points: usize,
    /// Size of the chosen vehicle cluster (0 when none).
    pub cluster_points: usize,
    pub detection: Option<OrientedBox2D>,
    /// Why no detection was produced, when `detection` is `None`.
    pub skip_reason: Option<String>,
}

fn detect_frame(frame: &PointCloud, model: &BackgroundModel, params: &PipelineParams) -> FrameLog {
    let mut log = FrameLog {
        time: frame.capture_time,
        raw_points: frame.len(),
        foreground_points: 0,
        cluster_points: 0,
        detection: None,
        skip_reason: None,
    };
    let foreground = remove_ground_and_background(
        frame,
        &model.alignment,
        params.segmentation.theta_g,
        &model.boxes,
    );
    log.foreground_points = foreground.len();
    let clusters = dbscan(&foreground, &params.cluster);
    let cluster = match select_vehicle_cluster(&clusters) {
        Ok(c) => c,
        Err(e) => {
            log.skip_reason = Some(e.to_string());
            return log;
        }
    };
    log.cluster_points = cluster.size();
    let members: Vec<Point3> = cluster.members.iter().map(|&i| foreground[i]).collect();
    let flat = project_to_ground(&members);
    match fit_vehicle_box(&flat, &params.lshape) {
        Ok(fit) => log.detection = Some(fit.bbox),
        Err(e) => log.skip_reason = Some(e.to_string()),
    }
    log
}

/// Runs vehicle detection over all drive frames (in parallel when the
/// `parallel` feature is on) and assembles the time-ordered sensor track.
/// Frames must be sorted by capture time.
pub fn detect_track(
    frames: &[PointCloud],
    model: &BackgroundModel,
    params: &PipelineParams,
) -> (SensorTrack, Vec<FrameLog>) {
    let logs = map_indexed(frames, |_, frame| detect_frame(frame, model, params));
    (track_from_logs(&logs), logs)
}

/// Sequential twin of [`detect_track`]; output is identical.
pub fn detect_track_serial(
    frames: &[PointCloud],
    model: &BackgroundModel,
    params: &PipelineParams,
) -> (SensorTrack, Vec<FrameLog>) {
    let logs = map_indexed_serial(frames, |_, frame| detect_frame(frame, model, params));
    (track_from_logs(&logs), logs)
}

fn track_from_logs(logs: &[FrameLog]) -> SensorTrack {
    SensorTrack {
        detections: logs
            .iter()
            .filter_map(|log| {
                log.detection.map(|bbox| Detection {
                    time: log.time,
                    bbox,
                })
            })
            .collect(),
    }
}

/// The artifacts of one sensor's calibration run.
#[derive(Debug, Clone)]
pub struct SensorCalibration {
    pub result: CalibrationResult,
    pub model: BackgroundModel,
    pub frame_logs: Vec<FrameLog>,
}

/// Full pipeline for one sensor: background learning, detection over the
/// drive frames, model matching against the trace.
pub fn calibrate_sensor(
    sensor_id: &str,
    background_frames: &[PointCloud],
    drive_frames: &[PointCloud],
    trace: &WorldTrace,
    params: &PipelineParams,
) -> Result<SensorCalibration> {
    let model = learn_background(background_frames, params)?;
    let (track, frame_logs) = detect_track(drive_frames, &model, params);
    let result = match_track(
        sensor_id,
        &track,
        trace,
        &params.matching,
        &model.alignment,
        model.ground_diagnostics(),
    )?;
    Ok(SensorCalibration {
        result,
        model,
        frame_logs,
    })
}
