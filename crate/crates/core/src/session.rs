//! File-driven session operations behind the CLI subcommands: calibrate a
//! configured sensor set, compare two reports, generate a synthetic session,
//! and export plot data. Sensors run concurrently; every per-sensor artifact
//! goes to that sensor's own output subdirectory, and the combined report is
//! assembled afterwards so reruns are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::{
    export_ground_points, export_object_centers, read_detections, read_frames, read_report,
    read_trace, write_boxes, write_detections, write_frame, write_frames_dir, write_report,
    write_trace, SessionConfig, SimConfig,
};
use crate::matching::{repetition_error_transforms, CalibrationResult, RepetitionError, WorldTrace};
use crate::parallel::map_indexed;
use crate::pipeline::{calibrate_sensor, PipelineParams};
use crate::sim::{simulate_background, simulate_drive};

/// Outcome of one sensor within a session; a failing sensor never aborts the
/// others.
#[derive(Debug)]
pub struct SensorOutcome {
    pub id: String,
    pub outcome: Result<CalibrationResult>,
}

/// Runs the calibration session: per sensor, background learning, detection,
/// matching, and artifact writes; then the combined report over all sensors
/// that succeeded.
pub fn run_calibrate(config: &SessionConfig, output_dir: &Path) -> Result<Vec<SensorOutcome>> {
    config.validate_paths()?;
    fs::create_dir_all(output_dir)?;
    let trace = read_trace(&config.trace_path)?;

    let outcomes: Vec<SensorOutcome> = map_indexed(&config.sensors, |_, sensor| {
        let sensor_dir = output_dir.join(&sensor.id);
        let outcome = run_one_sensor(
            &sensor.id,
            &sensor.background_path,
            &sensor.drive_path,
            &trace,
            &config.params,
            &sensor_dir,
        );
        SensorOutcome {
            id: sensor.id.clone(),
            outcome,
        }
    });

    let results: Vec<CalibrationResult> = outcomes
        .iter()
        .filter_map(|o| o.outcome.as_ref().ok().cloned())
        .collect();
    write_report(&output_dir.join("report.txt"), &results, &config.params)?;
    Ok(outcomes)
}

fn run_one_sensor(
    id: &str,
    background_path: &Path,
    drive_path: &Path,
    trace: &WorldTrace,
    params: &PipelineParams,
    sensor_dir: &Path,
) -> Result<CalibrationResult> {
    let background_frames = read_frames(background_path)?;
    let drive_frames = read_frames(drive_path)?;
    let calibration = calibrate_sensor(id, &background_frames, &drive_frames, trace, params)?;
    fs::create_dir_all(sensor_dir)?;
    write_boxes(&sensor_dir.join("background_boxes.txt"), &calibration.model.boxes)?;
    write_detections(&sensor_dir.join("detections.txt"), &calibration.frame_logs)?;
    Ok(calibration.result)
}

/// Per-sensor repetition errors between two reports covering the same sensors.
pub fn run_compare(report_a: &Path, report_b: &Path) -> Result<Vec<(String, RepetitionError)>> {
    let (results_a, _) = read_report(report_a)?;
    let (results_b, _) = read_report(report_b)?;
    let ids_a: Vec<&str> = results_a.iter().map(|r| r.sensor_id.as_str()).collect();
    let mut ids_b: Vec<&str> = results_b.iter().map(|r| r.sensor_id.as_str()).collect();
    let mut sorted_a = ids_a.clone();
    sorted_a.sort_unstable();
    ids_b.sort_unstable();
    if sorted_a != ids_b {
        return Err(Error::MismatchedSensors(format!(
            "{ids_a:?} vs {ids_b:?}"
        )));
    }
    Ok(results_a
        .iter()
        .map(|a| {
            let b = results_b
                .iter()
                .find(|b| b.sensor_id == a.sensor_id)
                .expect("id sets match");
            (
                a.sensor_id.clone(),
                repetition_error_transforms(&a.transform, &b.transform),
            )
        })
        .collect())
}

/// Renders the comparison as the report table: degrees and centimeters.
pub fn format_compare_table(rows: &[(String, RepetitionError)]) -> String {
    let mut out = String::from(
        "sensor |dpsi1_deg| |dpsi2_deg| |dpsi3_deg| |dx_cm| |dy_cm| |dz_cm|\n",
    );
    for (id, err) in rows {
        out.push_str(&format!(
            "{} {:.4} {:.4} {:.4} {:.2} {:.2} {:.2}\n",
            id,
            err.d_psi[0],
            err.d_psi[1],
            err.d_psi[2],
            err.d_translation[0] * 100.0,
            err.d_translation[1] * 100.0,
            err.d_translation[2] * 100.0,
        ));
    }
    out
}

/// Artifacts written by [`run_simulate`].
#[derive(Debug, Clone)]
pub struct SimulatedSession {
    pub background_dir: PathBuf,
    pub drive_dir: PathBuf,
    pub trace_path: PathBuf,
    pub session_config_path: PathBuf,
    pub truth_path: PathBuf,
    pub frame_count: usize,
}

/// Generates a synthetic session on disk in exactly the layout `calibrate`
/// consumes, plus a ground-truth record of the configured extrinsic.
pub fn run_simulate(config: &SimConfig, output_dir: &Path) -> Result<SimulatedSession> {
    fs::create_dir_all(output_dir)?;
    let background = simulate_background(&config.scene);
    let (frames, trace) = simulate_drive(&config.scene)?;

    let background_dir = output_dir.join("background");
    fs::create_dir_all(&background_dir)?;
    write_frame(&background_dir.join("frame_000000.txt"), &background.cloud)?;

    let drive_dir = output_dir.join("drive");
    let clouds: Vec<_> = frames.into_iter().map(|f| f.cloud).collect();
    write_frames_dir(&drive_dir, &clouds, "frame")?;

    let trace_path = output_dir.join("trace.txt");
    write_trace(&trace_path, &trace)?;

    let truth_path = output_dir.join("truth.txt");
    let record = config
        .scene
        .true_extrinsic
        .to_record()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    fs::write(
        &truth_path,
        format!("# true sensor-to-world transform record\ntransform = {record}\n"),
    )?;

    let session_config_path = output_dir.join("session.cfg");
    fs::write(
        &session_config_path,
        format!(
            "# generated session\ntrace = trace.txt\nsensor.{id}.background = background\nsensor.{id}.drive = drive\n",
            id = config.sensor_id
        ),
    )?;

    Ok(SimulatedSession {
        background_dir,
        drive_dir,
        trace_path,
        session_config_path,
        truth_path,
        frame_count: clouds.len(),
    })
}

/// Exports plot data for one sensor of a report: world-frame ground points
/// from the given frames and world-frame detected object centers from the
/// detection log.
pub fn run_export_plots(
    report_path: &Path,
    detections_path: &Path,
    frames_path: &Path,
    sensor_id: Option<&str>,
    output_dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let (results, params) = read_report(report_path)?;
    let result = match sensor_id {
        Some(id) => results
            .iter()
            .find(|r| r.sensor_id == id)
            .ok_or_else(|| Error::MismatchedSensors(format!("sensor {id:?} not in report")))?,
        None => {
            if results.len() > 1 {
                return Err(Error::InvalidParameter(
                    "report covers several sensors; pass --sensor".into(),
                ));
            }
            results
                .first()
                .ok_or_else(|| Error::InvalidParameter("report has no sensors".into()))?
        }
    };
    let theta_g = params
        .get("theta_g")
        .and_then(|v| v.parse::<f64>().ok())
        .unwrap_or(0.5);
    fs::create_dir_all(output_dir)?;

    let frames = read_frames(frames_path)?;
    let ground_path = output_dir.join("ground_points.txt");
    export_ground_points(&ground_path, &frames, &result.transform, theta_g)?;

    let detections = read_detections(detections_path)?;
    let centers_path = output_dir.join("object_centers.txt");
    export_object_centers(
        &centers_path,
        &detections,
        &result.transform,
        &result.ground_alignment,
    )?;
    Ok((ground_path, centers_path))
}
