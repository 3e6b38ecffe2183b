//! File-driven session tests: simulate to disk, calibrate from disk, compare
//! reports, export plot data.

mod common;

use common::*;

use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use civcal_core::error::Error;
use civcal_core::io::{read_report, write_report, SessionConfig, SimConfig};
use civcal_core::session::{
    format_compare_table, run_calibrate, run_compare, run_export_plots, run_simulate,
};

fn simulated_session(tag: &str, seed: u64) -> (TempDir, SimConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extrinsic = random_extrinsic(&mut rng);
    let scene = corner_on_scene(extrinsic, seed);
    let dir = TempDir::new(tag);
    let sim = SimConfig {
        scene,
        sensor_id: "LA1".into(),
    };
    (dir, sim)
}

#[test]
fn calibrate_is_byte_identical_across_reruns() {
    let (dir, sim) = simulated_session("session-determinism", 201);
    run_simulate(&sim, &dir.path).unwrap();
    let config = SessionConfig::from_file(&dir.path.join("session.cfg")).unwrap();

    let out_a = dir.path.join("out_a");
    let out_b = dir.path.join("out_b");
    run_calibrate(&config, &out_a).unwrap();
    run_calibrate(&config, &out_b).unwrap();
    for name in ["report.txt", "LA1/background_boxes.txt", "LA1/detections.txt"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn compare_report_with_itself_is_zero() {
    let (dir, sim) = simulated_session("session-self-compare", 202);
    run_simulate(&sim, &dir.path).unwrap();
    let config = SessionConfig::from_file(&dir.path.join("session.cfg")).unwrap();
    let out = dir.path.join("out");
    run_calibrate(&config, &out).unwrap();
    let report = out.join("report.txt");
    let rows = run_compare(&report, &report).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].0, "LA1");
    assert_eq!(rows[0].1.d_psi, [0.0; 3]);
    assert_eq!(rows[0].1.d_translation, [0.0; 3]);
    let table = format_compare_table(&rows);
    assert!(table.contains("LA1"));
}

#[test]
fn hand_edited_offset_shows_up_in_centimeters() {
    let (dir, sim) = simulated_session("session-edit", 203);
    run_simulate(&sim, &dir.path).unwrap();
    let config = SessionConfig::from_file(&dir.path.join("session.cfg")).unwrap();
    let out = dir.path.join("out");
    run_calibrate(&config, &out).unwrap();
    let report = out.join("report.txt");
    let (mut results, _) = read_report(&report).unwrap();
    results[0].transform = shift_translation(&results[0].transform, 0.05, 0.0, 0.0);
    let edited = dir.path.join("edited.txt");
    write_report(&edited, &results, &config.params).unwrap();

    let rows = run_compare(&report, &edited).unwrap();
    assert!((rows[0].1.d_translation[0] - 0.05).abs() < 1e-9);
    assert_eq!(rows[0].1.d_translation[1], 0.0);
    assert_eq!(rows[0].1.d_psi, [0.0; 3]);
    let table = format_compare_table(&rows);
    assert!(table.contains("5.00"), "table should list 5.00 cm: {table}");
}

#[test]
fn mismatched_sensor_sets_rejected() {
    let (dir, sim) = simulated_session("session-mismatch", 204);
    run_simulate(&sim, &dir.path).unwrap();
    let config = SessionConfig::from_file(&dir.path.join("session.cfg")).unwrap();
    let out = dir.path.join("out");
    run_calibrate(&config, &out).unwrap();
    let report = out.join("report.txt");
    let (mut results, _) = read_report(&report).unwrap();
    results[0].sensor_id = "OTHER".into();
    let renamed = dir.path.join("renamed.txt");
    write_report(&renamed, &results, &config.params).unwrap();
    assert!(matches!(
        run_compare(&report, &renamed),
        Err(Error::MismatchedSensors(_))
    ));
}

#[test]
fn export_plots_ground_and_corridor() {
    let (dir, sim) = simulated_session("session-plots", 205);
    let session = run_simulate(&sim, &dir.path).unwrap();
    let config = SessionConfig::from_file(&dir.path.join("session.cfg")).unwrap();
    let out = dir.path.join("out");
    run_calibrate(&config, &out).unwrap();

    let (ground_path, centers_path) = run_export_plots(
        &out.join("report.txt"),
        &out.join("LA1").join("detections.txt"),
        &session.background_dir,
        Some("LA1"),
        &dir.path.join("plots"),
    )
    .unwrap();

    // Exported ground points lie on the street plane.
    let ground = fs::read_to_string(&ground_path).unwrap();
    let mut n = 0;
    for line in ground.lines().filter(|l| !l.starts_with('#')) {
        let z: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
        assert!(z.abs() < 0.05, "ground point at z={z}");
        n += 1;
    }
    assert!(n > 1000);

    // Exported centers stay within the configured path corridor.
    let centers = fs::read_to_string(&centers_path).unwrap();
    let path_a = sim.scene.path.first().unwrap().position;
    let path_b = sim.scene.path.last().unwrap().position;
    let dir_v = (
        (path_b.x - path_a.x) / path_a.distance(path_b),
        (path_b.y - path_a.y) / path_a.distance(path_b),
    );
    let mut m = 0;
    for line in centers.lines().filter(|l| !l.starts_with('#')) {
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        let (x, y) = (cols[1], cols[2]);
        let lateral = ((x - path_a.x) * dir_v.1 - (y - path_a.y) * dir_v.0).abs();
        assert!(lateral < 0.5, "center {lateral:.3} m off the corridor");
        m += 1;
    }
    assert!(m >= 40);
}

#[test]
fn export_plots_with_empty_detection_log() {
    let (dir, sim) = simulated_session("session-plots-empty", 206);
    let session = run_simulate(&sim, &dir.path).unwrap();
    let config = SessionConfig::from_file(&dir.path.join("session.cfg")).unwrap();
    let out = dir.path.join("out");
    run_calibrate(&config, &out).unwrap();
    // Empty log: header only.
    let empty_log = dir.path.join("empty_detections.txt");
    fs::write(&empty_log, "# detections: none\n").unwrap();
    let (_, centers_path) = run_export_plots(
        &out.join("report.txt"),
        &empty_log,
        &session.background_dir,
        None,
        &dir.path.join("plots"),
    )
    .unwrap();
    let centers = fs::read_to_string(&centers_path).unwrap();
    assert!(centers.starts_with('#'));
    assert_eq!(centers.lines().count(), 1);
}

#[test]
fn failing_sensor_does_not_abort_others() {
    let (dir, sim) = simulated_session("session-partial", 207);
    run_simulate(&sim, &dir.path).unwrap();
    // Second sensor with an empty drive directory: fails with
    // InsufficientOverlap while the first still calibrates.
    let empty_drive = dir.path.join("empty_drive");
    fs::create_dir_all(&empty_drive).unwrap();
    fs::write(
        dir.path.join("session.cfg"),
        "trace = trace.txt\n\
         sensor.LA1.background = background\n\
         sensor.LA1.drive = drive\n\
         sensor.LB9.background = background\n\
         sensor.LB9.drive = empty_drive\n",
    )
    .unwrap();
    let config = SessionConfig::from_file(&dir.path.join("session.cfg")).unwrap();
    let out = dir.path.join("out");
    let outcomes = run_calibrate(&config, &out).unwrap();
    assert_eq!(outcomes.len(), 2);
    assert!(outcomes.iter().find(|o| o.id == "LA1").unwrap().outcome.is_ok());
    assert!(outcomes.iter().find(|o| o.id == "LB9").unwrap().outcome.is_err());
    // The report carries the sensor that succeeded.
    let (results, _) = read_report(&out.join("report.txt")).unwrap();
    assert_eq!(results.len(), 1);
    assert_eq!(results[0].sensor_id, "LA1");
}

#[test]
fn simulate_writes_consumable_truth() {
    let (dir, sim) = simulated_session("session-truth", 208);
    let session = run_simulate(&sim, &dir.path).unwrap();
    let truth = fs::read_to_string(&session.truth_path).unwrap();
    let record: Vec<f64> = truth
        .lines()
        .find(|l| l.starts_with("transform"))
        .unwrap()
        .split_once('=')
        .unwrap()
        .1
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    assert_eq!(record.len(), 12);
    let arr: [f64; 12] = record.try_into().unwrap();
    let parsed = civcal_core::RigidTransform::from_record(&arr);
    let (dt, da) = transform_error(&parsed, &sim.scene.true_extrinsic);
    assert!(dt < 1e-12 && da < 1e-12);
}
