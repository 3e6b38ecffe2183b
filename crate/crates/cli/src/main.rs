//! Batch driver for the calibration pipeline: ingest point-cloud recordings
//! and a vehicle pose trace, run background learning and calibration per
//! sensor, and emit reports, repetition-error comparisons, synthetic sessions,
//! and plot-data exports.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use civcal_core::io::{apply_param, SessionConfig, SimConfig};
use civcal_core::session::{
    format_compare_table, run_calibrate, run_compare, run_export_plots, run_simulate,
};

#[derive(Parser)]
#[command(
    name = "civcal",
    about = "Extrinsic self-calibration of 3D traffic sensors against a cooperating vehicle's pose trace",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the calibration pipeline for every configured sensor.
    Calibrate {
        /// Session configuration file (key-value text).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; per-sensor artifacts go to subdirectories.
        #[arg(long)]
        output: PathBuf,
        /// Only calibrate the listed sensor ids (repeatable).
        #[arg(long = "sensor")]
        sensors: Vec<String>,
        /// Parameter override KEY=VALUE (repeatable), e.g. theta_g=0.6.
        #[arg(long = "params")]
        params: Vec<String>,
    },
    /// Per-sensor repetition error between two calibration reports.
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
        /// Also write the table to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic session (background, drive, trace, ground truth).
    Simulate {
        /// Simulator configuration file (key-value text, sim.* keys).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the generated session.
        #[arg(long)]
        output: PathBuf,
        /// Override the configured random seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Export world-frame ground points and detected object centers for plotting.
    ExportPlots {
        /// Calibration report file.
        #[arg(long)]
        report: PathBuf,
        /// Per-frame detection log of the sensor.
        #[arg(long)]
        detections: PathBuf,
        /// Point-cloud frames to project (file or directory).
        #[arg(long)]
        frames: PathBuf,
        /// Sensor id to export when the report covers several.
        #[arg(long)]
        sensor: Option<String>,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Exit policy: 0 full success, 1 any per-sensor failure, 2 configuration
/// errors (unknown keys, bad values, missing inputs, mismatched reports).
fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Calibrate {
            config,
            output,
            sensors,
            params,
        } => {
            let mut session = SessionConfig::from_file(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            for kv in &params {
                let (key, value) = kv
                    .split_once('=')
                    .with_context(|| format!("--params {kv:?} is not KEY=VALUE"))?;
                apply_param(&mut session.params, key.trim(), value.trim())?;
            }
            session.params.validate()?;
            session.retain_sensors(&sensors)?;
            session.validate_paths()?;

            let outcomes = run_calibrate(&session, &output)?;
            let mut failures = 0;
            for outcome in &outcomes {
                match &outcome.outcome {
                    Ok(result) => println!(
                        "{}: calibrated ({} pairs, rms residual {:.3} m)",
                        outcome.id, result.pair_count, result.rms_residual
                    ),
                    Err(e) => {
                        failures += 1;
                        eprintln!("{}: FAILED: {e}", outcome.id);
                    }
                }
            }
            println!("report: {}", output.join("report.txt").display());
            Ok(if failures == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Compare {
            report_a,
            report_b,
            output,
        } => {
            let rows = run_compare(&report_a, &report_b)?;
            let table = format_compare_table(&rows);
            print!("{table}");
            if let Some(path) = output {
                std::fs::write(&path, table)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            config,
            output,
            seed,
        } => {
            let mut sim = SimConfig::from_file(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(seed) = seed {
                sim.scene.seed = seed;
            }
            let session = run_simulate(&sim, &output)?;
            println!(
                "wrote {} drive frames, background, trace and ground truth under {}",
                session.frame_count,
                output.display()
            );
            println!("session config: {}", session.session_config_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportPlots {
            report,
            detections,
            frames,
            sensor,
            output,
        } => {
            let (ground, centers) =
                run_export_plots(&report, &detections, &frames, sensor.as_deref(), &output)?;
            println!("wrote {} and {}", ground.display(), centers.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
