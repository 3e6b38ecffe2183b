//! Benchmarks for the per-frame hot path and the data-parallel stages, with
//! sequential twins for comparison. Build with `--features parallel` (default)
//! to measure the rayon paths against their serial fallbacks.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use civcal_core::geometry::{EulerAngles, Point2, RigidTransform};
use civcal_core::lshape::{fit_vehicle_box, LShapeParams};
use civcal_core::pipeline::{detect_track, detect_track_serial, learn_background, PipelineParams};
use civcal_core::sim::{
    simulate_background, simulate_drive, simulate_drive_serial, PathPose, SceneConfig,
};

fn noisy_l(n: usize) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let angle = 0.6;
    let n_long = n * 2 / 3;
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let (t, leg) = if i < n_long {
            (4.5 * i as f64 / (n_long - 1) as f64, 0)
        } else {
            (1.8 * (i - n_long) as f64 / (n - n_long - 1) as f64, 1)
        };
        let base = if leg == 0 {
            Point2::new(t, 0.0)
        } else {
            Point2::new(0.0, t)
        };
        let r = base.rotated(angle);
        pts.push(Point2::new(
            r.x + noise.sample(&mut rng),
            r.y + noise.sample(&mut rng),
        ));
    }
    pts
}

fn bench_scene() -> SceneConfig {
    let extrinsic = RigidTransform::from_euler(
        EulerAngles::new(12.0, 4.0, -3.0),
        Vector3::new(30.0, -20.0, 6.0),
    );
    let s = extrinsic.translation;
    SceneConfig {
        true_extrinsic: extrinsic,
        ground_extent: 30.0,
        path: vec![
            PathPose {
                time: 0.0,
                position: Point2::new(s.x - 30.0, s.y - 25.0),
                heading: 0.27,
            },
            PathPose {
                time: 4.0,
                position: Point2::new(s.x - 5.0, s.y - 18.0),
                heading: 0.27,
            },
        ],
        seed: 3,
        ..SceneConfig::default()
    }
}

fn bench_box_fit(c: &mut Criterion) {
    let params = LShapeParams::default();
    let pts = noisy_l(2000);
    c.bench_function("fit_vehicle_box/2000_points", |b| {
        b.iter(|| fit_vehicle_box(black_box(&pts), &params).unwrap())
    });
}

fn bench_detection(c: &mut Criterion) {
    let scene = bench_scene();
    let params = PipelineParams::default();
    let background = simulate_background(&scene);
    let model = learn_background(&[background.cloud], &params).unwrap();
    let (frames, _) = simulate_drive(&scene).unwrap();
    let drive: Vec<_> = frames.into_iter().map(|f| f.cloud).collect();

    let mut group = c.benchmark_group("detect_track_51_frames");
    group.sample_size(20);
    group.bench_function("parallel", |b| {
        b.iter(|| detect_track(black_box(&drive), &model, &params))
    });
    group.bench_function("serial", |b| {
        b.iter(|| detect_track_serial(black_box(&drive), &model, &params))
    });
    group.finish();
}

fn bench_simulation(c: &mut Criterion) {
    let mut scene = bench_scene();
    scene.range_sigma = 0.10;
    scene.angular_sigma_deg = 0.5;
    let mut group = c.benchmark_group("simulate_drive_51_frames");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| simulate_drive(black_box(&scene)).unwrap())
    });
    group.bench_function("serial", |b| {
        b.iter(|| simulate_drive_serial(black_box(&scene)).unwrap())
    });
    group.finish();
}

fn bench_ground_refine(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 0.10).unwrap();
    let mut pts = Vec::new();
    for i in 0..81 {
        for j in 0..81 {
            pts.push(civcal_core::Point3::new(
                i as f64 * 0.5 - 20.0,
                j as f64 * 0.5 - 20.0,
                -6.0 + noise.sample(&mut rng),
            ));
        }
    }
    for _ in 0..600 {
        pts.push(civcal_core::Point3::new(
            8.0 + rng.random_range(-0.1..0.1),
            rng.random_range(-10.0..10.0),
            -6.0 + rng.random_range(0.0..2.5),
        ));
    }
    let cloud = civcal_core::PointCloud::new("bg", 0.0, pts);
    let cfg = civcal_core::ground::PlaneFitConfig::default();
    c.bench_function("refine_plane/7161_points", |b| {
        b.iter(|| civcal_core::ground::refine_plane(black_box(&cloud), &cfg).unwrap())
    });
}

criterion_group!(
    benches,
    bench_box_fit,
    bench_detection,
    bench_simulation,
    bench_ground_refine
);
criterion_main!(benches);
