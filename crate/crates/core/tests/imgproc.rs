mod common;

use common::*;
use mf_core::harness::plane_script;
use mf_core::imgproc::{detect_blobs, lk_flow, DotTracker};
use mf_core::{BlobParams, FlowParams, PipelineConfig, SensorRig};
use nalgebra::Point2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rms(errors: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = errors.fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    (s / n as f64).sqrt()
}

fn nearest(p: &Point2<f64>, pts: &[Point2<f64>]) -> f64 {
    pts.iter().map(|q| (q - p).norm()).fold(f64::INFINITY, f64::min)
}

#[test]
fn clean_membrane_shows_every_dot_on_the_grid() {
    let rig = SensorRig::default();
    let mut script = plane_script(50.0, 1, 9);
    script.objects.clear();
    let frame = first_frame(&rig, script, &PipelineConfig::default());
    let blobs = detect_blobs(frame.intensity().pixels(), &BlobParams::default());
    assert_eq!(blobs.len(), 328);
    let grid = intensity_grid(&rig);
    assert_eq!(grid.len(), 328);
    let err = rms(blobs.iter().map(|b| nearest(&b.center, &grid)));
    assert!(err < 0.2, "centroid rms {err}");
}

#[test]
fn uniform_shifts_are_recovered() {
    let rig = SensorRig::default();
    let grid = intensity_grid(&rig);
    let r = intensity_dot_radius_px(&rig);
    let base = supersampled_dots(960, 540, &grid, r, (0.0, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut errors = Vec::new();
    for _ in 0..6 {
        let s = (rng.random_range(-4.0..=4.0), rng.random_range(-4.0..=4.0));
        let moved = supersampled_dots(960, 540, &grid, r, s);
        for f in lk_flow(&base, &moved, &grid, &FlowParams::default()) {
            assert!(f.valid);
            errors.push(((f.flow.x - s.0).powi(2) + (f.flow.y - s.1).powi(2)).sqrt());
        }
    }
    let e = rms(errors.into_iter());
    assert!(e < 0.15, "flow rms {e}");
}

#[test]
fn two_pixel_shift_sums_to_twice_the_dot_count() {
    let rig = SensorRig::default();
    let grid = intensity_grid(&rig);
    let r = intensity_dot_radius_px(&rig);
    let base = supersampled_dots(960, 540, &grid, r, (0.0, 0.0));
    let blobs = detect_blobs(&base, &BlobParams::default());
    let mut tracker = DotTracker::initialize(
        &base,
        &blobs,
        &rig.dot_pixels(&rig.intensity_camera),
        rig.dot_spacing_px(&rig.intensity_camera),
        FlowParams::default(),
    )
    .unwrap();
    assert_eq!(tracker.alive_count(), 328);
    tracker.update(&supersampled_dots(960, 540, &grid, r, (2.0, 0.0)), None);
    let sum = tracker.flow_sum();
    assert!((sum - 656.0).abs() <= 0.02 * 656.0, "{sum}");
}
