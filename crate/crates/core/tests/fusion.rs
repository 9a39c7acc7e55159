mod common;

use common::*;
use mf_core::fusion::{correct_dots, fuse_frame, AlignmentTransform};
use mf_core::harness::{alignment_residual, calibrate_on_plane, plane_script, rig_alignment};
use mf_core::{ArtifactModel, DotCorrectionParams, PipelineConfig, SensorRig};

#[test]
fn dot_correction_recovers_most_of_the_bias() {
    let rig = SensorRig::default();
    let h = rig_alignment(&rig).unwrap();
    for d in [60.0, 80.0, 100.0] {
        let (observed, oracle) = plane_with_oracle(&rig, d, 11);
        let corrected = fuse_frame(&observed, &h, &DotCorrectionParams::default());
        let (before, after, n) = dot_pixel_mae(
            observed.depth().pixels(),
            corrected.depth.pixels(),
            oracle.depth().pixels(),
        );
        assert!(n > 5000, "{d} mm: only {n} dot pixels");
        assert!((2.0..=4.0).contains(&before), "{d} mm: injected bias {before}");
        assert!(after <= 0.2 * before, "{d} mm: {before:.3} -> {after:.3}");
    }
}

#[test]
fn plane_inside_cutoff_keeps_its_mean() {
    let rig = SensorRig::default();
    let h = rig_alignment(&rig).unwrap();
    let (observed, oracle) = plane_with_oracle(&rig, 30.0, 2);
    assert_eq!(observed.depth(), oracle.depth());
    let corrected = fuse_frame(&observed, &h, &DotCorrectionParams::default());
    let mean = |px: &[f32]| px.iter().map(|&v| v as f64).sum::<f64>() / px.len() as f64;
    let a = mean(observed.depth().pixels().as_slice());
    let b = mean(corrected.depth.pixels().as_slice());
    assert!((a - b).abs() < 0.02, "{a} vs {b}");
}

#[test]
fn noise_free_plane_passes_through() {
    let rig = SensorRig::default();
    let mut config = PipelineConfig::default();
    config.artifact = ArtifactModel::null();
    config.intensity.noise_sigma = 0.0;
    let frame = first_frame(&rig, plane_script(70.0, 1, 0), &config);
    let h = rig_alignment(&rig).unwrap();
    let once = fuse_frame(&frame, &h, &config.correction).depth;
    let aligned = mf_core::fusion::align_intensity(frame.intensity(), &h, 640, 480);
    let twice = correct_dots(&once, &aligned, &config.correction);
    for ((&a, &b), &c) in frame
        .depth()
        .pixels()
        .as_slice()
        .iter()
        .zip(once.pixels().as_slice())
        .zip(twice.pixels().as_slice())
    {
        assert!((a - b).abs() < 1e-3 && (b - c).abs() < 1e-3);
    }
}

#[test]
fn calibration_holds_out_below_half_a_pixel() {
    let rig = SensorRig::default();
    let report = calibrate_on_plane(&rig, &PipelineConfig::default(), 100.0, 10, 4).unwrap();
    assert!(report.matched_dots >= 300, "{}", report.matched_dots);
    assert!(report.holdout_rms_px < 0.5, "{report:?}");
}

#[test]
fn near_calibration_transfers_to_far_plane() {
    // Dots only bias depth beyond 40 mm, so 45 mm is the nearest usable plane.
    let rig = SensorRig::default();
    let config = PipelineConfig::default();
    let near = calibrate_on_plane(&rig, &config, 45.0, 10, 5).unwrap();
    let residual = alignment_residual(&rig, &config, &near.transform, 100.0, 10, 6).unwrap();
    assert!(residual < 2.0, "{residual}");
}

#[test]
fn calibration_fails_without_depth_dots() {
    let rig = SensorRig::default();
    assert!(calibrate_on_plane(&rig, &PipelineConfig::default(), 30.0, 2, 0).is_err());
}

#[test]
fn alignment_file_round_trip() {
    let rig = SensorRig::default();
    let h = rig_alignment(&rig).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("alignment.txt");
    h.write(&path).unwrap();
    let back = AlignmentTransform::read(&path).unwrap();
    assert_eq!(back.source, h.source);
    assert!((back.matrix() - h.matrix()).abs().max() < 1e-12);
    std::fs::write(&path, "MF-H v1 0.1 calibrated\n1 0 0\n").unwrap();
    assert!(AlignmentTransform::read(&path).is_err());
}
