//! Intensity-to-depth alignment from a flat plane, as done on the bench.

use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::fusion::correct::depth_residual;
use crate::fusion::{fit_alignment, match_by_grid, AlignmentTransform, GridPrior};
use crate::harness::scene::plane_script;
use crate::imgproc::detect_blobs;
use crate::pipeline::PipelineConfig;
use crate::raster::Raster;
use crate::rig::SensorRig;
use crate::synth::Simulator;

/// Plane distance used for the rig's reference calibration.
pub const CALIBRATION_PLANE_MM: f64 = 100.0;
/// Frames averaged before detecting dots.
pub const CALIBRATION_FRAMES: usize = 10;

/// Per-pixel mean of a static plane over `frames` frames. Depth pixels that
/// were invalid in every frame stay 0.
pub fn averaged_plane(
    rig: &SensorRig,
    config: &PipelineConfig,
    distance_mm: f64,
    frames: usize,
    seed: u64,
) -> Result<(Raster<f32>, Raster<u8>)> {
    let sim = Simulator::new(*rig, plane_script(distance_mm, frames.max(1), seed), config.sim())?;
    let (dw, dh) = (rig.depth_camera.width_px as usize, rig.depth_camera.height_px as usize);
    let (iw, ih) = (rig.intensity_camera.width_px as usize, rig.intensity_camera.height_px as usize);
    let mut dsum = vec![0.0f64; dw * dh];
    let mut dcount = vec![0u32; dw * dh];
    let mut isum = vec![0u32; iw * ih];
    let mut n = 0u32;
    for f in sim {
        let f = f?;
        for (i, &v) in f.sensor.depth().pixels().as_slice().iter().enumerate() {
            if v > 0.0 {
                dsum[i] += v as f64;
                dcount[i] += 1;
            }
        }
        for (s, &v) in isum.iter_mut().zip(f.sensor.intensity().pixels().as_slice()) {
            *s += v as u32;
        }
        n += 1;
    }
    let depth = dsum
        .iter()
        .zip(&dcount)
        .map(|(&s, &c)| if c > 0 { (s / c as f64) as f32 } else { 0.0 })
        .collect();
    let intensity = isum.iter().map(|&s| ((s + n / 2) / n) as u8).collect();
    Ok((Raster::from_vec(dw, dh, depth)?, Raster::from_vec(iw, ih, intensity)?))
}

/// Matched `(dot_id, intensity px, depth px)` dot centers on a plane.
pub fn plane_correspondences(
    rig: &SensorRig,
    config: &PipelineConfig,
    distance_mm: f64,
    frames: usize,
    seed: u64,
) -> Result<Vec<(usize, Point2<f64>, Point2<f64>)>> {
    let (depth, intensity) = averaged_plane(rig, config, distance_mm, frames, seed)?;
    let rgb_blobs = detect_blobs(&intensity, &config.blob);
    let residual = depth_residual(&depth, &config.correction);
    let depth_blobs = detect_blobs(&residual, &config.correction.detect_in_depth);
    Ok(match_by_grid(
        &rgb_blobs,
        &depth_blobs,
        &GridPrior::from_rig(rig, &rig.intensity_camera),
        &GridPrior::from_rig(rig, &rig.depth_camera),
    ))
}

#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub transform: AlignmentTransform,
    pub plane_distance_mm: f64,
    pub matched_dots: usize,
    /// RMS over the even dot ids the transform was fitted on.
    pub fit_rms_px: f64,
    /// RMS over the odd dot ids, which the fit never saw.
    pub holdout_rms_px: f64,
}

/// Fits the alignment on even dot ids of an averaged plane and scores it on the odd ones.
pub fn calibrate_on_plane(
    rig: &SensorRig,
    config: &PipelineConfig,
    distance_mm: f64,
    frames: usize,
    seed: u64,
) -> Result<CalibrationReport> {
    let matches = plane_correspondences(rig, config, distance_mm, frames, seed)?;
    let split = |parity: usize| -> Vec<_> {
        matches
            .iter()
            .filter(|m| m.0 % 2 == parity)
            .map(|m| (m.1, m.2))
            .collect()
    };
    let (fit, holdout) = (split(0), split(1));
    if holdout.is_empty() {
        return Err(Error::Calibration(format!(
            "only {} dots matched on the {distance_mm} mm plane",
            matches.len()
        )));
    }
    let transform = fit_alignment(&fit)?;
    log::debug!(
        "{distance_mm} mm plane: {} dots matched, fit rms {:.3} px",
        matches.len(),
        transform.rms_reproj_px
    );
    Ok(CalibrationReport {
        plane_distance_mm: distance_mm,
        matched_dots: matches.len(),
        fit_rms_px: transform.rms_reproj_px,
        holdout_rms_px: transform.rms_error(&holdout),
        transform,
    })
}

/// RMS misregistration of `transform` on dots of a plane at `distance_mm`.
pub fn alignment_residual(
    rig: &SensorRig,
    config: &PipelineConfig,
    transform: &AlignmentTransform,
    distance_mm: f64,
    frames: usize,
    seed: u64,
) -> Result<f64> {
    let pairs: Vec<_> = plane_correspondences(rig, config, distance_mm, frames, seed)?
        .into_iter()
        .map(|m| (m.1, m.2))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Calibration(format!("no dots matched on the {distance_mm} mm plane")));
    }
    Ok(transform.rms_error(&pairs))
}

/// The rig's reference calibration: default sensor artifacts, 100 mm plane.
/// Runs that switch artifacts off still use it, as a real sensor keeps its
/// factory calibration.
pub fn rig_alignment(rig: &SensorRig) -> Result<AlignmentTransform> {
    Ok(calibrate_on_plane(rig, &PipelineConfig::default(), CALIBRATION_PLANE_MM, CALIBRATION_FRAMES, 0)?.transform)
}
