//! Intensity-to-depth alignment and dot-artifact correction.

pub mod align;
pub mod correct;
pub mod homography;

use std::time::Instant;

pub use align::align_intensity;
pub use correct::{correct_dots, correct_dots_detailed, patch_dots, CorrectionDiagnostics, DotCorrectionParams};
pub use homography::{
    calibrate_alignment, fit_alignment, fit_homography, match_by_grid, AlignmentSource, AlignmentTransform, GridPrior,
};

use crate::frame::{DepthFrame, IntensityFrame, PressureSample, SensorFrame};

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedFrame {
    pub depth: DepthFrame,
    pub intensity: IntensityFrame,
    pub pressure: PressureSample,
    /// Wall-clock time spent aligning and correcting.
    pub processing_time_s: f64,
}

/// Aligns the intensity image into the depth grid and corrects the depth map.
pub fn fuse_frame(frame: &SensorFrame, h: &AlignmentTransform, params: &DotCorrectionParams) -> CorrectedFrame {
    let start = Instant::now();
    let depth = frame.depth();
    let aligned = align_intensity(frame.intensity(), h, depth.width(), depth.height());
    let corrected = correct_dots(depth, &aligned, params);
    CorrectedFrame {
        depth: corrected,
        intensity: frame.intensity().clone(),
        pressure: *frame.pressure(),
        processing_time_s: start.elapsed().as_secs_f64(),
    }
}
