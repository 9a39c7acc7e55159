//! Distance to whatever is in front of the membrane, from corrected depth.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::DepthFrame;
use crate::rig::PixelRect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProximityParams {
    /// Trailing frames pooled into each report.
    pub window_frames: usize,
    /// An object counts as seen when the nearest pooled pixel is within this range.
    pub visible_range_mm: f64,
    pub min_valid_fraction: f64,
}

impl Default for ProximityParams {
    fn default() -> Self {
        Self {
            window_frames: 1,
            visible_range_mm: 100.0,
            min_valid_fraction: 0.01,
        }
    }
}

impl ProximityParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_frames == 0 {
            return Err(Error::InvalidParameter("proximity window must be at least one frame".into()));
        }
        if !(0.0..=1.0).contains(&self.min_valid_fraction) {
            return Err(Error::InvalidParameter("valid fraction outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Distances are measured from the rest membrane plane; negative values are
/// surfaces pressed into the membrane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProximityReport {
    pub frame_index: u64,
    pub mean_distance_mm: Option<f64>,
    pub min_distance_mm: Option<f64>,
    pub valid_fraction: f64,
}

impl ProximityReport {
    pub fn is_visible(&self, params: &ProximityParams) -> bool {
        self.valid_fraction >= params.min_valid_fraction
            && self.min_distance_mm.is_some_and(|m| m <= params.visible_range_mm)
    }
}

/// Valid-pixel statistics of one frame's ROI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiStats {
    pub sum_mm: f64,
    pub count: usize,
    pub min_mm: f64,
    pub area: usize,
}

pub fn roi_stats(frame: &DepthFrame, roi: &PixelRect, reference_mm: f64) -> Result<RoiStats> {
    if !roi.fits(frame.width(), frame.height()) {
        return Err(Error::InvalidParameter(format!(
            "roi {roi:?} outside {}x{} frame",
            frame.width(),
            frame.height()
        )));
    }
    let px = frame.pixels();
    let (mut sum, mut count, mut min) = (0.0f64, 0usize, f64::INFINITY);
    for y in roi.y0..roi.y1 {
        for &v in &px.row(y)[roi.x0..roi.x1] {
            if v > 0.0 {
                let d = v as f64 - reference_mm;
                sum += d;
                count += 1;
                min = min.min(d);
            }
        }
    }
    Ok(RoiStats {
        sum_mm: sum,
        count,
        min_mm: min,
        area: roi.area(),
    })
}

fn pooled_report(frame_index: u64, history: &VecDeque<RoiStats>) -> ProximityReport {
    let (sum, count, min, area) = history.iter().fold((0.0, 0usize, f64::INFINITY, 0usize), |a, s| {
        (a.0 + s.sum_mm, a.1 + s.count, a.2.min(s.min_mm), a.3 + s.area)
    });
    let (mean, min) = if count > 0 {
        (Some(sum / count as f64), Some(min))
    } else {
        (None, None)
    };
    ProximityReport {
        frame_index,
        mean_distance_mm: mean,
        min_distance_mm: min,
        valid_fraction: if area > 0 { count as f64 / area as f64 } else { 0.0 },
    }
}

/// Pushes this frame's ROI statistics into `history` (keeping at most
/// `window` entries) and reports over the pooled pixels.
pub fn estimate_distance(
    corrected: &DepthFrame,
    roi: &PixelRect,
    window: usize,
    history: &mut VecDeque<RoiStats>,
    reference_mm: f64,
) -> Result<ProximityReport> {
    let stats = roi_stats(corrected, roi, reference_mm)?;
    history.push_back(stats);
    while history.len() > window.max(1) {
        history.pop_front();
    }
    Ok(pooled_report(corrected.frame_index(), history))
}

#[derive(Debug, Clone)]
pub struct ProximityEstimator {
    roi: PixelRect,
    reference_mm: f64,
    params: ProximityParams,
    history: VecDeque<RoiStats>,
}

impl ProximityEstimator {
    pub fn new(roi: PixelRect, reference_mm: f64, params: ProximityParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            roi,
            reference_mm,
            params,
            history: VecDeque::with_capacity(params.window_frames),
        })
    }

    pub fn roi(&self) -> &PixelRect {
        &self.roi
    }

    pub fn params(&self) -> &ProximityParams {
        &self.params
    }

    pub fn update(&mut self, corrected: &DepthFrame) -> Result<ProximityReport> {
        estimate_distance(
            corrected,
            &self.roi,
            self.params.window_frames,
            &mut self.history,
            self.reference_mm,
        )
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }
}
