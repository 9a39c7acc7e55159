//! Flat-target distance sweep.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{fuse_frame, AlignmentTransform};
use crate::harness::metrics::compute_r_squared;
use crate::percept::estimate_distance;
use crate::pipeline::PipelineConfig;
use crate::rig::SensorRig;
use crate::synth::{ScenarioScript, Simulator};

/// Frames pooled into each distance estimate.
pub const SWEEP_WINDOW_FRAMES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub truth_mm: f64,
    pub measured_mm: f64,
    pub abs_error_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub r_squared: f64,
}

impl SweepResult {
    pub fn row_at(&self, truth_mm: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| (r.truth_mm - truth_mm).abs() < 1e-6)
    }
}

/// Runs the `plane_sweep` preset: each block of [`SWEEP_WINDOW_FRAMES`]
/// frames holds the target at one distance, and the block's last pooled
/// estimate is compared with the truth reported by the simulator.
pub fn run_plane_sweep(
    rig: &SensorRig,
    config: &PipelineConfig,
    alignment: &AlignmentTransform,
    seed: u64,
) -> Result<SweepResult> {
    let mut script = ScenarioScript::preset("plane_sweep")?;
    script.seed = seed;
    run_sweep_script(rig, config, alignment, script)
}

pub fn run_sweep_script(
    rig: &SensorRig,
    config: &PipelineConfig,
    alignment: &AlignmentTransform,
    script: ScenarioScript,
) -> Result<SweepResult> {
    let roi = rig.depth_roi(script.roi_mm.x, script.roi_mm.y);
    let sim = Simulator::new(*rig, script, config.sim())?;
    let mut history = VecDeque::with_capacity(SWEEP_WINDOW_FRAMES);
    let mut rows = Vec::new();
    let mut block_truth: Option<f64> = None;
    let mut last = None;
    for frame in sim {
        let frame = frame?;
        let truth = frame
            .truth
            .min_object_distance_mm
            .ok_or_else(|| Error::Script("sweep frame without a target".into()))?;
        if block_truth.is_some_and(|t| (t - truth).abs() > 1e-6) {
            rows.extend(finish_block(block_truth, last.take()));
            history.clear();
        }
        block_truth = Some(truth);
        let corrected = fuse_frame(&frame.sensor, alignment, &config.correction);
        last = Some(estimate_distance(
            &corrected.depth,
            &roi,
            SWEEP_WINDOW_FRAMES,
            &mut history,
            rig.rest_depth_mm,
        )?);
    }
    rows.extend(finish_block(block_truth, last));
    for r in &rows {
        log::debug!("sweep {:.0} mm -> {:.3} mm", r.truth_mm, r.measured_mm);
    }
    let pairs: Vec<_> = rows.iter().map(|r| (r.truth_mm, r.measured_mm)).collect();
    Ok(SweepResult {
        r_squared: compute_r_squared(&pairs)?,
        rows,
    })
}

fn finish_block(truth: Option<f64>, report: Option<crate::percept::ProximityReport>) -> Option<SweepRow> {
    let truth_mm = truth?;
    let measured_mm = report?.mean_distance_mm?;
    Some(SweepRow {
        truth_mm,
        measured_mm,
        abs_error_mm: (measured_mm - truth_mm).abs(),
    })
}
