//! Object size measurement over seeded placements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{fuse_frame, AlignmentTransform};
use crate::harness::scene::{measurement_script, MeasuredObject};
use crate::percept::{measure_object, ObjectMeasurement};
use crate::pipeline::PipelineConfig;
use crate::rig::SensorRig;
use crate::synth::Simulator;

pub const PLACEMENTS: usize = 5;
/// Placements are drawn uniformly within this distance of the membrane center on each axis.
pub const PLACEMENT_SPREAD_MM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub object: MeasuredObject,
    pub placement: usize,
    pub x_mm: f64,
    pub y_mm: f64,
    pub truth_mm: [f64; 3],
    pub measured: ObjectMeasurement,
    /// |measured - truth| / truth for width, depth and height.
    pub rel_errors: [f64; 3],
}

impl MeasurementRow {
    pub fn mean_rel_error(&self) -> f64 {
        self.rel_errors.iter().sum::<f64>() / 3.0
    }

    pub fn max_rel_error(&self) -> f64 {
        self.rel_errors.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementResult {
    pub rows: Vec<MeasurementRow>,
}

impl MeasurementResult {
    pub fn rows_for(&self, object: MeasuredObject) -> impl Iterator<Item = &MeasurementRow> {
        self.rows.iter().filter(move |r| r.object == object)
    }

    /// Mean relative error over all extents and placements of `object`.
    pub fn mean_rel_error(&self, object: MeasuredObject) -> f64 {
        let (sum, n) = self
            .rows_for(object)
            .fold((0.0, 0usize), |(s, n), r| (s + r.mean_rel_error(), n + 1));
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }
}

pub fn measure_placement(
    rig: &SensorRig,
    config: &PipelineConfig,
    alignment: &AlignmentTransform,
    object: MeasuredObject,
    x_mm: f64,
    y_mm: f64,
    seed: u64,
) -> Result<ObjectMeasurement> {
    let (script, table_z) = measurement_script(object, x_mm, y_mm, 1, seed);
    let frame = Simulator::new(*rig, script, config.sim())?
        .next()
        .ok_or_else(|| Error::Script("measurement scene rendered no frames".into()))??;
    let corrected = fuse_frame(&frame.sensor, alignment, &config.correction);
    measure_object(
        &corrected.depth,
        &rig.depth_camera,
        rig.rest_depth_mm + table_z,
        &config.measure,
    )
}

/// Measures every object at [`PLACEMENTS`] seeded positions in front of a
/// table whose distance is known.
pub fn run_measurements(
    rig: &SensorRig,
    config: &PipelineConfig,
    alignment: &AlignmentTransform,
    seed: u64,
) -> Result<MeasurementResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for object in MeasuredObject::ALL {
        for placement in 0..PLACEMENTS {
            let x_mm = rng.random_range(-PLACEMENT_SPREAD_MM..=PLACEMENT_SPREAD_MM);
            let y_mm = rng.random_range(-PLACEMENT_SPREAD_MM..=PLACEMENT_SPREAD_MM);
            let frame_seed = seed.wrapping_add(placement as u64);
            let measured = measure_placement(rig, config, alignment, object, x_mm, y_mm, frame_seed)?;
            let truth_mm = object.dimensions_mm();
            let got = [measured.extent_x_mm, measured.extent_y_mm, measured.extent_z_mm];
            let rel_errors = std::array::from_fn(|i| (got[i] - truth_mm[i]).abs() / truth_mm[i]);
            rows.push(MeasurementRow {
                object,
                placement,
                x_mm,
                y_mm,
                truth_mm,
                measured,
                rel_errors,
            });
        }
    }
    Ok(MeasurementResult { rows })
}
