//! Characterization runs: plane sweep, interaction timelines, calibration
//! and object measurement, plus the files they write.

pub mod calibrate;
pub mod dimensions;
pub mod metrics;
pub mod output;
pub mod scene;
pub mod sweep;
pub mod timeline;

use std::path::Path;

use serde_json::json;

pub use calibrate::{alignment_residual, calibrate_on_plane, rig_alignment, CalibrationReport};
pub use dimensions::{run_measurements, MeasurementResult, MeasurementRow};
pub use metrics::compute_r_squared;
pub use scene::{measurement_script, plane_script, MeasuredObject};
pub use sweep::{run_plane_sweep, run_sweep_script, SweepResult, SweepRow};
pub use timeline::{run_timeline, Snapshot, TimelineResult, TimelineRow, TimelineRun};

use crate::error::Result;
use crate::fusion::AlignmentTransform;
use crate::pipeline::PipelineConfig;
use crate::rig::SensorRig;
use crate::synth::ScenarioScript;

/// Scenario name that runs the object measurement instead of a script.
pub const DIMENSIONS_SCENARIO: &str = "dimensions";

#[derive(Debug, Clone)]
pub enum Scenario {
    Sweep(ScenarioScript),
    Timeline(ScenarioScript),
    Dimensions,
}

impl Scenario {
    /// Resolves a preset name or [`DIMENSIONS_SCENARIO`].
    pub fn named(name: &str) -> Result<Self> {
        if name == DIMENSIONS_SCENARIO {
            return Ok(Scenario::Dimensions);
        }
        Ok(Self::from_script(ScenarioScript::preset(name)?))
    }

    /// Scripts named `plane_sweep*` are scored as sweeps, the rest as timelines.
    pub fn from_script(script: ScenarioScript) -> Self {
        if script.name.starts_with("plane_sweep") {
            Scenario::Sweep(script)
        } else {
            Scenario::Timeline(script)
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Scenario::Sweep(s) | Scenario::Timeline(s) => &s.name,
            Scenario::Dimensions => DIMENSIONS_SCENARIO,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ScenarioOutput {
    Sweep(SweepResult),
    Timeline(TimelineRun),
    Dimensions(MeasurementResult),
}

/// Runs one scenario. `seed` replaces the script's own seed when given.
pub fn run_scenario(
    scenario: &Scenario,
    rig: &SensorRig,
    config: &PipelineConfig,
    alignment: &AlignmentTransform,
    seed: Option<u64>,
) -> Result<ScenarioOutput> {
    let seeded = |s: &ScenarioScript| {
        let mut s = s.clone();
        if let Some(seed) = seed {
            s.seed = seed;
        }
        s
    };
    Ok(match scenario {
        Scenario::Sweep(s) => ScenarioOutput::Sweep(run_sweep_script(rig, config, alignment, seeded(s))?),
        Scenario::Timeline(s) => ScenarioOutput::Timeline(run_timeline(rig, &seeded(s), config, alignment)?),
        Scenario::Dimensions => ScenarioOutput::Dimensions(run_measurements(rig, config, alignment, seed.unwrap_or(0))?),
    })
}

/// Writes the CSV, JSON and JSON-lines files of a run into `dir`. Snapshot
/// images are left to the caller, which picks the image format.
pub fn write_run(dir: &Path, name: &str, output: &ScenarioOutput, seed: Option<u64>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let summary = match output {
        ScenarioOutput::Sweep(s) => {
            output::write_sweep_csv(&dir.join("sweep.csv"), s)?;
            json!({ "scenario": name, "seed": seed, "sweep": s })
        }
        ScenarioOutput::Timeline(run) => {
            let t = &run.result;
            output::write_timeline_csv(&dir.join("timeline.csv"), t)?;
            output::write_events(&dir.join("events.jsonl"), t)?;
            output::write_truth(&dir.join("truth.jsonl"), t)?;
            json!({ "scenario": name, "seed": seed, "timeline": t })
        }
        ScenarioOutput::Dimensions(m) => {
            output::write_dimensions_csv(&dir.join("dimensions.csv"), m)?;
            json!({
                "scenario": name,
                "seed": seed,
                "mean_rel_error": {
                    "box57": m.mean_rel_error(MeasuredObject::Box57),
                    "sphere20": m.mean_rel_error(MeasuredObject::Sphere20),
                },
                "rows": m.rows,
            })
        }
    };
    output::write_json(&dir.join("summary.json"), &summary)
}
