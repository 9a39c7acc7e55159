//! Fixtures for the benchmarks: simulated frames from the default rig.

use mf_core::harness::{plane_script, rig_alignment};
use mf_core::synth::Simulator;
use mf_core::{AlignmentTransform, PipelineConfig, SensorFrame, SensorRig};

pub struct Fixture {
    pub rig: SensorRig,
    pub alignment: AlignmentTransform,
    /// A flat plane at 80 mm, two consecutive frames.
    pub frames: [SensorFrame; 2],
}

impl Fixture {
    pub fn new() -> Self {
        let rig = SensorRig::default();
        let alignment = rig_alignment(&rig).expect("default rig calibrates");
        let mut sim = Simulator::new(rig, plane_script(80.0, 2, 0), PipelineConfig::default().sim())
            .expect("plane script is valid");
        let mut next = || sim.next().expect("two frames").expect("frame renders").sensor;
        let frames = [next(), next()];
        Self { rig, alignment, frames }
    }
}

impl Default for Fixture {
    fn default() -> Self {
        Self::new()
    }
}
