//! Deterministic simulator of the sensor: scripted objects, membrane
//! deformation, depth and intensity rendering, and pressure.

pub mod artifact;
pub mod membrane;
pub mod pressure;
pub mod render;
pub mod runner;
pub mod script;
pub mod shape;

pub use artifact::{render_depth_observed, ArtifactModel, Curve, DotFootprint};
pub use membrane::{membrane_deform, MembraneParams, MembraneState};
pub use pressure::{simulate_pressure, PressureModel};
pub use render::{render_depth_truth, render_intensity, IntensityParams, TruthRender, MAX_RANGE_MM};
pub use runner::{run_script, GroundTruth, SimConfig, SimFrame, Simulator};
pub use script::{Keyframe, Motion, ObjectTrack, RoiMm, ScenarioScript, SensorTrack, PRESETS};
pub use shape::{Material, Pose, Scene, SceneObject, Shape};
