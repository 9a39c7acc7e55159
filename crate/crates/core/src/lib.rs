//! Software twin of a multimodal time-of-flight proximity and visuotactile
//! sensor.
//!
//! The crate has two halves that share the geometry and frame types:
//!
//! * [`synth`] renders deterministic depth, dot-grid intensity and pressure
//!   streams of a soft membrane interacting with scripted objects.
//! * [`imgproc`], [`fusion`] and [`percept`] form the perception pipeline:
//!   dot detection and tracking, depth-artifact correction, contact and
//!   proximity estimation.
//!
//! [`harness`] strings both halves together into the characterization runs.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod error;
pub mod frame;
pub mod io;
pub mod raster;
pub mod rig;

pub mod fusion;
pub mod harness;
pub mod imgproc;
pub mod percept;
pub mod pipeline;
pub mod synth;

pub use camera::{CameraModel, Intrinsics};
pub use error::{Error, Result};
pub use frame::{
    timestamp_for, DepthFrame, Dot, DotGridSpec, IntensityFrame, PressureSample, SensorFrame,
    DEFAULT_FRAME_RATE_HZ,
};
pub use raster::Raster;
pub use rig::{PixelRect, SensorRig};

pub use fusion::{AlignmentSource, AlignmentTransform, CorrectedFrame, DotCorrectionParams};
pub use imgproc::{Blob, BlobParams, DotTrack, FlowParams};
pub use percept::{ContactReport, ContactThresholds, ObjectMeasurement, ProximityReport};
pub use pipeline::{FrameEvent, PipelineConfig, StreamProcessor};
pub use synth::{ArtifactModel, GroundTruth, ScenarioScript, Shape};
