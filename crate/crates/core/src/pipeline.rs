//! Per-stream perception: fusion, dot tracking, contact and proximity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::SensorFrame;
use crate::fusion::{fuse_frame, AlignmentTransform, CorrectedFrame, DotCorrectionParams};
use crate::imgproc::{detect_blobs, BlobParams, DotTrack, DotTracker, FlowParams};
use crate::percept::{
    ContactDetector, ContactReport, ContactThresholds, MeasureParams, ProximityEstimator, ProximityParams,
    ProximityReport,
};
use crate::rig::{PixelRect, SensorRig};
use crate::synth::{ArtifactModel, IntensityParams, MembraneParams, PressureModel, SimConfig};

/// Every tunable of the simulator and the pipeline. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub artifact: ArtifactModel,
    pub membrane: MembraneParams,
    pub pressure: PressureModel,
    pub intensity: IntensityParams,
    pub blob: BlobParams,
    pub flow: FlowParams,
    pub correction: DotCorrectionParams,
    pub contact: ContactThresholds,
    pub proximity: ProximityParams,
    pub measure: MeasureParams,
}

impl PipelineConfig {
    pub fn sim(&self) -> SimConfig {
        SimConfig {
            artifact: self.artifact.clone(),
            membrane: self.membrane,
            pressure: self.pressure,
            intensity: self.intensity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.artifact.validate()?;
        self.blob.validate()?;
        self.flow.validate()?;
        self.correction.validate()?;
        self.contact.validate()?;
        self.proximity.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets one dotted key such as `artifact.dot_bias_mm`. The value is read
    /// as JSON when it parses, otherwise as a bare string.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let mut root = serde_json::to_value(&*self)?;
        let mut slot = &mut root;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|m| m.get_mut(part))
                .ok_or_else(|| Error::InvalidParameter(format!("unknown config key `{key}`")))?;
        }
        *slot = serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        let updated: Self = serde_json::from_value(root)
            .map_err(|e| Error::InvalidParameter(format!("bad value for `{key}`: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}

/// One line of the event log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameEvent {
    pub frame: u64,
    pub t: f64,
    pub contact: bool,
    pub via_pressure: bool,
    pub via_flow: bool,
    pub pressure_psi: f64,
    pub flow_sum: f64,
    pub mean_mm: Option<f64>,
    pub min_mm: Option<f64>,
    pub visible: bool,
}

#[derive(Debug, Clone)]
pub struct ProcessedFrame {
    pub event: FrameEvent,
    pub corrected: CorrectedFrame,
    pub contact: ContactReport,
    pub proximity: ProximityReport,
}

/// Sequential processor for one stream.
#[derive(Debug, Clone)]
pub struct StreamProcessor {
    rig: SensorRig,
    alignment: AlignmentTransform,
    config: PipelineConfig,
    tracker: Option<DotTracker>,
    contact: ContactDetector,
    proximity: ProximityEstimator,
}

impl StreamProcessor {
    pub fn new(rig: SensorRig, alignment: AlignmentTransform, config: PipelineConfig, roi: PixelRect) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            contact: ContactDetector::new(config.contact)?,
            proximity: ProximityEstimator::new(roi, rig.rest_depth_mm, config.proximity)?,
            rig,
            alignment,
            config,
            tracker: None,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn tracks(&self) -> &[DotTrack] {
        self.tracker.as_ref().map_or(&[], |t| t.tracks())
    }

    pub fn baseline_psi(&self) -> Option<f64> {
        self.contact.baseline()
    }

    fn flow_sum(&mut self, frame: &SensorFrame) -> Result<f64> {
        let img = frame.intensity().pixels();
        match &mut self.tracker {
            None => {
                let blobs = detect_blobs(img, &self.config.blob);
                let cam = &self.rig.intensity_camera;
                self.tracker = Some(DotTracker::initialize(
                    img,
                    &blobs,
                    &self.rig.dot_pixels(cam),
                    self.rig.dot_spacing_px(cam),
                    self.config.flow,
                )?);
                Ok(0.0)
            }
            Some(t) => {
                let blobs = t.has_dead_tracks().then(|| detect_blobs(img, &self.config.blob));
                t.update(img, blobs.as_deref());
                Ok(t.flow_sum())
            }
        }
    }

    pub fn process(&mut self, frame: &SensorFrame) -> Result<ProcessedFrame> {
        let corrected = fuse_frame(frame, &self.alignment, &self.config.correction);
        let flow_sum = self.flow_sum(frame)?;
        let pressure = frame.pressure();
        let contact = if self.contact.baseline().is_none() && !self.contact.add_baseline_sample(pressure.gauge_psi) {
            ContactReport {
                frame_index: pressure.frame_index,
                contact: false,
                via_pressure: false,
                via_flow: false,
                pressure_delta_psi: 0.0,
                flow_sum_px: flow_sum,
            }
        } else {
            self.contact.update(pressure, flow_sum)?
        };
        let proximity = self.proximity.update(&corrected.depth)?;
        let event = FrameEvent {
            frame: frame.frame_index(),
            t: frame.timestamp_s(),
            contact: contact.contact,
            via_pressure: contact.via_pressure,
            via_flow: contact.via_flow,
            pressure_psi: pressure.gauge_psi,
            flow_sum,
            mean_mm: proximity.mean_distance_mm,
            min_mm: proximity.min_distance_mm,
            visible: proximity.is_visible(self.proximity.params()),
        };
        Ok(ProcessedFrame {
            event,
            corrected,
            contact,
            proximity,
        })
    }
}
