//! Contact from the pressure gauge and the summed dot flow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::PressureSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactThresholds {
    pub pressure_delta_psi: f64,
    pub flow_sum_px: f64,
    /// Consecutive frames a channel must fire before contact is reported.
    pub hysteresis_frames: usize,
    /// Frames averaged into the pressure baseline.
    pub baseline_frames: usize,
}

impl Default for ContactThresholds {
    fn default() -> Self {
        Self {
            pressure_delta_psi: 0.005,
            flow_sum_px: 50.0,
            hysteresis_frames: 2,
            baseline_frames: 10,
        }
    }
}

impl ContactThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.pressure_delta_psi > 0.0) || !(self.flow_sum_px > 0.0) {
            return Err(Error::InvalidParameter("contact thresholds must be positive".into()));
        }
        if self.hysteresis_frames == 0 || self.baseline_frames == 0 {
            return Err(Error::InvalidParameter(
                "hysteresis and baseline need at least one frame".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactReport {
    pub frame_index: u64,
    pub contact: bool,
    pub via_pressure: bool,
    pub via_flow: bool,
    pub pressure_delta_psi: f64,
    pub flow_sum_px: f64,
}

/// Debounce state carried between frames.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContactState {
    streak: usize,
    in_contact: bool,
}

impl ContactState {
    pub fn in_contact(&self) -> bool {
        self.in_contact
    }
}

/// One step of the detector. Either channel firing for `hysteresis_frames`
/// frames in a row turns contact on; both falling silent turns it off at once.
pub fn detect_contact(
    pressure: &PressureSample,
    baseline_psi: Option<f64>,
    flow_sum: f64,
    thresholds: &ContactThresholds,
    state: &mut ContactState,
) -> Result<ContactReport> {
    let baseline = baseline_psi.ok_or(Error::MissingBaseline)?;
    let delta = pressure.gauge_psi - baseline;
    let via_pressure = delta.abs() >= thresholds.pressure_delta_psi;
    let via_flow = flow_sum >= thresholds.flow_sum_px;
    if via_pressure || via_flow {
        state.streak += 1;
        if state.streak >= thresholds.hysteresis_frames {
            state.in_contact = true;
        }
    } else {
        state.streak = 0;
        state.in_contact = false;
    }
    Ok(ContactReport {
        frame_index: pressure.frame_index,
        contact: state.in_contact,
        via_pressure,
        via_flow,
        pressure_delta_psi: delta,
        flow_sum_px: flow_sum,
    })
}

/// Detector with its own pressure baseline, fed one frame at a time.
#[derive(Debug, Clone)]
pub struct ContactDetector {
    thresholds: ContactThresholds,
    samples: Vec<f64>,
    baseline: Option<f64>,
    state: ContactState,
}

impl ContactDetector {
    pub fn new(thresholds: ContactThresholds) -> Result<Self> {
        thresholds.validate()?;
        Ok(Self {
            thresholds,
            samples: Vec::new(),
            baseline: None,
            state: ContactState::default(),
        })
    }

    pub fn thresholds(&self) -> &ContactThresholds {
        &self.thresholds
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    pub fn set_baseline(&mut self, psi: f64) {
        self.baseline = Some(psi);
    }

    /// Adds a pre-contact sample; the baseline is their mean once enough arrived.
    /// Returns true when this sample completed the baseline.
    pub fn add_baseline_sample(&mut self, psi: f64) -> bool {
        if self.baseline.is_some() {
            return false;
        }
        self.samples.push(psi);
        if self.samples.len() >= self.thresholds.baseline_frames {
            self.baseline = Some(self.samples.iter().sum::<f64>() / self.samples.len() as f64);
            return true;
        }
        false
    }

    pub fn update(&mut self, pressure: &PressureSample, flow_sum: f64) -> Result<ContactReport> {
        detect_contact(pressure, self.baseline, flow_sum, &self.thresholds, &mut self.state)
    }

    pub fn in_contact(&self) -> bool {
        self.state.in_contact
    }
}
