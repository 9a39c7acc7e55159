//! Internal air pressure as a linear function of displaced volume.

use serde::{Deserialize, Serialize};

use crate::synth::membrane::MembraneState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressureModel {
    /// PSI per mm^3 of indentation volume.
    pub gain_psi_per_mm3: f64,
    /// Time constant of the exponential leak back to the inflation pressure;
    /// `None` disables leaking.
    pub leak_time_constant_s: Option<f64>,
}

impl PressureModel {
    /// Gain such that a 15 mm radius flat tip pushed 10 mm in adds 0.15 PSI.
    pub fn default_gain() -> f64 {
        0.15 / (std::f64::consts::PI * 15.0 * 15.0 * 10.0)
    }
}

impl Default for PressureModel {
    fn default() -> Self {
        Self {
            gain_psi_per_mm3: Self::default_gain(),
            leak_time_constant_s: None,
        }
    }
}

/// Gauge pressure without leakage.
pub fn simulate_pressure(membrane: &MembraneState, model: &PressureModel) -> f64 {
    membrane.inflation_psi + model.gain_psi_per_mm3 * membrane.volume_mm3()
}

/// Tracks the excess pressure of a stream when the leak term is enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureState {
    model: PressureModel,
    last_volume_mm3: f64,
    excess_psi: f64,
}

impl PressureState {
    pub fn new(model: PressureModel) -> Self {
        Self {
            model,
            last_volume_mm3: 0.0,
            excess_psi: 0.0,
        }
    }

    /// Advances by `dt_s` to a membrane with the given state.
    pub fn step(&mut self, membrane: &MembraneState, dt_s: f64) -> f64 {
        let v = membrane.volume_mm3();
        match self.model.leak_time_constant_s {
            Some(tau) if tau > 0.0 => {
                self.excess_psi = self.excess_psi * (-dt_s / tau).exp()
                    + self.model.gain_psi_per_mm3 * (v - self.last_volume_mm3);
            }
            _ => self.excess_psi = self.model.gain_psi_per_mm3 * v,
        }
        self.last_volume_mm3 = v;
        membrane.inflation_psi + self.excess_psi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rig::SensorRig;

    fn with_uniform(depth: f32) -> MembraneState {
        let mut m = MembraneState::at_rest(&SensorRig::default(), 0.5);
        for (k, v) in m.indentation.as_mut_slice().iter_mut().enumerate() {
            if k % 7 == 0 {
                *v = depth;
            }
        }
        m
    }

    #[test]
    fn rest_reads_inflation() {
        let m = MembraneState::at_rest(&SensorRig::default(), 0.5);
        assert_eq!(simulate_pressure(&m, &PressureModel::default()), 0.02);
    }

    #[test]
    fn linear_in_volume() {
        let p = PressureModel::default();
        let d1 = simulate_pressure(&with_uniform(1.0), &p) - 0.02;
        let d2 = simulate_pressure(&with_uniform(2.0), &p) - 0.02;
        assert!((d2 - 2.0 * d1).abs() < 1e-12);
    }

    #[test]
    fn leak_decays_toward_baseline() {
        let mut s = PressureState::new(PressureModel {
            leak_time_constant_s: Some(0.5),
            ..Default::default()
        });
        let m = with_uniform(1.0);
        let first = s.step(&m, 1.0 / 30.0);
        let later = (0..30).map(|_| s.step(&m, 1.0 / 30.0)).last().unwrap();
        assert!(later < first && later > 0.02);
    }
}
