//! Declarative scenario scripts (TOML).
//!
//! ```toml
//! name = "approach_contact"
//! duration_s = 1.3333333333
//! frame_rate_hz = 30.0          # optional, default 30
//! seed = 1                      # optional
//! baseline_frames = 10          # static frames rendered before t = 0
//! gravity_mm_s2 = 9810.0        # optional
//! roi_mm = { x = [-8.0, 8.0], y = [-8.0, 8.0] }
//!
//! [[objects]]
//! name = "bottle"
//! shape = { type = "cylinder", radius_mm = 15.0, height_mm = 50.0 }
//! material = { ir_reflectance = 0.5 }
//! keyframes = [{ t = 0.0, position_mm = [0.0, 0.0, 65.0] }]
//!
//! [sensor]
//! keyframes = [
//!   { t = 0.0, position_mm = [0.0, 0.0, 0.0], motion = { type = "linear" } },
//!   { t = 1.0, position_mm = [0.0, 0.0, 50.0] },
//! ]
//! ```
//!
//! Positions are world-frame mm measured from the membrane center of the
//! sensor at its starting position, +z pointing away from the sensor.
//! Gravity acts along -z. A keyframe's `motion` says how to reach the next
//! keyframe: `linear` (default) interpolates position, Euler angles and
//! shear; `hold` keeps the pose; `ballistic` flies from the keyframe with
//! `velocity_mm_s` under gravity and snaps to its rest pose as soon as the
//! object would cross the membrane plane.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::DEFAULT_FRAME_RATE_HZ;
use crate::synth::shape::{Material, Pose, SceneObject, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum Motion {
    #[default]
    Linear,
    Hold,
    Ballistic {
        #[serde(default)]
        velocity_mm_s: [f64; 3],
        rest_position_mm: [f64; 3],
        #[serde(default)]
        rest_rotation_deg: [f64; 3],
    },
}


#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub t: f64,
    pub position_mm: [f64; 3],
    #[serde(default)]
    pub rotation_deg: [f64; 3],
    #[serde(default)]
    pub shear_mm: [f64; 2],
    #[serde(default)]
    pub motion: Motion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectTrack {
    pub name: String,
    pub shape: Shape,
    #[serde(default)]
    pub material: Material,
    pub keyframes: Vec<Keyframe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorTrack {
    pub keyframes: Vec<Keyframe>,
}

/// Membrane-plane rectangle (mm) watched by the proximity estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiMm {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Default for RoiMm {
    fn default() -> Self {
        Self {
            x: [-30.0, 30.0],
            y: [-20.0, 20.0],
        }
    }
}

fn default_rate() -> f64 {
    DEFAULT_FRAME_RATE_HZ
}

fn default_baseline() -> usize {
    10
}

fn default_gravity() -> f64 {
    9810.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    pub name: String,
    pub duration_s: f64,
    #[serde(default = "default_rate")]
    pub frame_rate_hz: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_baseline")]
    pub baseline_frames: usize,
    #[serde(default = "default_gravity")]
    pub gravity_mm_s2: f64,
    #[serde(default)]
    pub roi_mm: RoiMm,
    #[serde(default)]
    pub objects: Vec<ObjectTrack>,
    #[serde(default)]
    pub sensor: Option<SensorTrack>,
}

/// Names accepted by [`ScenarioScript::preset`].
pub const PRESETS: &[&str] = &[
    "plane_sweep",
    "approach_contact",
    "catch",
    "throw",
    "throw_kinematic",
    "throw_ballistic",
    "lateral_drag",
];

impl ScenarioScript {
    pub fn from_toml(text: &str) -> Result<Self> {
        let script: Self = toml::from_str(text).map_err(|e| Error::Script(e.to_string()))?;
        script.validate()?;
        Ok(script)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scripts serialize")
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "plane_sweep" => include_str!("../../presets/plane_sweep.toml"),
            "approach_contact" => include_str!("../../presets/approach_contact.toml"),
            "catch" => include_str!("../../presets/catch.toml"),
            "throw" | "throw_kinematic" => include_str!("../../presets/throw_kinematic.toml"),
            "throw_ballistic" => include_str!("../../presets/throw_ballistic.toml"),
            "lateral_drag" => include_str!("../../presets/lateral_drag.toml"),
            other => {
                return Err(Error::Script(format!(
                    "unknown preset {other:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Self::from_toml(text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::Script(format!("duration {} must be positive", self.duration_s)));
        }
        if !(self.frame_rate_hz.is_finite() && self.frame_rate_hz > 0.0) {
            return Err(Error::Script("frame rate must be positive".into()));
        }
        if !self.gravity_mm_s2.is_finite() {
            return Err(Error::Script("gravity must be finite".into()));
        }
        let r = &self.roi_mm;
        if !(r.x[0] < r.x[1] && r.y[0] < r.y[1]) {
            return Err(Error::Script("roi bounds must be increasing".into()));
        }
        for obj in &self.objects {
            obj.shape.validate().map_err(|e| Error::Script(format!("{}: {e}", obj.name)))?;
            obj.material
                .validate()
                .map_err(|e| Error::Script(format!("{}: {e}", obj.name)))?;
            check_keyframes(&obj.name, &obj.keyframes)?;
        }
        if let Some(s) = &self.sensor {
            check_keyframes("sensor", &s.keyframes)?;
            if s.keyframes.iter().any(|k| matches!(k.motion, Motion::Ballistic { .. })) {
                return Err(Error::Script("sensor keyframes cannot be ballistic".into()));
            }
        }
        Ok(())
    }

    /// Scripted frames, excluding the baseline prefix.
    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.frame_rate_hz).round() as usize
    }

    /// Sensor-frame objects at script time `t_s`.
    pub fn objects_at(&self, t_s: f64, rest_depth_mm: f64) -> Vec<SceneObject> {
        let sensor = self
            .sensor
            .as_ref()
            .map(|s| sample_track(&s.keyframes, t_s, self.gravity_mm_s2, None).0.translation)
            .unwrap_or_else(Vector3::zeros);
        let to_sensor = |p: Pose| Pose {
            rotation: p.rotation,
            translation: p.translation - sensor + Vector3::new(0.0, 0.0, rest_depth_mm),
        };
        self.objects
            .iter()
            .map(|track| {
                let lowest = |p: &Pose| {
                    let probe = SceneObject::new("", track.shape, to_sensor(*p));
                    probe.min_z().map(|z| z - rest_depth_mm)
                };
                let (pose, velocity, shear) =
                    sample_track(&track.keyframes, t_s, self.gravity_mm_s2, Some(&lowest));
                SceneObject {
                    name: track.name.clone(),
                    shape: track.shape,
                    material: track.material,
                    pose: to_sensor(pose),
                    velocity_mm_s: Some(velocity),
                    surface_shear_mm: shear,
                }
            })
            .collect()
    }
}

fn check_keyframes(owner: &str, keys: &[Keyframe]) -> Result<()> {
    if keys.is_empty() {
        return Err(Error::Script(format!("{owner}: no keyframes")));
    }
    for k in keys {
        let finite = k.t.is_finite()
            && k.position_mm.iter().chain(&k.rotation_deg).chain(&k.shear_mm).all(|v| v.is_finite());
        if !finite || k.t < 0.0 {
            return Err(Error::Script(format!("{owner}: keyframe at t={} is not finite", k.t)));
        }
    }
    for w in keys.windows(2) {
        if w[1].t < w[0].t {
            return Err(Error::Script(format!(
                "{owner}: keyframes out of order ({} after {})",
                w[1].t, w[0].t
            )));
        }
        if w[1].t == w[0].t && w[1] != w[0] {
            return Err(Error::Script(format!(
                "{owner}: conflicting keyframes at t={}",
                w[0].t
            )));
        }
    }
    Ok(())
}

type Lowest<'a> = &'a dyn Fn(&Pose) -> Option<f64>;

fn keyframe_pose(k: &Keyframe) -> Pose {
    Pose::from_euler_deg(Vector3::from(k.position_mm), k.rotation_deg)
}

/// Pose, velocity and shear at `t`. `lowest` reports how far the object's
/// lowest point is above the membrane plane, used by ballistic segments.
fn sample_track(
    keys: &[Keyframe],
    t: f64,
    gravity: f64,
    lowest: Option<Lowest<'_>>,
) -> (Pose, Vector3<f64>, Vector2<f64>) {
    let i = keys.iter().rposition(|k| k.t <= t).unwrap_or(0);
    let k = &keys[i];
    let next = keys.get(i + 1);
    let shear = Vector2::from(k.shear_mm);
    match (k.motion, next) {
        (Motion::Ballistic {
            velocity_mm_s,
            rest_position_mm,
            rest_rotation_deg,
        }, _) => {
            let dt = (t - k.t).max(0.0);
            let v0 = Vector3::from(velocity_mm_s);
            let g = Vector3::new(0.0, 0.0, -gravity);
            let p = Vector3::from(k.position_mm) + v0 * dt + 0.5 * g * dt * dt;
            let flying = Pose::from_euler_deg(p, k.rotation_deg);
            let landed = lowest.and_then(|f| f(&flying)).is_some_and(|z| z < 0.0);
            if landed {
                let rest = Pose::from_euler_deg(Vector3::from(rest_position_mm), rest_rotation_deg);
                (rest, Vector3::zeros(), shear)
            } else {
                (flying, v0 + g * dt, shear)
            }
        }
        (Motion::Linear, Some(n)) if n.t > k.t => {
            let a = ((t - k.t) / (n.t - k.t)).clamp(0.0, 1.0);
            let lerp3 = |p: [f64; 3], q: [f64; 3]| {
                [0, 1, 2].map(|j| p[j] + (q[j] - p[j]) * a)
            };
            let pos = lerp3(k.position_mm, n.position_mm);
            let rot = lerp3(k.rotation_deg, n.rotation_deg);
            let sh = Vector2::from(k.shear_mm) + (Vector2::from(n.shear_mm) - shear) * a;
            let v = (Vector3::from(n.position_mm) - Vector3::from(k.position_mm)) / (n.t - k.t);
            (Pose::from_euler_deg(Vector3::from(pos), rot), v, sh)
        }
        _ => (keyframe_pose(k), Vector3::zeros(), shear),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_load() {
        for name in PRESETS {
            let s = ScenarioScript::preset(name).unwrap();
            assert!(s.frame_count() > 0, "{name}");
        }
        assert!(ScenarioScript::preset("nope").is_err());
    }

    #[test]
    fn rejects_out_of_order_and_conflicting_keyframes() {
        let base = r#"
            name = "x"
            duration_s = 1.0
            [[objects]]
            name = "s"
            shape = { type = "sphere", radius_mm = 5.0 }
        "#;
        let ok = format!("{base}keyframes = [{{ t = 0.0, position_mm = [0.0, 0.0, 10.0] }}, {{ t = 0.5, position_mm = [0.0, 0.0, 20.0] }}]");
        assert!(ScenarioScript::from_toml(&ok).is_ok());
        let back = format!("{base}keyframes = [{{ t = 0.5, position_mm = [0.0, 0.0, 10.0] }}, {{ t = 0.2, position_mm = [0.0, 0.0, 20.0] }}]");
        assert!(ScenarioScript::from_toml(&back).is_err());
        let clash = format!("{base}keyframes = [{{ t = 0.5, position_mm = [0.0, 0.0, 10.0] }}, {{ t = 0.5, position_mm = [0.0, 0.0, 20.0] }}]");
        assert!(ScenarioScript::from_toml(&clash).is_err());
        let unknown = format!("{base}keyframes = [{{ t = 0.0, position_mm = [0.0, 0.0, 10.0], spin = 1 }}]");
        assert!(ScenarioScript::from_toml(&unknown).is_err());
    }

    #[test]
    fn linear_interpolation_and_hold() {
        let keys = [
            Keyframe {
                t: 0.0,
                position_mm: [0.0, 0.0, 40.0],
                rotation_deg: [0.0; 3],
                shear_mm: [0.0; 2],
                motion: Motion::Linear,
            },
            Keyframe {
                t: 1.0,
                position_mm: [0.0, 0.0, -10.0],
                rotation_deg: [0.0; 3],
                shear_mm: [2.0, 0.0],
                motion: Motion::Hold,
            },
        ];
        let (p, v, s) = sample_track(&keys, 0.5, 9810.0, None);
        assert!((p.translation.z - 15.0).abs() < 1e-12);
        assert_eq!(v.z, -50.0);
        assert_eq!(s.x, 1.0);
        let (p, _, _) = sample_track(&keys, 3.0, 9810.0, None);
        assert_eq!(p.translation.z, -10.0);
    }

    #[test]
    fn free_fall_matches_kinematics() {
        let s = ScenarioScript::preset("catch").unwrap();
        let rest = 85.0;
        let t_contact = (2.0 * 80.0 / s.gravity_mm_s2).sqrt();
        assert!((t_contact - 0.1277).abs() < 1e-4);
        let lowest = |t: f64| {
            s.objects_at(t, rest)[0].min_z().unwrap() - rest
        };
        assert!((lowest(0.0) - 80.0).abs() < 1e-9);
        let t = 0.1;
        assert!((lowest(t) - (80.0 - 0.5 * 9810.0 * t * t)).abs() < 1e-9);
        // First frame past contact snaps to the settled protrusion.
        assert!((lowest(4.0 / 30.0) + 22.0).abs() < 1e-9);
        assert!((lowest(10.0 / 30.0) + 22.0).abs() < 1e-9);
    }

    #[test]
    fn sensor_motion_brings_object_closer() {
        let s = ScenarioScript::preset("approach_contact").unwrap();
        let rest = 85.0;
        let top = |t: f64| {
            s.objects_at(t, rest)
                .iter()
                .filter_map(|o| o.min_z())
                .fold(f64::INFINITY, f64::min)
                - rest
        };
        assert!((top(0.0) - 40.0).abs() < 1e-9);
        assert!((top(0.8)).abs() < 1e-9);
        assert!((top(1.0) + 10.0).abs() < 1e-9);
        assert!((top(1.3) + 10.0).abs() < 1e-9);
    }
}
