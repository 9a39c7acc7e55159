//! Steps a script through time and renders synchronized sensor frames.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::frame::{PressureSample, SensorFrame};
use crate::rig::SensorRig;
use crate::synth::artifact::{dot_biases, render_depth_observed, ArtifactModel, DotFootprint};
use crate::synth::membrane::{membrane_deform, MembraneParams, MembraneState};
use crate::synth::pressure::{PressureModel, PressureState};
use crate::synth::render::{render_depth_truth, render_intensity, IntensityParams, TruthRender};
use crate::synth::script::ScenarioScript;
use crate::synth::shape::{Scene, SceneObject};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub artifact: ArtifactModel,
    pub membrane: MembraneParams,
    pub pressure: PressureModel,
    pub intensity: IntensityParams,
}

/// Per-frame ground truth, serialized one record per line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub frame: u64,
    /// Closest approach of any object to the rest membrane plane; negative
    /// while pressing into it.
    pub min_object_distance_mm: Option<f64>,
    pub contact: bool,
    pub peak_indentation_mm: f64,
    pub pressure_psi: f64,
}

#[derive(Debug, Clone)]
pub struct SimFrame {
    pub sensor: SensorFrame,
    pub truth: GroundTruth,
    /// Frame number on the script clock; negative during the baseline prefix.
    pub script_frame: i64,
}

/// Random streams are keyed by (seed, frame, purpose) so that no stage's
/// draws depend on another's.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Stream {
    DepthNoise = 1,
    IntensityNoise = 2,
    DotBias = 3,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, frame: u64, stream: Stream) -> ChaCha8Rng {
    let key = splitmix(splitmix(seed) ^ splitmix(frame.wrapping_mul(0x1000_0000_01b3) ^ stream as u64));
    ChaCha8Rng::seed_from_u64(key)
}

/// Geometry shared by consecutive frames with an unchanged scene.
#[derive(Debug, Clone)]
struct Geometry {
    objects: Vec<SceneObject>,
    membrane: MembraneState,
    truth: TruthRender,
    footprint: DotFootprint,
    dots: Vec<nalgebra::Point3<f64>>,
}

/// Iterator over the frames of one scripted run.
#[derive(Debug, Clone)]
pub struct Simulator {
    rig: SensorRig,
    script: ScenarioScript,
    config: SimConfig,
    seed: u64,
    next: u64,
    total: u64,
    dot_bias: Vec<f64>,
    pressure: PressureState,
    cache: Option<Geometry>,
}

impl Simulator {
    pub fn new(rig: SensorRig, script: ScenarioScript, config: SimConfig) -> Result<Self> {
        rig.validate()?;
        script.validate()?;
        config.artifact.validate()?;
        let seed = script.seed;
        let total = (script.baseline_frames + script.frame_count()) as u64;
        let dot_bias = dot_biases(&config.artifact, &rig.dot_grid, &mut stream_rng(seed, 0, Stream::DotBias));
        Ok(Self {
            pressure: PressureState::new(config.pressure),
            rig,
            script,
            config,
            seed,
            next: 0,
            total,
            dot_bias,
            cache: None,
        })
    }

    pub fn rig(&self) -> &SensorRig {
        &self.rig
    }

    pub fn script(&self) -> &ScenarioScript {
        &self.script
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn frame_count(&self) -> usize {
        self.total as usize
    }

    /// Script time of stream frame `index`; baseline frames all sit at t = 0.
    pub fn script_time(&self, index: u64) -> f64 {
        let k = index.saturating_sub(self.script.baseline_frames as u64);
        k as f64 / self.script.frame_rate_hz
    }

    /// Membrane state of the most recently rendered frame.
    pub fn membrane(&self) -> Option<&MembraneState> {
        self.cache.as_ref().map(|g| &g.membrane)
    }

    /// Noise-free depth of the most recently rendered frame.
    pub fn truth_render(&self) -> Option<&TruthRender> {
        self.cache.as_ref().map(|g| &g.truth)
    }

    /// Depth-camera dot footprint of the most recently rendered frame.
    pub fn footprint(&self) -> Option<&DotFootprint> {
        self.cache.as_ref().map(|g| &g.footprint)
    }

    fn geometry(&mut self, index: u64) -> Result<&Geometry> {
        let rate = self.script.frame_rate_hz;
        let objects = self.script.objects_at(self.script_time(index), self.rig.rest_depth_mm);
        let stale = self.cache.as_ref().is_none_or(|g| g.objects != objects);
        if stale {
            let membrane = membrane_deform(&objects, &self.rig, &self.config.membrane);
            let scene = Scene::new(objects.clone());
            let truth = render_depth_truth(&scene, self.rig.rest_depth_mm, &self.rig.depth_camera, index, rate)?;
            let dots = membrane.dot_positions(&self.rig.dot_grid);
            let footprint = DotFootprint::compute(&dots, self.rig.dot_grid.radius_mm(), &self.rig.depth_camera);
            self.cache = Some(Geometry {
                objects,
                membrane,
                truth,
                footprint,
                dots,
            });
        } else if let Some(g) = self.cache.as_mut() {
            g.truth.depth = g.truth.depth.with_index(index, rate);
        }
        Ok(self.cache.as_ref().expect("just filled"))
    }

    fn render(&mut self, index: u64) -> Result<SimFrame> {
        let rate = self.script.frame_rate_hz;
        let seed = self.seed;
        let rest = self.rig.rest_depth_mm;
        let rig = self.rig;
        let config = self.config.clone();
        let dot_bias = std::mem::take(&mut self.dot_bias);
        let geo = self.geometry(index)?;

        let depth = render_depth_observed(
            &geo.truth,
            &geo.footprint,
            &dot_bias,
            &config.artifact,
            &mut stream_rng(seed, index, Stream::DepthNoise),
        );
        let intensity = render_intensity(
            &geo.dots,
            rig.dot_grid.radius_mm(),
            &rig.intensity_camera,
            &config.intensity,
            &mut stream_rng(seed, index, Stream::IntensityNoise),
            index,
            rate,
        )?;
        let min_distance = geo
            .objects
            .iter()
            .filter_map(object_floor)
            .map(|z| z - rest)
            .reduce(f64::min);
        let peak = geo.membrane.peak_indentation_mm();
        let membrane = geo.membrane.clone();
        self.dot_bias = dot_bias;

        let gauge = self.pressure.step(&membrane, 1.0 / rate);
        let pressure = PressureSample::new(gauge, index, rate)?;
        let truth = GroundTruth {
            frame: index,
            min_object_distance_mm: min_distance,
            contact: peak > 0.0,
            peak_indentation_mm: peak,
            pressure_psi: gauge,
        };
        Ok(SimFrame {
            sensor: SensorFrame::new(depth, intensity, pressure)?,
            truth,
            script_frame: index as i64 - self.script.baseline_frames as i64,
        })
    }
}

/// Lowest sensor-frame z of an object; for planes, only when they face the sensor squarely.
fn object_floor(obj: &SceneObject) -> Option<f64> {
    if let Some(z) = obj.min_z() {
        return Some(z);
    }
    if let crate::synth::shape::Shape::Plane { normal, offset_mm } = obj.shape {
        let n = obj.pose.rotation * nalgebra::Vector3::from(normal);
        if n.z.abs() > 1.0 - 1e-9 {
            let on_plane = obj.pose.translation + n * offset_mm;
            return Some(on_plane.z);
        }
    }
    None
}

impl Iterator for Simulator {
    type Item = Result<SimFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.total {
            return None;
        }
        let index = self.next;
        self.next += 1;
        Some(self.render(index))
    }
}

/// Runs a script to completion.
pub fn run_script(rig: &SensorRig, script: &ScenarioScript, config: &SimConfig) -> Result<Vec<SimFrame>> {
    Simulator::new(*rig, script.clone(), config.clone())?.collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn static_script() -> ScenarioScript {
        ScenarioScript::from_toml(
            r#"
            name = "static"
            duration_s = 0.1
            baseline_frames = 0
            [[objects]]
            name = "plate"
            shape = { type = "plane", normal = [0.0, 0.0, 1.0], offset_mm = 0.0 }
            keyframes = [{ t = 0.0, position_mm = [0.0, 0.0, 60.0] }]
            "#,
        )
        .unwrap()
    }

    #[test]
    fn streams_are_deterministic() {
        let rig = SensorRig::default();
        let a = run_script(&rig, &static_script(), &SimConfig::default()).unwrap();
        let b = run_script(&rig, &static_script(), &SimConfig::default()).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.sensor, y.sensor);
            assert_eq!(x.truth, y.truth);
        }
        // Different frames get different noise.
        assert_ne!(a[0].sensor.depth().pixels(), a[1].sensor.depth().pixels());
    }

    #[test]
    fn static_scene_without_noise_repeats() {
        let rig = SensorRig::default();
        let mut config = SimConfig::default();
        config.artifact.noise_sigma = crate::synth::artifact::Curve::zero();
        config.intensity.noise_sigma = 0.0;
        let frames = run_script(&rig, &static_script(), &config).unwrap();
        for f in &frames[1..] {
            assert_eq!(f.sensor.depth().pixels(), frames[0].sensor.depth().pixels());
            assert_eq!(f.sensor.intensity().pixels(), frames[0].sensor.intensity().pixels());
            assert_eq!(f.sensor.pressure().gauge_psi, 0.02);
        }
        assert_eq!(frames[0].truth.min_object_distance_mm, Some(60.0));
        assert!(!frames[0].truth.contact);
    }

    #[test]
    fn seed_changes_noise() {
        let rig = SensorRig::default();
        let mut s = static_script();
        let a = run_script(&rig, &s, &SimConfig::default()).unwrap();
        s.seed = 99;
        let b = run_script(&rig, &s, &SimConfig::default()).unwrap();
        assert_ne!(a[0].sensor.depth().pixels(), b[0].sensor.depth().pixels());
    }
}
