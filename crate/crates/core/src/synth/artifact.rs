//! Time-of-flight error model applied on top of the ground-truth render.

use nalgebra::{Point2, Point3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::frame::{DepthFrame, DotGridSpec};
use crate::raster::Raster;
use crate::synth::render::TruthRender;

/// Piecewise-linear function through sorted knots, constant beyond the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Curve {
    knots: Vec<[f64; 2]>,
}

impl Curve {
    pub fn new(knots: Vec<[f64; 2]>) -> Result<Self> {
        let c = Self { knots };
        c.validate()?;
        Ok(c)
    }

    pub fn zero() -> Self {
        Self {
            knots: vec![[0.0, 0.0]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::InvalidParameter("curve needs at least one knot".into()));
        }
        if self.knots.windows(2).any(|w| !(w[0][0] < w[1][0])) {
            return Err(Error::InvalidParameter("curve knots must increase".into()));
        }
        if self.knots.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("curve knots must be finite".into()));
        }
        Ok(())
    }

    pub fn knots(&self) -> &[[f64; 2]] {
        &self.knots
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x <= k[0][0] {
            return k[0][1];
        }
        for w in k.windows(2) {
            let ([x0, y0], [x1, y1]) = (w[0], w[1]);
            if x <= x1 {
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
        k[k.len() - 1][1]
    }

    pub fn is_zero(&self) -> bool {
        self.knots.iter().all(|k| k[1] == 0.0)
    }
}

/// Depth error model. Distances are measured from the membrane surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArtifactModel {
    /// Mean depth reduction over dot footprints.
    pub dot_bias_mm: f64,
    /// Per-dot uniform spread around `dot_bias_mm`.
    pub dot_bias_jitter_mm: f64,
    /// Dots only disturb returns from surfaces farther than this.
    pub dot_bias_cutoff_mm: f64,
    pub range_bias: Curve,
    pub noise_sigma: Curve,
    /// Bias grows by `1 + gain * rho^2`, rho the radius over the half diagonal.
    pub vignette_gain: f64,
    /// Default `albedo_bias_mm` for materials that leave it unset; zero turns
    /// the albedo term off entirely.
    pub albedo_bias_mm: f64,
    /// Returns at a grazing angle below this cosine are dropped.
    pub min_incidence_cos: f64,
}

impl Default for ArtifactModel {
    fn default() -> Self {
        Self {
            dot_bias_mm: 3.0,
            dot_bias_jitter_mm: 1.0,
            dot_bias_cutoff_mm: 40.0,
            range_bias: Curve {
                knots: vec![[0.0, 0.0], [10.0, 8.0], [50.0, 1.0], [100.0, -31.0]],
            },
            noise_sigma: Curve {
                knots: vec![[0.0, 0.2], [50.0, 0.3], [100.0, 0.5], [200.0, 1.0]],
            },
            vignette_gain: 0.1,
            albedo_bias_mm: 4.0,
            min_incidence_cos: 0.2,
        }
    }
}

impl ArtifactModel {
    /// No artifacts at all: the observed frame equals the truth.
    pub fn null() -> Self {
        Self {
            dot_bias_mm: 0.0,
            dot_bias_jitter_mm: 0.0,
            dot_bias_cutoff_mm: 40.0,
            range_bias: Curve::zero(),
            noise_sigma: Curve::zero(),
            vignette_gain: 0.0,
            albedo_bias_mm: 0.0,
            min_incidence_cos: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.range_bias.validate()?;
        self.noise_sigma.validate()?;
        if self.noise_sigma.knots().iter().any(|k| k[1] < 0.0) {
            return Err(Error::InvalidParameter("noise sigma must be non-negative".into()));
        }
        let finite = [
            self.dot_bias_mm,
            self.dot_bias_jitter_mm,
            self.dot_bias_cutoff_mm,
            self.vignette_gain,
            self.albedo_bias_mm,
            self.min_incidence_cos,
        ];
        if finite.iter().any(|v| !v.is_finite()) || self.dot_bias_jitter_mm < 0.0 {
            return Err(Error::InvalidParameter("artifact parameters must be finite".into()));
        }
        Ok(())
    }

    /// Signed range bias, zero for surfaces at or inside the membrane.
    pub fn range_bias_at(&self, distance_mm: f64) -> f64 {
        if distance_mm <= 0.0 {
            self.range_bias.eval(0.0)
        } else {
            self.range_bias.eval(distance_mm)
        }
    }

    pub fn sigma_at(&self, distance_mm: f64) -> f64 {
        self.noise_sigma.eval(distance_mm.max(0.0))
    }
}

/// Which dot, if any, each depth pixel looks through. `NONE` marks open membrane.
#[derive(Debug, Clone, PartialEq)]
pub struct DotFootprint {
    pub ids: Raster<u16>,
}

impl DotFootprint {
    pub const NONE: u16 = u16::MAX;

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            ids: Raster::filled(width, height, Self::NONE),
        }
    }

    /// Marks pixels whose center ray passes within a dot radius of a dot center,
    /// evaluated on the plane parallel to the sensor through that dot.
    pub fn compute(dot_centers: &[Point3<f64>], radius_mm: f64, cam: &CameraModel) -> Self {
        let (w, h) = (cam.width_px as usize, cam.height_px as usize);
        let mut ids = Raster::filled(w, h, Self::NONE);
        let k = cam.intrinsics();
        for (id, c) in dot_centers.iter().enumerate() {
            let Ok(px) = cam.project_sensor(c) else { continue };
            let r_px = k.fx.max(k.fy) * radius_mm / c.z + 1.0;
            let x0 = (px.x - r_px).floor().max(0.0) as usize;
            let y0 = (px.y - r_px).floor().max(0.0) as usize;
            let x1 = ((px.x + r_px).ceil() as usize).min(w);
            let y1 = ((px.y + r_px).ceil() as usize).min(h);
            let origin = cam.origin_sensor();
            for y in y0..y1 {
                for x in x0..x1 {
                    let d = cam.ray_direction(&Point2::new(x as f64 + 0.5, y as f64 + 0.5));
                    let hit = origin + d * c.z;
                    let dx = hit.x - c.x;
                    let dy = hit.y - c.y;
                    if dx * dx + dy * dy <= radius_mm * radius_mm {
                        ids.set(x, y, id as u16);
                    }
                }
            }
        }
        Self { ids }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.ids.get(x, y) != Self::NONE
    }
}

/// Per-dot bias magnitudes, fixed for the lifetime of a simulated sensor.
pub fn dot_biases(model: &ArtifactModel, grid: &DotGridSpec, rng: &mut impl Rng) -> Vec<f64> {
    (0..grid.count())
        .map(|_| {
            let u: f64 = rng.random_range(-1.0..=1.0);
            model.dot_bias_mm + model.dot_bias_jitter_mm * u
        })
        .collect()
}

/// Applies the error model to a truth render.
///
/// Per valid pixel: grazing returns are dropped, then
/// `truth + vignette * (range_bias + albedo_bias - dot_bias) + N(0, sigma)`,
/// with the dot term only over footprints whose truth surface lies beyond
/// the cutoff. A standard normal is drawn for every pixel in raster order so
/// the noise field is independent of the scene.
pub fn render_depth_observed(
    truth: &TruthRender,
    footprint: &DotFootprint,
    dot_bias_mm: &[f64],
    model: &ArtifactModel,
    rng: &mut impl Rng,
) -> DepthFrame {
    let depth = truth.depth.pixels();
    let (w, h) = (depth.width(), depth.height());
    let half_diag2 = (w * w + h * h) as f64 / 4.0;
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let z: f64 = rng.sample(StandardNormal);
            let t = depth.get(x, y) as f64;
            if t <= 0.0 || (truth.incidence_cos.get(x, y) as f64) < model.min_incidence_cos {
                out.push(0.0f32);
                continue;
            }
            let dist = t - truth.rest_depth_mm;
            let refl = truth.reflectance.get(x, y) as f64;
            let mut bias = model.range_bias_at(dist);
            if model.albedo_bias_mm != 0.0 {
                let own = truth.albedo_bias_mm.get(x, y);
                let albedo = if own.is_nan() { model.albedo_bias_mm } else { own as f64 };
                bias += albedo * (0.5 - refl) * 2.0;
            }
            let id = footprint.ids.get(x, y);
            if id != DotFootprint::NONE && dist > model.dot_bias_cutoff_mm {
                bias -= dot_bias_mm.get(id as usize).copied().unwrap_or(model.dot_bias_mm);
            }
            let rx = x as f64 + 0.5 - cx;
            let ry = y as f64 + 0.5 - cy;
            let vignette = 1.0 + model.vignette_gain * (rx * rx + ry * ry) / half_diag2;
            let v = t + vignette * bias + model.sigma_at(dist) * z;
            out.push(v.max(0.0) as f32);
        }
    }
    let raster = Raster::from_vec(w, h, out).expect("same dimensions as truth");
    truth
        .depth
        .with_pixels(raster)
        .expect("observed depth is finite and non-negative")
}
