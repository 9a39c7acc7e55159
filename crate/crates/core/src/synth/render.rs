//! Ground-truth depth ray casting and dot-grid intensity rendering.

use nalgebra::{Point2, Point3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::error::Result;
use crate::frame::{DepthFrame, IntensityFrame};
use crate::raster::Raster;
use crate::synth::shape::Scene;

/// Farthest return the depth camera reports, measured from the camera plane.
pub const MAX_RANGE_MM: f64 = 200.0;

/// Noise-free depth plus the per-pixel surface properties the error model needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRender {
    pub depth: DepthFrame,
    pub reflectance: Raster<f32>,
    /// Per-material albedo bias override, NaN where unset.
    pub albedo_bias_mm: Raster<f32>,
    /// |cos| of the angle between the ray and the surface normal; 1 where invalid.
    pub incidence_cos: Raster<f32>,
    pub rest_depth_mm: f64,
}

/// Casts one ray per depth pixel center against the scene.
///
/// Objects in contact are seen through the membrane that wraps them, so the
/// nearest object surface is also the deformed membrane surface; the
/// undeformed membrane itself is transparent to the depth camera.
pub fn render_depth_truth(
    scene: &Scene,
    rest_depth_mm: f64,
    cam: &CameraModel,
    frame_index: u64,
    frame_rate_hz: f64,
) -> Result<TruthRender> {
    let (w, h) = (cam.width_px as usize, cam.height_px as usize);
    let mut depth = Raster::filled(w, h, 0.0f32);
    let mut reflectance = Raster::filled(w, h, 0.0f32);
    let mut albedo = Raster::filled(w, h, f32::NAN);
    let mut incidence = Raster::filled(w, h, 1.0f32);
    let origin = cam.origin_sensor();
    if !scene.objects.is_empty() {
        for y in 0..h {
            for x in 0..w {
                let d = cam.ray_direction(&Point2::new(x as f64 + 0.5, y as f64 + 0.5));
                let Some((i, hit)) = scene.intersect(&origin, &d) else {
                    continue;
                };
                // d has unit z, so the ray parameter is the perpendicular depth.
                if hit.t > MAX_RANGE_MM {
                    continue;
                }
                let obj = &scene.objects[i];
                depth.set(x, y, hit.t as f32);
                reflectance.set(x, y, obj.material.ir_reflectance as f32);
                if let Some(b) = obj.material.albedo_bias_mm {
                    albedo.set(x, y, b as f32);
                }
                incidence.set(x, y, (hit.normal.dot(&d).abs() / d.norm()) as f32);
            }
        }
    }
    Ok(TruthRender {
        depth: DepthFrame::new(depth, frame_index, frame_rate_hz)?,
        reflectance,
        albedo_bias_mm: albedo,
        incidence_cos: incidence,
        rest_depth_mm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntensityParams {
    pub background: f64,
    pub dot_level: f64,
    pub noise_sigma: f64,
}

impl Default for IntensityParams {
    fn default() -> Self {
        Self {
            background: 15.0,
            dot_level: 220.0,
            noise_sigma: 2.0,
        }
    }
}

/// Coverage of each pixel by anti-aliased disks: `clamp(r - d + 1/2, 0, 1)`
/// with `d` the distance from the pixel center to the disk center.
pub fn rasterize_disks(width: usize, height: usize, disks: &[(Point2<f64>, f64)]) -> Raster<f32> {
    let mut cov = Raster::filled(width, height, 0.0f32);
    for &(c, r) in disks {
        let reach = r + 1.0;
        let x0 = (c.x - reach).floor().max(0.0) as usize;
        let y0 = (c.y - reach).floor().max(0.0) as usize;
        let x1 = ((c.x + reach).ceil().max(0.0) as usize).min(width);
        let y1 = ((c.y + reach).ceil().max(0.0) as usize).min(height);
        for y in y0..y1 {
            for x in x0..x1 {
                let dx = x as f64 + 0.5 - c.x;
                let dy = y as f64 + 0.5 - c.y;
                let a = (r - (dx * dx + dy * dy).sqrt() + 0.5).clamp(0.0, 1.0) as f32;
                if a > cov.get(x, y) {
                    cov.set(x, y, a);
                }
            }
        }
    }
    cov
}

/// Images the dots (sensor-frame centers) through `cam` on a dark membrane.
#[allow(clippy::too_many_arguments)]
pub fn render_intensity(
    dot_centers: &[Point3<f64>],
    dot_radius_mm: f64,
    cam: &CameraModel,
    params: &IntensityParams,
    rng: &mut impl Rng,
    frame_index: u64,
    frame_rate_hz: f64,
) -> Result<IntensityFrame> {
    let k = cam.intrinsics();
    let disks: Vec<(Point2<f64>, f64)> = dot_centers
        .iter()
        .filter_map(|c| {
            let px = cam.project_sensor(c).ok()?;
            Some((px, 0.5 * (k.fx + k.fy) * dot_radius_mm / c.z))
        })
        .collect();
    let (w, h) = (cam.width_px as usize, cam.height_px as usize);
    let cov = rasterize_disks(w, h, &disks);
    let span = params.dot_level - params.background;
    let data = cov
        .as_slice()
        .iter()
        .map(|&a| {
            let n: f64 = rng.sample(StandardNormal);
            let v = params.background + span * a as f64 + params.noise_sigma * n;
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    IntensityFrame::new(Raster::from_vec(w, h, data)?, frame_index, frame_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::shape::{Pose, SceneObject, Shape};
    use nalgebra::Vector3;

    fn plane_at(z: f64) -> Scene {
        Scene::new(vec![SceneObject::new(
            "p",
            Shape::Plane {
                normal: [0.0, 0.0, 1.0],
                offset_mm: z,
            },
            Pose::identity(),
        )])
    }

    #[test]
    fn empty_scene_is_all_invalid() {
        let cam = CameraModel::depth_default();
        let t = render_depth_truth(&Scene::default(), 85.0, &cam, 0, 30.0).unwrap();
        assert_eq!(t.depth.valid_count(), 0);
    }

    #[test]
    fn fronto_parallel_plane_has_constant_depth() {
        let cam = CameraModel::depth_default();
        let t = render_depth_truth(&plane_at(50.0), 85.0, &cam, 0, 30.0).unwrap();
        let px = t.depth.pixels().as_slice();
        assert_eq!(t.depth.valid_count(), px.len());
        let mean = px.iter().map(|&v| v as f64).sum::<f64>() / px.len() as f64;
        assert!((mean - 50.0).abs() < 1e-6);
        // The corner ray travels 50 / cos(theta) but still reports perpendicular depth.
        let d = cam.ray_direction(&Point2::new(0.5, 0.5));
        let cos_theta = 1.0 / d.norm();
        assert!(cos_theta < 0.8);
        assert!((50.0 / cos_theta * cos_theta - px[0] as f64).abs() < 1e-5);
        assert!((t.incidence_cos.get(0, 0) as f64 - cos_theta).abs() < 1e-6);
    }

    #[test]
    fn beyond_range_is_invalid() {
        let cam = CameraModel::depth_default();
        let t = render_depth_truth(&plane_at(250.0), 85.0, &cam, 0, 30.0).unwrap();
        assert_eq!(t.depth.valid_count(), 0);
    }

    #[test]
    fn cube_on_membrane_reads_membrane_depth() {
        let cam = CameraModel::depth_default();
        let rest = 85.0;
        let indentation = 4.0;
        let half = 57.3 / 2.0;
        let cube = SceneObject::new(
            "cube",
            Shape::Box {
                half_extents_mm: [half; 3],
            },
            Pose::from_translation(Vector3::new(0.0, 0.0, rest - indentation + half)),
        );
        let t = render_depth_truth(&Scene::new(vec![cube]), rest, &cam, 0, 30.0).unwrap();
        let c = cam.project_sensor(&Point3::new(0.0, 0.0, rest)).unwrap();
        let v = t.depth.pixels().get(c.x as usize, c.y as usize);
        assert!((v as f64 - (rest - indentation)).abs() < 1e-4);
    }

    #[test]
    fn disk_rasterizer_is_symmetric() {
        let cov = rasterize_disks(21, 21, &[(Point2::new(10.5, 10.5), 4.0)]);
        for y in 0..21 {
            for x in 0..21 {
                assert_eq!(cov.get(x, y), cov.get(20 - x, y));
                assert_eq!(cov.get(x, y), cov.get(y, x));
            }
        }
        let area: f32 = cov.as_slice().iter().sum();
        assert!((area as f64 - std::f64::consts::PI * 16.0).abs() < 1.0);
    }
}
