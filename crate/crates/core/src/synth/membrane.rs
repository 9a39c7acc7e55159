//! Quasi-static membrane deformation on a regular grid over the active area.

use nalgebra::{Point2, Point3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::frame::DotGridSpec;
use crate::imgproc::gaussian_blur;
use crate::raster::Raster;
use crate::rig::SensorRig;
use crate::synth::shape::SceneObject;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MembraneParams {
    pub cell_mm: f64,
    pub smoothing_sigma_mm: f64,
    /// Lateral displacement per unit slope of the smoothed indentation (mm).
    pub displacement_gain: f64,
}

impl Default for MembraneParams {
    fn default() -> Self {
        Self {
            cell_mm: 0.5,
            smoothing_sigma_mm: 6.0,
            displacement_gain: 0.4,
        }
    }
}

/// Indentation and in-plane displacement sampled at cell centers. Coordinates
/// are membrane-frame mm with the origin at the membrane center.
#[derive(Debug, Clone, PartialEq)]
pub struct MembraneState {
    pub rest_depth_mm: f64,
    pub extent_mm: [f64; 2],
    pub inflation_psi: f64,
    pub cell_mm: f64,
    /// Inward deformation, mm, never negative.
    pub indentation: Raster<f32>,
    pub displacement_x: Raster<f32>,
    pub displacement_y: Raster<f32>,
}

impl MembraneState {
    pub fn at_rest(rig: &SensorRig, cell_mm: f64) -> Self {
        let nx = (rig.membrane_extent_mm[0] / cell_mm).round() as usize;
        let ny = (rig.membrane_extent_mm[1] / cell_mm).round() as usize;
        Self {
            rest_depth_mm: rig.rest_depth_mm,
            extent_mm: rig.membrane_extent_mm,
            inflation_psi: rig.inflation_psi,
            cell_mm,
            indentation: Raster::filled(nx, ny, 0.0),
            displacement_x: Raster::filled(nx, ny, 0.0),
            displacement_y: Raster::filled(nx, ny, 0.0),
        }
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point2<f64> {
        Point2::new(
            -self.extent_mm[0] / 2.0 + (i as f64 + 0.5) * self.cell_mm,
            -self.extent_mm[1] / 2.0 + (j as f64 + 0.5) * self.cell_mm,
        )
    }

    fn grid_coords(&self, p: &Point2<f64>) -> (f32, f32) {
        (
            ((p.x + self.extent_mm[0] / 2.0) / self.cell_mm - 0.5) as f32,
            ((p.y + self.extent_mm[1] / 2.0) / self.cell_mm - 0.5) as f32,
        )
    }

    pub fn indentation_at(&self, p: &Point2<f64>) -> f64 {
        let (gx, gy) = self.grid_coords(p);
        self.indentation.sample_bilinear(gx, gy) as f64
    }

    pub fn displacement_at(&self, p: &Point2<f64>) -> Vector2<f64> {
        let (gx, gy) = self.grid_coords(p);
        Vector2::new(
            self.displacement_x.sample_bilinear(gx, gy) as f64,
            self.displacement_y.sample_bilinear(gx, gy) as f64,
        )
    }

    pub fn peak_indentation_mm(&self) -> f64 {
        self.indentation.as_slice().iter().fold(0.0f32, |a, &b| a.max(b)) as f64
    }

    /// Displaced volume, mm^3.
    pub fn volume_mm3(&self) -> f64 {
        let area = self.cell_mm * self.cell_mm;
        self.indentation.as_slice().iter().map(|&v| v as f64).sum::<f64>() * area
    }

    pub fn in_contact(&self) -> bool {
        self.peak_indentation_mm() > 0.0
    }

    /// Sensor-frame centers of every dot after deformation, by dot id.
    pub fn dot_positions(&self, grid: &DotGridSpec) -> Vec<Point3<f64>> {
        grid.dots()
            .iter()
            .map(|d| {
                let u = self.displacement_at(&d.position_mm);
                let z = self.rest_depth_mm - self.indentation_at(&d.position_mm);
                Point3::new(d.position_mm.x + u.x, d.position_mm.y + u.y, z)
            })
            .collect()
    }
}

/// Penetrations below this are rounding noise, not contact.
const PENETRATION_FLOOR_MM: f64 = 1e-6;

/// Penetration of one object past the rest plane along the sensor-frame
/// vertical through every membrane cell.
fn penetration_field(obj: &SceneObject, base: &MembraneState) -> Raster<f32> {
    let (nx, ny) = (base.indentation.width(), base.indentation.height());
    let rest = base.rest_depth_mm;
    let up = Vector3::new(0.0, 0.0, 1.0);
    // Cheap reject: the object never reaches the rest plane.
    if obj.min_z().is_some_and(|z| z >= rest) {
        return Raster::filled(nx, ny, 0.0);
    }
    Raster::from_fn(nx, ny, |i, j| {
        let c = base.cell_center(i, j);
        match obj.intersect(&Point3::new(c.x, c.y, 0.0), &up) {
            Some(h) if h.t < rest - PENETRATION_FLOOR_MM => (rest - h.t) as f32,
            _ => 0.0,
        }
    })
}

/// Deforms the membrane under `objects` given in the sensor frame.
///
/// Indentation is the pointwise maximum penetration. Dots move away from the
/// contact along the negative gradient of the smoothed indentation, plus any
/// shear an object drags along its own footprint.
pub fn membrane_deform(objects: &[SceneObject], rig: &SensorRig, params: &MembraneParams) -> MembraneState {
    let mut state = MembraneState::at_rest(rig, params.cell_mm);
    let sigma_cells = params.smoothing_sigma_mm / params.cell_mm;
    let mut shear_fields = Vec::new();
    for obj in objects {
        let field = penetration_field(obj, &state);
        for (dst, &v) in state.indentation.as_mut_slice().iter_mut().zip(field.as_slice()) {
            *dst = dst.max(v);
        }
        if obj.surface_shear_mm != Vector2::zeros() && field.as_slice().iter().any(|&v| v > 0.0) {
            shear_fields.push((obj.surface_shear_mm, field));
        }
    }
    if !state.in_contact() {
        return state;
    }

    let smooth = gaussian_blur(&state.indentation, sigma_cells);
    let (nx, ny) = (smooth.width(), smooth.height());
    let g = params.displacement_gain;
    let inv = 1.0 / (2.0 * params.cell_mm) as f32;
    for j in 0..ny {
        for i in 0..nx {
            let (ii, jj) = (i as isize, j as isize);
            let gx = (smooth.get_clamped(ii + 1, jj) - smooth.get_clamped(ii - 1, jj)) * inv;
            let gy = (smooth.get_clamped(ii, jj + 1) - smooth.get_clamped(ii, jj - 1)) * inv;
            state.displacement_x.set(i, j, -(g as f32) * gx);
            state.displacement_y.set(i, j, -(g as f32) * gy);
        }
    }

    for (shear, field) in shear_fields {
        let mask = gaussian_blur(&field.map(|v| if v > 0.0 { 1.0 } else { 0.0 }), sigma_cells);
        let peak = mask.as_slice().iter().fold(0.0f32, |a, &b| a.max(b));
        if peak <= 0.0 {
            continue;
        }
        let (sx, sy) = (shear.x as f32 / peak, shear.y as f32 / peak);
        let m = mask.as_slice();
        for (k, w) in m.iter().enumerate() {
            state.displacement_x.as_mut_slice()[k] += sx * w;
            state.displacement_y.as_mut_slice()[k] += sy * w;
        }
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::shape::{Pose, Shape};

    fn cylinder_tip(x: f64, y: f64, protrusion: f64) -> SceneObject {
        let rig = SensorRig::default();
        SceneObject::new(
            "c",
            Shape::Cylinder {
                radius_mm: 15.0,
                height_mm: 50.0,
            },
            Pose::from_translation(Vector3::new(x, y, rig.rest_depth_mm - protrusion + 25.0)),
        )
    }

    #[test]
    fn no_contact_means_no_deformation() {
        let rig = SensorRig::default();
        let s = membrane_deform(&[cylinder_tip(0.0, 0.0, -1.0)], &rig, &MembraneParams::default());
        assert_eq!(s.peak_indentation_mm(), 0.0);
        assert!(s.displacement_x.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cylinder_patch_geometry() {
        let rig = SensorRig::default();
        let s = membrane_deform(&[cylinder_tip(0.0, 0.0, 10.0)], &rig, &MembraneParams::default());
        assert!((s.peak_indentation_mm() - 10.0).abs() < 1e-4);
        // Indented cells form a disk of radius 15 mm.
        let cell_area = s.cell_mm * s.cell_mm;
        let area = s.indentation.as_slice().iter().filter(|&&v| v > 0.0).count() as f64 * cell_area;
        let expected = std::f64::consts::PI * 225.0;
        assert!((area - expected).abs() / expected < 0.01, "{area}");
        assert!((s.indentation_at(&Point2::new(14.0, 0.0)) - 10.0).abs() < 1e-4);
        assert!(s.volume_mm3() > 0.99 * expected * 10.0);
    }

    #[test]
    fn displacement_points_away_from_contact() {
        let rig = SensorRig::default();
        let s = membrane_deform(&[cylinder_tip(0.0, 0.0, 10.0)], &rig, &MembraneParams::default());
        for p in [Point2::new(12.0, 0.0), Point2::new(0.0, -14.0), Point2::new(-10.0, 10.0)] {
            let u = s.displacement_at(&p);
            assert!(u.dot(&p.coords) > 0.0, "{p:?} {u:?}");
            assert!(u.norm() > 0.05 && u.norm() < 1.0, "{u:?}");
        }
    }

    #[test]
    fn disjoint_contacts_compose_by_max() {
        let rig = SensorRig::default();
        let p = MembraneParams::default();
        let a = cylinder_tip(-25.0, 0.0, 4.0);
        let b = cylinder_tip(25.0, 0.0, 7.0);
        let sa = membrane_deform(std::slice::from_ref(&a), &rig, &p);
        let sb = membrane_deform(std::slice::from_ref(&b), &rig, &p);
        let sab = membrane_deform(&[a, b], &rig, &p);
        for k in 0..sab.indentation.as_slice().len() {
            let m = sa.indentation.as_slice()[k].max(sb.indentation.as_slice()[k]);
            assert_eq!(sab.indentation.as_slice()[k], m);
        }
    }
}
