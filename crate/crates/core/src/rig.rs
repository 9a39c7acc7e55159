//! Physical layout of the sensor: two cameras behind an inflated membrane.

use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::error::Result;
use crate::frame::{DotGridSpec, DEFAULT_FRAME_RATE_HZ};

/// Axis-aligned pixel rectangle, `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: width,
            y1: height,
        }
    }

    pub fn area(&self) -> usize {
        self.x1.saturating_sub(self.x0) * self.y1.saturating_sub(self.y0)
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x0 < self.x1 && self.y0 < self.y1 && self.x1 <= width && self.y1 <= height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorRig {
    pub depth_camera: CameraModel,
    pub intensity_camera: CameraModel,
    /// Distance from the camera plane to the inflated membrane (the sensing surface).
    pub rest_depth_mm: f64,
    pub membrane_extent_mm: [f64; 2],
    pub dot_grid: DotGridSpec,
    pub inflation_psi: f64,
    pub frame_rate_hz: f64,
}

impl Default for SensorRig {
    fn default() -> Self {
        Self {
            depth_camera: CameraModel::depth_default(),
            intensity_camera: CameraModel::intensity_default(),
            rest_depth_mm: 85.0,
            membrane_extent_mm: [96.0, 54.0],
            dot_grid: DotGridSpec::default(),
            inflation_psi: 0.02,
            frame_rate_hz: DEFAULT_FRAME_RATE_HZ,
        }
    }
}

impl SensorRig {
    pub fn validate(&self) -> Result<()> {
        self.depth_camera.validate()?;
        self.intensity_camera.validate()?;
        self.dot_grid.validate()?;
        if !(self.rest_depth_mm > 0.0) || !(self.frame_rate_hz > 0.0) {
            return Err(crate::Error::InvalidParameter(
                "rest depth and frame rate must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Membrane-frame point (origin at the membrane center, +z outward from
    /// the sensing surface) to the sensor frame.
    pub fn membrane_to_sensor(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::new(p.x, p.y, p.z + self.rest_depth_mm)
    }

    pub fn surface_distance(&self, depth_mm: f64) -> f64 {
        depth_mm - self.rest_depth_mm
    }

    /// Rest positions of every dot projected into `camera`, indexed by dot id.
    pub fn dot_pixels(&self, camera: &CameraModel) -> Vec<Point2<f64>> {
        self.dot_grid
            .dots()
            .iter()
            .map(|d| {
                let p = Point3::new(d.position_mm.x, d.position_mm.y, self.rest_depth_mm);
                camera
                    .project_sensor(&p)
                    .expect("membrane lies in front of the cameras")
            })
            .collect()
    }

    /// Dot pitch in pixels of `camera` at the rest plane.
    pub fn dot_spacing_px(&self, camera: &CameraModel) -> f64 {
        camera.intrinsics().fx * self.dot_grid.spacing_mm / self.rest_depth_mm
    }

    /// Projection of a membrane-plane rectangle `[x0, x1] x [y0, y1]` (mm,
    /// membrane frame) into the depth image, clipped to the frame.
    pub fn depth_roi(&self, x_mm: [f64; 2], y_mm: [f64; 2]) -> PixelRect {
        let cam = &self.depth_camera;
        let a = cam
            .project_sensor(&Point3::new(x_mm[0], y_mm[0], self.rest_depth_mm))
            .expect("membrane in front of camera");
        let b = cam
            .project_sensor(&Point3::new(x_mm[1], y_mm[1], self.rest_depth_mm))
            .expect("membrane in front of camera");
        let w = cam.width_px as f64;
        let h = cam.height_px as f64;
        PixelRect {
            x0: a.x.min(b.x).clamp(0.0, w).round() as usize,
            y0: a.y.min(b.y).clamp(0.0, h).round() as usize,
            x1: a.x.max(b.x).clamp(0.0, w).round() as usize,
            y1: a.y.max(b.y).clamp(0.0, h).round() as usize,
        }
    }

    /// The whole active membrane area in depth pixels.
    pub fn membrane_roi(&self) -> PixelRect {
        let [w, h] = self.membrane_extent_mm;
        self.depth_roi([-w / 2.0, w / 2.0], [-h / 2.0, h / 2.0])
    }
}
