//! Pinhole camera geometry shared by the simulator and the pipeline.
//!
//! Pixel coordinates are continuous: pixel `(i, j)` covers `[i, i+1) x [j, j+1)`
//! and its center sits at `(i + 0.5, j + 0.5)`. The principal point is the
//! geometric image center, so a `w x h` image spans exactly the field of view.
//!
//! Camera frames share the orientation of the sensor frame (+z looking out
//! through the membrane, +y down in the image) and differ only by the in-plane
//! `offset_mm` of the optical center.

use nalgebra::{Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub width_px: u32,
    pub height_px: u32,
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    /// Optical center in the sensor plane, mm.
    pub offset_mm: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraModel {
    pub fn new(width_px: u32, height_px: u32, fov_h_deg: f64, fov_v_deg: f64) -> Result<Self> {
        let cam = Self {
            width_px,
            height_px,
            fov_h_deg,
            fov_v_deg,
            offset_mm: [0.0, 0.0],
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn with_offset(mut self, offset_mm: [f64; 2]) -> Self {
        self.offset_mm = offset_mm;
        self
    }

    /// Time-of-flight depth camera: 640x480, 70 x 55 degrees.
    pub fn depth_default() -> Self {
        Self {
            width_px: 640,
            height_px: 480,
            fov_h_deg: 70.0,
            fov_v_deg: 55.0,
            offset_mm: [-7.5, 0.0],
        }
    }

    /// Tactile RGB camera: 960x540, 70 x 43 degrees, 15 mm from the depth camera.
    pub fn intensity_default() -> Self {
        Self {
            width_px: 960,
            height_px: 540,
            fov_h_deg: 70.0,
            fov_v_deg: 43.0,
            offset_mm: [7.5, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::InvalidCamera(format!(
                "resolution {}x{} must be positive",
                self.width_px, self.height_px
            )));
        }
        for (name, fov) in [("horizontal", self.fov_h_deg), ("vertical", self.fov_v_deg)] {
            if !(fov > 0.0 && fov < 180.0) {
                return Err(Error::InvalidCamera(format!(
                    "{name} field of view {fov} deg outside (0, 180)"
                )));
            }
        }
        if !self.offset_mm.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidCamera("non-finite offset".into()));
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Intrinsics {
        let half_w = self.width_px as f64 / 2.0;
        let half_h = self.height_px as f64 / 2.0;
        Intrinsics {
            fx: half_w / (self.fov_h_deg.to_radians() / 2.0).tan(),
            fy: half_h / (self.fov_v_deg.to_radians() / 2.0).tan(),
            cx: half_w,
            cy: half_h,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width_px as usize * self.height_px as usize
    }

    /// Projects a point given in this camera's frame.
    pub fn project(&self, point_mm: &Point3<f64>) -> Result<Point2<f64>> {
        if !(point_mm.z > 0.0) {
            return Err(Error::BehindCamera(point_mm.z));
        }
        let k = self.intrinsics();
        Ok(Point2::new(
            k.fx * point_mm.x / point_mm.z + k.cx,
            k.fy * point_mm.y / point_mm.z + k.cy,
        ))
    }

    /// Back-projects a pixel to the camera-frame point at perpendicular depth `depth_mm`.
    pub fn unproject(&self, pixel: &Point2<f64>, depth_mm: f64) -> Result<Point3<f64>> {
        if !(depth_mm > 0.0) {
            return Err(Error::NonPositiveDepth(depth_mm));
        }
        let k = self.intrinsics();
        Ok(Point3::new(
            (pixel.x - k.cx) * depth_mm / k.fx,
            (pixel.y - k.cy) * depth_mm / k.fy,
            depth_mm,
        ))
    }

    /// Projects a point given in the sensor frame.
    pub fn project_sensor(&self, point_mm: &Point3<f64>) -> Result<Point2<f64>> {
        self.project(&self.sensor_to_camera(point_mm))
    }

    pub fn sensor_to_camera(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::new(p.x - self.offset_mm[0], p.y - self.offset_mm[1], p.z)
    }

    pub fn camera_to_sensor(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::new(p.x + self.offset_mm[0], p.y + self.offset_mm[1], p.z)
    }

    /// Optical center in the sensor frame.
    pub fn origin_sensor(&self) -> Point3<f64> {
        Point3::new(self.offset_mm[0], self.offset_mm[1], 0.0)
    }

    /// Direction of the ray through `pixel`, scaled so that its z component is 1.
    pub fn ray_direction(&self, pixel: &Point2<f64>) -> Vector3<f64> {
        let k = self.intrinsics();
        Vector3::new((pixel.x - k.cx) / k.fx, (pixel.y - k.cy) / k.fy, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn depth_camera_focal_length() {
        let k = CameraModel::depth_default().intrinsics();
        // 320 / tan(35 deg), tan evaluated as sin/cos.
        let expected = 320.0 * 35f64.to_radians().cos() / 35f64.to_radians().sin();
        assert_abs_diff_eq!(k.fx, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(k.fx, 457.0, epsilon = 0.05);
        assert_eq!((k.cx, k.cy), (320.0, 240.0));
    }

    #[test]
    fn unit_camera() {
        let cam = CameraModel::new(2, 2, 90.0, 90.0).unwrap();
        let k = cam.intrinsics();
        assert_abs_diff_eq!(k.fx, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k.cx, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn intensity_camera_pixels_are_nearly_square() {
        let k = CameraModel::intensity_default().intrinsics();
        let fy = 270.0 * 21.5f64.to_radians().cos() / 21.5f64.to_radians().sin();
        assert_abs_diff_eq!(k.fx, 685.6, epsilon = 0.1);
        assert_abs_diff_eq!(k.fy, fy, epsilon = 1e-9);
        assert_abs_diff_eq!(k.fy, 685.5, epsilon = 0.1);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(CameraModel::new(0, 10, 60.0, 60.0).is_err());
        assert!(CameraModel::new(10, 10, 180.0, 60.0).is_err());
        assert!(CameraModel::new(10, 10, 60.0, 0.0).is_err());
    }

    #[test]
    fn projection_examples() {
        let cam = CameraModel::depth_default();
        let k = cam.intrinsics();
        let c = cam.project(&Point3::new(0.0, 0.0, 50.0)).unwrap();
        assert_eq!((c.x, c.y), (k.cx, k.cy));
        let p = cam.project(&Point3::new(10.0, 0.0, 50.0)).unwrap();
        assert_abs_diff_eq!(p.x - k.cx, k.fx * 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p.x - k.cx, 91.4, epsilon = 0.05);
        assert!(cam.project(&Point3::new(0.0, 0.0, 0.0)).is_err());
        assert!(cam.project(&Point3::new(1.0, 0.0, -5.0)).is_err());
    }

    #[test]
    fn unprojection_examples() {
        let cam = CameraModel::depth_default();
        let k = cam.intrinsics();
        let p = cam.unproject(&Point2::new(k.cx, k.cy), 100.0).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 100.0));

        let a = cam.unproject(&Point2::new(0.0, 0.0), 100.0).unwrap();
        let b = cam.unproject(&Point2::new(640.0, 480.0), 100.0).unwrap();
        assert_abs_diff_eq!(b.x - a.x, 200.0 * 35f64.to_radians().tan(), epsilon = 1e-6);
        assert_abs_diff_eq!(b.y - a.y, 200.0 * 27.5f64.to_radians().tan(), epsilon = 1e-6);

        let o = cam.unproject(&Point2::new(0.0, 0.0), 50.0).unwrap();
        assert_abs_diff_eq!(o.x, -50.0 * k.cx / k.fx, epsilon = 1e-12);
        assert_abs_diff_eq!(o.y, -50.0 * k.cy / k.fy, epsilon = 1e-12);
        assert!(cam.unproject(&Point2::new(1.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn round_trip_point() {
        let cam = CameraModel::intensity_default();
        let p = Point3::new(12.5, -7.25, 63.0);
        let px = cam.project(&p).unwrap();
        let q = cam.unproject(&px, p.z).unwrap();
        assert!((p - q).norm() < 1e-9);
    }

    proptest! {
        #[test]
        fn project_inverts_unproject(
            u in 0.0f64..640.0,
            v in 0.0f64..480.0,
            depth in 1e-3f64..1e6,
        ) {
            let cam = CameraModel::depth_default();
            let px = Point2::new(u, v);
            let back = cam.project(&cam.unproject(&px, depth).unwrap()).unwrap();
            prop_assert!((back - px).norm() < 1e-6);
        }
    }
}
