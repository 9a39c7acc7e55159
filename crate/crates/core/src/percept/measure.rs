//! Size of a single object seen in front of a known background.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::frame::DepthFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureParams {
    /// Pixels must be at least this much nearer than the background.
    pub segmentation_margin_mm: f64,
}

impl Default for MeasureParams {
    fn default() -> Self {
        Self {
            segmentation_margin_mm: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectMeasurement {
    pub extent_x_mm: f64,
    pub extent_y_mm: f64,
    pub extent_z_mm: f64,
    pub segment_pixel_count: usize,
}

/// Morphological opening with a 3x3 square: drops specks smaller than the
/// square and leaves larger convex regions unchanged.
fn open3(mask: &[bool], w: usize, h: usize) -> Vec<bool> {
    let pass = |src: &[bool], keep_if_all: bool| -> Vec<bool> {
        let mut out = vec![false; src.len()];
        for y in 0..h {
            for x in 0..w {
                let mut all = true;
                let mut any = false;
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let (nx, ny) = (x as isize + dx, y as isize + dy);
                        let v = nx >= 0
                            && ny >= 0
                            && (nx as usize) < w
                            && (ny as usize) < h
                            && src[ny as usize * w + nx as usize];
                        all &= v;
                        any |= v;
                    }
                }
                out[y * w + x] = if keep_if_all { all } else { any };
            }
        }
        out
    };
    let eroded = pass(mask, true);
    let opened = pass(&eroded, false);
    opened.iter().zip(mask).map(|(&a, &b)| a && b).collect()
}

/// Largest 8-connected set of `mask` pixels, as flat indices.
fn largest_component(mask: &[bool], w: usize, h: usize) -> Vec<usize> {
    let mut seen = vec![false; mask.len()];
    let mut best = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

/// Segments pixels nearer than `background_mm - margin`, opens the mask to
/// drop noise specks, keeps the largest connected piece and reports its bounding box in camera coordinates.
/// Each pixel is unprojected at its own depth across its full footprint.
pub fn measure_object(
    corrected: &DepthFrame,
    cam: &CameraModel,
    background_mm: f64,
    params: &MeasureParams,
) -> Result<ObjectMeasurement> {
    let (w, h) = (corrected.width(), corrected.height());
    let limit = background_mm - params.segmentation_margin_mm;
    let px = corrected.pixels().as_slice();
    let mask: Vec<bool> = px.iter().map(|&v| v > 0.0 && (v as f64) < limit).collect();
    let mask = open3(&mask, w, h);
    let comp = largest_component(&mask, w, h);
    if comp.is_empty() {
        return Err(Error::NoObject);
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut zmin = f64::INFINITY;
    for &i in &comp {
        let d = px[i] as f64;
        let (u, v) = ((i % w) as f64, (i / w) as f64);
        let a = cam.unproject(&Point2::new(u, v), d)?;
        let b = cam.unproject(&Point2::new(u + 1.0, v + 1.0), d)?;
        x0 = x0.min(a.x);
        x1 = x1.max(b.x);
        y0 = y0.min(a.y);
        y1 = y1.max(b.y);
        zmin = zmin.min(d);
    }
    Ok(ObjectMeasurement {
        extent_x_mm: x1 - x0,
        extent_y_mm: y1 - y0,
        extent_z_mm: (background_mm - zmin).max(0.0),
        segment_pixel_count: comp.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Raster;

    fn cam() -> CameraModel {
        CameraModel::depth_default()
    }

    #[test]
    fn empty_scene_has_no_object() {
        let f = DepthFrame::new(Raster::filled(640, 480, 142.0), 0, 30.0).unwrap();
        assert!(matches!(
            measure_object(&f, &cam(), 142.0, &MeasureParams::default()),
            Err(Error::NoObject)
        ));
    }

    #[test]
    fn fronto_parallel_square() {
        // A 20 mm square at 100 mm in front of a 150 mm wall.
        let k = cam().intrinsics();
        let half_px = 10.0 * k.fx / 100.0;
        let px = Raster::from_fn(640, 480, |x, y| {
            let (u, v) = (x as f64 + 0.5 - k.cx, y as f64 + 0.5 - k.cy);
            if u.abs() < half_px && v.abs() < half_px {
                100.0f32
            } else {
                150.0
            }
        });
        let f = DepthFrame::new(px, 0, 30.0).unwrap();
        let m = measure_object(&f, &cam(), 150.0, &MeasureParams::default()).unwrap();
        let px_mm = 100.0 / k.fx;
        assert!((m.extent_x_mm - 20.0).abs() <= 2.0 * px_mm, "{m:?}");
        assert!((m.extent_y_mm - 20.0).abs() <= 2.0 * px_mm, "{m:?}");
        assert_eq!(m.extent_z_mm, 50.0);
    }

    #[test]
    fn specks_touching_the_object_are_dropped() {
        let mut px = Raster::filled(50, 40, 200.0f32);
        for y in 5..15 {
            for x in 5..15 {
                px.set(x, y, 100.0);
            }
        }
        px.set(15, 10, 190.0);
        px.set(16, 11, 190.0);
        let f = DepthFrame::new(px, 0, 30.0).unwrap();
        let m = measure_object(&f, &cam(), 200.0, &MeasureParams::default()).unwrap();
        assert_eq!(m.segment_pixel_count, 100);
    }

    #[test]
    fn keeps_the_largest_piece() {
        let mut px = Raster::filled(50, 40, 200.0f32);
        for y in 5..15 {
            for x in 5..15 {
                px.set(x, y, 100.0);
            }
        }
        px.set(40, 30, 50.0);
        px.set(41, 30, 50.0);
        let f = DepthFrame::new(px, 0, 30.0).unwrap();
        let m = measure_object(&f, &cam(), 200.0, &MeasureParams::default()).unwrap();
        assert_eq!(m.segment_pixel_count, 100);
        assert_eq!(m.extent_z_mm, 100.0);
    }
}
