//! Resampling the intensity image onto the depth pixel grid.

use crate::fusion::homography::AlignmentTransform;
use crate::frame::IntensityFrame;
use crate::raster::Raster;

/// Inverse-warps `frame` through `h` into a `width` x `height` grid:
/// `out(q) = in(H^-1 q)`, bilinear, zero outside the source.
pub fn align_intensity(frame: &IntensityFrame, h: &AlignmentTransform, width: usize, height: usize) -> IntensityFrame {
    let src = frame.pixels();
    let (sw, sh) = (src.width() as f64, src.height() as f64);
    let hi = h.inverse_matrix();
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        // Homogeneous row start and per-column increment.
        let qy = y as f64 + 0.5;
        let mut num_x = hi[(0, 0)] * 0.5 + hi[(0, 1)] * qy + hi[(0, 2)];
        let mut num_y = hi[(1, 0)] * 0.5 + hi[(1, 1)] * qy + hi[(1, 2)];
        let mut den = hi[(2, 0)] * 0.5 + hi[(2, 1)] * qy + hi[(2, 2)];
        for _ in 0..width {
            let (px, py) = (num_x / den, num_y / den);
            out.push(if px >= 0.0 && py >= 0.0 && px <= sw && py <= sh {
                sample(src, px - 0.5, py - 0.5)
            } else {
                0
            });
            num_x += hi[(0, 0)];
            num_y += hi[(1, 0)];
            den += hi[(2, 0)];
        }
    }
    let pixels = Raster::from_vec(width, height, out).expect("sized above");
    frame.with_pixels(pixels)
}

/// Bilinear sample at index coordinates with edge clamping, rounded to u8.
fn sample(src: &Raster<u8>, x: f64, y: f64) -> u8 {
    let (w, h) = (src.width() as isize, src.height() as isize);
    let x0 = x.floor();
    let y0 = y.floor();
    let (fx, fy) = (x - x0, y - y0);
    let (ix, iy) = (x0 as isize, y0 as isize);
    let g = |xx: isize, yy: isize| src.get(xx.clamp(0, w - 1) as usize, yy.clamp(0, h - 1) as usize) as f64;
    let top = g(ix, iy) * (1.0 - fx) + g(ix + 1, iy) * fx;
    let bot = g(ix, iy + 1) * (1.0 - fx) + g(ix + 1, iy + 1) * fx;
    (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::homography::AlignmentSource;
    use crate::imgproc::{detect_blobs, BlobParams};
    use crate::synth::render::rasterize_disks;
    use nalgebra::{Matrix3, Point2};

    fn frame(px: Raster<u8>) -> IntensityFrame {
        IntensityFrame::new(px, 3, 30.0).unwrap()
    }

    #[test]
    fn identity_is_exact() {
        let px = Raster::from_fn(40, 30, |x, y| ((x * 7 + y * 13) % 256) as u8);
        let out = align_intensity(&frame(px.clone()), &AlignmentTransform::identity(), 40, 30);
        assert_eq!(out.pixels(), &px);
        assert_eq!(out.frame_index(), 3);
        assert!((out.timestamp_s() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn blank_stays_blank() {
        let px = Raster::filled(96, 54, 0u8);
        let h = AlignmentTransform::manual([0.7, 0.0, 3.0, 0.0, 0.7, -2.0, 0.0, 0.0, 1.0]).unwrap();
        let out = align_intensity(&frame(px), &h, 64, 48);
        assert!(out.pixels().as_slice().iter().all(|&v| v == 0));
    }

    #[test]
    fn translation_moves_content_forward() {
        let disks = [(Point2::new(40.0, 30.0), 4.0), (Point2::new(90.0, 50.0), 4.0)];
        let px = rasterize_disks(140, 90, &disks).map(|a| (15.0 + 205.0 * a).round() as u8);
        let h = AlignmentTransform::new(
            Matrix3::new(1.0, 0.0, 5.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0),
            0.0,
            AlignmentSource::Manual,
        )
        .unwrap();
        let out = align_intensity(&frame(px.clone()), &h, 140, 90);
        let before = detect_blobs(&px, &BlobParams::default());
        let after = detect_blobs(out.pixels(), &BlobParams::default());
        assert_eq!(before.len(), 2);
        assert_eq!(after.len(), 2);
        for (a, b) in before.iter().zip(&after) {
            assert!((b.center.x - a.center.x - 5.0).abs() < 0.1);
            assert!((b.center.y - a.center.y).abs() < 0.1);
        }
    }

    #[test]
    fn outside_source_is_zero() {
        let px = Raster::filled(10, 10, 200u8);
        let out = align_intensity(&frame(px), &AlignmentTransform::identity(), 20, 10);
        assert_eq!(out.pixels().get(5, 5), 200);
        assert_eq!(out.pixels().get(15, 5), 0);
    }
}
