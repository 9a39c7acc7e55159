//! Pyramidal Lucas-Kanade optical flow.

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowParams {
    /// Odd side length of the integration window at every level.
    pub window_px: usize,
    /// Total pyramid levels including full resolution.
    pub pyramid_levels: usize,
    pub max_iterations: usize,
    /// Stop once an update is shorter than this (px).
    pub epsilon: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            window_px: 21,
            pyramid_levels: 2,
            max_iterations: 30,
            epsilon: 0.01,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_px < 5 || self.window_px.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "flow window {} must be odd and at least 5",
                self.window_px
            )));
        }
        if self.pyramid_levels == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidParameter("need at least one level and iteration".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowResult {
    pub flow: Vector2<f64>,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Level {
    img: Raster<f32>,
    gx: Raster<f32>,
    gy: Raster<f32>,
}

/// Image pyramid with precomputed central-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    levels: Vec<Level>,
}

fn gradients(img: &Raster<f32>) -> (Raster<f32>, Raster<f32>) {
    let (w, h) = (img.width(), img.height());
    let gx = Raster::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        (img.get_clamped(x + 1, y) - img.get_clamped(x - 1, y)) * 0.5
    });
    let gy = Raster::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        (img.get_clamped(x, y + 1) - img.get_clamped(x, y - 1)) * 0.5
    });
    (gx, gy)
}

/// 5-tap binomial smoothing followed by 2x decimation.
fn downsample(img: &Raster<f32>) -> Raster<f32> {
    const K: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let smooth = crate::imgproc::blur::convolve_separable(img, &K);
    let w = img.width().div_ceil(2).max(1);
    let h = img.height().div_ceil(2).max(1);
    Raster::from_fn(w, h, |x, y| smooth.get(2 * x, 2 * y))
}

impl Pyramid {
    /// Builds from intensities scaled to [0, 1].
    pub fn build(img: Raster<f32>, levels: usize) -> Self {
        let mut out = Vec::with_capacity(levels);
        let mut cur = img;
        for l in 0..levels.max(1) {
            let next = (l + 1 < levels).then(|| downsample(&cur));
            let (gx, gy) = gradients(&cur);
            out.push(Level { img: cur, gx, gy });
            match next {
                Some(n) => cur = n,
                None => break,
            }
        }
        Self { levels: out }
    }

    pub fn from_u8(img: &Raster<u8>, levels: usize) -> Self {
        Self::build(img.map(|v| v as f32 / 255.0), levels)
    }

    pub fn levels(&self) -> usize {
        self.levels.len()
    }
}

/// Flow of each point (continuous pixel coordinates) from `prev` to `curr`.
pub fn lk_flow(prev: &Raster<u8>, curr: &Raster<u8>, points: &[Point2<f64>], params: &FlowParams) -> Vec<FlowResult> {
    assert!(prev.same_size(curr), "flow frames must share dimensions");
    let a = Pyramid::from_u8(prev, params.pyramid_levels);
    let b = Pyramid::from_u8(curr, params.pyramid_levels);
    lk_flow_pyramids(&a, &b, points, params)
}

pub fn lk_flow_pyramids(prev: &Pyramid, curr: &Pyramid, points: &[Point2<f64>], params: &FlowParams) -> Vec<FlowResult> {
    points.iter().map(|p| track_point(prev, curr, p, params)).collect()
}

fn track_point(prev: &Pyramid, curr: &Pyramid, p: &Point2<f64>, params: &FlowParams) -> FlowResult {
    let invalid = FlowResult {
        flow: Vector2::zeros(),
        valid: false,
    };
    let half = (params.window_px / 2) as isize;
    let n = (params.window_px * params.window_px) as f64;
    let min_eig = 1e-4 * n;
    let levels = prev.levels.len().min(curr.levels.len());
    let mut guess = Vector2::<f64>::zeros();
    for l in (0..levels).rev() {
        let scale = (1u32 << l) as f64;
        let (lp, lc) = (&prev.levels[l], &curr.levels[l]);
        let (w, h) = (lp.img.width() as f64, lp.img.height() as f64);
        // Index coordinates at this level.
        let cx = p.x / scale - 0.5;
        let cy = p.y / scale - 0.5;
        let mut patch = Vec::with_capacity(n as usize);
        let (mut gxx, mut gxy, mut gyy) = (0.0f64, 0.0f64, 0.0f64);
        for dy in -half..=half {
            for dx in -half..=half {
                let x = (cx + dx as f64) as f32;
                let y = (cy + dy as f64) as f32;
                let ix = lp.gx.sample_bilinear(x, y) as f64;
                let iy = lp.gy.sample_bilinear(x, y) as f64;
                let i0 = lp.img.sample_bilinear(x, y) as f64;
                gxx += ix * ix;
                gxy += ix * iy;
                gyy += iy * iy;
                patch.push((dx as f64, dy as f64, ix, iy, i0));
            }
        }
        let tr = gxx + gyy;
        let det = gxx * gyy - gxy * gxy;
        let lambda_min = tr / 2.0 - ((tr * tr / 4.0 - det).max(0.0)).sqrt();
        if lambda_min < min_eig {
            return invalid;
        }
        let mut v = Vector2::<f64>::zeros();
        for _ in 0..params.max_iterations {
            let ox = cx + guess.x + v.x;
            let oy = cy + guess.y + v.y;
            if !(ox >= 0.0 && oy >= 0.0 && ox <= w - 1.0 && oy <= h - 1.0) {
                return invalid;
            }
            let (mut bx, mut by) = (0.0f64, 0.0f64);
            for &(dx, dy, ix, iy, i0) in &patch {
                let j = lc.img.sample_bilinear((ox + dx) as f32, (oy + dy) as f32) as f64;
                let it = i0 - j;
                bx += it * ix;
                by += it * iy;
            }
            let eta = Vector2::new((gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det);
            v += eta;
            if eta.norm() < params.epsilon {
                break;
            }
        }
        let total = guess + v;
        if !total.iter().all(|c| c.is_finite()) {
            return invalid;
        }
        guess = if l > 0 { total * 2.0 } else { total };
    }
    let end = p + guess;
    let (w0, h0) = (prev.levels[0].img.width() as f64, prev.levels[0].img.height() as f64);
    if !(end.x >= 0.0 && end.y >= 0.0 && end.x <= w0 && end.y <= h0) {
        return invalid;
    }
    FlowResult {
        flow: guess,
        valid: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::render::rasterize_disks;

    fn dot_texture(w: usize, h: usize, shift: (f64, f64)) -> Raster<u8> {
        let mut disks = Vec::new();
        for j in 0..(h / 32) {
            for i in 0..(w / 32) {
                disks.push((Point2::new(16.0 + 32.0 * i as f64 + shift.0, 16.0 + 32.0 * j as f64 + shift.1), 4.0));
            }
        }
        rasterize_disks(w, h, &disks).map(|a| (15.0 + 205.0 * a).round() as u8)
    }

    #[test]
    fn identical_frames_have_zero_flow() {
        let img = dot_texture(256, 192, (0.0, 0.0));
        let pts = [Point2::new(80.0, 80.0), Point2::new(144.0, 112.0)];
        for r in lk_flow(&img, &img, &pts, &FlowParams::default()) {
            assert!(r.valid);
            assert!(r.flow.norm() < 1e-6);
        }
    }

    #[test]
    fn recovers_translation() {
        let a = dot_texture(256, 192, (0.0, 0.0));
        let b = dot_texture(256, 192, (3.0, 0.0));
        let pts = [Point2::new(80.0, 80.0), Point2::new(144.0, 112.0), Point2::new(176.0, 48.0)];
        for r in lk_flow(&a, &b, &pts, &FlowParams::default()) {
            assert!(r.valid);
            assert!((r.flow - Vector2::new(3.0, 0.0)).norm() < 0.1, "{:?}", r.flow);
        }
    }

    #[test]
    fn uniform_patch_is_invalid() {
        let img = Raster::filled(100, 100, 90u8);
        let r = lk_flow(&img, &img, &[Point2::new(50.0, 50.0)], &FlowParams::default());
        assert!(!r[0].valid);
    }

    #[test]
    fn rejects_even_window() {
        let p = FlowParams {
            window_px: 20,
            ..FlowParams::default()
        };
        assert!(p.validate().is_err());
    }
}
