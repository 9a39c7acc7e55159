//! Removal of the near-range bias the dot grid leaves in the depth image.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{DepthFrame, IntensityFrame};
use crate::imgproc::blur::gaussian_kernel;
use crate::imgproc::{detect_blobs, BlobParams};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DotCorrectionParams {
    /// Offset of the eight ring samples from the dot center.
    pub ring_radius_px: usize,
    pub patch_halfwidth_px: usize,
    pub blur_sigma_px: f64,
    /// Neighbours further than this in depth are left out of the blur.
    pub blur_gate_mm: f64,
    /// A ring spanning more than this straddles an object edge and is patched
    /// one side at a time.
    pub edge_gate_mm: f64,
    /// Side of the median window the depth residual is taken against.
    pub median_window_px: usize,
    /// Residual mapped to full scale (255) before blob detection.
    pub residual_full_scale_mm: f64,
    pub detect_in_depth: BlobParams,
    pub detect_in_rgb: BlobParams,
}

impl Default for DotCorrectionParams {
    fn default() -> Self {
        Self {
            ring_radius_px: 5,
            patch_halfwidth_px: 3,
            blur_sigma_px: 1.5,
            blur_gate_mm: 8.0,
            edge_gate_mm: 8.0,
            median_window_px: 9,
            residual_full_scale_mm: 4.0,
            detect_in_depth: BlobParams {
                threshold: 64,
                min_area_px: 8.0,
                max_area_px: 60.0,
                min_circularity: 0.5,
            },
            detect_in_rgb: BlobParams {
                threshold: 128,
                min_area_px: 8.0,
                max_area_px: 120.0,
                min_circularity: 0.5,
            },
        }
    }
}

impl DotCorrectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ring_radius_px > self.patch_halfwidth_px && self.patch_halfwidth_px >= 1) {
            return Err(Error::InvalidParameter(format!(
                "need ring_radius ({}) > patch_halfwidth ({}) >= 1",
                self.ring_radius_px, self.patch_halfwidth_px
            )));
        }
        if !(self.blur_sigma_px >= 0.0) || !(self.blur_gate_mm > 0.0) || !(self.edge_gate_mm > 0.0) {
            return Err(Error::InvalidParameter("blur sigma and gates must be positive".into()));
        }
        if self.median_window_px < 3 || self.median_window_px.is_multiple_of(2) {
            return Err(Error::InvalidParameter("median window must be odd and at least 3".into()));
        }
        if !(self.residual_full_scale_mm > 0.0) {
            return Err(Error::InvalidParameter("residual scale must be positive".into()));
        }
        self.detect_in_depth.validate()?;
        self.detect_in_rgb.validate()
    }
}

/// What the local stage did, for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionDiagnostics {
    /// Union of depth and intensity detections.
    pub dots: Vec<Point2<f64>>,
    pub depth_detections: usize,
    pub rgb_detections: usize,
    /// Pixels overwritten by a ring mean.
    pub written: Raster<bool>,
}

/// Median over the valid (non-zero) samples of a window.
fn median_valid(buf: &mut [f32]) -> f32 {
    if buf.is_empty() {
        return 0.0;
    }
    let mid = buf.len() / 2;
    let (_, m, _) = buf.select_nth_unstable_by(mid, f32::total_cmp);
    *m
}

const NETWORK9: [(usize, usize); 19] = [
    (1, 2), (4, 5), (7, 8), (0, 1), (3, 4), (6, 7), (1, 2), (4, 5), (7, 8), (0, 3),
    (5, 8), (4, 7), (3, 6), (1, 4), (2, 5), (4, 7), (2, 4), (4, 6), (2, 4),
];

/// Exact median of nine values by a 19-exchange network.
#[cfg(test)]
fn median9(mut p: [f32; 9]) -> f32 {
    for (a, b) in NETWORK9 {
        let (x, y) = (p[a], p[b]);
        p[a] = x.min(y);
        p[b] = x.max(y);
    }
    p[4]
}

/// Element-wise nine-tap median over equal-length lanes. Entries whose taps
/// include an invalid sample are left at 0 for the caller to redo.
fn median9_lanes(taps: [&[f32]; 9], scratch: &mut Vec<f32>, out: &mut [f32]) {
    let n = out.len();
    scratch.clear();
    for t in taps {
        scratch.extend_from_slice(&t[..n]);
    }
    for (a, b) in NETWORK9 {
        let (lo, hi) = scratch.split_at_mut(b * n);
        let la = &mut lo[a * n..(a + 1) * n];
        let lb = &mut hi[..n];
        for (x, y) in la.iter_mut().zip(lb.iter_mut()) {
            let (u, v) = (*x, *y);
            *x = u.min(v);
            *y = u.max(v);
        }
    }
    let min_lane = taps.iter().fold(vec![f32::INFINITY; n], |mut m, t| {
        for (mm, &v) in m.iter_mut().zip(&t[..n]) {
            *mm = mm.min(v);
        }
        m
    });
    for ((o, &m), &v) in out.iter_mut().zip(&min_lane).zip(&scratch[4 * n..5 * n]) {
        *o = if m > 0.0 { v } else { 0.0 };
    }
}

/// Median of the valid samples among `taps`, for borders and holes.
fn sparse_median(buf: &mut Vec<f32>, taps: impl Iterator<Item = f32>) -> f32 {
    buf.clear();
    buf.extend(taps.filter(|&v| v > 0.0));
    median_valid(buf)
}

/// Row pass then column pass of a windowed median that ignores invalid pixels.
pub fn separable_median(src: &Raster<f32>, window: usize) -> Raster<f32> {
    let (w, h) = (src.width(), src.height());
    let r = window / 2;
    let mut buf = Vec::with_capacity(window);
    let mut scratch = Vec::new();
    let fast = window == 9;

    let mut rows = Raster::filled(w, h, 0.0f32);
    for y in 0..h {
        let row = src.row(y);
        let out = &mut rows.as_mut_slice()[y * w..(y + 1) * w];
        if fast && w > 2 * r {
            let taps: [&[f32]; 9] = std::array::from_fn(|k| &row[k..]);
            median9_lanes(taps, &mut scratch, &mut out[r..w - r]);
        }
        for x in 0..w {
            if fast && x >= r && x < w - r && out[x] > 0.0 {
                continue;
            }
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            out[x] = sparse_median(&mut buf, row[lo..=hi].iter().copied());
        }
    }

    let mut out = Raster::filled(w, h, 0.0f32);
    let data = rows.as_slice();
    for y in 0..h {
        let dst = &mut out.as_mut_slice()[y * w..(y + 1) * w];
        if fast && y >= r && y < h - r {
            let taps: [&[f32]; 9] = std::array::from_fn(|k| &data[(y - r + k) * w..(y - r + k + 1) * w]);
            median9_lanes(taps, &mut scratch, dst);
        }
        for x in 0..w {
            if fast && y >= r && y < h - r && dst[x] > 0.0 {
                continue;
            }
            let lo = y.saturating_sub(r);
            let hi = (y + r).min(h - 1);
            dst[x] = sparse_median(&mut buf, (lo..=hi).map(|yy| data[yy * w + x]));
        }
    }
    out
}

/// How much nearer each pixel is than its neighbourhood median, as 8-bit.
pub fn depth_residual(depth: &Raster<f32>, params: &DotCorrectionParams) -> Raster<u8> {
    let med = separable_median(depth, params.median_window_px);
    let scale = 255.0 / params.residual_full_scale_mm as f32;
    let mut out = Raster::filled(depth.width(), depth.height(), 0u8);
    for ((o, &d), &m) in out.as_mut_slice().iter_mut().zip(depth.as_slice()).zip(med.as_slice()) {
        if d > 0.0 && m > 0.0 {
            *o = ((m - d) * scale).round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

/// Depth and intensity detections merged; pairs closer than `radius` collapse to their midpoint.
pub fn union_dots(depth_dots: &[Point2<f64>], rgb_dots: &[Point2<f64>], radius: f64) -> Vec<Point2<f64>> {
    let mut out: Vec<Point2<f64>> = depth_dots.to_vec();
    let mut merged = vec![false; out.len()];
    for p in rgb_dots {
        let nearest = out
            .iter()
            .enumerate()
            .filter(|(i, _)| *i < merged.len() && !merged[*i])
            .map(|(i, q)| (i, (q - p).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match nearest {
            Some((i, d)) if d < radius => {
                out[i] = nalgebra::center(&out[i], p);
                merged[i] = true;
            }
            _ => out.push(*p),
        }
    }
    out
}

// N, NE, E, SE, S, SW, W, NW with y pointing down.
const RING: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

/// Detection, union and ring-mean patch writes, without the global blur.
pub fn patch_dots(
    depth: &Raster<f32>,
    aligned_rgb: &Raster<u8>,
    params: &DotCorrectionParams,
) -> (Raster<f32>, CorrectionDiagnostics) {
    let (w, h) = (depth.width() as isize, depth.height() as isize);
    let residual = depth_residual(depth, params);
    let depth_dots: Vec<_> = detect_blobs(&residual, &params.detect_in_depth)
        .into_iter()
        .map(|b| b.center)
        .collect();
    let rgb_dots: Vec<_> = detect_blobs(aligned_rgb, &params.detect_in_rgb)
        .into_iter()
        .map(|b| b.center)
        .collect();
    let dots = union_dots(&depth_dots, &rgb_dots, params.ring_radius_px as f64);

    let mut out = depth.clone();
    let mut written = Raster::filled(depth.width(), depth.height(), false);
    let ring = params.ring_radius_px as isize;
    let half = params.patch_halfwidth_px as isize;
    for c in &dots {
        let (cx, cy) = (c.x.floor() as isize, c.y.floor() as isize);
        let mut samples = [0.0f32; 8];
        let mut n = 0;
        for (dx, dy) in RING {
            let (x, y) = (cx + dx * ring, cy + dy * ring);
            if x < 0 || y < 0 || x >= w || y >= h {
                continue;
            }
            // Samples come from the input so that patch order does not matter.
            let v = depth.get(x as usize, y as usize);
            if v > 0.0 {
                samples[n] = v;
                n += 1;
            }
        }
        let samples = &samples[..n];
        let (lo, hi) = samples
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if n == 0 {
            continue;
        }
        // A ring straddling a depth edge is split at its midrange and every
        // pixel takes the mean of the side it is closest to.
        let gate = params.edge_gate_mm as f32;
        let straddles = hi - lo > gate;
        let mid = 0.5 * (lo + hi);
        let side_mean = |upper: bool| {
            let (s, k) = samples
                .iter()
                .filter(|&&v| !straddles || (v > mid) == upper)
                .fold((0.0f64, 0usize), |(s, k), &v| (s + v as f64, k + 1));
            (s / k as f64) as f32
        };
        let (low_mean, high_mean) = (side_mean(false), side_mean(true));
        for y in (cy - half).max(0)..=(cy + half).min(h - 1) {
            for x in (cx - half).max(0)..=(cx + half).min(w - 1) {
                let (x, y) = (x as usize, y as usize);
                let v = depth.get(x, y);
                if v <= 0.0 {
                    continue;
                }
                let mean = if !straddles || (v - low_mean).abs() <= (v - high_mean).abs() {
                    low_mean
                } else {
                    high_mean
                };
                if !straddles || (v - mean).abs() <= gate {
                    out.set(x, y, mean);
                    written.set(x, y, true);
                }
            }
        }
    }
    (
        out,
        CorrectionDiagnostics {
            dots,
            depth_detections: depth_dots.len(),
            rgb_detections: rgb_dots.len(),
            written,
        },
    )
}

/// Separable Gaussian over valid pixels only, ignoring neighbours more than
/// `gate` away in depth. Invalid pixels stay zero.
pub fn gated_blur(src: &Raster<f32>, sigma: f64, gate: f64) -> Raster<f32> {
    if sigma <= 0.0 {
        return src.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let r = kernel.len() / 2;
    let gate = gate as f32;
    let (w, h) = (src.width(), src.height());
    let tap = |c: f32, v: f32| if v > 0.0 && (v - c).abs() <= gate { 1.0f32 } else { 0.0 };

    // Rows are zero-padded so every tap is in range; padding never passes the gate.
    let mut rows = Raster::filled(w, h, 0.0f32);
    let mut padded = vec![0.0f32; w + 2 * r];
    let mut acc = vec![0.0f32; w];
    let mut ws = vec![0.0f32; w];
    for y in 0..h {
        let row = src.row(y);
        padded[r..r + w].copy_from_slice(row);
        acc.fill(0.0);
        ws.fill(0.0);
        for (k, &wk) in kernel.iter().enumerate() {
            let line = &padded[k..k + w];
            for x in 0..w {
                let m = wk * tap(row[x], line[x]);
                acc[x] += m * line[x];
                ws[x] += m;
            }
        }
        let out = &mut rows.as_mut_slice()[y * w..(y + 1) * w];
        for x in 0..w {
            if row[x] > 0.0 {
                out[x] = acc[x] / ws[x];
            }
        }
    }

    let mut out = Raster::filled(w, h, 0.0f32);
    let data = rows.as_slice();
    for y in 0..h {
        acc.fill(0.0);
        ws.fill(0.0);
        let center = &data[y * w..(y + 1) * w];
        for (k, &wk) in kernel.iter().enumerate() {
            let Some(yy) = (y + k).checked_sub(r).filter(|&yy| yy < h) else {
                continue;
            };
            let line = &data[yy * w..(yy + 1) * w];
            for x in 0..w {
                let m = wk * tap(center[x], line[x]);
                acc[x] += m * line[x];
                ws[x] += m;
            }
        }
        let dst = &mut out.as_mut_slice()[y * w..(y + 1) * w];
        for x in 0..w {
            if center[x] > 0.0 {
                dst[x] = acc[x] / ws[x];
            }
        }
    }
    out
}

pub fn correct_dots_detailed(
    depth: &DepthFrame,
    aligned_rgb: &IntensityFrame,
    params: &DotCorrectionParams,
) -> (DepthFrame, CorrectionDiagnostics) {
    let (patched, diag) = patch_dots(depth.pixels(), aligned_rgb.pixels(), params);
    let blurred = gated_blur(&patched, params.blur_sigma_px, params.blur_gate_mm);
    let frame = depth.with_pixels(blurred).expect("correction keeps depth valid");
    (frame, diag)
}

/// Local ring-mean patches at every dot seen in either image, then a global blur.
pub fn correct_dots(depth: &DepthFrame, aligned_rgb: &IntensityFrame, params: &DotCorrectionParams) -> DepthFrame {
    correct_dots_detailed(depth, aligned_rgb, params).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(px: Raster<f32>) -> DepthFrame {
        DepthFrame::new(px, 0, 30.0).unwrap()
    }

    fn dark(w: usize, h: usize) -> IntensityFrame {
        IntensityFrame::new(Raster::filled(w, h, 0), 0, 30.0).unwrap()
    }

    /// A plane with square "nearer" dots on a 20 px pitch.
    fn dotted_plane(base: f32, bias: f32) -> (Raster<f32>, Vec<Point2<f64>>) {
        let mut px = Raster::filled(120, 100, base);
        let mut centers = Vec::new();
        for cy in (20..100).step_by(20) {
            for cx in (20..120).step_by(20) {
                centers.push(Point2::new(cx as f64 + 0.5, cy as f64 + 0.5));
                for y in cy - 2..=cy + 2 {
                    for x in cx - 2..=cx + 2 {
                        if (x as i32 - cx as i32).abs() + (y as i32 - cy as i32).abs() <= 3 {
                            px.set(x, y, base - bias);
                        }
                    }
                }
            }
        }
        (px, centers)
    }

    #[test]
    fn defaults_are_valid() {
        DotCorrectionParams::default().validate().unwrap();
        let bad = DotCorrectionParams {
            ring_radius_px: 3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_frame_is_unchanged() {
        let px = Raster::filled(64, 48, 137.25f32);
        let mut rgb = Raster::filled(64, 48, 0u8);
        for y in 20..26 {
            for x in 30..36 {
                rgb.set(x, y, 250);
            }
        }
        let rgb = IntensityFrame::new(rgb, 0, 30.0).unwrap();
        let out = correct_dots(&frame(px), &rgb, &DotCorrectionParams::default());
        assert!(out.pixels().as_slice().iter().all(|&v| (v - 137.25).abs() < 1e-4));
    }

    #[test]
    fn depth_dots_are_found_and_removed() {
        let (px, centers) = dotted_plane(150.0, 3.0);
        let params = DotCorrectionParams::default();
        let (patched, diag) = patch_dots(&px, dark(120, 100).pixels(), &params);
        assert_eq!(diag.depth_detections, centers.len());
        assert_eq!(diag.rgb_detections, 0);
        assert!(patched.as_slice().iter().all(|&v| v == 150.0));
    }

    #[test]
    fn union_merges_close_pairs() {
        let a = [Point2::new(10.0, 10.0), Point2::new(50.0, 10.0)];
        let b = [Point2::new(12.0, 10.0), Point2::new(90.0, 10.0)];
        let u = union_dots(&a, &b, 5.0);
        assert_eq!(u, vec![Point2::new(11.0, 10.0), Point2::new(50.0, 10.0), Point2::new(90.0, 10.0)]);
    }

    #[test]
    fn every_union_dot_gets_a_patch() {
        let (px, _) = dotted_plane(150.0, 3.0);
        let mut rgb = Raster::filled(120, 100, 0u8);
        // One dot only visible in the intensity image.
        for y in 8..13 {
            for x in 8..13 {
                rgb.set(x, y, 255);
            }
        }
        let (_, diag) = patch_dots(&px, &rgb, &DotCorrectionParams::default());
        assert_eq!(diag.rgb_detections, 1);
        assert_eq!(diag.dots.len(), diag.depth_detections + 1);
        for d in &diag.dots {
            assert!(diag.written.get(d.x as usize, d.y as usize), "{d:?}");
        }
    }

    #[test]
    fn invalid_pixels_stay_invalid() {
        let (mut px, _) = dotted_plane(150.0, 3.0);
        for y in 0..100 {
            for x in 0..10 {
                px.set(x, y, 0.0);
            }
        }
        px.set(40, 40, 0.0);
        let out = correct_dots(&frame(px.clone()), &dark(120, 100), &DotCorrectionParams::default());
        for (a, b) in px.as_slice().iter().zip(out.pixels().as_slice()) {
            assert_eq!(*a > 0.0, *b > 0.0);
        }
    }

    #[test]
    fn edge_dot_is_patched_from_its_own_side() {
        let mut px = Raster::from_fn(60, 40, |x, _| if x < 30 { 100.0f32 } else { 160.0 });
        let mut rgb = Raster::filled(60, 40, 0u8);
        for y in 18..23 {
            for x in 29..34 {
                rgb.set(x, y, 255);
            }
        }
        px.set(31, 20, 157.0);
        let (patched, diag) = patch_dots(&px, &rgb, &DotCorrectionParams::default());
        assert_eq!(diag.dots.len(), 1);
        assert_eq!(patched.get(31, 20), 160.0);
        for y in 0..40 {
            for x in 0..30 {
                assert_eq!(patched.get(x, y), 100.0);
            }
        }
    }

    #[test]
    fn edge_dot_split_between_sides() {
        let mut px = Raster::from_fn(60, 40, |x, _| if x < 30 { 100.0f32 } else { 160.0 });
        let mut rgb = Raster::filled(60, 40, 0u8);
        for y in 18..23 {
            for x in 28..33 {
                rgb.set(x, y, 255);
            }
        }
        px.set(29, 20, 97.0);
        px.set(30, 20, 0.0);
        px.set(31, 20, 157.0);
        let (patched, _) = patch_dots(&px, &rgb, &DotCorrectionParams::default());
        assert_eq!(patched.get(29, 20), 100.0);
        assert_eq!(patched.get(30, 20), 0.0);
        assert_eq!(patched.get(31, 20), 160.0);
    }

    #[test]
    fn gated_blur_keeps_steps_sharp() {
        let px = Raster::from_fn(40, 10, |x, _| if x < 20 { 50.0f32 } else { 120.0 });
        let out = gated_blur(&px, 1.5, 8.0);
        for (a, b) in out.as_slice().iter().zip(px.as_slice()) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    proptest! {
        #[test]
        fn network_median_matches_selection(v in proptest::array::uniform9(0.1f32..300.0)) {
            let mut buf = v.to_vec();
            prop_assert_eq!(median9(v), median_valid(&mut buf));
        }

        #[test]
        fn median_of_constant_is_constant(v in 1.0f32..500.0, w in 5usize..30, h in 5usize..30) {
            let m = separable_median(&Raster::filled(w, h, v), 9);
            prop_assert!(m.as_slice().iter().all(|&x| x == v));
        }

        #[test]
        fn blur_of_plane_ramp_stays_in_range(a in 50.0f32..150.0, slope in -0.05f32..0.05) {
            let px = Raster::from_fn(50, 30, |x, y| a + slope * (x + y) as f32);
            let out = gated_blur(&px, 1.5, 8.0);
            let (lo, hi) = px.as_slice().iter().fold((f32::MAX, f32::MIN), |(l, h), &v| (l.min(v), h.max(v)));
            prop_assert!(out.as_slice().iter().all(|&v| v >= lo - 1e-3 && v <= hi + 1e-3));
        }
    }
}
