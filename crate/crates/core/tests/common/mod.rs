//! Oracles shared by the integration tests and the acceptance runner. They
//! recompute geometry from first principles instead of calling the
//! library's camera code.
#![allow(dead_code)]

use mf_core::harness::plane_script;
use mf_core::synth::Simulator;
use mf_core::{PipelineConfig, Raster, ScenarioScript, SensorFrame, SensorRig};
use nalgebra::Point2;

/// Pinhole projection of membrane-plane dot centers into a camera given
/// by its resolution, field of view and lateral offset.
pub fn projected_grid(rig: &SensorRig, width: f64, height: f64, fov_h_deg: f64, fov_v_deg: f64, offset_x_mm: f64) -> Vec<Point2<f64>> {
    let fx = (width / 2.0) / (fov_h_deg.to_radians() / 2.0).tan();
    let fy = (height / 2.0) / (fov_v_deg.to_radians() / 2.0).tan();
    let z = rig.rest_depth_mm;
    let g = &rig.dot_grid;
    let mut out = Vec::new();
    for j in 0..g.rows {
        for i in 0..g.cols {
            let edge_row = j == 0 || j + 1 == g.rows;
            if edge_row && (i < g.corner_trim || i + g.corner_trim >= g.cols) {
                continue;
            }
            let x = g.origin_mm[0] + (i as f64 - (g.cols as f64 - 1.0) / 2.0) * g.spacing_mm;
            let y = g.origin_mm[1] + (j as f64 - (g.rows as f64 - 1.0) / 2.0) * g.spacing_mm;
            out.push(Point2::new(width / 2.0 + fx * (x - offset_x_mm) / z, height / 2.0 + fy * y / z));
        }
    }
    out
}

pub fn intensity_grid(rig: &SensorRig) -> Vec<Point2<f64>> {
    projected_grid(rig, 960.0, 540.0, 70.0, 43.0, 7.5)
}

pub fn depth_grid(rig: &SensorRig) -> Vec<Point2<f64>> {
    projected_grid(rig, 640.0, 480.0, 70.0, 55.0, -7.5)
}

/// Dots of radius `r` at `centers + shift` drawn with exact area coverage
/// (16x16 supersampling), background 15 and dots 220.
pub fn supersampled_dots(w: usize, h: usize, centers: &[Point2<f64>], r: f64, shift: (f64, f64)) -> Raster<u8> {
    let mut cov = vec![0.0f64; w * h];
    const S: usize = 16;
    for c in centers {
        let (cx, cy) = (c.x + shift.0, c.y + shift.1);
        let x0 = (cx - r - 1.0).floor().max(0.0) as usize;
        let y0 = (cy - r - 1.0).floor().max(0.0) as usize;
        let x1 = ((cx + r + 1.0).ceil() as usize).min(w);
        let y1 = ((cy + r + 1.0).ceil() as usize).min(h);
        for y in y0..y1 {
            for x in x0..x1 {
                let mut hits = 0;
                for sy in 0..S {
                    for sx in 0..S {
                        let px = x as f64 + (sx as f64 + 0.5) / S as f64;
                        let py = y as f64 + (sy as f64 + 0.5) / S as f64;
                        if (px - cx).powi(2) + (py - cy).powi(2) <= r * r {
                            hits += 1;
                        }
                    }
                }
                let a = hits as f64 / (S * S) as f64;
                cov[y * w + x] = f64::max(cov[y * w + x], a);
            }
        }
    }
    Raster::from_vec(w, h, cov.iter().map(|a| (15.0 + 205.0 * a).round() as u8).collect()).unwrap()
}

/// Dot radius in intensity pixels at the rest plane.
pub fn intensity_dot_radius_px(rig: &SensorRig) -> f64 {
    let fx = 480.0 / (35.0f64).to_radians().tan();
    fx * rig.dot_grid.radius_mm() / rig.rest_depth_mm
}

/// First frame of a script.
pub fn first_frame(rig: &SensorRig, script: ScenarioScript, config: &PipelineConfig) -> SensorFrame {
    Simulator::new(*rig, script, config.sim()).unwrap().next().unwrap().unwrap().sensor
}

/// A plane frame and the same frame rendered without dot artifacts. Noise
/// streams are keyed by seed and frame, so the two differ only at the dots.
pub fn plane_with_oracle(rig: &SensorRig, distance_mm: f64, seed: u64) -> (SensorFrame, SensorFrame) {
    let config = PipelineConfig::default();
    let mut clean = config.clone();
    clean.artifact.dot_bias_mm = 0.0;
    clean.artifact.dot_bias_jitter_mm = 0.0;
    (
        first_frame(rig, plane_script(distance_mm, 1, seed), &config),
        first_frame(rig, plane_script(distance_mm, 1, seed), &clean),
    )
}

/// Mean absolute error against the oracle over pixels where the observed
/// and oracle frames differ by the dot bias, i.e. the dot footprint.
pub fn dot_pixel_mae(observed: &Raster<f32>, corrected: &Raster<f32>, oracle: &Raster<f32>) -> (f64, f64, usize) {
    let (mut before, mut after, mut n) = (0.0, 0.0, 0usize);
    for ((&o, &c), &t) in observed.as_slice().iter().zip(corrected.as_slice()).zip(oracle.as_slice()) {
        if t > 0.0 && o > 0.0 && o != t {
            before += (o - t).abs() as f64;
            after += (c - t).abs() as f64;
            n += 1;
        }
    }
    (before / n as f64, after / n as f64, n)
}
