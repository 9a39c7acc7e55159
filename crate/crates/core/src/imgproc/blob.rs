//! Bright-blob detection: threshold, 8-connected components, weighted centroids.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    /// Intensity-weighted centroid in continuous pixel coordinates.
    pub center: Point2<f64>,
    pub area_px: f64,
    pub circularity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlobParams {
    /// Pixels at or above this value are foreground.
    pub threshold: u8,
    pub min_area_px: f64,
    pub max_area_px: f64,
    pub min_circularity: f64,
}

impl Default for BlobParams {
    fn default() -> Self {
        Self {
            threshold: 128,
            min_area_px: 20.0,
            max_area_px: 400.0,
            min_circularity: 0.6,
        }
    }
}

impl BlobParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_area_px < self.max_area_px) || self.min_area_px < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "blob area range [{}, {}] is empty",
                self.min_area_px, self.max_area_px
            )));
        }
        if !(0.0..=1.0).contains(&self.min_circularity) {
            return Err(Error::InvalidParameter("circularity bound outside [0, 1]".into()));
        }
        Ok(())
    }
}

// Clockwise with y down: E, SE, S, SW, W, NW, N, NE.
const DIRS: [(i32, i32); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

fn dir_index(dx: i32, dy: i32) -> usize {
    DIRS.iter().position(|&d| d == (dx, dy)).expect("unit step")
}

/// Moore-neighbour trace of the outer boundary starting from the component's
/// first pixel in raster order. Returns the boundary pixels in order.
fn trace_contour(labels: &[u32], w: usize, h: usize, label: u32, start: (i32, i32)) -> Vec<(i32, i32)> {
    let inside = |x: i32, y: i32| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && labels[y as usize * w + x as usize] == label
    };
    let mut contour = vec![start];
    let mut cur = start;
    // The raster-order first pixel has background to its west.
    let mut back = 4usize;
    let mut first_move: Option<usize> = None;
    let limit = 4 * w * h + 8;
    for _ in 0..limit {
        let mut step = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let (nx, ny) = (cur.0 + DIRS[d].0, cur.1 + DIRS[d].1);
            if inside(nx, ny) {
                step = Some(d);
                break;
            }
        }
        let Some(d) = step else {
            break; // isolated pixel
        };
        if cur == start {
            match first_move {
                None => first_move = Some(d),
                Some(f) if f == d => break,
                _ => {}
            }
        }
        let next = (cur.0 + DIRS[d].0, cur.1 + DIRS[d].1);
        // The last background pixel examined, seen from `next`.
        let pd = (d + 7) % 8;
        let bx = cur.0 + DIRS[pd].0 - next.0;
        let by = cur.1 + DIRS[pd].1 - next.1;
        back = dir_index(bx, by);
        cur = next;
        contour.push(cur);
    }
    // The walk ends back on the start pixel; drop the duplicate.
    if contour.len() > 1 && contour.last() == Some(&start) {
        contour.pop();
    }
    contour
}

fn polygon_metrics(contour: &[(i32, i32)]) -> (f64, f64) {
    let n = contour.len();
    if n < 3 {
        return (0.0, 0.0);
    }
    let mut twice_area = 0.0;
    let mut perimeter = 0.0;
    for i in 0..n {
        let (x0, y0) = contour[i];
        let (x1, y1) = contour[(i + 1) % n];
        twice_area += (x0 * y1 - x1 * y0) as f64;
        perimeter += (((x1 - x0).pow(2) + (y1 - y0).pow(2)) as f64).sqrt();
    }
    (twice_area.abs() / 2.0, perimeter)
}

/// Finds bright blobs, ordered by centroid `(y, x)`.
///
/// Circularity is `4 pi A / P^2` of the polygon through the centers of the
/// traced boundary pixels, clamped to `[0, 1]`.
pub fn detect_blobs(img: &Raster<u8>, params: &BlobParams) -> Vec<Blob> {
    let (w, h) = (img.width(), img.height());
    let data = img.as_slice();
    let mut labels = vec![0u32; w * h];
    let mut next_label = 0u32;
    let mut stack = Vec::new();
    let mut members = Vec::new();
    let mut blobs = Vec::new();
    for start in 0..w * h {
        if data[start] < params.threshold || labels[start] != 0 {
            continue;
        }
        next_label += 1;
        labels[start] = next_label;
        stack.push(start);
        members.clear();
        while let Some(i) = stack.pop() {
            members.push(i);
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in DIRS {
                let (nx, ny) = (x + dx as i64, y + dy as i64);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if data[j] >= params.threshold && labels[j] == 0 {
                    labels[j] = next_label;
                    stack.push(j);
                }
            }
        }
        let area = members.len() as f64;
        if area < params.min_area_px || area > params.max_area_px {
            continue;
        }
        let contour = trace_contour(&labels, w, h, next_label, ((start % w) as i32, (start / w) as i32));
        let (poly_area, perimeter) = polygon_metrics(&contour);
        let circularity = if perimeter > 0.0 {
            (4.0 * std::f64::consts::PI * poly_area / (perimeter * perimeter)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        if circularity < params.min_circularity {
            continue;
        }
        let (mut sw, mut sx, mut sy) = (0.0f64, 0.0f64, 0.0f64);
        for &i in &members {
            let v = data[i] as f64;
            sw += v;
            sx += v * ((i % w) as f64 + 0.5);
            sy += v * ((i / w) as f64 + 0.5);
        }
        blobs.push(Blob {
            center: Point2::new(sx / sw, sy / sw),
            area_px: area,
            circularity,
        });
    }
    blobs.sort_by(|a, b| {
        a.center
            .y
            .total_cmp(&b.center.y)
            .then(a.center.x.total_cmp(&b.center.x))
    });
    blobs
}
