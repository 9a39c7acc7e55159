//! The synchronized multimodal frame model.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Default synchronous sampling rate of all three channels.
pub const DEFAULT_FRAME_RATE_HZ: f64 = 30.0;

/// Timestamps are derived from the frame index, never free-running.
pub fn timestamp_for(frame_index: u64, frame_rate_hz: f64) -> f64 {
    frame_index as f64 / frame_rate_hz
}

/// Per-pixel perpendicular distance from the depth-camera plane in mm; 0 marks
/// a pixel with no return.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pixels: Raster<f32>,
    frame_index: u64,
    timestamp_s: f64,
}

impl DepthFrame {
    pub fn new(pixels: Raster<f32>, frame_index: u64, frame_rate_hz: f64) -> Result<Self> {
        if let Some(bad) = pixels.as_slice().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidFrame(format!(
                "depth values must be finite and non-negative, found {bad}"
            )));
        }
        check_rate(frame_rate_hz)?;
        Ok(Self {
            pixels,
            frame_index,
            timestamp_s: timestamp_for(frame_index, frame_rate_hz),
        })
    }

    /// Same index and timestamp, new pixel values.
    pub fn with_pixels(&self, pixels: Raster<f32>) -> Result<Self> {
        if !pixels.same_size(&self.pixels) {
            return Err(Error::InvalidFrame("replacement pixels change frame size".into()));
        }
        if let Some(bad) = pixels.as_slice().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidFrame(format!("invalid depth value {bad}")));
        }
        Ok(Self {
            pixels,
            frame_index: self.frame_index,
            timestamp_s: self.timestamp_s,
        })
    }

    /// Same pixels stamped with another frame index.
    pub fn with_index(&self, frame_index: u64, frame_rate_hz: f64) -> Self {
        Self {
            pixels: self.pixels.clone(),
            frame_index,
            timestamp_s: timestamp_for(frame_index, frame_rate_hz),
        }
    }

    pub fn pixels(&self) -> &Raster<f32> {
        &self.pixels
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn timestamp_s(&self) -> f64 {
        self.timestamp_s
    }

    pub fn valid_count(&self) -> usize {
        self.pixels.as_slice().iter().filter(|&&v| v > 0.0).count()
    }
}

/// 8-bit single-channel luminance: bright dots on a dark membrane.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityFrame {
    pixels: Raster<u8>,
    frame_index: u64,
    timestamp_s: f64,
}

impl IntensityFrame {
    pub fn new(pixels: Raster<u8>, frame_index: u64, frame_rate_hz: f64) -> Result<Self> {
        check_rate(frame_rate_hz)?;
        Ok(Self {
            pixels,
            frame_index,
            timestamp_s: timestamp_for(frame_index, frame_rate_hz),
        })
    }

    pub fn with_pixels(&self, pixels: Raster<u8>) -> Self {
        Self {
            pixels,
            frame_index: self.frame_index,
            timestamp_s: self.timestamp_s,
        }
    }

    pub fn pixels(&self) -> &Raster<u8> {
        &self.pixels
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn timestamp_s(&self) -> f64 {
        self.timestamp_s
    }

    /// Luminance scaled to [0, 1].
    pub fn to_unit_f32(&self) -> Raster<f32> {
        self.pixels.map(|v| v as f32 / 255.0)
    }
}

/// Internal air pressure above ambient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureSample {
    pub gauge_psi: f64,
    pub frame_index: u64,
    pub timestamp_s: f64,
}

impl PressureSample {
    pub fn new(gauge_psi: f64, frame_index: u64, frame_rate_hz: f64) -> Result<Self> {
        if !gauge_psi.is_finite() {
            return Err(Error::InvalidFrame("pressure must be finite".into()));
        }
        check_rate(frame_rate_hz)?;
        Ok(Self {
            gauge_psi,
            frame_index,
            timestamp_s: timestamp_for(frame_index, frame_rate_hz),
        })
    }
}

/// Depth, intensity and pressure captured on the same tick.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    depth: DepthFrame,
    intensity: IntensityFrame,
    pressure: PressureSample,
}

impl SensorFrame {
    pub fn new(depth: DepthFrame, intensity: IntensityFrame, pressure: PressureSample) -> Result<Self> {
        let idx = depth.frame_index();
        if intensity.frame_index() != idx || pressure.frame_index != idx {
            return Err(Error::Unsynchronized(format!(
                "frame indices depth={idx} intensity={} pressure={}",
                intensity.frame_index(),
                pressure.frame_index
            )));
        }
        let t = depth.timestamp_s();
        if intensity.timestamp_s() != t || pressure.timestamp_s != t {
            return Err(Error::Unsynchronized(format!(
                "timestamps depth={t} intensity={} pressure={}",
                intensity.timestamp_s(),
                pressure.timestamp_s
            )));
        }
        Ok(Self {
            depth,
            intensity,
            pressure,
        })
    }

    pub fn depth(&self) -> &DepthFrame {
        &self.depth
    }

    pub fn intensity(&self) -> &IntensityFrame {
        &self.intensity
    }

    pub fn pressure(&self) -> &PressureSample {
        &self.pressure
    }

    pub fn frame_index(&self) -> u64 {
        self.depth.frame_index()
    }

    pub fn timestamp_s(&self) -> f64 {
        self.depth.timestamp_s()
    }
}

fn check_rate(frame_rate_hz: f64) -> Result<()> {
    if frame_rate_hz.is_finite() && frame_rate_hz > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "frame rate must be positive, got {frame_rate_hz}"
        )))
    }
}

/// Regular dot pattern on the inner membrane surface.
///
/// The pattern is a `rows x cols` lattice centered on `origin_mm`, with
/// `corner_trim` dots removed from both ends of the first and last rows to
/// follow the rounded membrane corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotGridSpec {
    pub rows: usize,
    pub cols: usize,
    pub spacing_mm: f64,
    pub diameter_mm: f64,
    pub origin_mm: [f64; 2],
    #[serde(default)]
    pub corner_trim: usize,
}

/// A single dot in membrane coordinates (mm, origin at the membrane center).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dot {
    pub id: usize,
    pub row: usize,
    pub col: usize,
    pub position_mm: Point2<f64>,
}

impl Default for DotGridSpec {
    /// 1 mm dots on a 4 mm pitch, 328 in total.
    fn default() -> Self {
        Self {
            rows: 14,
            cols: 24,
            spacing_mm: 4.0,
            diameter_mm: 1.0,
            origin_mm: [0.0, 0.0],
            corner_trim: 2,
        }
    }
}

impl DotGridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidParameter("dot grid needs rows and cols".into()));
        }
        if !(self.diameter_mm > 0.0 && self.spacing_mm > self.diameter_mm) {
            return Err(Error::InvalidParameter(format!(
                "need spacing ({}) > diameter ({}) > 0",
                self.spacing_mm, self.diameter_mm
            )));
        }
        if self.corner_trim > 0 && (self.rows < 2 || 2 * self.corner_trim >= self.cols) {
            return Err(Error::InvalidParameter(format!(
                "corner trim {} too large for a {}x{} grid",
                self.corner_trim, self.rows, self.cols
            )));
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.rows * self.cols - 4 * self.corner_trim
    }

    pub fn radius_mm(&self) -> f64 {
        self.diameter_mm / 2.0
    }

    fn trimmed(&self, row: usize, col: usize) -> bool {
        (row == 0 || row + 1 == self.rows)
            && (col < self.corner_trim || col + self.corner_trim >= self.cols)
    }

    /// All dots in row-major order; ids are consecutive from zero.
    pub fn dots(&self) -> Vec<Dot> {
        let x0 = self.origin_mm[0] - (self.cols as f64 - 1.0) * self.spacing_mm / 2.0;
        let y0 = self.origin_mm[1] - (self.rows as f64 - 1.0) * self.spacing_mm / 2.0;
        let mut out = Vec::with_capacity(self.count());
        for row in 0..self.rows {
            for col in 0..self.cols {
                if self.trimmed(row, col) {
                    continue;
                }
                out.push(Dot {
                    id: out.len(),
                    row,
                    col,
                    position_mm: Point2::new(
                        x0 + col as f64 * self.spacing_mm,
                        y0 + row as f64 * self.spacing_mm,
                    ),
                });
            }
        }
        out
    }
}
