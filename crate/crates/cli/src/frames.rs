//! Frame directories: what `run --dump-frames` writes and `process` reads.
//!
//! ```text
//! stream.json              rig, ROI, pipeline config, frame rate and count
//! alignment.txt            intensity-to-depth homography
//! pressure.csv             frame,gauge_psi
//! depth_000000.mfd         lossless depth (see mf_core::io)
//! intensity_000000.pgm     8-bit intensity
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use mf_core::io::{read_depth_raw, read_intensity_pgm, write_depth_raw, write_intensity_pgm};
use mf_core::{AlignmentTransform, PipelineConfig, PixelRect, PressureSample, SensorFrame, SensorRig};
use serde::{Deserialize, Serialize};

pub const STREAM_FILE: &str = "stream.json";
pub const ALIGNMENT_FILE: &str = "alignment.txt";
pub const PRESSURE_FILE: &str = "pressure.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamInfo {
    pub frame_rate_hz: f64,
    pub frame_count: usize,
    pub rig: SensorRig,
    pub roi: PixelRect,
    pub pipeline: PipelineConfig,
}

pub fn depth_name(index: u64) -> String {
    format!("depth_{index:06}.mfd")
}

pub fn intensity_name(index: u64) -> String {
    format!("intensity_{index:06}.pgm")
}

/// Writes frames as they are produced.
pub struct FrameWriter {
    dir: PathBuf,
    pressure: csv::Writer<fs::File>,
    count: usize,
}

impl FrameWriter {
    pub fn create(dir: &Path, alignment: &AlignmentTransform) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        alignment.write(&dir.join(ALIGNMENT_FILE))?;
        let mut pressure = csv::Writer::from_path(dir.join(PRESSURE_FILE))?;
        pressure.write_record(["frame", "gauge_psi"])?;
        Ok(Self {
            dir: dir.to_path_buf(),
            pressure,
            count: 0,
        })
    }

    pub fn push(&mut self, frame: &SensorFrame) -> Result<()> {
        let k = frame.frame_index();
        write_depth_raw(&self.dir.join(depth_name(k)), frame.depth())?;
        write_intensity_pgm(&self.dir.join(intensity_name(k)), frame.intensity())?;
        // `{}` prints the shortest text that parses back to the same f64.
        self.pressure
            .write_record([k.to_string(), format!("{}", frame.pressure().gauge_psi)])?;
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self, rig: &SensorRig, roi: PixelRect, pipeline: &PipelineConfig, frame_rate_hz: f64) -> Result<()> {
        self.pressure.flush()?;
        let info = StreamInfo {
            frame_rate_hz,
            frame_count: self.count,
            rig: *rig,
            roi,
            pipeline: pipeline.clone(),
        };
        fs::write(self.dir.join(STREAM_FILE), serde_json::to_string_pretty(&info)? + "\n")?;
        Ok(())
    }
}

/// A frame directory opened for reading.
pub struct FrameDir {
    pub dir: PathBuf,
    pub info: StreamInfo,
    depth_files: Vec<PathBuf>,
    pressure: Vec<(u64, f64)>,
}

impl FrameDir {
    pub fn open(dir: &Path) -> Result<Self> {
        let listing = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
        let mut depth_files: Vec<PathBuf> = listing
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("depth_") && n.ends_with(".mfd"))
            })
            .collect();
        depth_files.sort();
        if depth_files.is_empty() {
            bail!("no depth frames in {}", dir.display());
        }
        let stream_path = dir.join(STREAM_FILE);
        let text = fs::read_to_string(&stream_path).with_context(|| format!("reading {}", stream_path.display()))?;
        let info: StreamInfo =
            serde_json::from_str(&text).with_context(|| format!("malformed {}", stream_path.display()))?;
        let pressure_path = dir.join(PRESSURE_FILE);
        let mut reader =
            csv::Reader::from_path(&pressure_path).with_context(|| format!("reading {}", pressure_path.display()))?;
        let pressure = reader
            .deserialize::<(u64, f64)>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("malformed {}", pressure_path.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            info,
            depth_files,
            pressure,
        })
    }

    pub fn len(&self) -> usize {
        self.depth_files.len()
    }

    /// Loads the `i`-th frame in index order. Errors name the offending file.
    pub fn frame(&self, i: usize) -> Result<SensorFrame> {
        let rate = self.info.frame_rate_hz;
        let depth_path = &self.depth_files[i];
        let depth = read_depth_raw(depth_path, rate)?;
        let k = depth.frame_index();
        let intensity_path = self.dir.join(intensity_name(k));
        let intensity = read_intensity_pgm(&intensity_path, k, rate)?;
        let psi = self
            .pressure
            .iter()
            .find(|(f, _)| *f == k)
            .map(|p| p.1)
            .ok_or_else(|| anyhow!("{} has no row for frame {k}", self.dir.join(PRESSURE_FILE).display()))?;
        let pressure = PressureSample::new(psi, k, rate)?;
        SensorFrame::new(depth, intensity, pressure).with_context(|| format!("frame {k} in {}", self.dir.display()))
    }
}
