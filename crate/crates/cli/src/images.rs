use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::ValueEnum;
use mf_core::io::write_depth_pgm;
use mf_core::DepthFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }
}

/// Depth in whole millimetres as a 16-bit grayscale image; `stem` gets the extension.
pub fn write_depth_image(dir: &Path, stem: &str, depth: &DepthFrame, format: ImageFormat) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        ImageFormat::Pgm => write_depth_pgm(&path, depth)?,
        ImageFormat::Png => {
            let px = depth.pixels();
            let mm: Vec<u16> = px
                .as_slice()
                .iter()
                .map(|&v| v.round().clamp(0.0, 65535.0) as u16)
                .collect();
            let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(px.width() as u32, px.height() as u32, mm)
                .expect("buffer matches dimensions");
            img.save(&path)?;
        }
    }
    Ok(path)
}
