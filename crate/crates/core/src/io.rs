//! On-disk frame formats.
//!
//! * Depth, lossless: 16-byte header (`MFDF`, width, height, frame index as
//!   little-endian `u32`) followed by `width * height` little-endian `f32` mm.
//! * Depth, for inspection: binary 16-bit PGM in whole millimetres, clamped
//!   to `[0, 65535]`.
//! * Intensity: binary 8-bit PGM.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::frame::{DepthFrame, IntensityFrame};
use crate::raster::Raster;

pub const DEPTH_MAGIC: &[u8; 4] = b"MFDF";
const HEADER_LEN: usize = 16;

pub fn encode_depth_raw(frame: &DepthFrame) -> Vec<u8> {
    let px = frame.pixels();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * px.as_slice().len());
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&(px.width() as u32).to_le_bytes());
    out.extend_from_slice(&(px.height() as u32).to_le_bytes());
    out.extend_from_slice(&(frame.frame_index() as u32).to_le_bytes());
    for v in px.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_depth_raw(bytes: &[u8], frame_rate_hz: f64) -> std::result::Result<DepthFrame, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("{} bytes is shorter than the header", bytes.len()));
    }
    if &bytes[..4] != DEPTH_MAGIC {
        return Err("bad magic".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (width, height, index) = (word(4), word(8), word(12));
    let expected = HEADER_LEN + 4 * width * height;
    if bytes.len() != expected {
        return Err(format!(
            "expected {expected} bytes for {width}x{height}, found {}",
            bytes.len()
        ));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let raster = Raster::from_vec(width, height, data).map_err(|e| e.to_string())?;
    DepthFrame::new(raster, index as u64, frame_rate_hz).map_err(|e| e.to_string())
}

pub fn write_depth_raw(path: &Path, frame: &DepthFrame) -> Result<()> {
    fs::write(path, encode_depth_raw(frame))?;
    Ok(())
}

pub fn read_depth_raw(path: &Path, frame_rate_hz: f64) -> Result<DepthFrame> {
    let bytes = fs::read(path)?;
    decode_depth_raw(&bytes, frame_rate_hz).map_err(|reason| Error::Malformed {
        path: path.to_path_buf(),
        reason,
    })
}

/// Depth in whole millimetres as 16-bit samples (big-endian, per the PGM format).
pub fn encode_depth_pgm(frame: &DepthFrame) -> Vec<u8> {
    let px = frame.pixels();
    let mut out = format!("P5\n{} {}\n65535\n", px.width(), px.height()).into_bytes();
    out.reserve(2 * px.as_slice().len());
    for &v in px.as_slice() {
        let mm = v.round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&mm.to_be_bytes());
    }
    out
}

pub fn encode_intensity_pgm(frame: &IntensityFrame) -> Vec<u8> {
    let px = frame.pixels();
    let mut out = format!("P5\n{} {}\n255\n", px.width(), px.height()).into_bytes();
    out.extend_from_slice(px.as_slice());
    out
}

pub fn write_depth_pgm(path: &Path, frame: &DepthFrame) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_depth_pgm(frame))?;
    Ok(())
}

pub fn write_intensity_pgm(path: &Path, frame: &IntensityFrame) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_intensity_pgm(frame))?;
    Ok(())
}

/// A decoded binary PGM; 16-bit samples are widened.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub max_value: u16,
    pub samples: Vec<u16>,
}

pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<Pgm, String> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(format!("unsupported magic {:?}", fields[0]));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| format!("bad header field {s:?}"));
    let (width, height, max_value) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if width == 0 || height == 0 || max_value == 0 || max_value > 65535 {
        return Err("bad dimensions or max value".into());
    }
    // exactly one whitespace byte separates header and raster
    pos += 1;
    let bytes_per = if max_value > 255 { 2 } else { 1 };
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != width * height * bytes_per {
        return Err(format!(
            "expected {} raster bytes, found {}",
            width * height * bytes_per,
            body.len()
        ));
    }
    let samples = if bytes_per == 1 {
        body.iter().map(|&b| b as u16).collect()
    } else {
        body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    Ok(Pgm {
        width,
        height,
        max_value: max_value as u16,
        samples,
    })
}

pub fn read_intensity_pgm(path: &Path, frame_index: u64, frame_rate_hz: f64) -> Result<IntensityFrame> {
    let malformed = |reason: String| Error::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let pgm = decode_pgm(&fs::read(path)?).map_err(malformed)?;
    if pgm.max_value > 255 {
        return Err(malformed("intensity frames must be 8-bit".into()));
    }
    let data = pgm.samples.iter().map(|&v| v as u8).collect();
    let raster = Raster::from_vec(pgm.width, pgm.height, data).map_err(|e| malformed(e.to_string()))?;
    IntensityFrame::new(raster, frame_index, frame_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn depth_pgm_clamps_and_rounds() {
        let r = Raster::from_vec(3, 1, vec![0.0, 99.6, 70000.0]).unwrap();
        let f = DepthFrame::new(r, 2, 30.0).unwrap();
        let pgm = decode_pgm(&encode_depth_pgm(&f)).unwrap();
        assert_eq!(pgm.max_value, 65535);
        assert_eq!(pgm.samples, vec![0, 100, 65535]);
    }

    #[test]
    fn raw_header_layout() {
        let r = Raster::from_vec(2, 1, vec![1.5, 0.0]).unwrap();
        let f = DepthFrame::new(r, 7, 30.0).unwrap();
        let bytes = encode_depth_raw(&f);
        assert_eq!(&bytes[..4], b"MFDF");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &7u32.to_le_bytes());
        assert_eq!(bytes.len(), 24);
    }

    #[test]
    fn raw_rejects_truncation_and_bad_magic() {
        let r = Raster::from_vec(2, 2, vec![1.0; 4]).unwrap();
        let bytes = encode_depth_raw(&DepthFrame::new(r, 0, 30.0).unwrap());
        assert!(decode_depth_raw(&bytes[..bytes.len() - 1], 30.0).is_err());
        assert!(decode_depth_raw(&bytes[..10], 30.0).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_depth_raw(&bad, 30.0).is_err());
    }

    #[test]
    fn intensity_pgm_round_trip() {
        let r = Raster::from_fn(5, 3, |x, y| (x * 40 + y) as u8);
        let f = IntensityFrame::new(r.clone(), 1, 30.0).unwrap();
        let pgm = decode_pgm(&encode_intensity_pgm(&f)).unwrap();
        assert_eq!(pgm.samples, r.as_slice().iter().map(|&v| v as u16).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn raw_depth_round_trip_is_lossless(
            w in 1usize..12,
            h in 1usize..12,
            idx in 0u32..100_000,
            seed in proptest::collection::vec(0.0f32..500.0, 144),
        ) {
            let data = seed[..w * h].to_vec();
            let f = DepthFrame::new(Raster::from_vec(w, h, data).unwrap(), idx as u64, 30.0).unwrap();
            let back = decode_depth_raw(&encode_depth_raw(&f), 30.0).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
