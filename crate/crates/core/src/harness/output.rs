//! Files written for each run. Nothing here depends on wall-clock time, so
//! equal inputs give byte-identical files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::harness::dimensions::MeasurementResult;
use crate::harness::sweep::SweepResult;
use crate::harness::timeline::TimelineResult;
use crate::pipeline::FrameEvent;
use crate::synth::GroundTruth;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.4}"))
}

pub fn write_sweep_csv(path: &Path, sweep: &SweepResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["truth_mm", "measured_mm", "abs_error_mm"])?;
    for r in &sweep.rows {
        w.write_record([
            format!("{:.4}", r.truth_mm),
            format!("{:.4}", r.measured_mm),
            format!("{:.4}", r.abs_error_mm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per frame on the script clock; baseline frames have negative numbers.
pub fn write_timeline_csv(path: &Path, timeline: &TimelineResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "frame",
        "t",
        "contact",
        "via_pressure",
        "via_flow",
        "pressure_psi",
        "flow_sum",
        "mean_mm",
        "min_mm",
    ])?;
    for r in &timeline.rows {
        let e = &r.event;
        w.write_record([
            r.script_frame.to_string(),
            format!("{:.6}", r.script_frame as f64 / timeline.frame_rate_hz),
            e.contact.to_string(),
            e.via_pressure.to_string(),
            e.via_flow.to_string(),
            format!("{:.6}", e.pressure_psi),
            format!("{:.4}", e.flow_sum),
            opt(e.mean_mm),
            opt(e.min_mm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dimensions_csv(path: &Path, result: &MeasurementResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "object",
        "placement",
        "x_mm",
        "y_mm",
        "extent_x_mm",
        "extent_y_mm",
        "extent_z_mm",
        "mean_rel_error",
    ])?;
    for r in &result.rows {
        w.write_record([
            r.object.name().to_string(),
            r.placement.to_string(),
            format!("{:.4}", r.x_mm),
            format!("{:.4}", r.y_mm),
            format!("{:.4}", r.measured.extent_x_mm),
            format!("{:.4}", r.measured.extent_y_mm),
            format!("{:.4}", r.measured.extent_z_mm),
            format!("{:.6}", r.mean_rel_error()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events_jsonl(path: &Path) -> Result<Vec<FrameEvent>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Into::into))
        .collect()
}

pub fn write_events(path: &Path, timeline: &TimelineResult) -> Result<()> {
    write_jsonl(path, timeline.rows.iter().map(|r| r.event))
}

pub fn write_truth(path: &Path, timeline: &TimelineResult) -> Result<()> {
    write_jsonl::<GroundTruth>(path, timeline.rows.iter().map(|r| r.truth))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
