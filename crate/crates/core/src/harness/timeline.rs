//! Event timelines of the scripted interaction scenarios.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::frame::DepthFrame;
use crate::fusion::AlignmentTransform;
use crate::pipeline::{FrameEvent, PipelineConfig, StreamProcessor};
use crate::rig::SensorRig;
use crate::synth::{GroundTruth, ScenarioScript, Simulator};

/// One processed frame next to its ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    /// Frame on the script clock; negative during the baseline prefix.
    pub script_frame: i64,
    pub event: FrameEvent,
    pub truth: GroundTruth,
}

/// Frame numbers are on the script clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineResult {
    pub scenario: String,
    pub frame_rate_hz: f64,
    pub first_detection_frame: Option<i64>,
    /// First frame of the run of raw detections that confirmed contact.
    pub contact_frame: Option<i64>,
    /// First frame after contact with both channels quiet.
    pub release_frame: Option<i64>,
    /// Frames from the release on with the object still in proximity range.
    pub post_release_visible_frames: usize,
    pub contact_via_pressure: bool,
    pub contact_via_flow: bool,
    pub via_pressure_frames: usize,
    pub via_flow_frames: usize,
    pub baseline_psi: Option<f64>,
    pub peak_pressure_psi: f64,
    pub peak_flow_sum: f64,
    pub initial_mean_mm: Option<f64>,
    pub final_min_mm: Option<f64>,
    pub truth_contact_frame: Option<i64>,
    pub truth_release_frame: Option<i64>,
    #[serde(skip)]
    pub rows: Vec<TimelineRow>,
}

/// A corrected depth map kept for inspection.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub name: String,
    pub depth: DepthFrame,
}

#[derive(Debug, Clone)]
pub struct TimelineRun {
    pub result: TimelineResult,
    pub snapshots: Vec<Snapshot>,
}

/// Summarizes processed rows. `hysteresis` is the contact debounce length.
pub fn summarize(
    scenario: &str,
    frame_rate_hz: f64,
    rows: Vec<TimelineRow>,
    hysteresis: usize,
    baseline_psi: Option<f64>,
) -> TimelineResult {
    let scripted = || rows.iter().filter(|r| r.script_frame >= 0);
    let first_detection_frame = scripted().find(|r| r.event.visible).map(|r| r.script_frame);
    let confirmed = scripted().find(|r| r.event.contact);
    let contact_frame = confirmed.map(|r| r.script_frame - (hysteresis as i64 - 1));
    let release_frame = confirmed.and_then(|c| {
        scripted()
            .find(|r| r.script_frame > c.script_frame && !r.event.contact)
            .map(|r| r.script_frame)
    });
    let post_release_visible_frames = release_frame.map_or(0, |rf| {
        scripted()
            .filter(|r| r.script_frame >= rf && r.event.visible)
            .count()
    });
    let truth_contact = scripted().find(|r| r.truth.contact);
    let truth_release_frame = truth_contact.and_then(|c| {
        scripted()
            .find(|r| r.script_frame > c.script_frame && !r.truth.contact)
            .map(|r| r.script_frame)
    });
    let first_scripted = scripted().next();
    let last = rows.last();
    TimelineResult {
        scenario: scenario.to_string(),
        frame_rate_hz,
        first_detection_frame,
        contact_frame,
        release_frame,
        post_release_visible_frames,
        contact_via_pressure: confirmed.is_some_and(|r| r.event.via_pressure),
        contact_via_flow: confirmed.is_some_and(|r| r.event.via_flow),
        via_pressure_frames: rows.iter().filter(|r| r.event.via_pressure).count(),
        via_flow_frames: rows.iter().filter(|r| r.event.via_flow).count(),
        baseline_psi,
        peak_pressure_psi: rows.iter().map(|r| r.event.pressure_psi).fold(f64::NEG_INFINITY, f64::max),
        peak_flow_sum: rows.iter().map(|r| r.event.flow_sum).fold(0.0, f64::max),
        initial_mean_mm: first_scripted.and_then(|r| r.event.mean_mm),
        final_min_mm: last.and_then(|r| r.event.min_mm),
        truth_contact_frame: truth_contact.map(|r| r.script_frame),
        truth_release_frame,
        rows,
    }
}

/// Simulates `script` and feeds every frame through a [`StreamProcessor`].
/// Corrected depth is kept at the first and last frames, at first detection,
/// when contact is confirmed and at release.
pub fn run_timeline(
    rig: &SensorRig,
    script: &ScenarioScript,
    config: &PipelineConfig,
    alignment: &AlignmentTransform,
) -> Result<TimelineRun> {
    let roi = rig.depth_roi(script.roi_mm.x, script.roi_mm.y);
    let mut proc = StreamProcessor::new(*rig, *alignment, config.clone(), roi)?;
    let sim = Simulator::new(*rig, script.clone(), config.sim())?;
    let total = sim.frame_count();
    let mut rows = Vec::with_capacity(total);
    let mut snapshots = Vec::new();
    let (mut seen, mut touched, mut released) = (false, false, false);
    for (k, frame) in sim.enumerate() {
        let frame = frame?;
        let out = proc.process(&frame.sensor)?;
        let e = out.event;
        let scripted = frame.script_frame >= 0;
        let mut names = Vec::new();
        if k == 0 {
            names.push("first");
        }
        if scripted && e.visible && !seen {
            seen = true;
            names.push("first_detection");
        }
        if scripted && e.contact && !touched {
            touched = true;
            names.push("contact");
        } else if touched && !e.contact && !released {
            released = true;
            names.push("release");
        }
        if k + 1 == total {
            names.push("last");
        }
        for n in names {
            snapshots.push(Snapshot {
                name: n.to_string(),
                depth: out.corrected.depth.clone(),
            });
        }
        rows.push(TimelineRow {
            script_frame: frame.script_frame,
            event: e,
            truth: frame.truth,
        });
    }
    Ok(TimelineRun {
        result: summarize(
            &script.name,
            script.frame_rate_hz,
            rows, config.contact.hysteresis_frames, proc.baseline_psi()),
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: i64, visible: bool, contact: bool, truth_contact: bool) -> TimelineRow {
        TimelineRow {
            script_frame: k,
            event: FrameEvent {
                frame: (k + 2) as u64,
                t: 0.0,
                contact,
                via_pressure: contact,
                via_flow: false,
                pressure_psi: 0.02,
                flow_sum: 0.0,
                mean_mm: Some(1.0),
                min_mm: Some(0.5),
                visible,
            },
            truth: GroundTruth {
                frame: (k + 2) as u64,
                min_object_distance_mm: None,
                contact: truth_contact,
                peak_indentation_mm: 0.0,
                pressure_psi: 0.02,
            },
        }
    }

    #[test]
    fn frame_bookkeeping() {
        let pattern = [
            (false, false, false),
            (true, false, false),
            (true, false, true),
            (true, true, true),
            (true, true, true),
            (true, false, false),
            (true, false, false),
            (false, false, false),
        ];
        let mut rows = vec![row(-2, true, false, false), row(-1, true, false, false)];
        rows.extend(pattern.iter().enumerate().map(|(k, &(v, c, t))| row(k as i64, v, c, t)));
        let r = summarize("x", 30.0, rows, 2, Some(0.02));
        assert_eq!(r.first_detection_frame, Some(1));
        assert_eq!(r.contact_frame, Some(2));
        assert_eq!(r.release_frame, Some(5));
        assert_eq!(r.post_release_visible_frames, 2);
        assert_eq!(r.truth_contact_frame, Some(2));
        assert_eq!(r.truth_release_frame, Some(5));
        assert!(r.contact_via_pressure && !r.contact_via_flow);
    }
}
