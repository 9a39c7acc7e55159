use mf_core::harness::{rig_alignment, run_timeline};
use mf_core::synth::Simulator;
use mf_core::{PipelineConfig, ScenarioScript, SensorRig, StreamProcessor};

#[test]
fn drag_fires_the_flow_channel_alone() {
    let rig = SensorRig::default();
    let h = rig_alignment(&rig).unwrap();
    let run = run_timeline(&rig, &ScenarioScript::preset("lateral_drag").unwrap(), &PipelineConfig::default(), &h).unwrap();
    let t = run.result;
    assert!(t.contact_via_flow && !t.contact_via_pressure);
    assert_eq!(t.via_pressure_frames, 0);
    assert!(t.rows.iter().all(|r| !r.event.contact || r.event.via_flow));
}

#[test]
fn baseline_frames_never_report_contact() {
    let rig = SensorRig::default();
    let h = rig_alignment(&rig).unwrap();
    let script = ScenarioScript::preset("catch").unwrap();
    let roi = rig.depth_roi(script.roi_mm.x, script.roi_mm.y);
    let config = PipelineConfig::default();
    let mut proc = StreamProcessor::new(rig, h, config.clone(), roi).unwrap();
    for f in Simulator::new(rig, script, config.sim()).unwrap().take(10) {
        let f = f.unwrap();
        let out = proc.process(&f.sensor).unwrap();
        assert!(!out.event.contact && !out.event.via_pressure);
    }
    assert!((proc.baseline_psi().unwrap() - 0.02).abs() < 1e-3);
    assert_eq!(proc.tracks().len(), 328);
}

#[test]
fn stricter_thresholds_delay_contact() {
    let rig = SensorRig::default();
    let h = rig_alignment(&rig).unwrap();
    let script = ScenarioScript::preset("approach_contact").unwrap();
    let base = run_timeline(&rig, &script, &PipelineConfig::default(), &h).unwrap().result;
    let mut strict = PipelineConfig::default();
    strict.apply_override("contact.pressure_delta_psi", "0.1").unwrap();
    strict.apply_override("contact.flow_sum_px", "1000").unwrap();
    let later = run_timeline(&rig, &script, &strict, &h).unwrap().result;
    assert!(later.contact_frame.unwrap() > base.contact_frame.unwrap());
}
