//! `mf`: run scenarios, calibrate the alignment and replay recorded frames.

mod frames;
mod images;
mod overrides;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::info;
use mf_core::harness::{self, Scenario, ScenarioOutput};
use mf_core::imgproc::write_tracks_csv;
use mf_core::synth::Simulator;
use mf_core::{AlignmentTransform, PipelineConfig, ScenarioScript, SensorRig, StreamProcessor};

use crate::frames::{FrameDir, FrameWriter};
use crate::images::{write_depth_image, ImageFormat};

#[derive(Parser)]
#[command(
    name = "mf",
    version,
    about = "Simulator and perception pipeline for a proximity and visuotactile sensor",
    after_help = "Any config key can be set with a dotted flag, e.g. --artifact.dot_bias_mm 0 or \
                  --contact.flow_sum_px=80. Precedence: defaults < --config file < dotted flags. \
                  MF_LOG sets the log level (default info)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline and simulator settings (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a scenario script and write its metrics.
    Run {
        /// Preset name (plane_sweep, approach_contact, catch, throw_kinematic, throw_ballistic,
        /// lateral_drag, dimensions) or path to a scenario TOML.
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Use this alignment instead of calibrating the simulated rig.
        #[arg(long, value_name = "PATH")]
        alignment: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "pgm")]
        format: ImageFormat,
        #[arg(long, value_name = "HZ")]
        frame_rate: Option<f64>,
        /// Also write every raw frame to OUT/frames for `mf process`.
        #[arg(long)]
        dump_frames: bool,
    },
    /// Fit the intensity-to-depth alignment on a simulated flat plane.
    Calibrate {
        #[arg(long, default_value_t = harness::calibrate::CALIBRATION_PLANE_MM)]
        plane_distance: f64,
        #[arg(long, default_value_t = harness::calibrate::CALIBRATION_FRAMES)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long, default_value = "alignment.txt")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Write this row-major homography instead of calibrating.
        #[arg(long, num_args = 9, value_name = "H", allow_negative_numbers = true)]
        manual: Option<Vec<f64>>,
        /// Report the alignment error on a plane at this distance too.
        #[arg(long, value_name = "MM")]
        check_distance: Option<f64>,
    },
    /// Run the pipeline over a directory of recorded frames.
    Process {
        input: PathBuf,
        /// Defaults to INPUT/processed.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        /// Defaults to INPUT/alignment.txt.
        #[arg(long, value_name = "PATH")]
        alignment: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "pgm")]
        format: ImageFormat,
    },
}

/// Exit 2 for usage and configuration problems, 3 for failures while running.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn config(e: impl Into<anyhow::Error>) -> Self {
        Failure::Config(e.into())
    }

    fn runtime(e: impl Into<anyhow::Error>) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn load_config(base: PipelineConfig, path: Option<&Path>, pairs: &[(String, String)]) -> Result<PipelineConfig, Failure> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(Failure::Config)?;
            PipelineConfig::from_toml(&text)
                .with_context(|| format!("in {}", p.display()))
                .map_err(Failure::Config)?
        }
        None => base,
    };
    for (k, v) in pairs {
        config.apply_override(k, v).map_err(Failure::config)?;
    }
    info!("effective config:\n{}", config.to_toml());
    Ok(config)
}

fn resolve_scenario(arg: &str) -> Result<Scenario, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(Failure::config)?;
        let script = ScenarioScript::from_toml(&text)
            .with_context(|| format!("in {}", path.display()))
            .map_err(Failure::Config)?;
        return Ok(Scenario::from_script(script));
    }
    Scenario::named(arg).map_err(Failure::config)
}

fn read_alignment(path: &Path) -> Result<AlignmentTransform, Failure> {
    AlignmentTransform::read(path).map_err(Failure::runtime)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    scenario: &str,
    seed: Option<u64>,
    out: &Path,
    config_path: Option<&Path>,
    alignment: Option<&Path>,
    format: ImageFormat,
    frame_rate: Option<f64>,
    dump_frames: bool,
    pairs: &[(String, String)],
) -> Outcome {
    let config = load_config(PipelineConfig::default(), config_path, pairs)?;
    let mut scenario = resolve_scenario(scenario)?;
    let mut rig = SensorRig::default();
    if let Some(hz) = frame_rate {
        if !(hz.is_finite() && hz > 0.0) {
            return Err(Failure::Config(anyhow!("frame rate must be positive")));
        }
        rig.frame_rate_hz = hz;
        if let Scenario::Sweep(s) | Scenario::Timeline(s) = &mut scenario {
            s.frame_rate_hz = hz;
        }
    }
    let alignment = match alignment {
        Some(p) => read_alignment(p)?,
        None => harness::rig_alignment(&rig).map_err(Failure::runtime)?,
    };
    let name = scenario.name().to_string();
    info!("running {name}");
    let output = harness::run_scenario(&scenario, &rig, &config, &alignment, seed).map_err(Failure::runtime)?;
    harness::write_run(out, &name, &output, seed).map_err(Failure::runtime)?;
    fs::write(out.join("config.toml"), config.to_toml()).map_err(Failure::runtime)?;
    match &output {
        ScenarioOutput::Sweep(s) => {
            for r in &s.rows {
                println!("{:>6.1} mm  measured {:>7.2} mm  error {:>6.2} mm", r.truth_mm, r.measured_mm, r.abs_error_mm);
            }
            println!("R2 {:.4}", s.r_squared);
        }
        ScenarioOutput::Timeline(run) => {
            for snap in &run.snapshots {
                write_depth_image(out, &format!("depth_{}", snap.name), &snap.depth, format).map_err(Failure::Runtime)?;
            }
            let t = &run.result;
            println!(
                "first detection {:?}, contact {:?}, release {:?}, post-release visible {}, peak {:.4} psi",
                t.first_detection_frame, t.contact_frame, t.release_frame, t.post_release_visible_frames, t.peak_pressure_psi
            );
        }
        ScenarioOutput::Dimensions(m) => {
            for r in &m.rows {
                println!(
                    "{:<9} #{} {:>6.2} x {:>6.2} x {:>6.2} mm  error {:.2}%",
                    r.object.name(),
                    r.placement,
                    r.measured.extent_x_mm,
                    r.measured.extent_y_mm,
                    r.measured.extent_z_mm,
                    100.0 * r.mean_rel_error()
                );
            }
        }
    }
    if dump_frames {
        let (Scenario::Sweep(script) | Scenario::Timeline(script)) = &scenario else {
            return Err(Failure::Config(anyhow!("--dump-frames needs a scripted scenario")));
        };
        let mut script = script.clone();
        if let Some(s) = seed {
            script.seed = s;
        }
        dump(&out.join("frames"), &rig, &script, &config, &alignment).map_err(Failure::Runtime)?;
    }
    info!("wrote {}", out.display());
    Ok(())
}

fn dump(
    dir: &Path,
    rig: &SensorRig,
    script: &ScenarioScript,
    config: &PipelineConfig,
    alignment: &AlignmentTransform,
) -> anyhow::Result<()> {
    let mut writer = FrameWriter::create(dir, alignment)?;
    for f in Simulator::new(*rig, script.clone(), config.sim())? {
        writer.push(&f?.sensor)?;
    }
    let roi = rig.depth_roi(script.roi_mm.x, script.roi_mm.y);
    writer.finish(rig, roi, config, script.frame_rate_hz)
}

#[allow(clippy::too_many_arguments)]
fn cmd_calibrate(
    plane_distance: f64,
    frames: usize,
    seed: u64,
    out: &Path,
    config_path: Option<&Path>,
    manual: Option<&[f64]>,
    check_distance: Option<f64>,
    pairs: &[(String, String)],
) -> Outcome {
    if let Some(values) = manual {
        let values: [f64; 9] = values.try_into().map_err(|_| Failure::Config(anyhow!("--manual takes 9 numbers")))?;
        let h = AlignmentTransform::manual(values).map_err(Failure::config)?;
        h.write(out).map_err(Failure::runtime)?;
        println!("wrote manual alignment to {}", out.display());
        return Ok(());
    }
    let config = load_config(PipelineConfig::default(), config_path, pairs)?;
    let rig = SensorRig::default();
    let report =
        harness::calibrate_on_plane(&rig, &config, plane_distance, frames, seed).map_err(Failure::runtime)?;
    report.transform.write(out).map_err(Failure::runtime)?;
    println!(
        "{} dots matched on the {plane_distance} mm plane; fit rms {:.3} px, holdout rms {:.3} px",
        report.matched_dots, report.fit_rms_px, report.holdout_rms_px
    );
    if let Some(d) = check_distance {
        let r = harness::alignment_residual(&rig, &config, &report.transform, d, frames, seed.wrapping_add(1))
            .map_err(Failure::runtime)?;
        println!("alignment residual on a {d} mm plane: {r:.3} px");
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_process(
    input: &Path,
    out: Option<&Path>,
    config_path: Option<&Path>,
    alignment: Option<&Path>,
    format: ImageFormat,
    pairs: &[(String, String)],
) -> Outcome {
    let frames = FrameDir::open(input).map_err(Failure::Runtime)?;
    let config = load_config(frames.info.pipeline.clone(), config_path, pairs)?;
    let alignment = read_alignment(&alignment.map_or_else(|| input.join(frames::ALIGNMENT_FILE), Path::to_path_buf))?;
    let out = out.map_or_else(|| input.join("processed"), Path::to_path_buf);
    let maps = out.join("corrected");
    fs::create_dir_all(&maps).map_err(Failure::runtime)?;
    let mut proc =
        StreamProcessor::new(frames.info.rig, alignment, config, frames.info.roi).map_err(Failure::config)?;
    let mut events = Vec::with_capacity(frames.len());
    let mut tracks = csv::Writer::from_path(out.join("tracks.csv")).map_err(Failure::runtime)?;
    for i in 0..frames.len() {
        let frame = frames.frame(i).map_err(Failure::Runtime)?;
        let result = proc.process(&frame).map_err(Failure::runtime)?;
        let k = frame.frame_index();
        write_depth_image(&maps, &format!("depth_{k:06}"), &result.corrected.depth, format).map_err(Failure::Runtime)?;
        write_tracks_csv(&mut tracks, k, proc.tracks()).map_err(Failure::runtime)?;
        events.push(result.event);
    }
    tracks.flush().map_err(Failure::runtime)?;
    harness::output::write_jsonl(&out.join("events.jsonl"), &events).map_err(Failure::runtime)?;
    let contact = events.iter().filter(|e| e.contact).count();
    println!("processed {} frames, {contact} in contact; wrote {}", events.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MF_LOG", "info")).init();
    let (args, pairs) = match overrides::extract(std::env::args().collect()) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            config,
            alignment,
            format,
            frame_rate,
            dump_frames,
        } => cmd_run(
            scenario,
            *seed,
            out,
            config.config.as_deref(),
            alignment.as_deref(),
            *format,
            *frame_rate,
            *dump_frames,
            &pairs,
        ),
        Command::Calibrate {
            plane_distance,
            frames,
            seed,
            out,
            config,
            manual,
            check_distance,
        } => cmd_calibrate(
            *plane_distance,
            *frames,
            *seed,
            out,
            config.config.as_deref(),
            manual.as_deref(),
            *check_distance,
            &pairs,
        ),
        Command::Process {
            input,
            out,
            config,
            alignment,
            format,
        } => cmd_process(input, out.as_deref(), config.config.as_deref(), alignment.as_deref(), *format, &pairs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
