//! Command-line front end: synthesis, reference rendering, training,
//! inference, evaluation, analysis exports, and the windowing experiments.
//! Every run writes a manifest documenting the resolved configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use phasefit::dataset::{make_dataset, synth_chirp_train, DatasetSplit, PairMetadata, SplitSpec};
use phasefit::experiment::{
    frame_sweep, inference_sweep, rate_sweep, FrameSweepConfig, InferenceSweepConfig,
    RateSweepConfig,
};
use phasefit::model::{lfo_csv, lfo_trace, ModelFile, Provenance};
use phasefit::reference::{
    continuous_response, discrete_response, locus_csv, render_digital_phaser, response_csv,
    ContinuousPhaserSpec, DiscretePhaserSpec, TriangleLfoSpec,
};
use phasefit::train::{loss_csv, train, EarlyStop, EvalSet, TrainConfig};
use phasefit::{
    forward, read_wav, write_wav, AudioBuffer, FrameConfig, LfoMap, LfoMode, ModelHyper,
    WavFormat,
};

#[derive(Parser)]
#[command(name = "phasefit", version, about = "Grey-box phaser modelling toolkit")]
struct Cli {
    /// Worker threads for frame-parallel sections (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Force single-threaded execution for bit-reproducible runs.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the chirp-train excitation signal.
    Synth(SynthArgs),
    /// Render a digital-phaser target through the sample-level reference.
    Render(RenderArgs),
    /// Fit the differentiable model to an input/target pair.
    Train(TrainArgs),
    /// Run a trained model over audio.
    Infer(InferArgs),
    /// Report the error-to-signal ratio of a model against a target.
    Eval(EvalArgs),
    /// Write analysis CSVs.
    #[command(subcommand)]
    Export(ExportCommand),
    /// Run the windowing experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Pcm16,
    Pcm24,
    Float32,
}

impl From<Format> for WavFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Pcm16 => WavFormat::Pcm16,
            Format::Pcm24 => WavFormat::Pcm24,
            Format::Float32 => WavFormat::Float32,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Signal length in seconds.
    #[arg(long)]
    duration: f64,
    #[arg(long, default_value_t = 44100.0)]
    sample_rate: f64,
    /// Impulse spacing in seconds.
    #[arg(long, default_value_t = 0.030)]
    period: f64,
    /// Dispersion stages (0 = bare impulse train).
    #[arg(long, default_value_t = 64)]
    stages: usize,
    /// All-pass coefficient of the dispersion stages.
    #[arg(long, default_value_t = 0.9)]
    p: f64,
    #[arg(long, value_enum, default_value_t = Format::Float32)]
    format: Format,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Triangle LFO period in seconds.
    #[arg(long)]
    lfo_period: f64,
    /// Break-frequency sweep floor, rad/s.
    #[arg(long, default_value_t = 4000.0)]
    break_min: f64,
    /// Break-frequency sweep ceiling, rad/s.
    #[arg(long, default_value_t = 16000.0)]
    break_max: f64,
    /// Initial LFO phase in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    phase: f64,
    #[arg(long, default_value_t = 1.0)]
    g1: f64,
    #[arg(long, default_value_t = 0.0)]
    g2: f64,
    /// Feedback delay in samples (0 disables feedback).
    #[arg(long, default_value_t = 0)]
    delay: usize,
    #[arg(long, default_value_t = 4)]
    stages: usize,
    #[arg(long, value_enum, default_value_t = Format::Float32)]
    format: Format,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Bypass recording that replaces the nominal input.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Sample offset of the target recording relative to the input.
    #[arg(long, default_value_t = 0)]
    offset: i64,
    #[arg(long, default_value = "run")]
    label: String,
    #[arg(long)]
    window_ms: f64,
    #[arg(long, default_value_t = 5000)]
    epochs: usize,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 4)]
    stages: usize,
    /// Training segment length in seconds (default: two thirds of the pair).
    #[arg(long)]
    train_seconds: Option<f64>,
    /// Held-out segment length in seconds (default: the rest of the pair).
    #[arg(long)]
    test_seconds: Option<f64>,
    /// Stop a restart early after this many epochs without improvement.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    min_delta: f64,
    /// Known LFO period of the target device, recorded as metadata.
    #[arg(long)]
    estimated_period: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    #[arg(long)]
    lfo_csv: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    /// Inference window in milliseconds (default: the training window).
    #[arg(long)]
    window_ms: Option<f64>,
    /// Sample offset of the audio within the training timeline.
    #[arg(long, default_value_t = 0.0)]
    offset: f64,
    #[arg(long, value_enum, default_value_t = Format::Float32)]
    format: Format,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    window_ms: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    offset: f64,
    #[arg(long, default_value = "eval-manifest.json")]
    manifest: PathBuf,
}

#[derive(Subcommand)]
enum ExportCommand {
    /// Per-frame LFO, waveshaper output, and all-pass coefficient.
    Lfo(ExportLfoArgs),
    /// Frequency response of a reference phaser.
    Response(ExportResponseArgs),
    /// Continuous-model pole/zero locus over a feedback-gain grid.
    Locus(ExportLocusArgs),
}

#[derive(Args)]
struct ExportLfoArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 500)]
    frames: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ExportResponseArgs {
    /// Evaluate the continuous-time model.
    #[arg(long, conflicts_with = "discrete")]
    continuous: bool,
    /// Evaluate the discrete-time model.
    #[arg(long)]
    discrete: bool,
    /// Break frequency in rad/s.
    #[arg(long)]
    wb: f64,
    #[arg(long, default_value_t = 1.0)]
    g1: f64,
    #[arg(long, default_value_t = 0.0)]
    g2: f64,
    #[arg(long, default_value_t = 4)]
    stages: usize,
    /// Feedback delay in samples (discrete only).
    #[arg(long, default_value_t = 0)]
    delay: usize,
    #[arg(long, default_value_t = 44100.0)]
    sample_rate: f64,
    /// Log-spaced frequency points between f-min and f-max.
    #[arg(long, default_value_t = 1024)]
    points: usize,
    #[arg(long, default_value_t = 10.0)]
    f_min: f64,
    #[arg(long, default_value_t = 20000.0)]
    f_max: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ExportLocusArgs {
    #[arg(long)]
    wb: f64,
    #[arg(long, default_value_t = 1.0)]
    g1: f64,
    #[arg(long, default_value_t = 4)]
    stages: usize,
    /// Feedback gains to trace.
    #[arg(long, value_delimiter = ',', default_value = "0.0,0.25,0.5,0.75,0.9")]
    g2_values: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Experiment 1: training window sweep on one dataset.
    FrameSweep(FrameSweepArgs),
    /// Experiment 2: window schedule against LFO period on synthesized tasks.
    RateSweep(RateSweepArgs),
    /// Experiment 3: inference window sweep on a trained model.
    InferenceSweep(InferenceSweepArgs),
}

#[derive(Args)]
struct FrameSweepArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    offset: i64,
    #[arg(long, default_value = "sweep")]
    label: String,
    /// Window lengths in milliseconds.
    #[arg(long, value_delimiter = ',', default_value = "10,20,40,80,160")]
    windows: Vec<f64>,
    #[arg(long)]
    train_seconds: Option<f64>,
    #[arg(long)]
    test_seconds: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 4)]
    stages: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct RateSweepArgs {
    /// Target LFO periods in seconds.
    #[arg(long, value_delimiter = ',', default_value = "0.5,2,8")]
    periods: Vec<f64>,
    /// Exponents of the window schedule W_b = T_0 2^{b/2} / 100.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9,10")]
    b_values: Vec<u32>,
    #[arg(long, default_value_t = 10.0)]
    train_seconds: f64,
    #[arg(long, default_value_t = 5.0)]
    test_seconds: f64,
    #[arg(long, default_value_t = 44100.0)]
    sample_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    g1: f64,
    #[arg(long, default_value_t = 0.7)]
    g2: f64,
    #[arg(long, default_value_t = 1)]
    delay: usize,
    #[arg(long, default_value_t = 4)]
    stages: usize,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct InferenceSweepArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    offset: f64,
    #[arg(long, value_delimiter = ',', default_value = "10,20,40,80,160")]
    windows: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    let threads = if cli.deterministic { 1 } else { cli.threads };
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }

    let globals = json!({
        "threads": threads,
        "deterministic": cli.deterministic,
        "version": env!("CARGO_PKG_VERSION"),
    });

    match cli.command {
        Command::Synth(args) => cmd_synth(args, globals),
        Command::Render(args) => cmd_render(args, globals),
        Command::Train(args) => cmd_train(args, globals),
        Command::Infer(args) => cmd_infer(args, globals),
        Command::Eval(args) => cmd_eval(args, globals),
        Command::Export(ExportCommand::Lfo(args)) => cmd_export_lfo(args, globals),
        Command::Export(ExportCommand::Response(args)) => cmd_export_response(args, globals),
        Command::Export(ExportCommand::Locus(args)) => cmd_export_locus(args, globals),
        Command::Experiment(ExperimentCommand::FrameSweep(args)) => {
            cmd_frame_sweep(args, globals)
        }
        Command::Experiment(ExperimentCommand::RateSweep(args)) => cmd_rate_sweep(args, globals),
        Command::Experiment(ExperimentCommand::InferenceSweep(args)) => {
            cmd_inference_sweep(args, globals)
        }
    }
}

// ── helpers ────────────────────────────────────────────────────────────────

fn default_manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_manifest(path: &Path, doc: serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(&doc)?)
        .with_context(|| format!("writing manifest {}", path.display()))?;
    Ok(())
}

fn load_audio(path: &Path) -> Result<AudioBuffer> {
    read_wav(path).with_context(|| format!("reading {}", path.display()))
}

fn frame_doc(frame: &FrameConfig) -> serde_json::Value {
    json!({
        "window_ms": frame.window_seconds() * 1000.0,
        "frame_len_samples": frame.frame_len(),
        "hop_samples": frame.hop(),
        "dft_len": frame.dft_len(),
        "sample_rate": frame.sample_rate(),
    })
}

/// Build the dataset for train/frame-sweep commands, defaulting the split to
/// two thirds training, one third held out.
#[allow(clippy::too_many_arguments)]
fn build_split(
    input: &AudioBuffer,
    target: &AudioBuffer,
    calibration: Option<&AudioBuffer>,
    offset: i64,
    label: &str,
    metadata: PairMetadata,
    train_seconds: Option<f64>,
    test_seconds: Option<f64>,
) -> Result<DatasetSplit> {
    let fs = input.sample_rate();
    let effective_input = calibration.unwrap_or(input);
    let in_avail = effective_input.len() as i64 - (-offset).max(0);
    let tgt_avail = target.len() as i64 - offset.max(0);
    let aligned = in_avail.min(tgt_avail).max(0) as usize;
    let (train_s, test_s) = match (train_seconds, test_seconds) {
        (Some(tr), Some(te)) => (tr, te),
        (tr, te) => {
            let train_n = ((aligned as f64) * 2.0 / 3.0).floor();
            let train_default = train_n / fs;
            let test_default = (aligned as f64 - train_n) / fs;
            (tr.unwrap_or(train_default), te.unwrap_or(test_default))
        }
    };
    let split = SplitSpec { train_seconds: train_s, test_seconds: test_s };
    Ok(make_dataset(input, target, calibration, offset, label, metadata, &split)?)
}

// ── commands ───────────────────────────────────────────────────────────────

fn cmd_synth(args: SynthArgs, globals: serde_json::Value) -> Result<()> {
    let signal =
        synth_chirp_train(args.duration, args.sample_rate, args.period, args.stages, args.p)?;
    write_wav(&args.out, &signal, args.format.into())?;
    println!(
        "wrote {} ({} samples at {} Hz)",
        args.out.display(),
        signal.len(),
        signal.sample_rate()
    );
    let manifest = args.manifest.unwrap_or_else(|| default_manifest_path(&args.out));
    write_manifest(
        &manifest,
        json!({
            "command": "synth",
            "globals": globals,
            "duration_s": args.duration,
            "sample_rate": args.sample_rate,
            "period_s": args.period,
            "stages": args.stages,
            "p": args.p,
            "samples": signal.len(),
            "output": args.out.display().to_string(),
        }),
    )
}

fn cmd_render(args: RenderArgs, globals: serde_json::Value) -> Result<()> {
    let input = load_audio(&args.input)?;
    let spec = DiscretePhaserSpec::new(
        args.break_min,
        args.stages,
        args.g1,
        args.g2,
        input.sample_rate(),
        args.delay,
    )?;
    let lfo = TriangleLfoSpec::new(args.lfo_period, args.break_min, args.break_max, args.phase)?;
    let rendered = render_digital_phaser(&input, &spec, &lfo)?;
    write_wav(&args.out, &rendered, args.format.into())?;
    println!("wrote {} ({} samples)", args.out.display(), rendered.len());
    let manifest = args.manifest.unwrap_or_else(|| default_manifest_path(&args.out));
    write_manifest(
        &manifest,
        json!({
            "command": "render",
            "globals": globals,
            "input": args.input.display().to_string(),
            "lfo_period_s": args.lfo_period,
            "break_min_rad_s": args.break_min,
            "break_max_rad_s": args.break_max,
            "initial_phase": args.phase,
            "g1": args.g1,
            "g2": args.g2,
            "feedback_delay_samples": args.delay,
            "stages": args.stages,
            "output": args.out.display().to_string(),
        }),
    )
}

fn cmd_train(args: TrainArgs, globals: serde_json::Value) -> Result<()> {
    let input = load_audio(&args.input)?;
    let target = load_audio(&args.target)?;
    let calibration = args.calibration.as_deref().map(load_audio).transpose()?;
    let metadata = PairMetadata {
        estimated_period_s: args.estimated_period,
        estimated_rate_hz: args.estimated_period.map(|p| 1.0 / p),
    };
    let split = build_split(
        &input,
        &target,
        calibration.as_ref(),
        args.offset,
        &args.label,
        metadata,
        args.train_seconds,
        args.test_seconds,
    )?;

    let frame = FrameConfig::new(args.window_ms / 1000.0, input.sample_rate())?;
    let hyper = ModelHyper::new(args.stages, frame, LfoMode::Training)?;
    let cfg = TrainConfig {
        learning_rate: args.learning_rate,
        max_epochs: args.epochs,
        restarts: args.restarts,
        seed: args.seed,
        early_stop: args
            .patience
            .map(|p| EarlyStop { patience_epochs: p, min_delta: args.min_delta }),
        ..Default::default()
    };
    let eval_set = EvalSet {
        input: &split.test.input,
        target: &split.test.target,
        offset_samples: split.test_offset_samples,
    };
    let report = train(&split.train.input, &split.train.target, Some(&eval_set), &hyper, &cfg)?;

    let best = &report.restarts[report.best_restart];
    let learned_rate_hz =
        report.params.z_a.arg().abs() * frame.frame_rate() / std::f64::consts::TAU;
    println!(
        "best restart {}: train ESR {:.6}, test ESR {:.6}, learned LFO rate {:.4} Hz",
        report.best_restart,
        best.loss_trace.last().copied().unwrap_or(f64::NAN),
        report.best_eval_esr,
        learned_rate_hz
    );

    let provenance = Provenance {
        seed: args.seed,
        epochs_run: best.epochs_run,
        restarts: args.restarts,
        train_esr: best.loss_trace.last().copied().unwrap_or(f64::MAX),
        test_esr: Some(report.best_eval_esr),
        wall_seconds: report.wall_seconds,
    };
    let model = ModelFile::new(
        report.params.clone(),
        ModelHyper { mode: LfoMode::Inference, ..hyper },
        provenance,
    );
    model.save(&args.out)?;
    println!("wrote {}", args.out.display());

    if let Some(path) = &args.loss_csv {
        std::fs::write(path, loss_csv(&report))?;
    }
    if let Some(path) = &args.lfo_csv {
        std::fs::write(path, lfo_csv(&report.lfo))?;
    }
    if let Some(path) = &args.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }

    let manifest = args.manifest.unwrap_or_else(|| default_manifest_path(&args.out));
    write_manifest(
        &manifest,
        json!({
            "command": "train",
            "globals": globals,
            "input": args.input.display().to_string(),
            "target": args.target.display().to_string(),
            "calibration": args.calibration.as_ref().map(|p| p.display().to_string()),
            "target_offset_samples": args.offset,
            "label": args.label,
            "frame": frame_doc(&frame),
            "stages": args.stages,
            "epochs": args.epochs,
            "restarts": args.restarts,
            "seed": args.seed,
            "learning_rate": args.learning_rate,
            "early_stop": args.patience.map(|p| json!({
                "patience_epochs": p, "min_delta": args.min_delta
            })),
            "train_samples": split.train.input.len(),
            "test_samples": split.test.input.len(),
            "test_offset_samples": split.test_offset_samples,
            "dataset": serde_json::to_value(split.manifest(
                split.train.input.len() + split.test.input.len()
            ))?,
            "best_restart": report.best_restart,
            "test_esr": report.best_eval_esr,
            "learned_lfo_rate_hz": learned_rate_hz,
            "wall_seconds": report.wall_seconds,
            "output": args.out.display().to_string(),
        }),
    )
}

fn cmd_infer(args: InferArgs, globals: serde_json::Value) -> Result<()> {
    let model = ModelFile::load(&args.model)?;
    let input = load_audio(&args.input)?;
    let frame = match args.window_ms {
        Some(ms) => FrameConfig::new(ms / 1000.0, input.sample_rate())?,
        None => {
            if (model.hyper.frame.sample_rate() - input.sample_rate()).abs() > 1e-9 {
                bail!(
                    "model was trained at {} Hz but the input is {} Hz; pass --window-ms",
                    model.hyper.frame.sample_rate(),
                    input.sample_rate()
                );
            }
            model.hyper.frame
        }
    };
    let hyper = ModelHyper::new(model.hyper.stages, frame, LfoMode::Inference)?;
    let map = LfoMap {
        train_frame_len: model.hyper.frame.frame_len(),
        train_hop: model.hyper.frame.hop(),
        offset_samples: args.offset,
    };
    let rendered = forward(&input, &model.params, &hyper, &map)?;
    write_wav(&args.out, &rendered, args.format.into())?;
    println!("wrote {} ({} samples)", args.out.display(), rendered.len());
    let manifest = args.manifest.unwrap_or_else(|| default_manifest_path(&args.out));
    write_manifest(
        &manifest,
        json!({
            "command": "infer",
            "globals": globals,
            "model": args.model.display().to_string(),
            "input": args.input.display().to_string(),
            "frame": frame_doc(&frame),
            "training_frame": frame_doc(&model.hyper.frame),
            "offset_samples": args.offset,
            "output": args.out.display().to_string(),
        }),
    )
}

fn cmd_eval(args: EvalArgs, globals: serde_json::Value) -> Result<()> {
    let model = ModelFile::load(&args.model)?;
    let input = load_audio(&args.input)?;
    let target = load_audio(&args.target)?;
    let frame = match args.window_ms {
        Some(ms) => FrameConfig::new(ms / 1000.0, input.sample_rate())?,
        None => model.hyper.frame,
    };
    let hyper = ModelHyper::new(model.hyper.stages, frame, LfoMode::Inference)?;
    let map = LfoMap {
        train_frame_len: model.hyper.frame.frame_len(),
        train_hop: model.hyper.frame.hop(),
        offset_samples: args.offset,
    };
    let esr = phasefit::train::evaluate(&model.params, &hyper, &input, &target, &map)?;
    println!("ESR: {esr:.6} ({:.2}%)", esr * 100.0);
    write_manifest(
        &args.manifest,
        json!({
            "command": "eval",
            "globals": globals,
            "model": args.model.display().to_string(),
            "input": args.input.display().to_string(),
            "target": args.target.display().to_string(),
            "frame": frame_doc(&frame),
            "offset_samples": args.offset,
            "esr": esr,
        }),
    )
}

fn cmd_export_lfo(args: ExportLfoArgs, globals: serde_json::Value) -> Result<()> {
    let model = ModelFile::load(&args.model)?;
    let hyper = ModelHyper::new(model.hyper.stages, model.hyper.frame, LfoMode::Inference)?;
    let points = lfo_trace(
        &model.params,
        &hyper,
        &LfoMap::matched(&model.hyper.frame),
        args.frames,
    )?;
    std::fs::write(&args.out, lfo_csv(&points))?;
    println!("wrote {} ({} frames)", args.out.display(), points.len());
    let manifest = args.manifest.unwrap_or_else(|| default_manifest_path(&args.out));
    write_manifest(
        &manifest,
        json!({
            "command": "export lfo",
            "globals": globals,
            "model": args.model.display().to_string(),
            "frames": args.frames,
            "frame": frame_doc(&model.hyper.frame),
            "output": args.out.display().to_string(),
        }),
    )
}

fn cmd_export_response(args: ExportResponseArgs, globals: serde_json::Value) -> Result<()> {
    if args.continuous == args.discrete {
        bail!("pass exactly one of --continuous or --discrete");
    }
    if args.points < 2 {
        bail!("need at least two frequency points");
    }
    let log_min = args.f_min.log10();
    let log_max = args.f_max.log10();
    let freqs_hz: Vec<f64> = (0..args.points)
        .map(|i| 10f64.powf(log_min + (log_max - log_min) * i as f64 / (args.points - 1) as f64))
        .collect();
    let (kind, response) = if args.continuous {
        let omega: Vec<f64> =
            freqs_hz.iter().map(|f| std::f64::consts::TAU * f).collect();
        let spec = ContinuousPhaserSpec::new(args.wb, args.stages, args.g1, args.g2)?;
        ("continuous", continuous_response(&spec, &omega)?)
    } else {
        let omega: Vec<f64> = freqs_hz
            .iter()
            .map(|f| std::f64::consts::TAU * f / args.sample_rate)
            .collect();
        let spec = DiscretePhaserSpec::new(
            args.wb,
            args.stages,
            args.g1,
            args.g2,
            args.sample_rate,
            args.delay,
        )?;
        ("discrete", discrete_response(&spec, &omega)?)
    };
    std::fs::write(&args.out, response_csv(&freqs_hz, &response))?;
    println!("wrote {} ({} {} response points)", args.out.display(), args.points, kind);
    let manifest = args.manifest.unwrap_or_else(|| default_manifest_path(&args.out));
    write_manifest(
        &manifest,
        json!({
            "command": "export response",
            "globals": globals,
            "kind": kind,
            "break_freq_rad_s": args.wb,
            "g1": args.g1,
            "g2": args.g2,
            "stages": args.stages,
            "feedback_delay_samples": args.delay,
            "sample_rate": args.sample_rate,
            "points": args.points,
            "f_min_hz": args.f_min,
            "f_max_hz": args.f_max,
            "output": args.out.display().to_string(),
        }),
    )
}

fn cmd_export_locus(args: ExportLocusArgs, globals: serde_json::Value) -> Result<()> {
    let base = ContinuousPhaserSpec::new(args.wb, args.stages, args.g1, 0.0)?;
    let csv = locus_csv(&base, &args.g2_values)?;
    std::fs::write(&args.out, csv)?;
    println!("wrote {}", args.out.display());
    let manifest = args.manifest.unwrap_or_else(|| default_manifest_path(&args.out));
    write_manifest(
        &manifest,
        json!({
            "command": "export locus",
            "globals": globals,
            "break_freq_rad_s": args.wb,
            "g1": args.g1,
            "stages": args.stages,
            "g2_values": args.g2_values,
            "output": args.out.display().to_string(),
        }),
    )
}

fn cmd_frame_sweep(args: FrameSweepArgs, globals: serde_json::Value) -> Result<()> {
    let input = load_audio(&args.input)?;
    let target = load_audio(&args.target)?;
    let calibration = args.calibration.as_deref().map(load_audio).transpose()?;
    let split = build_split(
        &input,
        &target,
        calibration.as_ref(),
        args.offset,
        &args.label,
        PairMetadata::default(),
        args.train_seconds,
        args.test_seconds,
    )?;
    let cfg = FrameSweepConfig {
        windows_ms: args.windows.clone(),
        stages: args.stages,
        train: TrainConfig {
            learning_rate: args.learning_rate,
            max_epochs: args.epochs,
            restarts: args.restarts,
            seed: args.seed,
            ..Default::default()
        },
    };
    let report = frame_sweep(&split, &cfg)?;
    std::fs::write(&args.out, report.csv())?;
    println!("wrote {} ({} rows)", args.out.display(), report.rows.len());
    let manifest = args.manifest.unwrap_or_else(|| default_manifest_path(&args.out));
    write_manifest(
        &manifest,
        json!({
            "command": "experiment frame-sweep",
            "globals": globals,
            "input": args.input.display().to_string(),
            "target": args.target.display().to_string(),
            "calibration": args.calibration.as_ref().map(|p| p.display().to_string()),
            "label": args.label,
            "windows_ms": args.windows,
            "train_samples": split.train.input.len(),
            "test_samples": split.test.input.len(),
            "epochs": args.epochs,
            "restarts": args.restarts,
            "seed": args.seed,
            "stages": args.stages,
            "output": args.out.display().to_string(),
        }),
    )
}

fn cmd_rate_sweep(args: RateSweepArgs, globals: serde_json::Value) -> Result<()> {
    let cfg = RateSweepConfig {
        periods_s: args.periods.clone(),
        b_values: args.b_values.clone(),
        train_seconds: args.train_seconds,
        test_seconds: args.test_seconds,
        sample_rate: args.sample_rate,
        g1: args.g1,
        g2: args.g2,
        feedback_delay: args.delay,
        stages: args.stages,
        train: TrainConfig {
            learning_rate: args.learning_rate,
            max_epochs: args.epochs,
            restarts: args.restarts,
            seed: args.seed,
            ..Default::default()
        },
    };
    let report = rate_sweep(&cfg)?;
    std::fs::write(&args.out, report.csv())?;
    println!("wrote {} ({} rows)", args.out.display(), report.rows.len());
    let manifest = args.manifest.unwrap_or_else(|| default_manifest_path(&args.out));
    write_manifest(
        &manifest,
        json!({
            "command": "experiment rate-sweep",
            "globals": globals,
            "periods_s": args.periods,
            "b_values": args.b_values,
            "train_seconds": args.train_seconds,
            "test_seconds": args.test_seconds,
            "sample_rate": args.sample_rate,
            "g1": args.g1,
            "g2": args.g2,
            "feedback_delay_samples": args.delay,
            "stages": args.stages,
            "epochs": args.epochs,
            "restarts": args.restarts,
            "seed": args.seed,
            "output": args.out.display().to_string(),
        }),
    )
}

fn cmd_inference_sweep(args: InferenceSweepArgs, globals: serde_json::Value) -> Result<()> {
    let model = ModelFile::load(&args.model)?;
    let input = load_audio(&args.input)?;
    let target = load_audio(&args.target)?;
    let cfg = InferenceSweepConfig { windows_ms: args.windows.clone() };
    let report = inference_sweep(&model, &input, &target, args.offset, &cfg)?;
    std::fs::write(&args.out, report.csv())?;
    println!("wrote {} ({} rows)", args.out.display(), report.rows.len());
    let manifest = args.manifest.unwrap_or_else(|| default_manifest_path(&args.out));
    write_manifest(
        &manifest,
        json!({
            "command": "experiment inference-sweep",
            "globals": globals,
            "model": args.model.display().to_string(),
            "input": args.input.display().to_string(),
            "target": args.target.display().to_string(),
            "offset_samples": args.offset,
            "windows_ms": args.windows,
            "training_frame": frame_doc(&model.hyper.frame),
            "output": args.out.display().to_string(),
        }),
    )
}
