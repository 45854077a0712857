//! `drowsy`: simulate, extract, train, run, evaluate and compare.

mod config;
mod manifest;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use drowsy_core::baseline::BaselineConfig;
use drowsy_core::eval::{compare_traces, evaluate, EvalOptions};
use drowsy_core::features::{
    export_series, extract_samples, import_series, windows, BehaviorSample,
};
use drowsy_core::ingest::read_detection_log;
use drowsy_core::lstm::{
    load_checkpoint, save_checkpoint, train, AlarmThreshold, LabeledSequence, LstmModel,
    TrainConfig,
};
use drowsy_core::pipeline::{self, JsonLinesSink, Mode, PipelineConfig};
use drowsy_core::simulator::{
    generate_frames, majority_label, parse_ground_truth, RegimeParams, Scenario,
};
use drowsy_core::Error;

use config::ConfigFile;
use manifest::RunManifest;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => CliError::Usage(e.to_string()),
            Error::NonFiniteLoss { .. } | Error::Sink(_) => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "drowsy",
    version,
    about = "Driver drowsiness detection from eye-closure and yawn signals"
)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key = value configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a detection log and per-sample ground truth.
    Simulate {
        #[arg(long)]
        scenarios: Option<usize>,
        #[arg(long)]
        scenario_ms: Option<u64>,
        #[arg(long)]
        fps: Option<u32>,
    },
    /// Turn a detection log into a closure/yawn series.
    Extract {
        #[arg(long)]
        log: PathBuf,
    },
    /// Train the LSTM from a series and its ground truth.
    Train {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        hidden_dim: Option<usize>,
        /// Keep every n-th window.
        #[arg(long)]
        window_stride: Option<usize>,
    },
    /// Stream a detection log through the two-stage pipeline.
    Run {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Pace by timestamps and drop on overload instead of blocking.
        #[arg(long)]
        realtime: bool,
        #[arg(long)]
        queue_capacity: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Window-level metrics and episode lead times for both methods.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Side-by-side per-sample table with divergence flags.
    Compare {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Input {
    /// Detection log (JSON lines).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Closure/yawn series.
    #[arg(long)]
    series: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("drowsy: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            ConfigFile::parse(&text)?
        }
        None => ConfigFile::default(),
    };
    let seed = file.resolve("seed", cli.seed, 0u64)?;
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| CliError::Internal(format!("{}: {e}", cli.out_dir.display())))?;

    let name = match &cli.command {
        Command::Simulate { .. } => "simulate",
        Command::Extract { .. } => "extract",
        Command::Train { .. } => "train",
        Command::Run { .. } => "run",
        Command::Eval { .. } => "eval",
        Command::Compare { .. } => "compare",
    };
    let mut m = RunManifest::new(name, seed);
    if let Some(p) = &cli.config {
        m.set("config_file", p);
    }
    let out = cli.out_dir.as_path();
    let result = match cli.command {
        Command::Simulate {
            scenarios,
            scenario_ms,
            fps,
        } => simulate(&file, &mut m, out, seed, scenarios, scenario_ms, fps),
        Command::Extract { log } => extract(&mut m, out, &log),
        Command::Train {
            series,
            truth,
            epochs,
            batch_size,
            learning_rate,
            hidden_dim,
            window_stride,
        } => {
            let cfg = TrainConfig {
                epochs: file.resolve("epochs", epochs, 100)?,
                batch_size: file.resolve("batch_size", batch_size, 64)?,
                learning_rate: file.resolve("learning_rate", learning_rate, 0.05)?,
                momentum: file.resolve("momentum", None, 0.9)?,
                clip_norm: Some(file.resolve("clip_norm", None, 5.0)?),
                hidden_dim: file.resolve("hidden_dim", hidden_dim, 16)?,
                validation_fraction: file.resolve("validation_fraction", None, 0.1)?,
                seed,
                ..TrainConfig::default()
            };
            let stride = file.resolve("window_stride", window_stride, 1usize)?;
            train_cmd(&mut m, out, &series, &truth, cfg, stride)
        }
        Command::Run {
            model,
            log,
            realtime,
            queue_capacity,
            threshold,
        } => {
            let cfg = PipelineConfig {
                queue_capacity: file.resolve("queue_capacity", queue_capacity, 256)?,
                probability_threshold: file.resolve("threshold", threshold, 0.5)?,
                stride: file.resolve("stride", None, 1)?,
                mode: if realtime {
                    Mode::Realtime
                } else {
                    Mode::Replay
                },
                baseline: baseline_config(&file)?,
                ..PipelineConfig::default()
            };
            run_cmd(&mut m, out, &model, &log, cfg)
        }
        Command::Eval {
            model,
            input,
            truth,
            threshold,
        } => {
            let opts = eval_options(&file, threshold)?;
            eval_cmd(&mut m, out, &model, &input, &truth, opts)
        }
        Command::Compare {
            model,
            input,
            truth,
            threshold,
        } => {
            let opts = eval_options(&file, threshold)?;
            compare_cmd(&mut m, out, &model, &input, truth.as_deref(), opts)
        }
    };
    let status = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => e.to_string(),
    };
    m.finish(out, &status)?;
    result
}

fn baseline_config(file: &ConfigFile) -> Result<BaselineConfig, CliError> {
    let d = BaselineConfig::default();
    Ok(BaselineConfig {
        default_threshold_ms: file.resolve("default_threshold_ms", None, d.default_threshold_ms)?,
        sensitized_threshold_ms: file.resolve(
            "sensitized_threshold_ms",
            None,
            d.sensitized_threshold_ms,
        )?,
        yawn_memory_ms: file.resolve("yawn_memory_ms", None, d.yawn_memory_ms)?,
    })
}

fn eval_options(file: &ConfigFile, threshold: Option<f64>) -> Result<EvalOptions, CliError> {
    Ok(EvalOptions {
        threshold: AlarmThreshold::new(file.resolve("threshold", threshold, 0.5)?)?,
        baseline: baseline_config(file)?,
    })
}

fn simulate(
    file: &ConfigFile,
    m: &mut RunManifest,
    out: &Path,
    seed: u64,
    scenarios: Option<usize>,
    scenario_ms: Option<u64>,
    fps: Option<u32>,
) -> Result<(), CliError> {
    let n = file.resolve("scenarios", scenarios, 10usize)?;
    let ms = file.resolve("scenario_ms", scenario_ms, 30_000u64)?;
    let fps = file.resolve("fps", fps, 30u32)?;
    if n == 0 {
        return Err(CliError::Usage("--scenarios must be at least 1".into()));
    }
    m.set("scenarios", n);
    m.set("scenario_ms", ms);
    m.set("fps", fps);
    let params = RegimeParams {
        seed,
        ..RegimeParams::default()
    };
    m.set("regime_params", &params);
    let stream = generate_frames(&Scenario::session(n, ms)?, &params, fps)?;
    m.write_output(out, "frames.jsonl", stream.log_text().as_bytes())?;
    m.write_output(out, "truth.txt", stream.truth_text().as_bytes())?;
    println!(
        "{} frames, {} samples",
        stream.frames.len(),
        stream.labels.len()
    );
    Ok(())
}

fn read_log(m: &mut RunManifest, path: &Path) -> Result<Vec<BehaviorSample>, CliError> {
    m.input(path)?;
    let f = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let frames = read_detection_log(BufReader::new(f))?;
    Ok(extract_samples(&frames)?)
}

fn read_series(m: &mut RunManifest, path: &Path) -> Result<Vec<BehaviorSample>, CliError> {
    m.input(path)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(import_series(&text)?)
}

fn read_input(m: &mut RunManifest, input: &Input) -> Result<Vec<BehaviorSample>, CliError> {
    match (&input.log, &input.series) {
        (Some(p), _) => read_log(m, p),
        (_, Some(p)) => read_series(m, p),
        _ => Err(CliError::Usage(
            "one of --log or --series is required".into(),
        )),
    }
}

fn read_truth(
    m: &mut RunManifest,
    path: &Path,
    n: usize,
) -> Result<Vec<drowsy_core::simulator::Regime>, CliError> {
    m.input(path)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let labels = parse_ground_truth(&text)?;
    if labels.len() != n {
        return Err(CliError::Data(format!(
            "{} samples but {} ground-truth labels",
            n,
            labels.len()
        )));
    }
    Ok(labels)
}

fn read_model(m: &mut RunManifest, path: &Path) -> Result<LstmModel, CliError> {
    m.input(path)?;
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(load_checkpoint(&bytes)?)
}

fn extract(m: &mut RunManifest, out: &Path, log: &Path) -> Result<(), CliError> {
    let samples = read_log(m, log)?;
    m.write_output(out, "series.txt", export_series(&samples).as_bytes())?;
    println!("{} samples", samples.len());
    Ok(())
}

fn train_cmd(
    m: &mut RunManifest,
    out: &Path,
    series: &Path,
    truth: &Path,
    cfg: TrainConfig,
    window_stride: usize,
) -> Result<(), CliError> {
    if window_stride == 0 {
        return Err(CliError::Usage("--window-stride must be at least 1".into()));
    }
    m.set("train", &cfg);
    m.set("window_stride", window_stride);
    let samples = read_series(m, series)?;
    let labels = read_truth(m, truth, samples.len())?;
    let dataset: Vec<LabeledSequence> = windows(&samples)?
        .iter()
        .enumerate()
        .step_by(window_stride)
        .map(|(k, w)| {
            LabeledSequence::from_window(
                w,
                majority_label(&labels[k..k + w.samples().len()]).is_drowsy(),
            )
        })
        .collect();
    let outcome = train(&dataset, &cfg)?;
    m.write_output(out, "model.ckpt", &save_checkpoint(&outcome.model))?;
    let mut trace = String::from("epoch\ttrain_loss\tval_loss\tval_accuracy\tgrad_norm\n");
    for e in &outcome.trace {
        trace.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
            e.epoch, e.train_loss, e.val_loss, e.val_accuracy, e.grad_norm
        ));
    }
    m.write_output(out, "loss_trace.tsv", trace.as_bytes())?;
    println!(
        "{} windows ({} train, {} validation), best epoch {}",
        dataset.len(),
        outcome.train_size,
        outcome.val_size,
        outcome.best_epoch
    );
    Ok(())
}

fn run_cmd(
    m: &mut RunManifest,
    out: &Path,
    model: &Path,
    log: &Path,
    cfg: PipelineConfig,
) -> Result<(), CliError> {
    m.set("pipeline", &cfg);
    let model = read_model(m, model)?;
    m.input(log)?;
    let f = File::open(log).map_err(|e| CliError::Data(format!("{}: {e}", log.display())))?;
    let source = drowsy_core::ingest::parse_detection_log(BufReader::new(f));
    let events_path = out.join("events.jsonl");
    let events = File::create(&events_path)
        .map_err(|e| CliError::Internal(format!("{}: {e}", events_path.display())))?;
    let mut sink = JsonLinesSink::new(std::io::BufWriter::new(events));
    let result = pipeline::run(&cfg, source, &model, &mut sink);
    drop(sink);
    m.record_output(&events_path)?;
    let summary = match &result {
        Ok(s) => s.clone(),
        Err(e) => e.summary.clone(),
    };
    m.write_output(out, "summary.json", (summary.to_json() + "\n").as_bytes())?;
    println!("{}", summary.to_json());
    result.map(|_| ()).map_err(|e| e.error.into())
}

fn eval_cmd(
    m: &mut RunManifest,
    out: &Path,
    model: &Path,
    input: &Input,
    truth: &Path,
    opts: EvalOptions,
) -> Result<(), CliError> {
    m.set("threshold", opts.threshold.value());
    m.set("baseline", opts.baseline);
    let model = read_model(m, model)?;
    let samples = read_input(m, input)?;
    let labels = read_truth(m, truth, samples.len())?;
    let report = evaluate(&model, &samples, &labels, &opts)?;
    let text = report.to_string();
    m.write_output(out, "report.txt", text.as_bytes())?;
    m.write_output(out, "report.json", report.to_json().as_bytes())?;
    let table = compare_traces(&model, &samples, &opts)?;
    m.write_output(out, "plot.tsv", table.to_tsv(Some(&labels)).as_bytes())?;
    print!("{text}");
    Ok(())
}

fn compare_cmd(
    m: &mut RunManifest,
    out: &Path,
    model: &Path,
    input: &Input,
    truth: Option<&Path>,
    opts: EvalOptions,
) -> Result<(), CliError> {
    m.set("threshold", opts.threshold.value());
    m.set("baseline", opts.baseline);
    let model = read_model(m, model)?;
    let samples = read_input(m, input)?;
    let labels = match truth {
        Some(p) => Some(read_truth(m, p, samples.len())?),
        None => None,
    };
    let table = compare_traces(&model, &samples, &opts)?;
    m.write_output(
        out,
        "compare.tsv",
        table.to_tsv(labels.as_deref()).as_bytes(),
    )?;
    use drowsy_core::eval::Divergence::*;
    println!(
        "samples {}  early_warning {}  lstm_persists {}  baseline_only {}",
        table.rows.len(),
        table.count(EarlyWarning),
        table.count(LstmPersists),
        table.count(BaselineOnly)
    );
    Ok(())
}
