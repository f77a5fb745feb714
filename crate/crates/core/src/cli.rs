//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numerical
//! divergence.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::classify::{form_image, cnn_train, load_model, save_model, GroupScheme, TrainConfig};
use crate::detect::{load_event_dir, save_events};
use crate::error::{Error, Result};
use crate::eval::{
    attach_labels, classify_events, detect_stage, load_predictions, load_series, preprocess_stage, render_svg,
    save_predictions, save_report, write_series, EvalTally, PipelineConfig, Series,
};
use crate::preprocess::{FilterMode, PreprocessConfig};
use crate::synth::{generate_trace, ScenarioSource};
use crate::trace::{load_labels, load_trace, save_labels, save_trace, Lane};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "csi-traffic", version, about = "Vehicle detection and classification from WiFi CSI traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise a labelled trace from a scenario or traffic-plan file.
    Generate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Output directory; receives trace.csi, trace.labels.jsonl, scenario.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Filter, reduce, and sanitise a trace; writes the per-pair streams as CSV.
    Preprocess {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "lowpass")]
        filter_mode: FilterMode,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=30))]
        pca_k: u8,
    },
    /// Detect vehicles; writes an event file and its binary sidecar.
    Detect {
        #[arg(long)]
        trace: PathBuf,
        /// Ground-truth labels to attach to the matching events.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        omega: Option<usize>,
        #[arg(long)]
        delta1: Option<usize>,
        #[arg(long)]
        delta2: Option<usize>,
    },
    /// Train the CNN on labelled events.
    Train(TrainArgs),
    /// Classify every event in a directory.
    Classify {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Second model, e.g. the other lane's.
        #[arg(long, requires = "fuse")]
        model2: Option<PathBuf>,
        #[arg(long, value_enum)]
        fuse: Option<Fusion>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        /// A label file, or a directory holding `<source>.labels.jsonl` per
        /// event source.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = "five")]
        scheme: GroupScheme,
        #[arg(long)]
        report: PathBuf,
        /// Resample a 30% validation subset this many times.
        #[arg(long)]
        repeat: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render a CSV series file as an SVG line chart.
    Plot {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fusion {
    #[value(name = "max-prob")]
    MaxProb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LaneFilter {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    All,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub lane: LaneFilter,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    /// Stop after this many epochs without a better validation accuracy.
    #[arg(long)]
    pub patience: Option<usize>,
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_divergence() {
        EXIT_DIVERGENCE
    } else {
        EXIT_DATA
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate { scenario, seed, out } => generate(&scenario, seed, &out),
        Command::Preprocess {
            trace,
            out,
            filter_mode,
            pca_k,
        } => {
            let mut config = PreprocessConfig::default();
            config.filter.mode = filter_mode;
            config.pca.k = pca_k as usize;
            preprocess(&trace, &out, &config)
        }
        Command::Detect {
            trace,
            labels,
            out,
            omega,
            delta1,
            delta2,
        } => {
            let mut config = PipelineConfig::default();
            let d = &mut config.detector;
            d.omega = omega.unwrap_or(d.omega);
            d.delta1 = delta1.unwrap_or(d.delta1);
            d.delta2 = delta2.unwrap_or(d.delta2);
            detect(&trace, labels.as_deref(), &out, &config)
        }
        Command::Train(args) => train(&args),
        Command::Classify {
            events,
            model,
            model2,
            fuse: _,
            out,
        } => classify(&events, &model, model2.as_deref(), &out),
        Command::Evaluate {
            pred,
            truth,
            scheme,
            report,
            repeat,
            seed,
        } => evaluate(&pred, &truth, scheme, &report, repeat, seed),
        Command::Plot { series, out, title } => {
            let s = load_series(&series)?;
            let title = title.unwrap_or_else(|| series.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
            write_file(&out, render_svg(&s, &title)?)
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn generate(scenario: &Path, seed: u64, out: &Path) -> Result<()> {
    let scenario = ScenarioSource::load(scenario)?.with_seed(seed).into_scenario()?;
    let (trace, labels) = generate_trace(&scenario)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    save_trace(&trace, out.join("trace.csi"))?;
    save_labels(&labels, out.join("trace.labels.jsonl"))?;
    let mut json = serde_json::to_string_pretty(&scenario)?;
    json.push('\n');
    write_file(&out.join("scenario.json"), json)?;
    println!("{} packets, {} vehicles -> {}", trace.n_packets(), labels.len(), out.display());
    Ok(())
}

fn preprocess(trace: &Path, out: &Path, config: &PreprocessConfig) -> Result<()> {
    let trace = load_trace(trace)?;
    let streams = preprocess_stage(&trace, config)?;
    let fs_hz = streams.sample_rate_hz;
    let mut lines = Vec::new();
    for (i, a) in streams.amplitude.iter().enumerate() {
        lines.push((format!("amplitude_{i}"), a.clone()));
    }
    for (i, p) in streams.phase.iter().enumerate() {
        lines.push((format!("phase_{i}"), p.clone()));
    }
    let series = Series {
        x_label: "time_s".into(),
        x: (0..streams.n_packets()).map(|i| i as f64 / fs_hz).collect(),
        lines,
    };
    write_file(out, write_series(&series)?)?;
    println!("{} packets x {} pairs -> {}", streams.n_packets(), streams.n_pairs(), out.display());
    Ok(())
}

fn detect(trace: &Path, labels: Option<&Path>, out: &Path, config: &PipelineConfig) -> Result<()> {
    let trace = load_trace(trace)?;
    let mut events = detect_stage(&trace, config)?;
    if let Some(labels) = labels {
        let labels = load_labels(labels)?;
        for l in &labels {
            l.validate(Some(trace.n_packets()))?;
        }
        attach_labels(&mut events, &labels);
    }
    save_events(&events, out)?;
    println!("{} events -> {}", events.len(), out.display());
    Ok(())
}

fn train(args: &TrainArgs) -> Result<()> {
    let lane = match args.lane {
        LaneFilter::One => Some(Lane::One),
        LaneFilter::Two => Some(Lane::Two),
        LaneFilter::All => None,
    };
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (_, events) in load_event_dir(&args.events)? {
        for e in events {
            let Some(class) = e.class else { continue };
            if lane.is_some() && e.lane != lane {
                continue;
            }
            images.push(form_image(&e)?);
            labels.push(class);
        }
    }
    if images.is_empty() {
        return Err(Error::Data(format!("no labelled events in {}", args.events.display())));
    }
    let config = TrainConfig {
        learning_rate: args.lr,
        momentum: args.momentum,
        epochs: args.epochs,
        batch_size: args.batch,
        patience: args.patience,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let outcome = cnn_train(&images, &labels, &config)?;
    save_model(&outcome.model, &args.out)?;
    println!(
        "{} events, {} epochs run, best validation accuracy {:.4} at epoch {} -> {}",
        images.len(),
        outcome.history.len(),
        outcome.best_val_accuracy,
        outcome.best_epoch,
        args.out.display()
    );
    Ok(())
}

fn classify(events: &Path, model: &Path, model2: Option<&Path>, out: &Path) -> Result<()> {
    let first = load_model(model)?;
    let second = model2.map(load_model).transpose()?;
    let mut models = vec![&first];
    models.extend(second.as_ref());
    let mut preds = Vec::new();
    for (source, evs) in load_event_dir(events)? {
        preds.extend(classify_events(&evs, &models, &source)?);
    }
    save_predictions(&preds, out)?;
    println!("{} predictions -> {}", preds.len(), out.display());
    Ok(())
}

fn evaluate(pred: &Path, truth: &Path, scheme: GroupScheme, report: &Path, repeat: Option<usize>, seed: u64) -> Result<()> {
    let preds = load_predictions(pred)?;
    let mut by_source: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for p in &preds {
        by_source.entry(p.source.as_str()).or_default().push(p.clone());
    }
    let mut tally = EvalTally::default();
    if truth.is_dir() {
        // Every label file counts, including traces with no predictions.
        let mut sources = BTreeMap::new();
        for entry in fs::read_dir(truth).map_err(|e| Error::io(truth, e))? {
            let path = entry.map_err(|e| Error::io(truth, e))?.path();
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            if let Some(source) = name.strip_suffix(".labels.jsonl") {
                sources.insert(source.to_string(), path);
            }
        }
        if let Some(missing) = by_source.keys().find(|s| !sources.contains_key(**s)) {
            return Err(Error::Data(format!("no {missing}.labels.jsonl in {}", truth.display())));
        }
        for (source, path) in &sources {
            let labels = load_labels(path)?;
            tally.add(by_source.get(source.as_str()).map_or(&[][..], |v| &v[..]), &labels);
        }
    } else {
        if by_source.len() > 1 {
            return Err(Error::Data(format!(
                "predictions come from {} sources; pass a truth directory",
                by_source.len()
            )));
        }
        let labels = load_labels(truth)?;
        tally.add(&preds, &labels);
    }
    let mut r = tally.report(scheme)?;
    if let Some(repeats) = repeat {
        r.repeat = Some(tally.repeat(scheme, repeats, 0.3, seed)?);
    }
    save_report(&r, report)?;
    let acc = r.classification_accuracy.map_or("n/a".to_string(), |a| format!("{:.4}", a));
    println!(
        "detected {}/{} ({:.4}), {} false positives, {scheme} accuracy {acc} -> {}",
        r.n_detected,
        r.n_passing,
        r.detection_accuracy,
        r.n_false_positive,
        report.display()
    );
    Ok(())
}
