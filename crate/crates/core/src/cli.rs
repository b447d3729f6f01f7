//! Command-line front end: corpus synthesis, training, evaluation, view
//! aggregation, detection on arbitrary screenshots, and benchmarking.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use image::imageops::{self, FilterType};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::GlitchClass;
use crate::corpus::{
    build_corpus, frames_to_tensor, read_manifest, split_by_object, verify_manifest, write_manifest, CorpusConfig,
    CorpusError, CorpusManifest, Split, MANIFEST_FILE,
};
use crate::decision::{
    aggregation_sweep, decide_from_predictions, filter_predictions, fit_confidence, unit_predictions, ConfidenceModel,
    DecisionError, Verdict,
};
use crate::metrics::{argmax, evaluate, Grouping, MetricsError, PredictionRecord, EVAL_BATCH};
use crate::net::{
    count_cost, init_model, load_checkpoint, Architecture, Classifier, ClassifierConfig, InitMode,
    NetError, Parameters, Tensor,
};
use crate::seed::rng_for;
use crate::synth::PlaceholderStyle;
use crate::trainer::{batch_grid, lr_grid, train_on, write_log, GridTable, TrainConfig, TrainData, TrainError};

/// Exit status when `detect` flags at least one glitch.
pub const EXIT_FLAGGED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// How `detect` fits external images to the classifier's input size.
pub const RESIZE_POLICY: &str = "center crop to target aspect, then bilinear resize";

#[derive(Debug, Parser)]
#[command(name = "texglitch", version, about = "Texture-glitch corpora, training and detection")]
pub struct Cli {
    /// Master seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a balanced corpus and split it by object.
    Synth(SynthArgs),
    /// Train a classifier, or sweep learning rates / batch sizes.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a corpus.
    Eval(EvalArgs),
    /// Object-level accuracy as a function of the number of views.
    Aggregate(AggregateArgs),
    /// Classify screenshots; exits with status 1 if any glitch is flagged.
    Detect(DetectArgs),
    /// Measure single-image inference latency.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    pub objects: u32,
    /// Views per object; a multiple of 5.
    #[arg(long, default_value_t = 40)]
    pub views: u32,
    #[arg(long, default_value = "96x96", value_parser = parse_size)]
    pub size: (u32, u32),
    #[arg(long, default_value = "pattern")]
    pub placeholder_style: PlaceholderStyle,
    /// Fraction of objects held out for validation; 0 keeps everything in train.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Seed of the object split; defaults to `--seed`.
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub overwrite: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchKind {
    Shuffle,
    Residual,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "shuffle")]
    pub arch: ArchKind,
    /// Width multiplier of the shuffle family.
    #[arg(long, default_value_t = 0.5)]
    pub width: f64,
    /// Depth of the residual family.
    #[arg(long, default_value_t = 18)]
    pub depth: u32,
}

impl ModelArgs {
    pub fn architecture(&self) -> Architecture {
        match self.arch {
            ArchKind::Shuffle => Architecture::Shuffle { width_multiplier: self.width },
            ArchKind::Residual => Architecture::Residual { depth: self.depth },
        }
    }

    pub fn config(&self, input_size: (u32, u32)) -> ClassifierConfig {
        ClassifierConfig { architecture: self.architecture(), input_size, num_classes: GlitchClass::COUNT, init: InitMode::Random }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Manifest file or corpus directory.
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = TrainConfig::DESK_EPOCHS)]
    pub epochs: usize,
    /// Save an intermediate checkpoint every this many epochs.
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    /// Trailing epochs summarized as mean (std).
    #[arg(long, default_value_t = 20)]
    pub window: usize,
    /// Comma-separated learning rates to sweep instead of a single run.
    #[arg(long, value_delimiter = ',', conflicts_with = "batch_grid")]
    pub lr_grid: Option<Vec<f64>>,
    /// Comma-separated batch sizes to sweep instead of a single run.
    #[arg(long, value_delimiter = ',')]
    pub batch_grid: Option<Vec<usize>>,
    /// Checkpoint path; logs and grid tables are written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "val")]
    pub split: Split,
    /// Groupings echoed to stdout; the report always holds all three.
    #[arg(long, value_delimiter = ',', default_value = "five")]
    pub group: Vec<Grouping>,
    #[arg(long)]
    pub report: PathBuf,
    /// Also write per-sample predictions as JSON lines.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Fit a confidence model on train-split embeddings and save it here.
    #[arg(long)]
    pub fit_confidence: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "val")]
    pub split: Split,
    #[arg(long, value_delimiter = ',', default_value = "1,2,10,20")]
    pub k_list: Vec<usize>,
    #[arg(long)]
    pub confidence: Option<PathBuf>,
    /// JSON report; a markdown table is written beside it.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Image files or directories of images.
    #[arg(long = "in", num_args = 0..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub confidence: Option<PathBuf>,
    /// Glitch calls with confidence below this abstain instead of flagging.
    #[arg(long, default_value_t = 0.0, requires = "confidence")]
    pub tau: f64,
    /// JSON lines, one per input; the summary goes to `<stem>.summary.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Checkpoint to time; without it a freshly initialized model is used.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "96x96", value_parser = parse_size)]
    pub size: (u32, u32),
    #[arg(long, default_value_t = 50)]
    pub iters: usize,
    #[arg(long, default_value_t = 5)]
    pub warmup: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Parses `WxH`, or a single number for a square.
pub fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let parse = |t: &str| t.trim().parse::<u32>().map_err(|_| format!("invalid size `{s}`, expected WxH"));
    let (w, h) = match s.split_once(['x', 'X']) {
        Some((w, h)) => (parse(w)?, parse(h)?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if w == 0 || h == 0 {
        return Err(format!("size `{s}` must be positive"));
    }
    Ok((w, h))
}

fn open_manifest(path: &Path) -> Result<CorpusManifest, CliError> {
    let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    Ok(read_manifest(&file)?)
}

fn write_text(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_text(path, &serde_json::to_string_pretty(value).expect("report serializes"))
}

/// Runs one parsed invocation and returns the process exit status.
pub fn run(cli: Cli) -> Result<u8, CliError> {
    let seed = cli.seed;
    match cli.command {
        Command::Synth(a) => run_synth(&a, seed).map(|_| 0),
        Command::Train(a) => run_train(&a, seed).map(|_| 0),
        Command::Eval(a) => run_eval(&a).map(|_| 0),
        Command::Aggregate(a) => run_aggregate(&a).map(|_| 0),
        Command::Detect(a) => {
            let model = a.confidence.as_deref().map(ConfidenceModel::load).transpose()?;
            let report = run_detect(&a.ckpt, &a.inputs, model.as_ref(), a.tau)?;
            if let Some(path) = &a.report {
                report.write(path)?;
            }
            let s = &report.summary;
            println!(
                "{} inputs, {} flagged, {} errors, {:.1} images/s",
                s.inputs, s.flagged, s.errors, s.images_per_second
            );
            for (name, n) in &s.counts {
                println!("  {name}: {n}");
            }
            Ok(report.exit_code())
        }
        Command::Bench(a) => {
            let record = match &a.ckpt {
                Some(ckpt) => run_bench(ckpt, a.size, a.iters, a.warmup)?,
                None => {
                    let cfg = a.model.config(a.size);
                    let params = init_model(&cfg, seed)?;
                    bench_model(&Classifier::new(cfg)?, &params, a.iters, a.warmup)?
                }
            };
            println!("{}", serde_json::to_string_pretty(&record).expect("record serializes"));
            Ok(0)
        }
    }
}

pub fn run_synth(a: &SynthArgs, seed: u64) -> Result<CorpusManifest, CliError> {
    if !(0.0..1.0).contains(&a.val_fraction) {
        return Err(CliError::Usage(format!("--val-fraction must lie in [0, 1), got {}", a.val_fraction)));
    }
    let cfg = CorpusConfig::new(a.objects, a.views, a.size, a.placeholder_style, seed);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut manifest = build_corpus(&cfg, &a.out, a.overwrite)?;
    if a.val_fraction > 0.0 {
        manifest = split_by_object(&manifest, a.val_fraction, a.split_seed.unwrap_or(seed))?;
        write_manifest(&manifest, &a.out.join(MANIFEST_FILE))?;
    }
    let problems = verify_manifest(&manifest);
    for p in &problems {
        log::error!("{p}");
    }
    if !problems.is_empty() {
        return Err(CorpusError::Parameter(format!("{} manifest violations", problems.len())).into());
    }
    for split in [Split::Train, Split::Val] {
        let per_class: Vec<String> =
            GlitchClass::ALL.iter().map(|&c| format!("{c}={}", manifest.stats.count(split, c))).collect();
        println!("{split}: {} samples ({})", manifest.stats.split_total(split), per_class.join(", "));
    }
    Ok(manifest)
}

pub fn run_train(a: &TrainArgs, seed: u64) -> Result<(), CliError> {
    let manifest = open_manifest(&a.manifest)?;
    let model = a.model.config(manifest.config.image_size);
    model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut base = TrainConfig::desk();
    base.adam.learning_rate = a.lr;
    base.batch_size = a.batch;
    base.epochs = a.epochs;
    base.init_seed = seed;
    base.shuffle_seed = seed;
    base.checkpoint_every = a.checkpoint_every;
    base.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let data = TrainData::load(&manifest)?;

    let grid = match (&a.lr_grid, &a.batch_grid) {
        (Some(rates), _) => Some(("lr-grid", lr_grid(&data, &model, &base, rates, a.window)?)),
        (None, Some(sizes)) => Some(("batch-grid", batch_grid(&data, &model, &base, sizes, a.window)?)),
        (None, None) => None,
    };
    if let Some((tag, table)) = grid {
        write_grid(&table, &a.out, tag)?;
        print!("{}", table.to_markdown());
        return Ok(());
    }

    base.checkpoint_path = Some(a.out.clone());
    let outcome = train_on(&data, &model, &base)?;
    let (csv, summary) = write_log(&outcome.log, &a.out, a.window)?;
    let last = outcome.log.records.last().expect("at least one epoch");
    println!(
        "trained {} for {} epochs: train acc {:.3}, val acc {}",
        model.name(),
        last.epoch,
        last.train_accuracy,
        last.val_accuracy.map_or("n/a".into(), |v| format!("{v:.3}"))
    );
    println!("checkpoint {}, log {}, summary {}", a.out.display(), csv.display(), summary.display());
    Ok(())
}

fn write_grid(table: &GridTable, out: &Path, tag: &str) -> Result<(), CliError> {
    write_text(&out.with_extension(format!("{tag}.md")), &table.to_markdown())?;
    write_text(&out.with_extension(format!("{tag}.csv")), &table.to_csv())?;
    write_json(&out.with_extension(format!("{tag}.json")), table)
}

pub fn run_eval(a: &EvalArgs) -> Result<(), CliError> {
    let manifest = open_manifest(&a.manifest)?;
    let (report, predictions) = evaluate(&a.ckpt, &manifest, a.split)?;
    let written = report.write(&a.report)?;
    if let Some(path) = &a.predictions {
        predictions.write_jsonl(path)?;
    }
    println!("{} split: {} samples, accuracy {}", a.split, report.samples, fmt_opt(report.accuracy));
    for g in &a.group {
        let m = &report.confusion[g];
        println!("{g} grouping, accuracy {}", fmt_opt(report.grouped_accuracy[g]));
        print!("{}", m.to_csv());
    }
    let b = &report.binary;
    println!(
        "binary: precision {}, recall {}, fpr {}",
        fmt_opt(b.precision),
        fmt_opt(b.recall),
        fmt_opt(b.false_positive_rate)
    );
    if let Some(path) = &a.fit_confidence {
        let (_, train) = evaluate(&a.ckpt, &manifest, Split::Train)?;
        fit_confidence(&train)?.save(path)?;
        println!("confidence model {}", path.display());
    }
    log::info!("wrote {} report files", written.len() + 1);
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.4}"))
}

pub fn run_aggregate(a: &AggregateArgs) -> Result<(), CliError> {
    let manifest = open_manifest(&a.manifest)?;
    if a.k_list.is_empty() || a.k_list.contains(&0) {
        return Err(CliError::Usage("--k-list needs positive view counts".into()));
    }
    let (params, config, _) = load_checkpoint(&a.ckpt)?;
    if config.input_size != manifest.config.image_size {
        return Err(MetricsError::InputSize { checkpoint: config.input_size, corpus: manifest.config.image_size }.into());
    }
    let model = a.confidence.as_deref().map(ConfidenceModel::load).transpose()?;
    let net = Classifier::new(config)?;
    let max_k = *a.k_list.iter().max().expect("non-empty");
    let units = unit_predictions(&net, &params, &manifest, a.split, max_k)?;
    let table = aggregation_sweep(&units, &a.k_list, model.as_ref())?;
    if let Some(path) = &a.report {
        write_json(path, &table)?;
        write_text(&path.with_extension("md"), &table.to_markdown())?;
    }
    print!("{}", table.to_markdown());
    Ok(())
}

/// One input of `detect`. Failed inputs carry `error` and nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRecord {
    pub path: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<GlitchClass>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probabilities: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectSummary {
    pub inputs: usize,
    /// Predicted class names, plus `error` for unreadable inputs.
    pub counts: BTreeMap<String, usize>,
    pub flagged: usize,
    pub errors: usize,
    pub tau: f64,
    pub resize_policy: String,
    pub wall_time_s: f64,
    pub images_per_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub records: Vec<DetectRecord>,
    pub summary: DetectSummary,
}

impl DetectReport {
    pub fn exit_code(&self) -> u8 {
        if self.summary.flagged > 0 {
            EXIT_FLAGGED
        } else {
            0
        }
    }

    /// Records to `path` as JSON lines, summary to `<stem>.summary.json`.
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
        for r in &self.records {
            serde_json::to_writer(&mut f, r).expect("record serializes");
            f.write_all(b"\n").map_err(io_err(path))?;
        }
        f.flush().map_err(io_err(path))?;
        write_json(&path.with_extension("summary.json"), &self.summary)
    }
}

fn is_image(path: &Path) -> bool {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("").to_ascii_lowercase();
    let ext_ok = [".png", ".jpg", ".jpeg"].iter().any(|e| name.ends_with(e));
    ext_ok && !name.ends_with(".mask.png")
}

/// Expands directories into their image files (sorted by name, masks
/// skipped); other paths pass through unchanged so that missing files are
/// reported per input.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .map_err(io_err(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && is_image(f))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Crops the largest centered window with the target aspect ratio, then
/// resizes it bilinearly. Images already at the target size are untouched.
pub fn fit_to_input(img: &image::RgbImage, size: (u32, u32)) -> image::RgbImage {
    let (w, h) = img.dimensions();
    let (tw, th) = size;
    let (cw, ch) = if (w as u64) * (th as u64) > (h as u64) * (tw as u64) {
        (((h as u64 * tw as u64 + th as u64 / 2) / th as u64).max(1) as u32, h)
    } else {
        (w, ((w as u64 * th as u64 + tw as u64 / 2) / tw as u64).max(1) as u32)
    };
    let cropped = imageops::crop_imm(img, (w - cw) / 2, (h - ch) / 2, cw, ch).to_image();
    if (cw, ch) == size {
        cropped
    } else {
        imageops::resize(&cropped, tw, th, FilterType::Triangle)
    }
}

fn load_input(path: &Path, size: (u32, u32)) -> Result<Vec<u8>, String> {
    let img = image::open(path).map_err(|e| e.to_string())?.to_rgb8();
    Ok(fit_to_input(&img, size).into_raw())
}

/// Classifies each input independently. Decoding runs on the rayon pool;
/// records keep input order.
pub fn run_detect(
    checkpoint: &Path,
    inputs: &[PathBuf],
    model: Option<&ConfidenceModel>,
    tau: f64,
) -> Result<DetectReport, CliError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(CliError::Usage(format!("--tau must lie in [0, 1], got {tau}")));
    }
    let (params, config, _) = load_checkpoint(checkpoint)?;
    let net = Classifier::new(config)?;
    let size = net.config().input_size;
    let start = Instant::now();
    let paths = collect_inputs(inputs)?;
    let decoded: Vec<Result<Vec<u8>, String>> = paths.par_iter().map(|p| load_input(p, size)).collect();

    let mut records: Vec<DetectRecord> = paths
        .iter()
        .zip(&decoded)
        .map(|(p, d)| DetectRecord {
            path: p.clone(),
            class: None,
            probabilities: Vec::new(),
            confidence: None,
            verdict: None,
            error: d.as_ref().err().cloned(),
        })
        .collect();
    let ok: Vec<usize> = (0..decoded.len()).filter(|&i| decoded[i].is_ok()).collect();
    for chunk in ok.chunks(EVAL_BATCH) {
        let frames: Vec<&[u8]> = chunk.iter().map(|&i| decoded[i].as_deref().expect("decoded")).collect();
        let out = net.forward(&params, &frames_to_tensor(&frames, size))?;
        let d = net.feature_dim();
        for ((k, &i), probs) in chunk.iter().enumerate().zip(out.probability_rows()) {
            let view = PredictionRecord {
                sample_id: paths[i].display().to_string(),
                object_id: i as u32,
                view_id: 0,
                true_class: GlitchClass::Normal,
                predicted: GlitchClass::from_index(argmax(probs)).expect("five-class output"),
                probabilities: probs.to_vec(),
                embedding: out.embedding.data()[k * d..(k + 1) * d].to_vec(),
            };
            let decision = decide_from_predictions(&[&view], 1, model)?;
            let decision = filter_predictions(&[decision], tau)?.remove(0);
            let r = &mut records[i];
            r.class = Some(decision.predicted);
            r.probabilities = decision.probabilities;
            r.confidence = decision.confidence;
            r.verdict = Some(decision.verdict);
        }
    }

    let wall = start.elapsed().as_secs_f64();
    let mut counts = BTreeMap::new();
    for r in &records {
        let key = r.class.map_or_else(|| "error".to_string(), |c| c.to_string());
        *counts.entry(key).or_insert(0) += 1;
    }
    let summary = DetectSummary {
        inputs: records.len(),
        counts,
        flagged: records.iter().filter(|r| r.verdict == Some(Verdict::FlagGlitch)).count(),
        errors: records.iter().filter(|r| r.error.is_some()).count(),
        tau,
        resize_policy: RESIZE_POLICY.into(),
        wall_time_s: wall,
        images_per_second: if wall > 0.0 { ok.len() as f64 / wall } else { 0.0 },
    };
    Ok(DetectReport { records, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub architecture: String,
    pub input_size: (u32, u32),
    pub iterations: usize,
    pub warmup: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub images_per_second: f64,
    pub params: u64,
    pub macs: u64,
}

pub const MIN_BENCH_ITERS: usize = 10;

/// Times single-image eval forwards on a fixed random input.
pub fn bench_model(
    net: &Classifier,
    params: &Parameters<f32>,
    iterations: usize,
    warmup: usize,
) -> Result<BenchRecord, CliError> {
    if iterations < MIN_BENCH_ITERS {
        return Err(CliError::Usage(format!("bench needs at least {MIN_BENCH_ITERS} iterations, got {iterations}")));
    }
    let cfg = net.config();
    let (w, h) = cfg.input_size;
    let mut rng = rng_for("bench", &[w as u64, h as u64]);
    let data: Vec<f32> = (0..3 * w as usize * h as usize).map(|_| rng.random_range(0.0..1.0)).collect();
    let x = Tensor::from_vec(&[1, 3, h as usize, w as usize], data)?;
    for _ in 0..warmup {
        net.forward(params, &x)?;
    }
    let mut ms: Vec<f64> = (0..iterations)
        .map(|_| {
            let t = Instant::now();
            net.forward(params, &x).map(|_| t.elapsed().as_secs_f64() * 1e3)
        })
        .collect::<Result<_, _>>()?;
    ms.sort_by(f64::total_cmp);
    let n = ms.len();
    let median = if n % 2 == 1 { ms[n / 2] } else { 0.5 * (ms[n / 2 - 1] + ms[n / 2]) };
    let p95 = ms[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1];
    let cost = count_cost(cfg)?;
    Ok(BenchRecord {
        architecture: cfg.architecture.name(),
        input_size: cfg.input_size,
        iterations,
        warmup,
        median_ms: median,
        p95_ms: p95,
        images_per_second: 1e3 / median,
        params: cost.params,
        macs: cost.macs,
    })
}

/// Benchmarks a checkpoint's weights at `size`; the network is fully
/// convolutional up to global pooling, so any size the family accepts works.
pub fn run_bench(checkpoint: &Path, size: (u32, u32), iterations: usize, warmup: usize) -> Result<BenchRecord, CliError> {
    let (params, mut config, _) = load_checkpoint(checkpoint)?;
    config.input_size = size;
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    bench_model(&Classifier::new(config)?, &params, iterations, warmup)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_parse() {
        assert_eq!(parse_size("96x64"), Ok((96, 64)));
        assert_eq!(parse_size("128"), Ok((128, 128)));
        assert!(parse_size("0x4").is_err());
        assert!(parse_size("ax4").is_err());
    }

    #[test]
    fn canonical_flags_parse() {
        let cli = Cli::try_parse_from([
            "texglitch", "--seed", "7", "synth", "--objects", "50", "--views", "40", "--size", "96x96",
            "--placeholder-style", "white", "--out", "corpus",
        ])
        .unwrap();
        assert_eq!(cli.seed, 7);
        let Command::Synth(a) = cli.command else { panic!("expected synth") };
        assert_eq!((a.objects, a.views, a.size, a.placeholder_style), (50, 40, (96, 96), PlaceholderStyle::White));

        let cli = Cli::try_parse_from(["texglitch", "aggregate", "--ckpt", "m.ckpt", "--manifest", "c", "--k-list", "1,2,10,20"]).unwrap();
        let Command::Aggregate(a) = cli.command else { panic!("expected aggregate") };
        assert_eq!(a.k_list, vec![1, 2, 10, 20]);

        let cli = Cli::try_parse_from(["texglitch", "eval", "--ckpt", "m", "--manifest", "c", "--split", "val", "--group", "binary", "--report", "r.json"]).unwrap();
        let Command::Eval(a) = cli.command else { panic!("expected eval") };
        assert_eq!(a.group, vec![Grouping::Binary]);

        let cli = Cli::try_parse_from(["texglitch", "train", "--manifest", "c", "--arch", "residual", "--out", "m.ckpt"]).unwrap();
        let Command::Train(a) = cli.command else { panic!("expected train") };
        assert_eq!((a.epochs, a.batch, a.lr), (30, 32, 1e-4));
        assert!(matches!(a.model.architecture(), Architecture::Residual { depth: 18 }));
    }

    #[test]
    fn usage_errors_exit_with_two() {
        let err = Cli::try_parse_from(["texglitch", "synth", "--objects", "many", "--out", "x"]).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE as i32);
        let err = Cli::try_parse_from(["texglitch", "detect", "--in", "a.png", "--tau", "0.5", "--ckpt", "m"]).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE as i32);
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
    }

    #[test]
    fn center_crop_keeps_the_middle() {
        // 30×10: red 10-column bands on both sides, green center.
        let img = image::RgbImage::from_fn(30, 10, |x, _| if (10..20).contains(&x) { image::Rgb([0, 255, 0]) } else { image::Rgb([255, 0, 0]) });
        let out = fit_to_input(&img, (10, 10));
        assert!(out.pixels().all(|p| p.0 == [0, 255, 0]));
        let tall = image::RgbImage::from_fn(8, 24, |_, y| image::Rgb([y as u8, 0, 0]));
        let out = fit_to_input(&tall, (4, 4));
        assert_eq!(out.dimensions(), (4, 4));
        // The centered 8×8 window covers rows 8..16.
        assert!(out.pixels().all(|p| (8..16).contains(&p.0[0])));
        let same = image::RgbImage::from_fn(6, 4, |x, y| image::Rgb([x as u8, y as u8, 7]));
        assert_eq!(fit_to_input(&same, (6, 4)), same);
    }

    #[test]
    fn mask_files_are_not_inputs() {
        assert!(is_image(Path::new("images/o0001_v002.png")));
        assert!(is_image(Path::new("shot.JPG")));
        assert!(!is_image(Path::new("images/o0001_v002.mask.png")));
        assert!(!is_image(Path::new("notes.txt")));
    }
}
