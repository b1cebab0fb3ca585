//! `pgnaa`: synthetic libraries, sampling, model training and accuracy
//! benchmarks for prompt-gamma alloy classification.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use pgnaa_core::classifiers::{Classifier, ClassifierKind};
use pgnaa_core::cvae::{Cvae, TrainConfig};
use pgnaa_core::experiment::{
    accuracy, compare_detectors, run_time_sweep, ExperimentConfig, GeneratorSpec, LibrarySource,
};
use pgnaa_core::io::{load_model, read_dataset, read_spectrum_csv, save_model, write_dataset, write_library};
use pgnaa_core::preprocess::SpectrumTransform;
use pgnaa_core::sampling::{build_dataset, Mode};
use pgnaa_core::synth::{DetectorResponse, MaterialKind, TemplateSet, DEFAULT_LIBRARY_SEED, LONG_TERM_SECONDS};
use pgnaa_core::{DetectorProfile, Error};

use config::{config_error, read_config, ConfigArgs, ConfigError};

#[derive(Parser)]
#[command(name = "pgnaa", version, about)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a built-in (or custom) template set as a long-term library.
    GenSynth(GenSynthArgs),
    /// Draw short-term spectra from a library.
    Sample(SampleArgs),
    /// Fit a classifier on a dataset directory and save it.
    Train(TrainArgs),
    /// Label spectrum CSV files with a saved model.
    Classify(ClassifyArgs),
    /// Train a CVAE on a dataset directory.
    TrainCvae(TrainCvaeArgs),
    /// Generate spectra from a trained CVAE.
    Generate(GenerateArgs),
    /// Accuracy versus measurement time.
    Bench(BenchArgs),
    /// Accuracy curves of an HPGe and a CeBr3 library side by side.
    CompareDetectors(CompareArgs),
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(long, default_value = "aluminium")]
    material: String,
    #[arg(long, default_value = "hpge-aluminium-block")]
    profile: String,
    /// Template set JSON replacing the built-in one.
    #[arg(long, value_name = "FILE")]
    templates: Option<PathBuf>,
    /// Long-term measurement duration.
    #[arg(long, default_value_t = LONG_TERM_SECONDS)]
    seconds: f64,
    #[arg(long)]
    counts_per_second: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_LIBRARY_SEED)]
    seed: u64,
    #[arg(short, long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Train,
    Test,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Measurement time in seconds.
    #[arg(short, long)]
    time: f64,
    /// Spectra per alloy; defaults to the config's n_train (or n_test).
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value = "train")]
    mode: ModeArg,
    #[arg(short, long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Dataset directory (or its manifest.json).
    #[arg(short, long, value_name = "DIR")]
    data: PathBuf,
    #[arg(short, long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(short, long, value_name = "FILE")]
    model: PathBuf,
    /// Labeled dataset to score; prints the accuracy.
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Spectrum CSV files.
    spectra: Vec<PathBuf>,
}

#[derive(Args)]
struct TrainCvaeArgs {
    /// Config whose `generator` section holds the CVAE settings.
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(short, long, value_name = "DIR")]
    data: PathBuf,
    #[arg(short, long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden_units: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(short, long, value_name = "FILE")]
    model: PathBuf,
    /// Spectra per class.
    #[arg(short, long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(short, long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Result CSV; printed to stdout when omitted.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// JSON mirror of the result table.
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// HPGe experiment; defaults to the shared config on hpge-aluminium-chips.
    #[arg(long, value_name = "FILE")]
    hpge_config: Option<PathBuf>,
    /// CeBr3 experiment; defaults to the shared config on cebr-aluminium-chips.
    #[arg(long, value_name = "FILE")]
    cebr_config: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

/// Outcome of a command that completed.
enum Status {
    Done,
    Partial,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Partial) => {
            eprintln!("warning: some repeats failed; the table is partial");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<ConfigError>().is_some()
            || matches!(
                c.downcast_ref::<Error>(),
                Some(
                    Error::InvalidConfig(_)
                        | Error::OutOfRange { .. }
                        | Error::MismatchedTimeGrids
                        | Error::Version { .. }
                        | Error::UnknownLabel(_)
                )
            )
    })
}

fn run(cmd: Command) -> Result<Status> {
    match cmd {
        Command::GenSynth(a) => gen_synth(a),
        Command::Sample(a) => sample(a),
        Command::Train(a) => train(a),
        Command::Classify(a) => classify(a),
        Command::TrainCvae(a) => train_cvae(a),
        Command::Generate(a) => generate(a),
        Command::Bench(a) => bench(a),
        Command::CompareDetectors(a) => compare(a),
    }
}

fn gen_synth(a: GenSynthArgs) -> Result<Status> {
    let kind: MaterialKind = a.material.parse().map_err(|e: Error| config_error(e.to_string()))?;
    let mut profile = DetectorProfile::by_name(&a.profile)
        .ok_or_else(|| config_error(format!("unknown detector profile {:?}", a.profile)))?;
    if let Some(c) = a.counts_per_second {
        profile.counts_per_second = c;
        profile.validate()?;
    }
    let set = match &a.templates {
        Some(p) => {
            let raw = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<TemplateSet>(&raw).map_err(|e| config_error(format!("{}: {e}", p.display())))?
        }
        None => TemplateSet::builtin(kind),
    };
    let response = DetectorResponse::for_profile(&profile);
    let lib = set.render_library(&response, &profile, a.seconds, a.seed)?;
    write_library(&a.out, &lib, Some(&set.material))?;
    info!("wrote {} alloys to {}", lib.len(), a.out.display());
    Ok(Status::Done)
}

fn sample(a: SampleArgs) -> Result<Status> {
    let cfg = a.cfg.resolve()?;
    let (lib, _) = cfg.load_library()?;
    let (mode, default_n) = match a.mode {
        ModeArg::Train => (Mode::Train, cfg.n_train),
        ModeArg::Test => (Mode::Test, cfg.n_test),
    };
    let n = a.n.unwrap_or(default_n);
    let data = build_dataset(&lib, a.time, n, cfg.seed, mode, mode.stream())?;
    write_dataset(&a.out, &data, None)?;
    info!("wrote {} spectra to {}", data.len(), a.out.display());
    Ok(Status::Done)
}

/// The per-spectrum part of the configured preprocessing chain.
fn transform_for(cfg: &ExperimentConfig) -> Result<SpectrumTransform> {
    if cfg.preprocessing.is_identity() {
        return Ok(SpectrumTransform::default());
    }
    if cfg.preprocessing.escape_peaks.is_some() {
        warn!("escape-peak weighting applies to benchmark MLC references only; ignored here");
    }
    let (lib, _) = cfg.load_library()?;
    Ok(cfg.preprocessing.prepare(&lib)?.transform().clone())
}

fn train(a: TrainArgs) -> Result<Status> {
    let cfg = a.cfg.resolve()?;
    if cfg.classifiers.len() > 1 {
        info!("several classifiers configured; training the first");
    }
    let spec = &cfg.classifiers[0];
    let transform = transform_for(&cfg)?;
    let data = read_dataset(&a.data)?.map_spectra(|s| transform.apply(s))?;
    let model = spec.fit(&data)?;
    let manifest = if a.data.extension().is_some_and(|e| e == "json") {
        a.data.clone()
    } else {
        a.data.join(pgnaa_core::io::MANIFEST)
    };
    let manifest = std::path::absolute(&manifest).unwrap_or(manifest);
    let needs_data = matches!(spec.kind(), ClassifierKind::Knn | ClassifierKind::Rnc);
    save_model(&a.out, &model, &transform, needs_data.then_some(manifest.as_path()))?;
    info!("{} fitted on {} spectra", spec.kind().short_name(), data.len());
    Ok(Status::Done)
}

fn classify(a: ClassifyArgs) -> Result<Status> {
    if a.spectra.is_empty() && a.data.is_none() {
        bail!(config_error("nothing to classify: pass spectrum files or --data"));
    }
    let (model, transform) = load_model(&a.model)?;
    let clf = model.as_classifier();
    for path in &a.spectra {
        let s = transform.apply(&read_spectrum_csv(path)?)?;
        println!("{},{}", path.display(), clf.predict_label(&s)?);
    }
    if let Some(dir) = &a.data {
        let data = read_dataset(dir)?;
        let spectra = data.spectra().iter().map(|s| transform.apply(s)).collect::<pgnaa_core::Result<Vec<_>>>()?;
        let pred = predictions_by_name(clf, &spectra, data.classes())?;
        println!("accuracy,{}", accuracy(&pred, data.labels())?);
    }
    Ok(Status::Done)
}

/// Predictions as indices into `classes`, which may order labels
/// differently from the model.
fn predictions_by_name(clf: &dyn Classifier, spectra: &[pgnaa_core::Spectrum], classes: &[String]) -> Result<Vec<usize>> {
    let map: Vec<Option<usize>> = clf.classes().iter().map(|c| classes.iter().position(|d| d == c)).collect();
    clf.predict_batch(spectra)?
        .into_iter()
        // Classes unknown to the dataset can never be correct.
        .map(|p| Ok(map[p].unwrap_or(usize::MAX)))
        .collect()
}

fn train_cvae(a: TrainCvaeArgs) -> Result<Status> {
    let mut tc = match &a.config {
        Some(p) => match read_config(p)?.generator {
            GeneratorSpec::Cvae { train, .. } => train,
            GeneratorSpec::Categorical => TrainConfig::default(),
        },
        None => TrainConfig::default(),
    };
    if let Some(v) = a.epochs {
        tc.epochs = v;
    }
    if let Some(v) = a.hidden_units {
        tc.hidden_units = v;
    }
    if let Some(v) = a.latent_dim {
        tc.latent_dim = v;
    }
    if let Some(v) = a.batch_size {
        tc.batch_size = v;
    }
    if let Some(v) = a.beta {
        tc.beta = Some(v);
    }
    if let Some(v) = a.seed {
        tc.seed = v;
    }
    let data = read_dataset(&a.data)?;
    let (model, history) = Cvae::train(&data, &tc)?;
    model.save(&a.out)?;
    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        info!("loss {first:.4} → {last:.4} over {} epochs", history.len());
    }
    Ok(Status::Done)
}

fn generate(a: GenerateArgs) -> Result<Status> {
    let model = Cvae::load(&a.model)?;
    let data = model.generate_all(a.n, a.seed, a.noise_sigma)?;
    write_dataset(&a.out, &data, Some("cvae"))?;
    Ok(Status::Done)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), value)?;
    Ok(())
}

fn bench(a: BenchArgs) -> Result<Status> {
    let cfg = a.cfg.resolve()?;
    let table = run_time_sweep(&cfg)?;
    write_out(a.csv.as_deref(), &table.to_csv_string()?)?;
    if let Some(p) = &a.json {
        write_json(p, &table)?;
    }
    Ok(if table.is_partial() { Status::Partial } else { Status::Done })
}

fn with_profile(mut cfg: ExperimentConfig, profile: &str) -> ExperimentConfig {
    cfg.library = match cfg.library {
        LibrarySource::Synthetic { material, .. } => {
            LibrarySource::Synthetic { material, profile: profile.into(), response: None }
        }
        dir @ LibrarySource::Directory { .. } => dir,
    };
    cfg
}

fn compare(a: CompareArgs) -> Result<Status> {
    if a.cfg.profile.is_some() || a.cfg.library.is_some() {
        bail!(config_error("use --hpge-config / --cebr-config to choose the two libraries"));
    }
    let base = match &a.cfg.config {
        Some(p) => read_config(p)?,
        None => ExperimentConfig::default(),
    };
    let side = |file: &Option<PathBuf>, profile: &str| -> Result<ExperimentConfig> {
        let cfg = match file {
            Some(p) => read_config(p)?,
            None => with_profile(base.clone(), profile),
        };
        a.cfg.apply(cfg)
    };
    let hpge = side(&a.hpge_config, "hpge-aluminium-chips")?;
    let cebr = side(&a.cebr_config, "cebr-aluminium-chips")?;
    let cmp = compare_detectors(&hpge, &cebr)?;
    write_out(a.csv.as_deref(), &cmp.to_csv_string())?;
    if let Some(p) = &a.json {
        write_json(p, &cmp)?;
    }
    Ok(if cmp.is_partial() { Status::Partial } else { Status::Done })
}
