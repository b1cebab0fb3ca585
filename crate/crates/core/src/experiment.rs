//! Benchmark protocol: classification accuracy versus simulated
//! measurement time, repeated with independent seeds.
//!
//! For each repeat `r` (seed `repeat_seed(seed, r)`) and time point `t`,
//! a training set is built by the configured generator, every classifier is
//! fitted, and a fresh test set is sampled from the full long-term spectra.
//! MLC uses its own long reference measurements under the categorical
//! generator; those do not depend on `t` and are built once per repeat.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifiers::{
    Classifier, ClassifierKind, ClassifierSpec, FittedModel, KuiperModel, MlcModel, MlcParams,
    Polarity,
};
use crate::cvae::{Cvae, TrainConfig};
use crate::error::{check_len, Error, Result};
use crate::preprocess::{weight_distribution, PreparedPreprocessing, Preprocessing};
use crate::rng::{derive_seed, repeat_seed, Stream};
use crate::sampling::{build_dataset, LabeledDataset, Mode};
use crate::spectrum::{AlloyLibrary, DetectorProfile, Spectrum};
use crate::synth::{default_library, DetectorResponse, MaterialKind};

/// Percentage of predictions equal to their labels.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    check_len(labels.len(), predictions.len())?;
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(100.0 * correct as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum LibrarySource {
    /// Built-in templates rendered with a detector preset.
    Synthetic {
        material: MaterialKind,
        profile: String,
        /// Defaults to the response matching the profile.
        #[serde(default)]
        response: Option<DetectorResponse>,
    },
    /// A library directory written by `gen-synth` or by hand.
    Directory { path: PathBuf },
}

impl Default for LibrarySource {
    fn default() -> Self {
        LibrarySource::Synthetic {
            material: MaterialKind::Aluminium,
            profile: "hpge-aluminium-block".into(),
            response: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    /// Categorical sampling from split long-term spectra.
    Categorical,
    /// A CVAE trained on the categorical training set of each time point
    /// generates the training data (and the MLC references).
    Cvae {
        #[serde(default)]
        train: TrainConfig,
        /// Generated spectra per alloy; defaults to `n_train`, or to the
        /// MLC reference count for MLC.
        #[serde(default)]
        n_generated: Option<usize>,
        #[serde(default)]
        noise_sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub library: LibrarySource,
    /// Material column of the result table; defaults to the library's.
    pub material: Option<String>,
    /// Overrides the detector count rate.
    pub counts_per_second: Option<f64>,
    pub classifiers: Vec<ClassifierSpec>,
    pub generator: GeneratorSpec,
    pub preprocessing: Preprocessing,
    pub time_grid: Vec<f64>,
    /// Training spectra per alloy.
    pub n_train: usize,
    /// Test spectra per alloy.
    pub n_test: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            library: LibrarySource::default(),
            material: None,
            counts_per_second: None,
            classifiers: ClassifierKind::ALL.iter().map(|&k| ClassifierSpec::default_for(k)).collect(),
            generator: GeneratorSpec::Categorical,
            preprocessing: Preprocessing::default(),
            time_grid: vec![0.5, 1.0, 2.0],
            n_train: 2000,
            n_test: 1000,
            repeats: 5,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.repeats == 0 {
            return bad("repeats must be ≥ 1".into());
        }
        if self.n_train == 0 || self.n_test == 0 {
            return bad("n_train and n_test must be ≥ 1".into());
        }
        if self.classifiers.is_empty() {
            return bad("no classifiers configured".into());
        }
        if self.time_grid.is_empty() {
            return bad("empty time grid".into());
        }
        if let Some(t) = self.time_grid.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return bad(format!("time grid entry {t} is not a positive time"));
        }
        if self.time_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("time grid must be strictly increasing".into());
        }
        if let Some(c) = self.counts_per_second {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("counts_per_second {c}"));
            }
        }
        Ok(())
    }

    /// The library plus the material name used in result rows.
    pub fn load_library(&self) -> Result<(AlloyLibrary, String)> {
        let (lib, material) = match &self.library {
            LibrarySource::Synthetic { material, profile, response } => {
                let det = DetectorProfile::by_name(profile)
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown detector profile {profile:?}")))?;
                let resp = response.unwrap_or_else(|| DetectorResponse::for_profile(&det));
                (default_library(*material, &det, &resp)?, material.name().to_string())
            }
            LibrarySource::Directory { path } => {
                let (lib, m) = crate::io::read_library(path)?;
                (lib, m.unwrap_or_else(|| "unknown".into()))
            }
        };
        let lib = match self.counts_per_second {
            Some(c) => lib.with_counts_per_second(c)?,
            None => lib,
        };
        Ok((lib, self.material.clone().unwrap_or(material)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub classifier: String,
    pub material: String,
    pub time_s: f64,
    /// Mean over the successful repeats.
    pub accuracy_mean: Option<f64>,
    /// Per repeat; `None` where the repeat failed.
    pub accuracies: Vec<Option<f64>>,
    pub fit_ms: Option<f64>,
    pub predict_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub repeats: usize,
    pub rows: Vec<ResultRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResultTable {
    /// True when some repeat failed.
    pub fn is_partial(&self) -> bool {
        self.rows.iter().any(|r| r.accuracies.iter().any(Option::is_none))
    }

    pub fn row(&self, classifier: &str, time_s: f64) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.classifier == classifier && r.time_s == time_s)
    }

    /// Mean accuracies of one classifier in time order.
    pub fn curve(&self, classifier: &str) -> Vec<(f64, Option<f64>)> {
        self.rows
            .iter()
            .filter(|r| r.classifier == classifier)
            .map(|r| (r.time_s, r.accuracy_mean))
            .collect()
    }

    /// `classifier,material,time_s,accuracy_mean,acc_r1..acc_rk,fit_ms,predict_ms`.
    /// Failed repeats leave their field empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["classifier", "material", "time_s", "accuracy_mean"].map(String::from).into();
        header.extend((1..=self.repeats).map(|r| format!("acc_r{r}")));
        header.extend(["fit_ms".to_string(), "predict_ms".to_string()]);
        let csv_err = |e: csv::Error| Error::InvalidConfig(format!("csv output: {e}"));
        out.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.classifier.clone(), r.material.clone(), r.time_s.to_string(), fmt_opt(r.accuracy_mean)];
            rec.extend(r.accuracies.iter().map(|a| fmt_opt(*a)));
            rec.push(r.fit_ms.map(|v| format!("{v:.3}")).unwrap_or_default());
            rec.push(r.predict_ms.map(|v| format!("{v:.3}")).unwrap_or_default());
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::InvalidConfig(format!("csv output: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn save(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        let f = std::fs::File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        let f = std::fs::File::create(json_path).map_err(|e| Error::io(json_path, e))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }
}

/// Streams drawn for training-side data and for test data. The two lists
/// must never intersect.
pub const TRAINING_STREAMS: [Stream; 7] = [
    Stream::Split,
    Stream::Train,
    Stream::Reference,
    Stream::CvaeInit,
    Stream::CvaeShuffle,
    Stream::CvaeNoise,
    Stream::CvaeGenerate,
];
pub const TEST_STREAMS: [Stream; 1] = [Stream::Test];

/// Records which streams a sweep actually used.
#[derive(Debug, Default, Clone)]
struct StreamAccount {
    training: Vec<Stream>,
    test: Vec<Stream>,
}

impl StreamAccount {
    fn training(&mut self, s: Stream) -> Stream {
        debug_assert!(TRAINING_STREAMS.contains(&s));
        if !self.training.contains(&s) {
            self.training.push(s);
        }
        s
    }

    fn test(&mut self, s: Stream) -> Stream {
        debug_assert!(TEST_STREAMS.contains(&s));
        if !self.test.contains(&s) {
            self.test.push(s);
        }
        s
    }

    fn check(&self) -> Result<()> {
        match self.test.iter().find(|s| self.training.contains(s)) {
            Some(s) => Err(Error::InvalidConfig(format!("stream {s:?} used for both training and test data"))),
            None => Ok(()),
        }
    }
}

/// Predicts the only class of a one-alloy library.
struct Constant(Vec<String>);

impl Classifier for Constant {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn classes(&self) -> &[String] {
        &self.0
    }

    fn polarity(&self) -> Polarity {
        Polarity::Maximize
    }

    fn predict_scores(&self, _: &Spectrum) -> Result<Vec<f64>> {
        Ok(vec![0.0])
    }
}

enum Model {
    Fitted(FittedModel),
    Constant(Constant),
}

impl Model {
    fn as_classifier(&self) -> &dyn Classifier {
        match self {
            Model::Fitted(m) => m.as_classifier(),
            Model::Constant(c) => c,
        }
    }
}

/// Result of one classifier at one (time, repeat).
struct Trial {
    accuracy: f64,
    fit_ms: f64,
    predict_ms: f64,
}

fn row_name(spec: &ClassifierSpec, generator: &GeneratorSpec) -> String {
    let base = spec.kind().short_name();
    match generator {
        GeneratorSpec::Categorical => base.to_string(),
        GeneratorSpec::Cvae { .. } => format!("{base} + CVAE"),
    }
}

/// First `n` spectra of every class, in the original order.
fn take_per_class(data: &LabeledDataset, n: usize) -> Result<LabeledDataset> {
    let mut seen = vec![0usize; data.classes().len()];
    let mut spectra = Vec::new();
    let mut labels = Vec::new();
    for (s, l) in data.iter() {
        if seen[l] < n {
            seen[l] += 1;
            spectra.push(s.clone());
            labels.push(l);
        }
    }
    LabeledDataset::new(data.classes().to_vec(), spectra, labels, data.provenance().clone())
}

/// Data shared by every classifier at one (time, repeat).
struct TimePointData {
    /// Categorical training set, preprocessed.
    categorical: Option<LabeledDataset>,
    /// CVAE output, when that generator is configured.
    generated: Option<LabeledDataset>,
    test: LabeledDataset,
}

struct Sweep<'a> {
    cfg: &'a ExperimentConfig,
    lib: &'a AlloyLibrary,
    prep: PreparedPreprocessing,
    streams: StreamAccount,
    /// MLC references of the current repeat, keyed by (n_refs, ref_time bits).
    mlc_refs: BTreeMap<(usize, u64), LabeledDataset>,
}

impl<'a> Sweep<'a> {
    fn needs_categorical_training(&self) -> bool {
        matches!(self.cfg.generator, GeneratorSpec::Cvae { .. })
            || self
                .cfg
                .classifiers
                .iter()
                .any(|c| !matches!(c.kind(), ClassifierKind::Mlc | ClassifierKind::Kuiper))
    }

    fn generated_per_class(&self) -> usize {
        let GeneratorSpec::Cvae { n_generated, .. } = &self.cfg.generator else {
            return 0;
        };
        if let Some(n) = n_generated {
            return *n;
        }
        self.cfg
            .classifiers
            .iter()
            .map(|c| match c {
                ClassifierSpec::Mlc(p) => p.n_refs,
                _ => self.cfg.n_train,
            })
            .max()
            .unwrap_or(self.cfg.n_train)
    }

    fn time_point(&mut self, ti: usize, t: f64, rs: u64) -> Result<TimePointData> {
        let categorical = if self.needs_categorical_training() {
            let stream = self.streams.training(Stream::Train);
            let train = build_dataset(self.lib, t, self.cfg.n_train, rs, Mode::Train, stream)?;
            Some(train.map_spectra(|s| self.prep.apply(s))?)
        } else {
            None
        };
        let generated = match (&self.cfg.generator, &categorical) {
            (GeneratorSpec::Cvae { train, noise_sigma, .. }, Some(cat)) => {
                self.streams.training(Stream::CvaeInit);
                self.streams.training(Stream::CvaeShuffle);
                self.streams.training(Stream::CvaeNoise);
                let cvae_cfg = TrainConfig { seed: derive_seed(rs, Stream::CvaeInit, ti as u64, 0), ..*train };
                let (model, history) = Cvae::train(cat, &cvae_cfg)?;
                log::info!("CVAE at {t} s: final loss {:?}", history.last());
                let gen_seed = derive_seed(rs, self.streams.training(Stream::CvaeGenerate), ti as u64, 0);
                Some(model.generate_all(self.generated_per_class(), gen_seed, *noise_sigma)?)
            }
            _ => None,
        };
        let stream = self.streams.test(Stream::Test);
        let test = build_dataset(self.lib, t, self.cfg.n_test, rs, Mode::Test, stream)?
            .map_spectra(|s| self.prep.apply(s))?;
        Ok(TimePointData { categorical, generated, test })
    }

    fn mlc_references(&mut self, p: &MlcParams, rs: u64) -> Result<&LabeledDataset> {
        let key = (p.n_refs, p.ref_time_s.to_bits());
        if !self.mlc_refs.contains_key(&key) {
            let stream = self.streams.training(Stream::Reference);
            let refs = build_dataset(self.lib, p.ref_time_s, p.n_refs, rs, Mode::Train, stream)?
                .map_spectra(|s| self.prep.apply(s))?;
            self.mlc_refs.insert(key, refs);
        }
        Ok(&self.mlc_refs[&key])
    }

    fn fit(&mut self, spec: &ClassifierSpec, data: &TimePointData, rs: u64) -> Result<Model> {
        if self.lib.len() == 1 {
            return Ok(Model::Constant(Constant(self.lib.labels())));
        }
        let escape = self.prep.escape_weights().map(<[Vec<f64>]>::to_vec);
        let fitted = match (spec, &data.generated) {
            (ClassifierSpec::Mlc(p), None) => {
                let refs = self.mlc_references(p, rs)?;
                FittedModel::Mlc(MlcModel::fit(refs, escape.as_deref())?)
            }
            (ClassifierSpec::Mlc(p), Some(generated)) => {
                let n = match &self.cfg.generator {
                    GeneratorSpec::Cvae { n_generated: Some(n), .. } => *n,
                    _ => p.n_refs,
                };
                FittedModel::Mlc(MlcModel::fit(&take_per_class(generated, n)?, escape.as_deref())?)
            }
            (ClassifierSpec::Kuiper, None) => {
                let lib = self.prep.library();
                let mut dists = lib.distributions()?;
                if let Some(w) = self.prep.unique_weights() {
                    dists = dists.iter().map(|d| weight_distribution(d, w)).collect::<Result<_>>()?;
                }
                FittedModel::Kuiper(KuiperModel::from_distributions(lib.labels(), &dists)?)
            }
            (ClassifierSpec::Kuiper, Some(generated)) => FittedModel::Kuiper(KuiperModel::fit(generated)?),
            (other, generated) => {
                let train = match generated {
                    Some(g) => take_per_class(g, self.cfg.n_train)?,
                    None => data.categorical.clone().ok_or(Error::EmptyTrainingSet)?,
                };
                other.fit(&train)?
            }
        };
        Ok(Model::Fitted(fitted))
    }

    fn trial(&mut self, spec: &ClassifierSpec, data: &TimePointData, rs: u64) -> Result<Trial> {
        let start = Instant::now();
        let model = self.fit(spec, data, rs)?;
        let fit_ms = start.elapsed().as_secs_f64() * 1e3;
        let start = Instant::now();
        let pred = model.as_classifier().predict_batch(data.test.spectra())?;
        let predict_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(Trial { accuracy: accuracy(&pred, data.test.labels())?, fit_ms, predict_ms })
    }
}

/// Renders or reads the configured library and runs the sweep.
pub fn run_time_sweep(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let (lib, material) = cfg.load_library()?;
    run_time_sweep_with(cfg, &lib, &material)
}

/// Runs the sweep on an already loaded library. Configuration and
/// preprocessing errors abort; failures inside a repeat are recorded in the
/// affected rows and the sweep continues.
pub fn run_time_sweep_with(cfg: &ExperimentConfig, lib: &AlloyLibrary, material: &str) -> Result<ResultTable> {
    cfg.validate()?;
    let mut sweep = Sweep {
        cfg,
        lib,
        prep: cfg.preprocessing.prepare(lib)?,
        streams: StreamAccount::default(),
        mlc_refs: BTreeMap::new(),
    };
    if cfg.preprocessing.escape_peaks.is_some()
        && cfg.classifiers.iter().any(|c| c.kind() != ClassifierKind::Mlc)
    {
        log::warn!("escape-peak weighting only affects MLC");
    }
    let n_c = cfg.classifiers.len();
    let n_t = cfg.time_grid.len();
    // results[c][t][r]
    let mut results: Vec<Vec<Vec<Result<Trial>>>> =
        (0..n_c).map(|_| (0..n_t).map(|_| Vec::with_capacity(cfg.repeats)).collect()).collect();
    for r in 0..cfg.repeats {
        let rs = repeat_seed(cfg.seed, r);
        sweep.mlc_refs.clear();
        for (ti, &t) in cfg.time_grid.iter().enumerate() {
            match sweep.time_point(ti, t, rs) {
                Ok(data) => {
                    for (ci, spec) in cfg.classifiers.iter().enumerate() {
                        let trial = sweep.trial(spec, &data, rs);
                        if let Err(e) = &trial {
                            log::warn!("{} at {t} s, repeat {}: {e}", row_name(spec, &cfg.generator), r + 1);
                        }
                        results[ci][ti].push(trial);
                    }
                }
                Err(e) => {
                    log::warn!("data for {t} s, repeat {}: {e}", r + 1);
                    let msg = e.to_string();
                    for per_time in results.iter_mut() {
                        per_time[ti].push(Err(Error::InvalidConfig(msg.clone())));
                    }
                }
            }
        }
    }
    sweep.streams.check()?;

    let mut rows = Vec::with_capacity(n_c * n_t);
    for (ci, spec) in cfg.classifiers.iter().enumerate() {
        for (ti, &t) in cfg.time_grid.iter().enumerate() {
            let trials = &results[ci][ti];
            let ok: Vec<&Trial> = trials.iter().filter_map(|x| x.as_ref().ok()).collect();
            let mean = |f: fn(&Trial) -> f64| -> Option<f64> {
                (!ok.is_empty()).then(|| ok.iter().map(|x| f(x)).sum::<f64>() / ok.len() as f64)
            };
            rows.push(ResultRow {
                classifier: row_name(spec, &cfg.generator),
                material: material.to_string(),
                time_s: t,
                accuracy_mean: mean(|x| x.accuracy),
                accuracies: trials.iter().map(|x| x.as_ref().ok().map(|t| t.accuracy)).collect(),
                fit_ms: mean(|x| x.fit_ms),
                predict_ms: mean(|x| x.predict_ms),
                errors: trials
                    .iter()
                    .enumerate()
                    .filter_map(|(r, x)| x.as_ref().err().map(|e| format!("repeat {}: {e}", r + 1)))
                    .collect(),
            });
        }
    }
    Ok(ResultTable {
        repeats: cfg.repeats,
        rows,
        notes: vec!["test spectra are resampled for every repeat".into()],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub time_s: f64,
    pub hpge: Option<f64>,
    pub cebr: Option<f64>,
}

/// Paired accuracy curves of the first configured classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorComparison {
    pub classifier: String,
    pub rows: Vec<ComparisonRow>,
    /// First time at which HPGe is at least as accurate as CeBr₃.
    pub crossover_time_s: Option<f64>,
    pub hpge_table: ResultTable,
    pub cebr_table: ResultTable,
}

impl DetectorComparison {
    pub fn from_tables(hpge: ResultTable, cebr: ResultTable) -> Result<Self> {
        let classifier = hpge.rows.first().ok_or(Error::EmptyInput)?.classifier.clone();
        let h = hpge.curve(&classifier);
        let c = cebr.curve(&classifier);
        if h.len() != c.len() || h.iter().zip(&c).any(|(a, b)| a.0 != b.0) {
            return Err(Error::MismatchedTimeGrids);
        }
        let rows: Vec<ComparisonRow> =
            h.iter().zip(&c).map(|(a, b)| ComparisonRow { time_s: a.0, hpge: a.1, cebr: b.1 }).collect();
        let crossover_time_s = rows
            .iter()
            .find(|r| matches!((r.hpge, r.cebr), (Some(h), Some(c)) if h >= c))
            .map(|r| r.time_s);
        Ok(Self { classifier, rows, crossover_time_s, hpge_table: hpge, cebr_table: cebr })
    }

    pub fn is_partial(&self) -> bool {
        self.hpge_table.is_partial() || self.cebr_table.is_partial()
    }

    /// `time_s,hpge_accuracy,cebr_accuracy` followed by a crossover line.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("time_s,hpge_accuracy,cebr_accuracy\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.time_s, fmt_opt(r.hpge), fmt_opt(r.cebr)));
        }
        s.push_str(&format!("# crossover_time_s,{}\n", fmt_opt(self.crossover_time_s)));
        s
    }
}

/// Runs both sweeps and joins them by time. Only the first classifier of
/// each configuration is compared.
pub fn compare_detectors(hpge: &ExperimentConfig, cebr: &ExperimentConfig) -> Result<DetectorComparison> {
    if hpge.time_grid != cebr.time_grid {
        return Err(Error::MismatchedTimeGrids);
    }
    if let (LibrarySource::Synthetic { material: a, .. }, LibrarySource::Synthetic { material: b, .. }) =
        (&hpge.library, &cebr.library)
    {
        if a != b {
            return Err(Error::InvalidConfig("detector comparison needs the same alloy templates".into()));
        }
    }
    let first_only = |c: &ExperimentConfig| ExperimentConfig {
        classifiers: c.classifiers.iter().take(1).cloned().collect(),
        ..c.clone()
    };
    let h = run_time_sweep(&first_only(hpge))?;
    let c = run_time_sweep(&first_only(cebr))?;
    DetectorComparison::from_tables(h, c)
}
