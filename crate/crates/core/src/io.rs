//! File formats: spectrum CSVs, dataset and library directories with a
//! `manifest.json`, and versioned model files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::{
    FittedModel, KnnParams, KuiperModel, LinearSvm, LogisticRegression, MlcModel, NeighborsModel,
    RncParams,
};
use crate::classifiers::neighbors::NeighborRule;
use crate::error::{Error, Result};
use crate::preprocess::SpectrumTransform;
use crate::sampling::{LabeledDataset, Provenance};
use crate::spectrum::{AlloyEntry, AlloyLibrary, DetectorProfile, Spectrum};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), message: message.into() }
}

/// Writes `channel,count` rows for every channel.
pub fn write_spectrum_csv(path: &Path, s: &Spectrum) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| parse_err(path, e.to_string()))?;
    let res = (|| -> csv::Result<()> {
        w.write_record(["channel", "count"])?;
        for (i, c) in s.counts().iter().enumerate() {
            w.write_record([i.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| parse_err(path, e.to_string()))
}

/// Reads a dense `channel,count` CSV with channels 0..n−1 in order.
pub fn read_spectrum_csv(path: &Path) -> Result<Spectrum> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => parse_err(path, format!("{other:?}")),
    })?;
    let headers = r.headers().map_err(|e| parse_err(path, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "channel" || &headers[1] != "count" {
        return Err(parse_err(path, "expected header `channel,count`"));
    }
    let mut counts = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e.to_string()))?;
        let channel: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, format!("row {}: bad channel {:?}", row + 1, &rec[0])))?;
        if channel != row {
            return Err(parse_err(path, format!("row {}: expected channel {row}, found {channel}", row + 1)));
        }
        let count: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, format!("row {}: bad count {:?}", row + 1, &rec[1])))?;
        counts.push(count);
    }
    Spectrum::new(counts).map_err(|e| parse_err(path, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub label: String,
}

/// `manifest.json` of a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub classes: Vec<String>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub entries: Vec<ManifestEntry>,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), value)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(f)).map_err(|e| parse_err(path, e.to_string()))
}

fn check_version(path: &Path, found: u32) -> Result<()> {
    if found != FORMAT_VERSION {
        log::error!("{}: unsupported format version {found}", path.display());
        return Err(Error::Version { expected: FORMAT_VERSION, found });
    }
    Ok(())
}

pub fn write_dataset(dir: &Path, data: &LabeledDataset, note: Option<&str>) -> Result<()> {
    ensure_dir(dir)?;
    let width = data.len().max(1).to_string().len().max(5);
    let mut entries = Vec::with_capacity(data.len());
    for (i, (s, l)) in data.iter().enumerate() {
        let file = format!("spectrum_{i:0width$}.csv");
        write_spectrum_csv(&dir.join(&file), s)?;
        entries.push(ManifestEntry { file, label: data.classes()[l].clone() });
    }
    let manifest = DatasetManifest {
        version: FORMAT_VERSION,
        classes: data.classes().to_vec(),
        provenance: data.provenance().clone(),
        note: note.map(str::to_string),
        entries,
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

/// Reads a dataset directory, or a manifest path directly.
pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    let (dir, manifest_path) = manifest_location(path);
    let m: DatasetManifest = read_json(&manifest_path)?;
    check_version(&manifest_path, m.version)?;
    let mut spectra = Vec::with_capacity(m.entries.len());
    let mut labels = Vec::with_capacity(m.entries.len());
    for e in &m.entries {
        let l = m
            .classes
            .iter()
            .position(|c| c == &e.label)
            .ok_or_else(|| Error::UnknownLabel(e.label.clone()))?;
        spectra.push(read_spectrum_csv(&dir.join(&e.file))?);
        labels.push(l);
    }
    LabeledDataset::new(m.classes, spectra, labels, m.provenance)
}

fn manifest_location(path: &Path) -> (PathBuf, PathBuf) {
    if path.extension().is_some_and(|e| e == "json") {
        (path.parent().unwrap_or(Path::new(".")).to_path_buf(), path.to_path_buf())
    } else {
        (path.to_path_buf(), path.join(MANIFEST))
    }
}

/// `manifest.json` of a library directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryManifest {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
    pub detector: DetectorProfile,
    pub entries: Vec<ManifestEntry>,
}

pub fn write_library(dir: &Path, lib: &AlloyLibrary, material: Option<&str>) -> Result<()> {
    ensure_dir(dir)?;
    let mut entries = Vec::new();
    for e in lib.entries() {
        let file = format!("{}.csv", sanitize(&e.label));
        write_spectrum_csv(&dir.join(&file), &e.long_term)?;
        entries.push(ManifestEntry { file, label: e.label.clone() });
    }
    let manifest = LibraryManifest {
        version: FORMAT_VERSION,
        material: material.map(str::to_string),
        detector: lib.detector().clone(),
        entries,
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Library plus the material name recorded in its manifest.
pub fn read_library(path: &Path) -> Result<(AlloyLibrary, Option<String>)> {
    let (dir, manifest_path) = manifest_location(path);
    let m: LibraryManifest = read_json(&manifest_path)?;
    check_version(&manifest_path, m.version)?;
    let entries = m
        .entries
        .iter()
        .map(|e| Ok(AlloyEntry { label: e.label.clone(), long_term: read_spectrum_csv(&dir.join(&e.file))? }))
        .collect::<Result<Vec<_>>>()?;
    Ok((AlloyLibrary::new_unchecked_count(entries, m.detector)?, m.material))
}

/// Serialized form of a fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelPayload {
    Mlc(MlcModel),
    Kuiper(KuiperModel),
    /// Neighbor models keep a reference to their training data only.
    Knn { params: KnnParams, training_manifest: PathBuf },
    Rnc { params: RncParams, training_manifest: PathBuf },
    LogisticRegression(LogisticRegression),
    LinearSvm(LinearSvm),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    /// Applied to every spectrum before prediction.
    #[serde(default)]
    pub transform: SpectrumTransform,
    pub model: ModelPayload,
}

/// Saves a fitted model. Neighbor models need the manifest path of the
/// dataset they were fitted on.
pub fn save_model(
    path: &Path,
    model: &FittedModel,
    transform: &SpectrumTransform,
    training_manifest: Option<&Path>,
) -> Result<()> {
    let payload = match model {
        FittedModel::Mlc(m) => ModelPayload::Mlc(m.clone()),
        FittedModel::Kuiper(m) => ModelPayload::Kuiper(m.clone()),
        FittedModel::LogisticRegression(m) => ModelPayload::LogisticRegression(m.clone()),
        FittedModel::LinearSvm(m) => ModelPayload::LinearSvm(m.clone()),
        FittedModel::Neighbors(m) => {
            let manifest = training_manifest
                .ok_or_else(|| Error::InvalidConfig("neighbor models need a training manifest path".into()))?
                .to_path_buf();
            match m.rule() {
                NeighborRule::Knn { k } => {
                    ModelPayload::Knn { params: KnnParams { n_neighbors: k }, training_manifest: manifest }
                }
                NeighborRule::Radius { radius } => {
                    ModelPayload::Rnc { params: RncParams { radius }, training_manifest: manifest }
                }
            }
        }
    };
    write_json(path, &ModelFile { version: FORMAT_VERSION, transform: transform.clone(), model: payload })
}

/// Loads a model; neighbor models are refitted from their training data,
/// which is transformed the same way as at fit time.
pub fn load_model(path: &Path) -> Result<(FittedModel, SpectrumTransform)> {
    let f: ModelFile = read_json(path)?;
    check_version(path, f.version)?;
    let refit = |manifest: &Path| -> Result<LabeledDataset> {
        let manifest = if manifest.is_relative() {
            path.parent().unwrap_or(Path::new(".")).join(manifest)
        } else {
            manifest.to_path_buf()
        };
        read_dataset(&manifest)?.map_spectra(|s| f.transform.apply(s))
    };
    let model = match &f.model {
        ModelPayload::Mlc(m) => FittedModel::Mlc(m.clone()),
        ModelPayload::Kuiper(m) => FittedModel::Kuiper(m.clone()),
        ModelPayload::LogisticRegression(m) => FittedModel::LogisticRegression(m.clone().finish_loading()),
        ModelPayload::LinearSvm(m) => FittedModel::LinearSvm(m.clone().finish_loading()),
        ModelPayload::Knn { params, training_manifest } => {
            FittedModel::Neighbors(NeighborsModel::fit_knn(&refit(training_manifest)?, *params)?)
        }
        ModelPayload::Rnc { params, training_manifest } => {
            FittedModel::Neighbors(NeighborsModel::fit_rnc(&refit(training_manifest)?, *params)?)
        }
    };
    Ok((model, f.transform))
}
