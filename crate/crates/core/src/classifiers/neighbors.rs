//! Brute-force euclidean k-nearest-neighbors and radius-neighbors
//! classifiers with inverse-distance vote weights.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::linear::feature_matrix;
use super::{Classifier, Polarity};
use crate::error::{check_len, Error, Result};
use crate::sampling::LabeledDataset;
use crate::spectrum::Spectrum;

/// Test spectra per distance GEMM block.
const PREDICT_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub n_neighbors: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { n_neighbors: 8000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RncParams {
    pub radius: f64,
}

impl Default for RncParams {
    fn default() -> Self {
        Self { radius: 500.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum NeighborRule {
    /// The k nearest training spectra.
    Knn { k: usize },
    /// All training spectra within `radius`; an empty ball falls back to
    /// the most frequent training label.
    Radius { radius: f64 },
}

#[derive(Debug, Clone)]
pub struct NeighborsModel {
    classes: Vec<String>,
    rule: NeighborRule,
    train: Array2<f64>,
    train_sq_norms: Array1<f64>,
    labels: Vec<usize>,
    class_counts: Vec<usize>,
}

impl NeighborsModel {
    fn fit(train: &LabeledDataset, rule: NeighborRule) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let x = feature_matrix(train.spectra())?;
        let norms = x.map_axis(Axis(1), |r| r.dot(&r));
        Ok(Self {
            classes: train.classes().to_vec(),
            rule,
            train: x,
            train_sq_norms: norms,
            labels: train.labels().to_vec(),
            class_counts: train.class_counts(),
        })
    }

    /// `k` above the training-set size is clamped with a warning.
    pub fn fit_knn(train: &LabeledDataset, params: KnnParams) -> Result<Self> {
        if params.n_neighbors == 0 {
            return Err(Error::out_of_range("n_neighbors", "must be ≥ 1"));
        }
        let mut k = params.n_neighbors;
        if k > train.len() && !train.is_empty() {
            log::warn!("n_neighbors {k} exceeds {} training spectra; clamping", train.len());
            k = train.len();
        }
        Self::fit(train, NeighborRule::Knn { k })
    }

    pub fn fit_rnc(train: &LabeledDataset, params: RncParams) -> Result<Self> {
        if !(params.radius >= 0.0) {
            return Err(Error::out_of_range("radius", format!("{}", params.radius)));
        }
        Self::fit(train, NeighborRule::Radius { radius: params.radius })
    }

    pub fn rule(&self) -> NeighborRule {
        self.rule
    }

    pub fn n_train(&self) -> usize {
        self.labels.len()
    }

    /// Votes from `(distance, label)` neighbors. Exact matches (distance 0)
    /// outvote everything else.
    fn votes(&self, neighbors: &[(f64, usize)]) -> Vec<f64> {
        let mut scores = vec![0.0; self.classes.len()];
        if neighbors.iter().any(|(d, _)| *d == 0.0) {
            for &(d, l) in neighbors {
                if d == 0.0 {
                    scores[l] += 1.0;
                }
            }
        } else {
            for &(d, l) in neighbors {
                scores[l] += 1.0 / d;
            }
        }
        scores
    }

    fn scores_from_distances(&self, dist: impl Iterator<Item = f64>) -> Vec<f64> {
        let mut pairs: Vec<(f64, usize)> = dist.zip(self.labels.iter().copied()).collect();
        match self.rule {
            NeighborRule::Knn { k } => {
                let by_distance_then_label =
                    |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if k < pairs.len() {
                    pairs.select_nth_unstable_by(k - 1, by_distance_then_label);
                    pairs.truncate(k);
                }
                self.votes(&pairs)
            }
            NeighborRule::Radius { radius } => {
                pairs.retain(|(d, _)| *d <= radius);
                if pairs.is_empty() {
                    self.class_counts.iter().map(|&c| c as f64).collect()
                } else {
                    self.votes(&pairs)
                }
            }
        }
    }
}

impl Classifier for NeighborsModel {
    fn name(&self) -> &'static str {
        match self.rule {
            NeighborRule::Knn { .. } => "KNN",
            NeighborRule::Radius { .. } => "RNC",
        }
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn polarity(&self) -> Polarity {
        Polarity::Maximize
    }

    fn predict_scores(&self, s: &Spectrum) -> Result<Vec<f64>> {
        Ok(self.predict_scores_batch(std::slice::from_ref(s))?.remove(0))
    }

    fn predict_scores_batch(&self, spectra: &[Spectrum]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(spectra.len());
        for chunk in spectra.chunks(PREDICT_CHUNK) {
            for s in chunk {
                check_len(self.train.ncols(), s.len())?;
            }
            let x = feature_matrix(chunk)?;
            // ‖x − y‖² = ‖x‖² + ‖y‖² − 2 x·y; exact for integral counts.
            let cross = x.dot(&self.train.t());
            for (row, xr) in cross.outer_iter().zip(x.outer_iter()) {
                let xn = xr.dot(&xr);
                let dist = row
                    .iter()
                    .zip(self.train_sq_norms.iter())
                    .map(|(c, yn)| (xn + yn - 2.0 * c).max(0.0).sqrt());
                out.push(self.scores_from_distances(dist));
            }
        }
        Ok(out)
    }
}
