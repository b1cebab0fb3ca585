//! Maximum likelihood classifier.
//!
//! A short-term spectrum `s = (c'_1..c'_n)` scores `Σ c'_i · log p_i` against
//! each add-one smoothed reference distribution `p_i = (c_i+1)/Σ(c_j+1)`.
//! With several references per alloy the mean log-likelihood is compared.
//! The score is linear in the reference log-probabilities, so the mean over
//! references equals the score against the mean log-probability vector;
//! that vector is what the model keeps.

use serde::{Deserialize, Serialize};

use super::{Classifier, Polarity};
use crate::error::{check_len, Error, Result};
use crate::preprocess::weight_distribution;
use crate::sampling::LabeledDataset;
use crate::spectrum::{smooth_add_one, AlloyLibrary, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlcParams {
    /// Reference spectra per alloy.
    pub n_refs: usize,
    /// Simulated measurement time of each reference.
    pub ref_time_s: f64,
}

impl Default for MlcParams {
    fn default() -> Self {
        Self {
            n_refs: 500,
            ref_time_s: 1800.0,
        }
    }
}

/// `Σ counts[i] · ref_log_probs[i]`.
pub fn mlc_log_likelihood(counts: &[f64], ref_log_probs: &[f64]) -> Result<f64> {
    check_len(ref_log_probs.len(), counts.len())?;
    Ok(counts
        .iter()
        .zip(ref_log_probs)
        .filter(|(c, _)| **c != 0.0)
        .map(|(c, lp)| c * lp)
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlcModel {
    classes: Vec<String>,
    /// Per class, mean over references of the smoothed log-probabilities.
    mean_log_probs: Vec<Vec<f64>>,
    n_refs: Vec<usize>,
}

impl MlcModel {
    /// Every spectrum of `refs` becomes one reference of its class.
    /// `weights[class]`, when given, reweights that class's reference
    /// distributions (renormalized) before the log transform.
    pub fn fit(refs: &LabeledDataset, weights: Option<&[Vec<f64>]>) -> Result<Self> {
        let n = refs.n_channels().ok_or(Error::EmptyTrainingSet)?;
        let k = refs.classes().len();
        if let Some(w) = weights {
            check_len(k, w.len())?;
        }
        let mut sums = vec![vec![0.0; n]; k];
        let mut counts = vec![0usize; k];
        for (s, label) in refs.iter() {
            let mut dist = smooth_add_one(s);
            if let Some(w) = weights {
                dist = weight_distribution(&dist, &w[label])?;
            }
            for (acc, p) in sums[label].iter_mut().zip(dist.probs()) {
                *acc += p.ln();
            }
            counts[label] += 1;
        }
        if counts.contains(&0) {
            return Err(Error::EmptyTrainingSet);
        }
        for (row, &c) in sums.iter_mut().zip(&counts) {
            for v in row.iter_mut() {
                *v /= c as f64;
            }
        }
        Ok(Self {
            classes: refs.classes().to_vec(),
            mean_log_probs: sums,
            n_refs: counts,
        })
    }

    /// Classical single-reference MLC on the library's long-term spectra.
    pub fn from_library(lib: &AlloyLibrary) -> Result<Self> {
        let refs = LabeledDataset::new(
            lib.labels(),
            lib.entries().iter().map(|e| e.long_term.clone()).collect(),
            (0..lib.len()).collect(),
            crate::sampling::Provenance {
                generator: "long-term".into(),
                seed: 0,
                stream: crate::rng::Stream::Reference,
                time_s: None,
                counts_per_second: Some(lib.detector().counts_per_second),
            },
        )?;
        Self::fit(&refs, None)
    }

    pub fn mean_log_probs(&self) -> &[Vec<f64>] {
        &self.mean_log_probs
    }

    pub fn n_refs(&self) -> &[usize] {
        &self.n_refs
    }

    pub fn n_channels(&self) -> usize {
        self.mean_log_probs[0].len()
    }
}

impl Classifier for MlcModel {
    fn name(&self) -> &'static str {
        "MLC"
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn polarity(&self) -> Polarity {
        Polarity::Maximize
    }

    fn predict_scores(&self, s: &Spectrum) -> Result<Vec<f64>> {
        self.mean_log_probs
            .iter()
            .map(|lp| mlc_log_likelihood(s.counts(), lp))
            .collect()
    }
}
