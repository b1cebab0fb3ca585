//! Classifiers behind a common predict interface.
//!
//! | classifier | scores | polarity |
//! |---|---|---|
//! | MLC | mean reference log-likelihood | maximize |
//! | Kuiper | Kuiper statistic against each alloy | minimize |
//! | KNN / RNC | summed inverse-distance votes | maximize |
//! | LR / linear SVM | one-vs-rest decision values | maximize |
//!
//! Ties always resolve to the lowest class index.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spectrum::Spectrum;

pub mod kuiper;
pub(crate) mod linear;
pub mod logistic;
pub mod mlc;
pub mod neighbors;
pub mod svm;

pub use kuiper::{kuiper_statistic, KuiperModel};
pub use logistic::{LogisticRegression, LrParams};
pub use mlc::{mlc_log_likelihood, MlcModel, MlcParams};
pub use neighbors::{KnnParams, NeighborsModel, RncParams};
pub use svm::{LinearSvm, SvmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Maximize,
    Minimize,
}

/// Index of the best score; the lowest index wins ties.
pub fn best_index(scores: &[f64], polarity: Polarity) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        let better = match polarity {
            Polarity::Maximize => s > scores[best],
            Polarity::Minimize => s < scores[best],
        };
        if better {
            best = i;
        }
    }
    best
}

pub trait Classifier: Send + Sync {
    fn name(&self) -> &'static str;

    /// Class names in tie-break order.
    fn classes(&self) -> &[String];

    fn polarity(&self) -> Polarity;

    fn predict_scores(&self, s: &Spectrum) -> Result<Vec<f64>>;

    fn predict_scores_batch(&self, spectra: &[Spectrum]) -> Result<Vec<Vec<f64>>> {
        spectra.iter().map(|s| self.predict_scores(s)).collect()
    }

    /// Predicted class index.
    fn predict(&self, s: &Spectrum) -> Result<usize> {
        Ok(best_index(&self.predict_scores(s)?, self.polarity()))
    }

    fn predict_batch(&self, spectra: &[Spectrum]) -> Result<Vec<usize>> {
        let polarity = self.polarity();
        Ok(self
            .predict_scores_batch(spectra)?
            .iter()
            .map(|s| best_index(s, polarity))
            .collect())
    }

    fn predict_label(&self, s: &Spectrum) -> Result<&str> {
        let i = self.predict(s)?;
        Ok(&self.classes()[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Mlc,
    Kuiper,
    Knn,
    Rnc,
    LogisticRegression,
    LinearSvm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 6] = [
        ClassifierKind::Mlc,
        ClassifierKind::Kuiper,
        ClassifierKind::Knn,
        ClassifierKind::Rnc,
        ClassifierKind::LogisticRegression,
        ClassifierKind::LinearSvm,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ClassifierKind::Mlc => "MLC",
            ClassifierKind::Kuiper => "Kui",
            ClassifierKind::Knn => "KNN",
            ClassifierKind::Rnc => "RNC",
            ClassifierKind::LogisticRegression => "LR",
            ClassifierKind::LinearSvm => "Linear SVM",
        }
    }
}

/// Classifier choice plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassifierSpec {
    Mlc(#[serde(default)] MlcParams),
    Kuiper,
    Knn(#[serde(default)] KnnParams),
    Rnc(#[serde(default)] RncParams),
    LogisticRegression(#[serde(default)] LrParams),
    LinearSvm(#[serde(default)] SvmParams),
}

impl ClassifierSpec {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierSpec::Mlc(_) => ClassifierKind::Mlc,
            ClassifierSpec::Kuiper => ClassifierKind::Kuiper,
            ClassifierSpec::Knn(_) => ClassifierKind::Knn,
            ClassifierSpec::Rnc(_) => ClassifierKind::Rnc,
            ClassifierSpec::LogisticRegression(_) => ClassifierKind::LogisticRegression,
            ClassifierSpec::LinearSvm(_) => ClassifierKind::LinearSvm,
        }
    }

    pub fn default_for(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::Mlc => ClassifierSpec::Mlc(MlcParams::default()),
            ClassifierKind::Kuiper => ClassifierSpec::Kuiper,
            ClassifierKind::Knn => ClassifierSpec::Knn(KnnParams::default()),
            ClassifierKind::Rnc => ClassifierSpec::Rnc(RncParams::default()),
            ClassifierKind::LogisticRegression => {
                ClassifierSpec::LogisticRegression(LrParams::default())
            }
            ClassifierKind::LinearSvm => ClassifierSpec::LinearSvm(SvmParams::default()),
        }
    }

    /// Fits on `train`. MLC treats every training spectrum as a reference
    /// and Kuiper pools them per class.
    pub fn fit(&self, train: &crate::sampling::LabeledDataset) -> Result<FittedModel> {
        Ok(match self {
            ClassifierSpec::Mlc(_) => FittedModel::Mlc(MlcModel::fit(train, None)?),
            ClassifierSpec::Kuiper => FittedModel::Kuiper(KuiperModel::fit(train)?),
            ClassifierSpec::Knn(p) => FittedModel::Neighbors(NeighborsModel::fit_knn(train, *p)?),
            ClassifierSpec::Rnc(p) => FittedModel::Neighbors(NeighborsModel::fit_rnc(train, *p)?),
            ClassifierSpec::LogisticRegression(p) => {
                FittedModel::LogisticRegression(LogisticRegression::fit(train, p)?)
            }
            ClassifierSpec::LinearSvm(p) => FittedModel::LinearSvm(LinearSvm::fit(train, p)?),
        })
    }
}

/// Any fitted classifier.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Mlc(MlcModel),
    Kuiper(KuiperModel),
    Neighbors(NeighborsModel),
    LogisticRegression(LogisticRegression),
    LinearSvm(LinearSvm),
}

impl FittedModel {
    pub fn as_classifier(&self) -> &dyn Classifier {
        match self {
            FittedModel::Mlc(m) => m,
            FittedModel::Kuiper(m) => m,
            FittedModel::Neighbors(m) => m,
            FittedModel::LogisticRegression(m) => m,
            FittedModel::LinearSvm(m) => m,
        }
    }
}
