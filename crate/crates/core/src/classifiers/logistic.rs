use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::linear::{decision_values, feature_matrix, solve_ovr, Loss, OvrProblem, Stop};
use super::{Classifier, Polarity};
use crate::error::{Error, Result};
use crate::sampling::LabeledDataset;
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrParams {
    /// Inverse L2 regularization strength.
    pub c: f64,
    pub max_iter: usize,
    /// Gradient-norm tolerance.
    pub tol: f64,
    pub fit_intercept: bool,
}

impl Default for LrParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iter: 150,
            tol: 1e-4,
            fit_intercept: true,
        }
    }
}

/// One-vs-rest L2-regularized logistic regression. Each class minimizes
/// `mean_i log(1 + exp(−y_i f(x_i))) + ‖w‖² / (2C)`; the intercept is not
/// penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    classes: Vec<String>,
    /// Row c holds class c's weights.
    weights: Vec<Vec<f64>>,
    intercepts: Vec<f64>,
    /// Gradient norm at termination, per class.
    pub grad_norms: Vec<f64>,
    pub iterations: Vec<usize>,
    #[serde(skip)]
    cache: Option<(Array2<f64>, Array1<f64>)>,
}

pub(crate) fn check_classes(train: &LabeledDataset) -> Result<()> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if train.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    Ok(())
}

impl LogisticRegression {
    pub fn fit(train: &LabeledDataset, params: &LrParams) -> Result<Self> {
        check_classes(train)?;
        if !(params.c > 0.0) {
            return Err(Error::out_of_range("C", format!("{}", params.c)));
        }
        let x = feature_matrix(train.spectra())?;
        let sol = solve_ovr(
            &x,
            train.labels(),
            train.classes().len(),
            &OvrProblem {
                loss: Loss::Logistic,
                data_scale: 1.0 / train.len() as f64,
                reg_w: 1.0 / params.c,
                reg_b: 0.0,
                fit_intercept: params.fit_intercept,
                stop: Stop::GradNorm(params.tol),
                max_iter: params.max_iter,
            },
        )?;
        Ok(Self::from_parts(
            train.classes().to_vec(),
            sol.weights,
            sol.intercepts,
            sol.grad_norms,
            sol.iterations,
        ))
    }

    fn from_parts(
        classes: Vec<String>,
        w: Array2<f64>,
        b: Array1<f64>,
        grad_norms: Vec<f64>,
        iterations: Vec<usize>,
    ) -> Self {
        Self {
            classes,
            weights: w.columns().into_iter().map(|c| c.to_vec()).collect(),
            intercepts: b.to_vec(),
            grad_norms,
            iterations,
            cache: Some((w, b)),
        }
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    /// Restores the matrix form after deserialization.
    pub fn finish_loading(mut self) -> Self {
        self.cache = Some(to_matrix(&self.weights, &self.intercepts));
        self
    }
}

pub(crate) fn to_matrix(weights: &[Vec<f64>], intercepts: &[f64]) -> (Array2<f64>, Array1<f64>) {
    let d = weights.first().map_or(0, Vec::len);
    let k = weights.len();
    let w = Array2::from_shape_fn((d, k), |(i, c)| weights[c][i]);
    (w, Array1::from(intercepts.to_vec()))
}

impl Classifier for LogisticRegression {
    fn name(&self) -> &'static str {
        "LR"
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
        match &self.cache {
            Some((w, b)) => decision_values(spectra, w, b),
            None => {
                let (w, b) = to_matrix(&self.weights, &self.intercepts);
                decision_values(spectra, &w, &b)
            }
        }
    }
}
