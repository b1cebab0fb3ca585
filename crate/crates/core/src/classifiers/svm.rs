use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::linear::{decision_values, feature_matrix, solve_ovr, Loss, OvrProblem, Stop};
use super::logistic::{check_classes, to_matrix};
use super::{Classifier, Polarity};
use crate::error::{Error, Result};
use crate::sampling::LabeledDataset;
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    /// Epoch budget.
    pub max_iter: usize,
    /// Stop once the objective changes by less than this between epochs.
    pub tol: f64,
    pub fit_intercept: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 3.0,
            max_iter: 100,
            tol: 1.0,
            fit_intercept: true,
        }
    }
}

/// One-vs-rest linear SVM with squared hinge loss:
/// `½(‖w‖² + b²) + C Σ_i max(0, 1 − y_i f(x_i))²`. The intercept is
/// regularized like an extra constant feature of value 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    classes: Vec<String>,
    weights: Vec<Vec<f64>>,
    intercepts: Vec<f64>,
    pub objectives: Vec<f64>,
    pub iterations: Vec<usize>,
    #[serde(skip)]
    cache: Option<(Array2<f64>, Array1<f64>)>,
}

impl LinearSvm {
    pub fn fit(train: &LabeledDataset, params: &SvmParams) -> Result<Self> {
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
                loss: Loss::SquaredHinge,
                data_scale: params.c,
                reg_w: 1.0,
                reg_b: 1.0,
                fit_intercept: params.fit_intercept,
                stop: Stop::ObjectiveChange(params.tol),
                max_iter: params.max_iter,
            },
        )?;
        Ok(Self {
            classes: train.classes().to_vec(),
            weights: sol.weights.columns().into_iter().map(|c| c.to_vec()).collect(),
            intercepts: sol.intercepts.to_vec(),
            objectives: sol.objectives,
            iterations: sol.iterations,
            cache: Some((sol.weights, sol.intercepts)),
        })
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn finish_loading(mut self) -> Self {
        self.cache = Some(to_matrix(&self.weights, &self.intercepts));
        self
    }
}

impl Classifier for LinearSvm {
    fn name(&self) -> &'static str {
        "Linear SVM"
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
