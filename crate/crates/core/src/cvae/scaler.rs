use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Per-channel min-max scaling to [0, 1]. Constant channels map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    /// Fits on the rows of `x`.
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        let mut min = vec![f64::INFINITY; x.ncols()];
        let mut max = vec![f64::NEG_INFINITY; x.ncols()];
        for row in x.outer_iter() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_len(self.len(), x.ncols())?;
        let mut out = x.clone();
        for mut row in out.outer_iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                let range = self.max[j] - self.min[j];
                *v = if range > 0.0 { (*v - self.min[j]) / range } else { 0.0 };
            }
        }
        Ok(out)
    }

    /// Inverse map of one scaled row. Constant channels return their value.
    pub fn inverse_row(&self, row: ArrayView1<f64>) -> Result<Vec<f64>> {
        check_len(self.len(), row.len())?;
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, v)| v * (self.max[j] - self.min[j]) + self.min[j])
            .collect())
    }

    pub fn inverse(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_len(self.len(), x.ncols())?;
        let mut out = x.clone();
        for mut row in out.outer_iter_mut() {
            let inv = self.inverse_row(row.view())?;
            row.assign(&ArrayView1::from(&inv));
        }
        Ok(out)
    }
}
