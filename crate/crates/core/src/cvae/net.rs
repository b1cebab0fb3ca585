//! Network parameters, forward pass and manual backpropagation.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix in a serde-friendly form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<&Array2<f64>> for Matrix {
    fn from(a: &Array2<f64>) -> Self {
        Self { rows: a.nrows(), cols: a.ncols(), data: a.iter().copied().collect() }
    }
}

impl TryFrom<Matrix> for Array2<f64> {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        Array2::from_shape_vec((m.rows, m.cols), m.data)
            .map_err(|e| Error::InvalidConfig(format!("matrix shape: {e}")))
    }
}

/// Layer sizes: input N, hidden H, latent M, labels L.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub h: usize,
    pub m: usize,
    pub l: usize,
}

/// Parameter tensors in a fixed order. Biases are 1 × k rows. The input
/// layers split their weights into a data block and a label block, which
/// equals one affine map over the concatenated `[x; onehot]`.
pub(crate) const N_TENSORS: usize = 12;

pub(crate) const NAMES: [&str; N_TENSORS] = [
    "enc_w_x", "enc_w_label", "enc_b", "mu_w", "mu_b", "logvar_w", "logvar_b",
    "dec_w_z", "dec_w_label", "dec_b", "out_w", "out_b",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub(crate) dims: Dims,
    pub(crate) t: Vec<Array2<f64>>,
}

const ENC_WX: usize = 0;
const ENC_WL: usize = 1;
const ENC_B: usize = 2;
const MU_W: usize = 3;
const MU_B: usize = 4;
const LV_W: usize = 5;
const LV_B: usize = 6;
const DEC_WZ: usize = 7;
const DEC_WL: usize = 8;
const DEC_B: usize = 9;
const OUT_W: usize = 10;
const OUT_B: usize = 11;

impl Params {
    pub(crate) fn shapes(d: Dims) -> [(usize, usize); N_TENSORS] {
        [
            (d.n, d.h), (d.l, d.h), (1, d.h),
            (d.h, d.m), (1, d.m),
            (d.h, d.m), (1, d.m),
            (d.m, d.h), (d.l, d.h), (1, d.h),
            (d.h, d.n), (1, d.n),
        ]
    }

    pub(crate) fn zeros(dims: Dims) -> Self {
        Self { dims, t: Self::shapes(dims).iter().map(|&s| Array2::zeros(s)).collect() }
    }

    /// Weights uniform in ±√(6 / (fan_in + fan_out)), biases zero. The label
    /// block shares the fan-in of its layer's concatenated input.
    pub(crate) fn init<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Result<Self> {
        if dims.n == 0 || dims.h == 0 || dims.m == 0 || dims.l == 0 {
            return Err(Error::InvalidConfig(format!("CVAE dimensions must be positive: {dims:?}")));
        }
        let mut p = Self::zeros(dims);
        let fans = [
            (ENC_WX, dims.n + dims.l, dims.h),
            (ENC_WL, dims.n + dims.l, dims.h),
            (MU_W, dims.h, dims.m),
            (LV_W, dims.h, dims.m),
            (DEC_WZ, dims.m + dims.l, dims.h),
            (DEC_WL, dims.m + dims.l, dims.h),
            (OUT_W, dims.h, dims.n),
        ];
        for (i, fan_in, fan_out) in fans {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            p.t[i].mapv_inplace(|_| rng.random_range(-a..a));
        }
        Ok(p)
    }

    pub(crate) fn to_matrices(&self) -> Vec<Matrix> {
        self.t.iter().map(Matrix::from).collect()
    }

    pub(crate) fn from_matrices(dims: Dims, ms: Vec<Matrix>) -> Result<Self> {
        if ms.len() != N_TENSORS {
            return Err(Error::InvalidConfig(format!("expected {N_TENSORS} tensors, found {}", ms.len())));
        }
        let t = ms.into_iter().map(Array2::try_from).collect::<Result<Vec<_>>>()?;
        for (a, s) in t.iter().zip(Self::shapes(dims)) {
            if a.dim() != s {
                return Err(Error::InvalidConfig(format!("tensor shape {:?}, expected {s:?}", a.dim())));
            }
        }
        let p = Self { dims, t };
        if !p.is_finite() {
            return Err(Error::NonFinite { step: 0 });
        }
        Ok(p)
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.t.iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Decoder mean for latent rows `z` under labels.
    pub(crate) fn decode(&self, z: ArrayView2<f64>, labels: &[usize]) -> Array2<f64> {
        let a2 = affine(z, &self.t[DEC_WZ], &self.t[DEC_WL], &self.t[DEC_B], labels);
        let h2 = a2.mapv(relu);
        let mut y = h2.dot(&self.t[OUT_W]) + &self.t[OUT_B];
        y.mapv_inplace(sigmoid);
        y
    }
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `x W_x + W_label[l] + b` row by row.
fn affine(
    x: ArrayView2<f64>,
    w_x: &Array2<f64>,
    w_label: &Array2<f64>,
    b: &Array2<f64>,
    labels: &[usize],
) -> Array2<f64> {
    let mut a = x.dot(w_x) + b;
    for (mut row, &l) in a.outer_iter_mut().zip(labels) {
        row += &w_label.row(l);
    }
    a
}

/// KL(𝒩(μ, σ²) ‖ 𝒩(0, 1)) summed over latent dimensions.
pub fn kl_divergence(mu: &[f64], log_var: &[f64]) -> f64 {
    mu.iter()
        .zip(log_var)
        .map(|(m, lv)| 0.5 * (m * m + lv.exp() - lv - 1.0))
        .sum()
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// Loss terms of one batch, each averaged over the batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

/// Negative ELBO and its gradients for a scaled batch with fixed
/// reparameterization noise `eps` (B × M).
pub(crate) fn elbo_with_noise(
    p: &Params,
    x: ArrayView2<f64>,
    labels: &[usize],
    beta: f64,
    eps: &Array2<f64>,
) -> Result<(LossParts, Params)> {
    let b = x.nrows();
    if b == 0 {
        return Err(Error::EmptyInput);
    }
    crate::error::check_len(b, labels.len())?;
    crate::error::check_len(p.dims.n, x.ncols())?;
    if let Some(&bad) = labels.iter().find(|&&l| l >= p.dims.l) {
        return Err(Error::UnknownLabel(format!("label index {bad}")));
    }
    let t = &p.t;
    let inv_b = 1.0 / b as f64;

    let a1 = affine(x, &t[ENC_WX], &t[ENC_WL], &t[ENC_B], labels);
    let h1 = a1.mapv(relu);
    let mu = h1.dot(&t[MU_W]) + &t[MU_B];
    let lv = h1.dot(&t[LV_W]) + &t[LV_B];
    let sigma = lv.mapv(|v| (0.5 * v).exp());
    let z = &mu + &(&sigma * eps);
    let a2 = affine(z.view(), &t[DEC_WZ], &t[DEC_WL], &t[DEC_B], labels);
    let h2 = a2.mapv(relu);
    let y = (h2.dot(&t[OUT_W]) + &t[OUT_B]).mapv(sigmoid);

    let diff = &y - &x;
    let reconstruction = diff.iter().map(|d| d * d).sum::<f64>() * inv_b;
    let kl = mu
        .iter()
        .zip(lv.iter())
        .map(|(m, v)| 0.5 * (m * m + v.exp() - v - 1.0))
        .sum::<f64>()
        * inv_b;
    let total = reconstruction + beta * kl;

    let mut g = Params::zeros(p.dims);
    let da3 = Array2::from_shape_fn(y.dim(), |(i, j)| {
        let yv = y[[i, j]];
        2.0 * inv_b * diff[[i, j]] * yv * (1.0 - yv)
    });
    g.t[OUT_W] = h2.t().dot(&da3);
    g.t[OUT_B] = da3.sum_axis(Axis(0)).insert_axis(Axis(0));
    let mut da2 = da3.dot(&t[OUT_W].t());
    da2.zip_mut_with(&a2, |d, &a| {
        if a <= 0.0 {
            *d = 0.0
        }
    });
    g.t[DEC_WZ] = z.t().dot(&da2);
    g.t[DEC_B] = da2.sum_axis(Axis(0)).insert_axis(Axis(0));
    for (row, &l) in da2.outer_iter().zip(labels) {
        let mut gl = g.t[DEC_WL].row_mut(l);
        gl += &row;
    }
    let dz = da2.dot(&t[DEC_WZ].t());
    let kl_scale = beta * inv_b;
    let dmu = &dz + &(&mu * kl_scale);
    let dlv = Array2::from_shape_fn(lv.dim(), |(i, j)| {
        dz[[i, j]] * eps[[i, j]] * 0.5 * sigma[[i, j]] + kl_scale * 0.5 * (lv[[i, j]].exp() - 1.0)
    });
    g.t[MU_W] = h1.t().dot(&dmu);
    g.t[MU_B] = dmu.sum_axis(Axis(0)).insert_axis(Axis(0));
    g.t[LV_W] = h1.t().dot(&dlv);
    g.t[LV_B] = dlv.sum_axis(Axis(0)).insert_axis(Axis(0));
    let mut da1 = dmu.dot(&t[MU_W].t()) + dlv.dot(&t[LV_W].t());
    da1.zip_mut_with(&a1, |d, &a| {
        if a <= 0.0 {
            *d = 0.0
        }
    });
    g.t[ENC_WX] = x.t().dot(&da1);
    g.t[ENC_B] = da1.sum_axis(Axis(0)).insert_axis(Axis(0));
    for (row, &l) in da1.outer_iter().zip(labels) {
        let mut gl = g.t[ENC_WL].row_mut(l);
        gl += &row;
    }

    if !total.is_finite() || !g.is_finite() {
        return Err(Error::NonFinite { step: 0 });
    }
    Ok((LossParts { total, reconstruction, kl }, g))
}

/// Largest relative difference between the analytic gradient of the negative
/// ELBO and its central finite difference (step 1e-4), over every parameter
/// of a randomly initialized network with a four-row batch.
pub fn gradient_check(dims: Dims, seed: u64) -> Result<f64> {
    use crate::rng::{stream_rng, Stream};
    let mut rng = stream_rng(seed, Stream::CvaeInit, 0, 0);
    let mut p = Params::init(dims, &mut rng)?;
    // Nonzero biases so every term of the backward pass is exercised.
    for i in [ENC_B, MU_B, LV_B, DEC_B, OUT_B] {
        p.t[i].mapv_inplace(|_| rng.random_range(-0.3..0.3));
    }
    let b = 4;
    let x = Array2::from_shape_simple_fn((b, dims.n), || rng.random_range(0.0..1.0));
    let eps = standard_normal(b, dims.m, &mut rng);
    let labels: Vec<usize> = (0..b).map(|i| i % dims.l).collect();
    let beta = dims.n as f64 / dims.m as f64;
    let (_, g) = elbo_with_noise(&p, x.view(), &labels, beta, &eps)?;
    let h = 1e-4;
    let mut worst = 0.0f64;
    for ti in 0..N_TENSORS {
        let cols = p.t[ti].ncols();
        for idx in 0..p.t[ti].len() {
            let (r, c) = (idx / cols, idx % cols);
            let mut plus = p.clone();
            plus.t[ti][[r, c]] += h;
            let mut minus = p.clone();
            minus.t[ti][[r, c]] -= h;
            let fp = elbo_with_noise(&plus, x.view(), &labels, beta, &eps)?.0.total;
            let fm = elbo_with_noise(&minus, x.view(), &labels, beta, &eps)?.0.total;
            let numeric = (fp - fm) / (2.0 * h);
            let analytic = g.t[ti][[r, c]];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use ndarray::Array2;

    const DIMS: Dims = Dims { n: 8, h: 5, m: 2, l: 2 };

    fn fixture() -> (Params, Array2<f64>, Vec<usize>, Array2<f64>) {
        let mut rng = stream_rng(99, Stream::CvaeInit, 0, 0);
        let mut p = Params::init(DIMS, &mut rng).unwrap();
        // Nonzero biases so every term of the backward pass is exercised.
        for i in [ENC_B, MU_B, LV_B, DEC_B, OUT_B] {
            p.t[i].mapv_inplace(|_| rng.random_range(-0.3..0.3));
        }
        let x = Array2::from_shape_simple_fn((4, DIMS.n), || rng.random_range(0.0..1.0));
        let eps = standard_normal(4, DIMS.m, &mut rng);
        (p, x, vec![0, 1, 1, 0], eps)
    }

    #[test]
    fn gradients_match_central_differences() {
        let (p, x, labels, eps) = fixture();
        let beta = DIMS.n as f64 / DIMS.m as f64;
        let (_, g) = elbo_with_noise(&p, x.view(), &labels, beta, &eps).unwrap();
        let h = 1e-4;
        let mut worst = 0.0f64;
        for ti in 0..N_TENSORS {
            for idx in 0..p.t[ti].len() {
                let (r, c) = (idx / p.t[ti].ncols(), idx % p.t[ti].ncols());
                let mut plus = p.clone();
                plus.t[ti][[r, c]] += h;
                let mut minus = p.clone();
                minus.t[ti][[r, c]] -= h;
                let fp = elbo_with_noise(&plus, x.view(), &labels, beta, &eps).unwrap().0.total;
                let fm = elbo_with_noise(&minus, x.view(), &labels, beta, &eps).unwrap().0.total;
                let numeric = (fp - fm) / (2.0 * h);
                let analytic = g.t[ti][[r, c]];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7);
                assert!(rel < 1e-3, "{}[{r},{c}]: analytic {analytic}, numeric {numeric}", NAMES[ti]);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-3);
    }

    #[test]
    fn gradient_check_on_other_shapes() {
        assert!(gradient_check(Dims { n: 6, h: 3, m: 1, l: 3 }, 1).unwrap() < 1e-3);
        assert!(gradient_check(Dims { n: 0, h: 3, m: 1, l: 3 }, 1).is_err());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!(kl_divergence(&[0.5], &[0.0]) > 0.0);
        assert!(kl_divergence(&[0.0], &[0.7]) > 0.0);
    }

    #[test]
    fn zero_loss_at_perfect_reconstruction() {
        // All weights zero: the decoder emits sigmoid(0) = 0.5 and the
        // posterior is standard normal; with ε = 0 nothing else contributes.
        let p = Params::zeros(DIMS);
        let x = Array2::from_elem((3, DIMS.n), 0.5);
        let eps = Array2::zeros((3, DIMS.m));
        let (loss, g) = elbo_with_noise(&p, x.view(), &[0, 1, 0], 4.0, &eps).unwrap();
        assert_eq!(loss.total, 0.0);
        assert_eq!(loss.kl, 0.0);
        assert!(g.t.iter().all(|a| a.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn decoder_output_in_unit_interval() {
        let (p, _, _, _) = fixture();
        let mut rng = stream_rng(5, Stream::CvaeGenerate, 0, 0);
        let z = standard_normal(50, DIMS.m, &mut rng) * 10.0;
        let y = p.decode(z.view(), &vec![1; 50]);
        assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn rejects_bad_labels() {
        let (p, x, _, eps) = fixture();
        assert!(matches!(
            elbo_with_noise(&p, x.view(), &[0, 1, 2, 0], 1.0, &eps),
            Err(Error::UnknownLabel(_))
        ));
    }
}
