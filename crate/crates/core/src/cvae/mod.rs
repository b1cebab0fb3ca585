//! Conditional variational autoencoder for generating labeled short-term
//! spectra.
//!
//! Encoder `[x; onehot] → ReLU(H) → (μ, log σ²)`, decoder
//! `[z; onehot] → ReLU(H) → sigmoid(N)`. Inputs are min-max scaled per
//! channel; generated spectra are mapped back and clamped at zero.

mod adam;
mod net;
mod scaler;

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use net::{gradient_check, kl_divergence, Dims, LossParts, Params};
pub use scaler::MinMaxScaler;

use crate::classifiers::linear::feature_matrix;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::sampling::{LabeledDataset, Provenance};
use crate::spectrum::Spectrum;

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_HIDDEN: usize = 100;
pub const DEFAULT_LATENT: usize = 10;

/// β = N / M.
pub fn default_beta(n: usize, m: usize) -> f64 {
    n as f64 / m as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_units: usize,
    pub latent_dim: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// KL weight; `None` means N / M.
    pub beta: Option<f64>,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_units: DEFAULT_HIDDEN,
            latent_dim: DEFAULT_LATENT,
            batch_size: 32,
            epochs: 100,
            beta: None,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn beta_for(&self, n: usize) -> f64 {
        self.beta.unwrap_or_else(|| default_beta(n, self.latent_dim))
    }
}

/// A trained (or freshly initialized) model together with its input scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct Cvae {
    classes: Vec<String>,
    scaler: MinMaxScaler,
    params: Params,
    beta: f64,
    time_s: Option<f64>,
    counts_per_second: Option<f64>,
}

impl Cvae {
    /// Scales `data` and initializes a network for it.
    pub fn new(data: &LabeledDataset, cfg: &TrainConfig) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let x = feature_matrix(data.spectra())?;
        let dims = Dims { n: x.ncols(), h: cfg.hidden_units, m: cfg.latent_dim, l: data.classes().len() };
        let mut rng = stream_rng(cfg.seed, Stream::CvaeInit, 0, 0);
        Ok(Self {
            classes: data.classes().to_vec(),
            scaler: MinMaxScaler::fit(&x)?,
            params: Params::init(dims, &mut rng)?,
            beta: cfg.beta_for(dims.n),
            time_s: data.provenance().time_s,
            counts_per_second: data.provenance().counts_per_second,
        })
    }

    /// Initializes and trains in one go; returns the per-epoch mean loss.
    pub fn train(data: &LabeledDataset, cfg: &TrainConfig) -> Result<(Self, Vec<f64>)> {
        let mut model = Self::new(data, cfg)?;
        let history = model.fit(data, cfg)?;
        Ok((model, history))
    }

    /// Runs `cfg.epochs` epochs of mini-batch Adam on `data`, which must use
    /// this model's classes and channel count.
    pub fn fit(&mut self, data: &LabeledDataset, cfg: &TrainConfig) -> Result<Vec<f64>> {
        if data.classes() != self.classes.as_slice() {
            return Err(Error::UnknownLabel(format!("class list {:?}", data.classes())));
        }
        if cfg.batch_size == 0 {
            return Err(Error::out_of_range("batch_size", "must be ≥ 1"));
        }
        let x = self.scaler.transform(&feature_matrix(data.spectra())?)?;
        let labels = data.labels();
        let n = x.nrows();
        let m = self.params.dims.m;
        let mut state = AdamState::new(&self.params.t);
        let mut order: Vec<usize> = (0..n).collect();
        let mut history = Vec::with_capacity(cfg.epochs);
        let mut step = 0usize;
        for epoch in 0..cfg.epochs {
            order.sort_unstable();
            order.shuffle(&mut stream_rng(cfg.seed, Stream::CvaeShuffle, epoch as u64, 0));
            let mut epoch_loss = 0.0;
            for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
                let xb = x.select(Axis(0), idx);
                let lb: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
                let mut rng = stream_rng(cfg.seed, Stream::CvaeNoise, epoch as u64, bi as u64);
                let eps = net::standard_normal(idx.len(), m, &mut rng);
                let (loss, grads) = net::elbo_with_noise(&self.params, xb.view(), &lb, self.beta, &eps)
                    .map_err(|e| match e {
                        Error::NonFinite { .. } => Error::NonFinite { step },
                        other => other,
                    })?;
                adam_step(&mut self.params.t, &grads.t, &mut state, &cfg.adam);
                if !self.params.is_finite() {
                    return Err(Error::NonFinite { step });
                }
                epoch_loss += loss.total * idx.len() as f64;
                step += 1;
            }
            let mean = epoch_loss / n as f64;
            log::debug!("cvae epoch {epoch}: loss {mean:.6}");
            history.push(mean);
        }
        Ok(history)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn dims(&self) -> Dims {
        self.params.dims
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn scaler(&self) -> &MinMaxScaler {
        &self.scaler
    }

    /// Negative ELBO of a raw (unscaled) batch with noise from `rng`.
    pub fn elbo_loss<R: rand::Rng + ?Sized>(
        &self,
        data: &LabeledDataset,
        rng: &mut R,
    ) -> Result<(LossParts, Params)> {
        let x = self.scaler.transform(&feature_matrix(data.spectra())?)?;
        let eps = net::standard_normal(x.nrows(), self.params.dims.m, rng);
        net::elbo_with_noise(&self.params, x.view(), data.labels(), self.beta, &eps)
    }

    /// Decoder outputs in scaled space for `count` prior draws of `label`.
    pub fn decode_scaled(&self, label: usize, count: usize, seed: u64) -> Result<Array2<f64>> {
        if label >= self.classes.len() {
            return Err(Error::UnknownLabel(format!("label index {label}")));
        }
        let m = self.params.dims.m;
        let mut z = Array2::zeros((count, m));
        for (i, mut row) in z.outer_iter_mut().enumerate() {
            let mut rng = stream_rng(seed, Stream::CvaeGenerate, label as u64, i as u64);
            row.assign(&net::standard_normal(1, m, &mut rng).row(0));
        }
        Ok(self.params.decode(z.view(), &vec![label; count]))
    }

    /// `count` spectra of class `label`: z from the prior, decoder mean plus
    /// optional Gaussian noise of `noise_sigma` in scaled space, mapped back
    /// to counts and clamped at zero.
    pub fn generate(&self, label: usize, count: usize, seed: u64, noise_sigma: f64) -> Result<LabeledDataset> {
        self.generate_many(&[(label, count)], seed, noise_sigma)
    }

    /// `n_per_class` spectra for every class.
    pub fn generate_all(&self, n_per_class: usize, seed: u64, noise_sigma: f64) -> Result<LabeledDataset> {
        let req: Vec<(usize, usize)> = (0..self.classes.len()).map(|l| (l, n_per_class)).collect();
        self.generate_many(&req, seed, noise_sigma)
    }

    fn generate_many(&self, requests: &[(usize, usize)], seed: u64, noise_sigma: f64) -> Result<LabeledDataset> {
        if !(noise_sigma >= 0.0) {
            return Err(Error::out_of_range("noise_sigma", format!("{noise_sigma}")));
        }
        let noise = Normal::new(0.0, noise_sigma.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut spectra = Vec::new();
        let mut labels = Vec::new();
        for &(label, count) in requests {
            let mut y = self.decode_scaled(label, count, seed)?;
            for (i, mut row) in y.outer_iter_mut().enumerate() {
                if noise_sigma > 0.0 {
                    let mut rng = stream_rng(seed, Stream::CvaeNoise, u64::MAX - label as u64, i as u64);
                    row.mapv_inplace(|v| v + noise.sample(&mut rng));
                }
                let counts = self.scaler.inverse_row(row.view())?;
                spectra.push(Spectrum::new(counts.into_iter().map(|c| c.max(0.0)).collect())?);
                labels.push(label);
            }
        }
        LabeledDataset::new(
            self.classes.clone(),
            spectra,
            labels,
            Provenance {
                generator: "cvae".into(),
                seed,
                stream: Stream::CvaeGenerate,
                time_s: self.time_s,
                counts_per_second: self.counts_per_second,
            },
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = CvaeFile {
            version: FORMAT_VERSION,
            dims: self.params.dims,
            classes: self.classes.clone(),
            beta: self.beta,
            time_s: self.time_s,
            counts_per_second: self.counts_per_second,
            scaler: self.scaler.clone(),
            tensor_names: net::NAMES.iter().map(|s| s.to_string()).collect(),
            tensors: self.params.to_matrices(),
        };
        let w = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        serde_json::to_writer(w, &file)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r = std::io::BufReader::new(std::fs::File::open(path).map_err(|e| Error::io(path, e))?);
        let file: CvaeFile = serde_json::from_reader(r)?;
        if file.version != FORMAT_VERSION {
            return Err(Error::Version { expected: FORMAT_VERSION, found: file.version });
        }
        if file.scaler.len() != file.dims.n || file.classes.len() != file.dims.l {
            return Err(Error::InvalidConfig("CVAE file metadata disagrees with its dimensions".into()));
        }
        Ok(Self {
            params: Params::from_matrices(file.dims, file.tensors)?,
            classes: file.classes,
            scaler: file.scaler,
            beta: file.beta,
            time_s: file.time_s,
            counts_per_second: file.counts_per_second,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct CvaeFile {
    version: u32,
    dims: Dims,
    classes: Vec<String>,
    beta: f64,
    time_s: Option<f64>,
    counts_per_second: Option<f64>,
    scaler: MinMaxScaler,
    tensor_names: Vec<String>,
    tensors: Vec<net::Matrix>,
}
