//! Short-term spectrum synthesis by categorical sampling from long-term
//! measurements.

use rand::Rng;
use rand::SeedableRng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream, StreamRng};
use crate::spectrum::{normalize, AlloyLibrary, CategoricalDistribution, Spectrum};

/// Number of parts each long-term spectrum is split into for training data.
pub const SPLIT_PARTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub measurement_time_s: f64,
    pub counts_per_second: f64,
    pub rng_seed: u64,
}

impl SamplingConfig {
    /// `round(time · rate)`, which must be at least one photon.
    pub fn draws(&self) -> Result<u64> {
        draw_count(self.measurement_time_s, self.counts_per_second)
    }
}

pub fn draw_count(time_s: f64, rate: f64) -> Result<u64> {
    if !(time_s > 0.0 && time_s.is_finite()) {
        return Err(Error::out_of_range("measurement time", format!("{time_s} s")));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::out_of_range("counts per second", format!("{rate}")));
    }
    let n = (time_s * rate).round();
    if n < 1.0 {
        return Err(Error::out_of_range(
            "expected draw count",
            format!("{time_s} s × {rate}/s rounds to 0"),
        ));
    }
    Ok(n as u64)
}

/// Exact multinomial sampler. Large draw counts use sequential binomial
/// conditioning (channel `i` receives `Binomial(remaining, p_i / Σ_{j≥i} p_j)`
/// draws); draw counts below twice the channel count place photons one at a
/// time through an alias table, which is cheaper there.
#[derive(Debug, Clone)]
pub struct MultinomialSampler {
    conditional: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

impl MultinomialSampler {
    pub fn new(dist: &CategoricalDistribution) -> Self {
        let p = dist.probs();
        let mut conditional = vec![0.0; p.len()];
        let mut tail = 0.0;
        for i in (0..p.len()).rev() {
            tail += p[i];
            conditional[i] = if tail > 0.0 { (p[i] / tail).clamp(0.0, 1.0) } else { 0.0 };
        }
        // The last channel with mass absorbs all remaining draws.
        if let Some(last) = p.iter().rposition(|&x| x > 0.0) {
            conditional[last] = 1.0;
        }
        let alias = WeightedAliasIndex::new(p.to_vec()).expect("distribution has positive mass");
        Self { conditional, alias }
    }

    pub fn len(&self) -> usize {
        self.conditional.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditional.is_empty()
    }

    pub fn sample_counts<R: Rng + ?Sized>(&self, draws: u64, rng: &mut R) -> Vec<u64> {
        let mut out = vec![0u64; self.conditional.len()];
        if draws < 2 * out.len() as u64 {
            for _ in 0..draws {
                out[self.alias.sample(rng)] += 1;
            }
            return out;
        }
        let mut remaining = draws;
        for (slot, &q) in out.iter_mut().zip(&self.conditional) {
            if remaining == 0 {
                break;
            }
            let k = if q >= 1.0 {
                remaining
            } else if q <= 0.0 {
                0
            } else {
                Binomial::new(remaining, q)
                    .expect("conditional probability in (0, 1)")
                    .sample(rng)
            };
            *slot = k;
            remaining -= k;
        }
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, draws: u64, rng: &mut R) -> Spectrum {
        Spectrum::from_counts(&self.sample_counts(draws, rng)).expect("non-empty counts")
    }
}

/// One simulated measurement of `cfg.measurement_time_s` seconds.
pub fn sample_short(dist: &CategoricalDistribution, cfg: &SamplingConfig) -> Result<Spectrum> {
    let draws = cfg.draws()?;
    let mut rng = StreamRng::seed_from_u64(cfg.rng_seed);
    Ok(MultinomialSampler::new(dist).sample(draws, &mut rng))
}

/// Assigns every photon of `long_term` to one of `k` parts uniformly at
/// random. The parts sum channel-wise to the input.
pub fn split_dependent(long_term: &Spectrum, k: usize, seed: u64) -> Result<Vec<Spectrum>> {
    let counts = long_term.photon_counts()?;
    let total: u64 = counts.iter().sum();
    if k < 2 || total < k as u64 {
        return Err(Error::out_of_range(
            "split parts",
            format!("k = {k} with {total} total counts"),
        ));
    }
    let mut rng = StreamRng::seed_from_u64(seed);
    let mut parts = vec![vec![0u64; counts.len()]; k];
    for (ch, &c) in counts.iter().enumerate() {
        let mut remaining = c;
        for (j, part) in parts.iter_mut().enumerate() {
            if remaining == 0 {
                break;
            }
            let left = (k - j) as f64;
            let take = if j == k - 1 {
                remaining
            } else {
                Binomial::new(remaining, 1.0 / left)
                    .expect("valid split probability")
                    .sample(&mut rng)
            };
            part[ch] = take;
            remaining -= take;
        }
    }
    parts.iter().map(|p| Spectrum::from_counts(p)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Sample from the split-part distributions, round-robin.
    Train,
    /// Sample from the full long-term distribution.
    Test,
}

impl Mode {
    pub fn stream(self) -> Stream {
        match self {
            Mode::Train => Stream::Train,
            Mode::Test => Stream::Test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: u64,
    pub stream: Stream,
    pub time_s: Option<f64>,
    pub counts_per_second: Option<f64>,
}

/// Labeled spectra. `labels[i]` indexes into `classes`, whose order is the
/// tie-break order of every classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    classes: Vec<String>,
    spectra: Vec<Spectrum>,
    labels: Vec<usize>,
    provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(
        classes: Vec<String>,
        spectra: Vec<Spectrum>,
        labels: Vec<usize>,
        provenance: Provenance,
    ) -> Result<Self> {
        crate::error::check_len(spectra.len(), labels.len())?;
        if let Some(first) = spectra.first() {
            if let Some(s) = spectra.iter().find(|s| s.len() != first.len()) {
                return Err(Error::LengthMismatch {
                    expected: first.len(),
                    found: s.len(),
                });
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::out_of_range("label index", format!("{l} ≥ {}", classes.len())));
        }
        Ok(Self {
            classes,
            spectra,
            labels,
            provenance,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn spectra(&self) -> &[Spectrum] {
        &self.spectra
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_name(&self, i: usize) -> &str {
        &self.classes[self.labels[i]]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    pub fn n_channels(&self) -> Option<usize> {
        self.spectra.first().map(Spectrum::len)
    }

    /// Number of spectra per class index.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.classes.len()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Spectrum, usize)> {
        self.spectra.iter().zip(self.labels.iter().copied())
    }

    pub fn map_spectra(&self, f: impl Fn(&Spectrum) -> Result<Spectrum>) -> Result<Self> {
        let spectra = self.spectra.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(
            self.classes.clone(),
            spectra,
            self.labels.clone(),
            self.provenance.clone(),
        )
    }
}

/// Simulated measurements for every alloy of `lib` drawn on `stream`.
///
/// In train mode each long-term spectrum is first split into
/// [`SPLIT_PARTS`] parts and spectrum `j` is drawn from part `j mod 6`; in
/// test mode draws come from the full long-term distribution. Spectrum `j`
/// of alloy `a` uses its own RNG stream derived from `(seed, stream, a, j)`.
pub fn build_dataset(
    lib: &AlloyLibrary,
    time_s: f64,
    n_per_alloy: usize,
    seed: u64,
    mode: Mode,
    stream: Stream,
) -> Result<LabeledDataset> {
    if n_per_alloy == 0 {
        return Err(Error::out_of_range("spectra per alloy", "must be ≥ 1"));
    }
    let draws = draw_count(time_s, lib.detector().counts_per_second)?;
    let mut spectra = Vec::with_capacity(lib.len() * n_per_alloy);
    let mut labels = Vec::with_capacity(lib.len() * n_per_alloy);
    for (a, entry) in lib.entries().iter().enumerate() {
        let samplers = match mode {
            Mode::Test => vec![MultinomialSampler::new(&normalize(&entry.long_term)?)],
            Mode::Train => {
                let split_seed = crate::rng::derive_seed(seed, Stream::Split, a as u64, 0);
                split_dependent(&entry.long_term, SPLIT_PARTS, split_seed)?
                    .iter()
                    .map(|part| normalize(part).map(|d| MultinomialSampler::new(&d)))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        for j in 0..n_per_alloy {
            let mut rng = stream_rng(seed, stream, a as u64, j as u64);
            spectra.push(samplers[j % samplers.len()].sample(draws, &mut rng));
            labels.push(a);
        }
    }
    LabeledDataset::new(
        lib.labels(),
        spectra,
        labels,
        Provenance {
            generator: "categorical".into(),
            seed,
            stream,
            time_s: Some(time_s),
            counts_per_second: Some(lib.detector().counts_per_second),
        },
    )
}

/// Training (split-part) or test (full-distribution) dataset.
pub fn build_training_set(
    lib: &AlloyLibrary,
    time_s: f64,
    n_per_alloy: usize,
    seed: u64,
    mode: Mode,
) -> Result<LabeledDataset> {
    build_dataset(lib, time_s, n_per_alloy, seed, mode, mode.stream())
}
