//! Channel-level preprocessing: subsetting, rebinning, peak detection and
//! escape-peak / unique-peak weighting.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::spectrum::{
    channel_to_energy, AlloyLibrary, CategoricalDistribution, DetectorProfile, Peak, PeakSet,
    Spectrum,
};

/// Energy of the annihilation photon; a photopeak above twice this value can
/// produce single and double escape peaks.
pub const ELECTRON_MASS_KEV: f64 = 511.0;
pub const PAIR_THRESHOLD_KEV: f64 = 2.0 * ELECTRON_MASS_KEV;

/// Keeps the first `max_channels` channels.
pub fn subset(s: &Spectrum, max_channels: usize) -> Result<Spectrum> {
    if max_channels == 0 || max_channels > s.len() {
        return Err(Error::out_of_range(
            "max_channels",
            format!("{max_channels} not in 1..={}", s.len()),
        ));
    }
    Spectrum::new(s.counts()[..max_channels].to_vec())
}

/// Sums groups of `factor` adjacent channels. A trailing partial group becomes
/// the last output channel, so the total is preserved.
pub fn rebin(s: &Spectrum, factor: usize) -> Result<Spectrum> {
    if factor == 0 {
        return Err(Error::out_of_range("rebin factor", "must be ≥ 1"));
    }
    let n_out = s.len().div_ceil(factor);
    let mut out = vec![0.0; n_out];
    for (i, c) in s.counts().iter().enumerate() {
        out[i / factor] += c;
    }
    Spectrum::new(out)
}

/// Single and double escape-peak energies below a photopeak at `energy_kev`.
/// Both are present only for photopeaks above 1022 keV.
pub fn escape_peak_positions(energy_kev: f64) -> (Option<f64>, Option<f64>) {
    if energy_kev > PAIR_THRESHOLD_KEV {
        (
            Some(energy_kev - ELECTRON_MASS_KEV),
            Some(energy_kev - PAIR_THRESHOLD_KEV),
        )
    } else {
        (None, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prominence {
    /// Absolute counts above the local median.
    Absolute(f64),
    /// Multiple of the whole spectrum's median count.
    MedianMultiple(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakParams {
    pub window: usize,
    pub prominence: Prominence,
}

impl Default for PeakParams {
    fn default() -> Self {
        Self {
            window: 25,
            prominence: Prominence::MedianMultiple(5.0),
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Channels that are strict maxima of their ±`window` neighborhood and rise
/// at least `min_prominence` above the neighborhood median.
pub fn detect_peaks(
    s: &Spectrum,
    min_prominence: f64,
    window: usize,
    detector: &DetectorProfile,
) -> Result<PeakSet> {
    if window == 0 {
        return Err(Error::out_of_range("window", "must be ≥ 1"));
    }
    check_len(detector.n_channels, s.len())?;
    let c = s.counts();
    let n = c.len();
    let mut peaks = Vec::new();
    let mut scratch = Vec::with_capacity(2 * window + 1);
    for i in 0..n {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(n - 1);
        let strict_max = (lo..=hi).all(|j| j == i || c[j] < c[i]);
        if !strict_max || c[i] <= 0.0 {
            continue;
        }
        scratch.clear();
        scratch.extend_from_slice(&c[lo..=hi]);
        let local_median = median(&mut scratch);
        if c[i] - local_median >= min_prominence {
            peaks.push(Peak {
                channel: i,
                energy_kev: channel_to_energy(detector, i)?,
                height: c[i],
            });
        }
    }
    PeakSet::new(peaks)
}

/// [`detect_peaks`] with the prominence resolved from `params`.
pub fn detect_peaks_with(
    s: &Spectrum,
    params: &PeakParams,
    detector: &DetectorProfile,
) -> Result<PeakSet> {
    let prominence = match params.prominence {
        Prominence::Absolute(p) => p,
        Prominence::MedianMultiple(k) => {
            let mut v = s.counts().to_vec();
            k * median(&mut v)
        }
    };
    detect_peaks(s, prominence, params.window, detector)
}

/// Per alloy, the peak channels with no other alloy's peak within ±window.
pub fn unique_peaks(
    lib: &AlloyLibrary,
    params: &PeakParams,
) -> Result<BTreeMap<String, BTreeSet<usize>>> {
    let sets = lib
        .entries()
        .iter()
        .map(|e| {
            detect_peaks_with(&e.long_term, params, lib.detector())
                .map(|p| p.channels().collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = BTreeMap::new();
    for (a, entry) in lib.entries().iter().enumerate() {
        let own: BTreeSet<usize> = sets[a]
            .iter()
            .copied()
            .filter(|&ch| {
                sets.iter()
                    .enumerate()
                    .filter(|(b, _)| *b != a)
                    .all(|(_, other)| other.iter().all(|&o| o.abs_diff(ch) > params.window))
            })
            .collect();
        out.insert(entry.label.clone(), own);
    }
    Ok(out)
}

fn check_weights(n: usize, weights: &[f64]) -> Result<()> {
    check_len(n, weights.len())?;
    if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidConfig(format!(
            "weight {} at channel {i} is not a finite non-negative number",
            weights[i]
        )));
    }
    Ok(())
}

/// Element-wise weighting; the result carries real-valued counts.
pub fn weight_spectrum(s: &Spectrum, weights: &[f64]) -> Result<Spectrum> {
    check_weights(s.len(), weights)?;
    Spectrum::new(s.counts().iter().zip(weights).map(|(c, w)| c * w).collect())
}

/// Element-wise weighting followed by renormalization.
pub fn weight_distribution(
    d: &CategoricalDistribution,
    weights: &[f64],
) -> Result<CategoricalDistribution> {
    check_weights(d.len(), weights)?;
    let w: Vec<f64> = d.probs().iter().zip(weights).map(|(p, w)| p * w).collect();
    CategoricalDistribution::from_weights(&w)
}

/// Rectangular multiplicative band around selected channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandWeighting {
    pub half_width: usize,
    pub factor: f64,
}

impl Default for BandWeighting {
    fn default() -> Self {
        Self {
            half_width: 3,
            factor: 1.5,
        }
    }
}

impl BandWeighting {
    /// Weight vector of length `n`: `factor` within ±half_width of any
    /// center, 1 elsewhere. Overlapping bands do not compound.
    pub fn weights(&self, n: usize, centers: impl IntoIterator<Item = usize>) -> Vec<f64> {
        let mut w = vec![1.0; n];
        for c in centers {
            if c >= n {
                continue;
            }
            let lo = c.saturating_sub(self.half_width);
            let hi = (c + self.half_width).min(n - 1);
            for x in &mut w[lo..=hi] {
                *x = self.factor;
            }
        }
        w
    }
}

/// Channels of escape and double-escape peaks implied by the photopeaks of
/// `long_term`.
pub fn escape_peak_channels(
    long_term: &Spectrum,
    detector: &DetectorProfile,
    params: &PeakParams,
) -> Result<Vec<usize>> {
    let peaks = detect_peaks_with(long_term, params, detector)?;
    let mut out = Vec::new();
    for p in peaks.peaks() {
        let (ep, dep) = escape_peak_positions(p.energy_kev);
        out.extend(ep.and_then(|e| detector.energy_to_channel(e)));
        out.extend(dep.and_then(|e| detector.energy_to_channel(e)));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn reshape(s: &Spectrum, keep: Option<usize>, factor: Option<usize>) -> Result<Spectrum> {
    let s = match keep {
        Some(n) => subset(s, n)?,
        None => s.clone(),
    };
    match factor {
        Some(f) => rebin(&s, f),
        None => Ok(s),
    }
}

/// Preprocessing chain applied before classification.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Preprocessing {
    /// Keep only the first N channels.
    pub subset: Option<usize>,
    /// Aggregate adjacent channels by this factor.
    pub rebin: Option<usize>,
    /// Escape-peak weighting of MLC reference distributions.
    pub escape_peaks: Option<BandWeighting>,
    /// Unique-peak weighting of all training and test spectra.
    pub unique_peaks: Option<BandWeighting>,
    pub peak_detection: PeakParams,
}

impl Preprocessing {
    pub fn is_identity(&self) -> bool {
        self.subset.is_none()
            && self.rebin.is_none()
            && self.escape_peaks.is_none()
            && self.unique_peaks.is_none()
    }

    fn reshape(&self, s: &Spectrum) -> Result<Spectrum> {
        reshape(s, self.subset, self.rebin)
    }

    /// Resolves library-dependent weights.
    pub fn prepare(&self, lib: &AlloyLibrary) -> Result<PreparedPreprocessing> {
        let reshaped = lib.map_spectra(self.rebin.unwrap_or(1) as f64, |s| self.reshape(s))?;
        let n = reshaped.n_channels();
        let unique_weights = match &self.unique_peaks {
            Some(band) => {
                let owned = unique_peaks(&reshaped, &self.peak_detection)?;
                let centers: Vec<usize> = owned.values().flatten().copied().collect();
                Some(band.weights(n, centers))
            }
            None => None,
        };
        let escape_weights = match &self.escape_peaks {
            Some(band) => Some(
                reshaped
                    .entries()
                    .iter()
                    .map(|e| {
                        escape_peak_channels(&e.long_term, reshaped.detector(), &self.peak_detection)
                            .map(|chs| band.weights(n, chs))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        Ok(PreparedPreprocessing {
            transform: SpectrumTransform {
                subset: self.subset,
                rebin: self.rebin,
                unique_weights,
            },
            library: reshaped,
            escape_weights,
        })
    }
}

/// The per-spectrum part of a prepared chain: reshape, then the
/// unique-peak weights if any.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTransform {
    pub subset: Option<usize>,
    pub rebin: Option<usize>,
    pub unique_weights: Option<Vec<f64>>,
}

impl SpectrumTransform {
    pub fn apply(&self, s: &Spectrum) -> Result<Spectrum> {
        let s = reshape(s, self.subset, self.rebin)?;
        match &self.unique_weights {
            Some(w) => weight_spectrum(&s, w),
            None => Ok(s),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.subset.is_none() && self.rebin.is_none() && self.unique_weights.is_none()
    }
}

/// A preprocessing chain bound to one library.
#[derive(Debug, Clone)]
pub struct PreparedPreprocessing {
    transform: SpectrumTransform,
    library: AlloyLibrary,
    escape_weights: Option<Vec<Vec<f64>>>,
}

impl PreparedPreprocessing {
    /// The library after subsetting and rebinning (unweighted).
    pub fn library(&self) -> &AlloyLibrary {
        &self.library
    }

    pub fn apply(&self, s: &Spectrum) -> Result<Spectrum> {
        self.transform.apply(s)
    }

    pub fn transform(&self) -> &SpectrumTransform {
        &self.transform
    }

    pub fn unique_weights(&self) -> Option<&[f64]> {
        self.transform.unique_weights.as_deref()
    }

    /// Per-alloy weights for the MLC reference distributions, in library order.
    pub fn escape_weights(&self) -> Option<&[Vec<f64>]> {
        self.escape_weights.as_deref()
    }
}
