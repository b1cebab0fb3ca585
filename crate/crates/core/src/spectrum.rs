//! Spectrum, distribution, detector and library types.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Photon counts per energy channel.
///
/// Measured and sampled spectra hold integral counts. Weighted spectra and
/// spectra produced by the CVAE decoder hold non-negative real values; the
/// likelihood math downstream only needs count-weighted sums, so both are
/// represented by the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Spectrum {
    counts: Vec<f64>,
}

impl Spectrum {
    pub fn new(counts: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidSpectrum("no channels".into()));
        }
        if let Some(i) = counts.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "channel {i} has invalid count {}",
                counts[i]
            )));
        }
        Ok(Self { counts })
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        Self::new(counts.iter().map(|&c| c as f64).collect())
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn into_counts(self) -> Vec<f64> {
        self.counts
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn is_integral(&self) -> bool {
        self.counts.iter().all(|c| c.fract() == 0.0)
    }

    /// Integral photon counts, or `NonIntegral` for weighted/generated spectra.
    pub fn photon_counts(&self) -> Result<Vec<u64>> {
        self.counts
            .iter()
            .map(|&c| {
                if c.fract() == 0.0 && c <= u64::MAX as f64 {
                    Ok(c as u64)
                } else {
                    Err(Error::NonIntegral)
                }
            })
            .collect()
    }

    /// Channel-wise sum, used when pooling spectra of the same label.
    pub fn accumulate(&mut self, other: &Spectrum) -> Result<()> {
        check_len(self.len(), other.len())?;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Spectrum {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Spectrum::new(v)
    }
}

impl From<Spectrum> for Vec<f64> {
    fn from(s: Spectrum) -> Self {
        s.counts
    }
}

const SUM_TOLERANCE: f64 = 1e-9;

/// Normalized probability per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CategoricalDistribution {
    probs: Vec<f64>,
}

impl CategoricalDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no channels".into()));
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "channel {i} has probability {}",
                probs[i]
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "channel {i} has weight {}",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroTotal);
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect()
    }

    pub fn log_probs(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.ln()).collect()
    }

    /// Total variation distance.
    pub fn total_variation(&self, other: &Self) -> Result<f64> {
        check_len(self.len(), other.len())?;
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

impl TryFrom<Vec<f64>> for CategoricalDistribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        CategoricalDistribution::new(v)
    }
}

impl From<CategoricalDistribution> for Vec<f64> {
    fn from(d: CategoricalDistribution) -> Self {
        d.probs
    }
}

/// Relative frequencies `c_i / Σc`.
pub fn normalize(s: &Spectrum) -> Result<CategoricalDistribution> {
    let total = s.total();
    if total <= 0.0 {
        return Err(Error::ZeroTotal);
    }
    CategoricalDistribution::new(s.counts().iter().map(|c| c / total).collect())
}

/// Add-one smoothed frequencies `(c_i + 1) / Σ(c_j + 1)`; strictly positive.
pub fn smooth_add_one(s: &Spectrum) -> CategoricalDistribution {
    let total = s.total() + s.len() as f64;
    CategoricalDistribution {
        probs: s.counts().iter().map(|c| (c + 1.0) / total).collect(),
    }
}

/// Linear channel → keV calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub slope_kev: f64,
    pub intercept_kev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorProfile {
    pub name: String,
    pub n_channels: usize,
    pub counts_per_second: f64,
    pub calibration: Calibration,
}

/// KeV span shared by the built-in detector presets.
const PRESET_RANGE_KEV: f64 = 9830.4;

impl DetectorProfile {
    pub fn new(
        name: impl Into<String>,
        n_channels: usize,
        counts_per_second: f64,
        calibration: Calibration,
    ) -> Result<Self> {
        let p = Self {
            name: name.into(),
            n_channels,
            counts_per_second,
            calibration,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 {
            return Err(Error::InvalidConfig("n_channels must be ≥ 1".into()));
        }
        if !(self.counts_per_second > 0.0 && self.counts_per_second.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "counts_per_second must be > 0, got {}",
                self.counts_per_second
            )));
        }
        if !(self.calibration.slope_kev > 0.0 && self.calibration.slope_kev.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "calibration slope must be > 0, got {}",
                self.calibration.slope_kev
            )));
        }
        Ok(())
    }

    fn preset(name: &str, n_channels: usize, cps: f64) -> Self {
        Self {
            name: name.into(),
            n_channels,
            counts_per_second: cps,
            calibration: Calibration {
                slope_kev: PRESET_RANGE_KEV / n_channels as f64,
                intercept_kev: 0.0,
            },
        }
    }

    /// HPGe, copper blocks: 16,384 channels at 30,000 cps.
    pub fn hpge_copper_block() -> Self {
        Self::preset("hpge-copper-block", 16_384, 30_000.0)
    }

    /// HPGe, aluminium blocks: 16,384 channels at 19,000 cps.
    pub fn hpge_aluminium_block() -> Self {
        Self::preset("hpge-aluminium-block", 16_384, 19_000.0)
    }

    /// HPGe, aluminium chips: 16,384 channels at 7,000 cps.
    pub fn hpge_aluminium_chips() -> Self {
        Self::preset("hpge-aluminium-chips", 16_384, 7_000.0)
    }

    /// CeBr₃, aluminium chips: 2,048 channels at 11,000 cps.
    pub fn cebr_aluminium_chips() -> Self {
        Self::preset("cebr-aluminium-chips", 2_048, 11_000.0)
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "hpge-copper-block" => Some(Self::hpge_copper_block()),
            "hpge-aluminium-block" => Some(Self::hpge_aluminium_block()),
            "hpge-aluminium-chips" => Some(Self::hpge_aluminium_chips()),
            "cebr-aluminium-chips" => Some(Self::cebr_aluminium_chips()),
            _ => None,
        }
    }

    pub fn max_energy_kev(&self) -> f64 {
        self.calibration.slope_kev * self.n_channels as f64 + self.calibration.intercept_kev
    }

    /// Nearest channel to `energy_kev`, if inside the calibrated range.
    pub fn energy_to_channel(&self, energy_kev: f64) -> Option<usize> {
        let x = (energy_kev - self.calibration.intercept_kev) / self.calibration.slope_kev;
        let ch = x.round();
        (ch >= 0.0 && ch < self.n_channels as f64).then_some(ch as usize)
    }
}

pub fn channel_to_energy(d: &DetectorProfile, channel: usize) -> Result<f64> {
    if channel >= d.n_channels {
        return Err(Error::out_of_range(
            "channel",
            format!("{channel} not in 0..{}", d.n_channels),
        ));
    }
    Ok(d.calibration.slope_kev * channel as f64 + d.calibration.intercept_kev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlloyEntry {
    pub label: String,
    pub long_term: Spectrum,
}

/// Labeled long-term spectra measured (or rendered) with one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlloyLibrary {
    entries: Vec<AlloyEntry>,
    detector: DetectorProfile,
}

impl AlloyLibrary {
    pub fn new(entries: Vec<AlloyEntry>, detector: DetectorProfile) -> Result<Self> {
        detector.validate()?;
        if entries.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "library needs at least 2 alloys, got {}",
                entries.len()
            )));
        }
        Self::check_entries(&entries, &detector)?;
        Ok(Self { entries, detector })
    }

    /// Like [`AlloyLibrary::new`] but accepts a single alloy; only the
    /// degenerate benchmark case uses it.
    pub fn new_unchecked_count(entries: Vec<AlloyEntry>, detector: DetectorProfile) -> Result<Self> {
        detector.validate()?;
        if entries.is_empty() {
            return Err(Error::EmptyInput);
        }
        Self::check_entries(&entries, &detector)?;
        Ok(Self { entries, detector })
    }

    fn check_entries(entries: &[AlloyEntry], detector: &DetectorProfile) -> Result<()> {
        for (i, e) in entries.iter().enumerate() {
            check_len(detector.n_channels, e.long_term.len())?;
            if entries[..i].iter().any(|o| o.label == e.label) {
                return Err(Error::InvalidConfig(format!("duplicate label {:?}", e.label)));
            }
        }
        Ok(())
    }

    /// Same spectra with a different detector count rate.
    pub fn with_counts_per_second(mut self, counts_per_second: f64) -> Result<Self> {
        self.detector.counts_per_second = counts_per_second;
        self.detector.validate()?;
        Ok(self)
    }

    pub fn entries(&self) -> &[AlloyEntry] {
        &self.entries
    }

    pub fn detector(&self) -> &DetectorProfile {
        &self.detector
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.label.clone()).collect()
    }

    pub fn n_channels(&self) -> usize {
        self.detector.n_channels
    }

    pub fn distributions(&self) -> Result<Vec<CategoricalDistribution>> {
        self.entries.iter().map(|e| normalize(&e.long_term)).collect()
    }

    /// Applies a channel-level transform to every long-term spectrum. The
    /// detector profile follows the new channel count; the calibration is
    /// rescaled by `slope_factor` (rebinning) and otherwise kept.
    pub fn map_spectra(
        &self,
        slope_factor: f64,
        f: impl Fn(&Spectrum) -> Result<Spectrum>,
    ) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                Ok(AlloyEntry {
                    label: e.label.clone(),
                    long_term: f(&e.long_term)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut detector = self.detector.clone();
        detector.n_channels = entries[0].long_term.len();
        detector.calibration.slope_kev *= slope_factor;
        Self::new_unchecked_count(entries, detector)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub channel: usize,
    pub energy_kev: f64,
    pub height: f64,
}

/// Detected peaks ordered by channel.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn new(peaks: Vec<Peak>) -> Result<Self> {
        for w in peaks.windows(2) {
            if w[1].channel <= w[0].channel {
                return Err(Error::InvalidConfig("peak channels must increase".into()));
            }
        }
        if peaks.iter().any(|p| !(p.height > 0.0)) {
            return Err(Error::InvalidConfig("peak heights must be positive".into()));
        }
        Ok(Self { peaks })
    }

    pub fn peaks(&self) -> &[Peak] {
        &self.peaks
    }

    pub fn channels(&self) -> impl Iterator<Item = usize> + '_ {
        self.peaks.iter().map(|p| p.channel)
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }
}
