//! Synthetic alloy libraries.
//!
//! Templates describe an alloy's prompt-gamma lines and an exponential
//! continuum. Rendering broadens each line with the detector's energy
//! resolution, adds single and double escape peaks below lines above
//! 1022 keV, and integrates everything over the channel grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::escape_peak_positions;
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::sampling::MultinomialSampler;
use crate::spectrum::{AlloyEntry, AlloyLibrary, CategoricalDistribution, DetectorProfile, Spectrum};

const FWHM_PER_SIGMA: f64 = 2.3548;
/// Gaussian tails beyond this many σ are dropped.
const TAIL_SIGMAS: f64 = 8.0;
/// Long-term measurement duration used for built-in libraries.
pub const LONG_TERM_SECONDS: f64 = 3600.0;
/// Seed of the built-in libraries' long-term renders.
pub const DEFAULT_LIBRARY_SEED: u64 = 0x5EED_A110;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub energy_kev: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Continuum {
    /// Counts per keV at 0 keV, in line-intensity units.
    pub amplitude: f64,
    pub decay_per_kev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlloyTemplate {
    pub label: String,
    pub lines: Vec<Line>,
    pub continuum: Continuum,
    #[serde(default = "default_escape_fraction")]
    pub escape_fraction: f64,
}

fn default_escape_fraction() -> f64 {
    0.1
}

impl AlloyTemplate {
    pub fn validate(&self, profile: &DetectorProfile) -> Result<()> {
        let lo = profile.calibration.intercept_kev;
        let hi = profile.max_energy_kev();
        for l in &self.lines {
            if !(l.intensity > 0.0 && l.intensity.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{}: line at {} keV has intensity {}",
                    self.label, l.energy_kev, l.intensity
                )));
            }
            if !(l.energy_kev >= lo && l.energy_kev < hi) {
                return Err(Error::InvalidConfig(format!(
                    "{}: line at {} keV outside calibrated range [{lo}, {hi})",
                    self.label, l.energy_kev
                )));
            }
        }
        if !(0.0..1.0).contains(&self.escape_fraction) {
            return Err(Error::InvalidConfig(format!(
                "{}: escape fraction {} not in [0, 1)",
                self.label, self.escape_fraction
            )));
        }
        if self.continuum.amplitude < 0.0 || self.continuum.decay_per_kev < 0.0 {
            return Err(Error::InvalidConfig(format!("{}: negative continuum", self.label)));
        }
        Ok(())
    }
}

/// Energy resolution `fwhm(E) = a + b·√E` keV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorResponse {
    pub fwhm_a_kev: f64,
    pub fwhm_b: f64,
}

impl DetectorResponse {
    pub fn hpge() -> Self {
        Self { fwhm_a_kev: 1.0, fwhm_b: 0.03 }
    }

    pub fn cebr() -> Self {
        Self { fwhm_a_kev: 20.0, fwhm_b: 0.9 }
    }

    /// CeBr₃ response for profiles named `cebr…`, HPGe otherwise.
    pub fn for_profile(profile: &DetectorProfile) -> Self {
        if profile.name.starts_with("cebr") {
            Self::cebr()
        } else {
            Self::hpge()
        }
    }

    pub fn fwhm(&self, energy_kev: f64) -> f64 {
        self.fwhm_a_kev + self.fwhm_b * energy_kev.max(0.0).sqrt()
    }

    pub fn sigma(&self, energy_kev: f64) -> f64 {
        self.fwhm(energy_kev) / FWHM_PER_SIGMA
    }

    fn validate(&self, profile: &DetectorProfile) -> Result<()> {
        let lo = self.fwhm(profile.calibration.intercept_kev.max(0.0));
        let hi = self.fwhm(profile.max_energy_kev());
        if !(lo > 0.0 && hi > 0.0) {
            return Err(Error::InvalidConfig("fwhm must be positive".into()));
        }
        Ok(())
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

fn add_gaussian(out: &mut [f64], profile: &DetectorProfile, center: f64, sigma: f64, weight: f64) {
    let slope = profile.calibration.slope_kev;
    let intercept = profile.calibration.intercept_kev;
    // Channel i spans [E_i - slope/2, E_i + slope/2).
    let to_ch = |e: f64| (e - intercept) / slope;
    let first = to_ch(center - TAIL_SIGMAS * sigma).floor().max(0.0) as usize;
    let last = (to_ch(center + TAIL_SIGMAS * sigma).ceil().max(0.0) as usize).min(out.len() - 1);
    for (i, slot) in out.iter_mut().enumerate().take(last + 1).skip(first) {
        let e = intercept + slope * i as f64;
        let lo = (e - 0.5 * slope - center) / sigma;
        let hi = (e + 0.5 * slope - center) / sigma;
        *slot += weight * (normal_cdf(hi) - normal_cdf(lo));
    }
}

/// Expected channel distribution of `template` seen through `response`.
pub fn render_expected(
    template: &AlloyTemplate,
    response: &DetectorResponse,
    profile: &DetectorProfile,
) -> Result<CategoricalDistribution> {
    profile.validate()?;
    template.validate(profile)?;
    response.validate(profile)?;
    let n = profile.n_channels;
    let mut out = vec![0.0; n];
    let slope = profile.calibration.slope_kev;
    for (i, slot) in out.iter_mut().enumerate() {
        let e = profile.calibration.intercept_kev + slope * i as f64;
        if e >= 0.0 {
            *slot += template.continuum.amplitude * (-template.continuum.decay_per_kev * e).exp() * slope;
        }
    }
    for line in &template.lines {
        add_gaussian(&mut out, profile, line.energy_kev, response.sigma(line.energy_kev), line.intensity);
        if template.escape_fraction > 0.0 {
            let (ep, dep) = escape_peak_positions(line.energy_kev);
            let w = template.escape_fraction * line.intensity;
            for e in ep.into_iter().chain(dep) {
                add_gaussian(&mut out, profile, e, response.sigma(e), w);
            }
        }
    }
    let total: f64 = out.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateTemplate(template.label.clone()));
    }
    CategoricalDistribution::new(out.into_iter().map(|x| x / total).collect())
}

/// Multinomial draw of exactly `total_counts` photons from the template.
pub fn render_long_term(
    template: &AlloyTemplate,
    response: &DetectorResponse,
    profile: &DetectorProfile,
    total_counts: u64,
    seed: u64,
) -> Result<Spectrum> {
    if total_counts == 0 {
        return Err(Error::out_of_range("total counts", "must be ≥ 1"));
    }
    let dist = render_expected(template, response, profile)?;
    let mut rng = stream_rng(seed, Stream::Render, 0, 0);
    Ok(MultinomialSampler::new(&dist).sample(total_counts, &mut rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialKind {
    Aluminium,
    Copper,
}

impl MaterialKind {
    pub fn name(self) -> &'static str {
        match self {
            MaterialKind::Aluminium => "aluminium",
            MaterialKind::Copper => "copper",
        }
    }
}

impl std::str::FromStr for MaterialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aluminium" | "aluminum" | "al" => Ok(MaterialKind::Aluminium),
            "copper" | "cu" => Ok(MaterialKind::Copper),
            other => Err(Error::InvalidConfig(format!("unknown material {other:?}"))),
        }
    }
}

/// Template file layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub material: String,
    pub templates: Vec<AlloyTemplate>,
}

impl TemplateSet {
    pub fn builtin(kind: MaterialKind) -> Self {
        let raw = match kind {
            MaterialKind::Aluminium => include_str!("../data/aluminium.json"),
            MaterialKind::Copper => include_str!("../data/copper.json"),
        };
        serde_json::from_str(raw).expect("built-in template file is valid")
    }

    /// Renders every template as a long-term measurement of
    /// `seconds · counts_per_second` photons.
    pub fn render_library(
        &self,
        response: &DetectorResponse,
        profile: &DetectorProfile,
        seconds: f64,
        seed: u64,
    ) -> Result<AlloyLibrary> {
        let total = crate::sampling::draw_count(seconds, profile.counts_per_second)?;
        let entries = self
            .templates
            .iter()
            .enumerate()
            .map(|(a, t)| {
                let s = derive_seed(seed, Stream::Render, a as u64, 0);
                Ok(AlloyEntry {
                    label: t.label.clone(),
                    long_term: render_long_term(t, response, profile, total, s)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        AlloyLibrary::new_unchecked_count(entries, profile.clone())
    }
}

/// The built-in five-alloy library of `kind`, rendered as one-hour
/// measurements with `profile`'s count rate.
pub fn default_library(
    kind: MaterialKind,
    profile: &DetectorProfile,
    response: &DetectorResponse,
) -> Result<AlloyLibrary> {
    let lib = TemplateSet::builtin(kind).render_library(response, profile, LONG_TERM_SECONDS, DEFAULT_LIBRARY_SEED)?;
    AlloyLibrary::new(lib.entries().to_vec(), lib.detector().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{detect_peaks_with, PeakParams};
    use crate::spectrum::{normalize, Calibration};
    use proptest::prelude::*;

    fn profile(n: usize, slope: f64) -> DetectorProfile {
        DetectorProfile::new("t", n, 1000.0, Calibration { slope_kev: slope, intercept_kev: 0.0 }).unwrap()
    }

    fn single_line(energy: f64, escape: f64) -> AlloyTemplate {
        AlloyTemplate {
            label: "x".into(),
            lines: vec![Line { energy_kev: energy, intensity: 1.0 }],
            continuum: Continuum { amplitude: 0.0, decay_per_kev: 0.0 },
            escape_fraction: escape,
        }
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
    }

    #[test]
    fn single_line_is_unimodal_at_its_channel() {
        let p = profile(1000, 1.0);
        let d = render_expected(&single_line(400.0, 0.0), &DetectorResponse::hpge(), &p).unwrap();
        assert_eq!(argmax(d.probs()), 400);
        let pr = d.probs();
        assert!(pr[..400].windows(2).all(|w| w[0] <= w[1]));
        assert!(pr[400..].windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn escape_modes_at_expected_channels() {
        let p = profile(2500, 1.0);
        let d = render_expected(&single_line(2000.0, 0.2), &DetectorResponse::hpge(), &p).unwrap();
        let pr = d.probs();
        assert_eq!(argmax(pr), 2000);
        assert_eq!(argmax(&pr[1400..1600]) + 1400, 1489);
        assert_eq!(argmax(&pr[900..1100]) + 900, 978);
        // No escape modes below a line under the pair threshold.
        let low = render_expected(&single_line(1000.0, 0.2), &DetectorResponse::hpge(), &p).unwrap();
        assert!(low.probs()[489] < 1e-12);
    }

    #[test]
    fn degenerate_and_invalid_templates() {
        let p = profile(100, 1.0);
        let empty = AlloyTemplate {
            label: "e".into(),
            lines: vec![],
            continuum: Continuum { amplitude: 0.0, decay_per_kev: 0.0 },
            escape_fraction: 0.0,
        };
        assert!(matches!(
            render_expected(&empty, &DetectorResponse::hpge(), &p),
            Err(Error::DegenerateTemplate(_))
        ));
        assert!(render_expected(&single_line(500.0, 0.0), &DetectorResponse::hpge(), &p).is_err());
        assert!(render_expected(&single_line(50.0, 1.0), &DetectorResponse::hpge(), &p).is_err());
    }

    #[test]
    fn long_term_total_is_exact() {
        let p = profile(500, 1.0);
        let t = single_line(200.0, 0.0);
        let s = render_long_term(&t, &DetectorResponse::hpge(), &p, 12_345, 1).unwrap();
        assert_eq!(s.total(), 12_345.0);
        assert!(render_long_term(&t, &DetectorResponse::hpge(), &p, 0, 1).is_err());
    }

    #[test]
    fn long_term_concentrates_on_expected() {
        let p = DetectorProfile::hpge_aluminium_block();
        let t = &TemplateSet::builtin(MaterialKind::Aluminium).templates[0];
        let r = DetectorResponse::hpge();
        let expected = render_expected(t, &r, &p).unwrap();
        let n = 10_000_000u64;
        let s = render_long_term(t, &r, &p, n, 3).unwrap();
        let tv = normalize(&s).unwrap().total_variation(&expected).unwrap();
        // Normal approximation of E|X/n − p| per channel, summed and halved.
        let typical: f64 = expected
            .probs()
            .iter()
            .map(|q| (2.0 * q * (1.0 - q) / (std::f64::consts::PI * n as f64)).sqrt())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 1.25 * typical, "total variation {tv}, typical {typical}");

        let p = DetectorProfile::cebr_aluminium_chips();
        let r = DetectorResponse::cebr();
        let expected = render_expected(t, &r, &p).unwrap();
        let s = render_long_term(t, &r, &p, n, 3).unwrap();
        assert!(normalize(&s).unwrap().total_variation(&expected).unwrap() < 0.01);
    }

    #[test]
    fn builtin_libraries_have_five_distinct_alloys() {
        for kind in [MaterialKind::Aluminium, MaterialKind::Copper] {
            let set = TemplateSet::builtin(kind);
            assert_eq!(set.templates.len(), 5);
            let p = DetectorProfile::hpge_aluminium_block();
            let d: Vec<_> = set
                .templates
                .iter()
                .map(|t| render_expected(t, &DetectorResponse::hpge(), &p).unwrap())
                .collect();
            for i in 0..5 {
                for j in (i + 1)..5 {
                    assert!(d[i].total_variation(&d[j]).unwrap() > 0.0);
                }
            }
        }
    }

    /// Every alloy moves 2–4 shared lines by 5–30% away from the most common
    /// intensity and adds 1–2 lines of its own.
    #[test]
    fn builtin_alloys_perturb_a_shared_base() {
        for kind in [MaterialKind::Aluminium, MaterialKind::Copper] {
            let set = TemplateSet::builtin(kind);
            let energies = |t: &AlloyTemplate| t.lines.iter().map(|l| l.energy_kev.to_bits()).collect::<Vec<_>>();
            let shared: Vec<u64> = energies(&set.templates[0])
                .into_iter()
                .filter(|e| set.templates.iter().all(|t| energies(t).contains(e)))
                .collect();
            let intensity = |t: &AlloyTemplate, e: u64| t.lines.iter().find(|l| l.energy_kev.to_bits() == e).unwrap().intensity;
            let base: Vec<f64> = shared
                .iter()
                .map(|&e| {
                    let values: Vec<f64> = set.templates.iter().map(|t| intensity(t, e)).collect();
                    let count = |v: f64| values.iter().filter(|&&x| x == v).count();
                    let best = values.iter().copied().max_by_key(|&v| count(v)).unwrap();
                    assert!(count(best) * 2 > values.len(), "{}: no majority at {} keV", set.material, f64::from_bits(e));
                    best
                })
                .collect();
            for t in &set.templates {
                let mut moved = 0;
                for (&e, &b) in shared.iter().zip(&base) {
                    let rel = (intensity(t, e) / b - 1.0).abs();
                    if rel > 1e-9 {
                        assert!((0.05 - 1e-9..=0.30 + 1e-9).contains(&rel), "{} {} keV: {rel}", t.label, f64::from_bits(e));
                        moved += 1;
                    }
                }
                let own = t.lines.len() - shared.len();
                assert!((2..=4).contains(&moved), "{}: {moved} perturbed lines", t.label);
                assert!((1..=2).contains(&own), "{}: {own} minor lines", t.label);
            }
        }
    }

    #[test]
    fn coarse_detector_resolves_fewer_peaks() {
        let hpge = DetectorProfile::hpge_aluminium_chips();
        let cebr = DetectorProfile::cebr_aluminium_chips();
        let params = PeakParams::default();
        for kind in [MaterialKind::Aluminium, MaterialKind::Copper] {
            for t in TemplateSet::builtin(kind).templates {
                let count = |r: &DetectorResponse, p: &DetectorProfile| {
                    let d = render_expected(&t, r, p).unwrap();
                    let s = Spectrum::new(d.probs().to_vec()).unwrap();
                    detect_peaks_with(&s, &params, p).unwrap().len()
                };
                let n_h = count(&DetectorResponse::hpge(), &hpge);
                let n_c = count(&DetectorResponse::cebr(), &cebr);
                assert!(n_c <= n_h, "{}: CeBr {n_c} > HPGe {n_h}", t.label);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn expected_is_normalized(
            lines in prop::collection::vec((10.0f64..1900.0, 0.01f64..5.0), 1..6),
            amp in 0.0f64..0.01,
            escape in 0.0f64..0.5,
        ) {
            let t = AlloyTemplate {
                label: "r".into(),
                lines: lines.into_iter().map(|(e, i)| Line { energy_kev: e, intensity: i }).collect(),
                continuum: Continuum { amplitude: amp, decay_per_kev: 1.0 / 800.0 },
                escape_fraction: escape,
            };
            let d = render_expected(&t, &DetectorResponse::hpge(), &profile(2000, 1.0)).unwrap();
            prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let again = render_expected(&t, &DetectorResponse::hpge(), &profile(2000, 1.0)).unwrap();
            prop_assert_eq!(d, again);
        }
    }
}
