use serde::{Deserialize, Serialize};

use super::{Classifier, Polarity};
use crate::error::{check_len, Error, Result};
use crate::sampling::LabeledDataset;
use crate::spectrum::{normalize, AlloyLibrary, CategoricalDistribution, Spectrum};

/// Kuiper statistic `V = D⁺ + D⁻` of two channel distributions, where
/// `D⁺ = max(0, max_i F_p(i) − F_q(i))` and `D⁻` is the same with p and q
/// swapped.
pub fn kuiper_statistic(p: &CategoricalDistribution, q: &CategoricalDistribution) -> Result<f64> {
    check_len(p.len(), q.len())?;
    Ok(kuiper_from_cdfs(&p.cdf(), &q.cdf()))
}

fn kuiper_from_cdfs(fp: &[f64], fq: &[f64]) -> f64 {
    let (mut d_plus, mut d_minus) = (0.0f64, 0.0f64);
    for (a, b) in fp.iter().zip(fq) {
        d_plus = d_plus.max(a - b);
        d_minus = d_minus.max(b - a);
    }
    d_plus + d_minus
}

/// Nearest long-term distribution under the Kuiper statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KuiperModel {
    classes: Vec<String>,
    cdfs: Vec<Vec<f64>>,
}

impl KuiperModel {
    pub fn from_distributions(classes: Vec<String>, dists: &[CategoricalDistribution]) -> Result<Self> {
        check_len(classes.len(), dists.len())?;
        let n = dists.first().ok_or(Error::EmptyTrainingSet)?.len();
        for d in dists {
            check_len(n, d.len())?;
        }
        Ok(Self {
            classes,
            cdfs: dists.iter().map(CategoricalDistribution::cdf).collect(),
        })
    }

    pub fn from_library(lib: &AlloyLibrary) -> Result<Self> {
        Self::from_distributions(lib.labels(), &lib.distributions()?)
    }

    /// Pools the spectra of each class into one distribution.
    pub fn fit(train: &LabeledDataset) -> Result<Self> {
        let n = train.n_channels().ok_or(Error::EmptyTrainingSet)?;
        let mut pooled = vec![Spectrum::zeros(n)?; train.classes().len()];
        for (s, l) in train.iter() {
            pooled[l].accumulate(s)?;
        }
        let dists = pooled.iter().map(normalize).collect::<Result<Vec<_>>>()?;
        Self::from_distributions(train.classes().to_vec(), &dists)
    }
}

impl Classifier for KuiperModel {
    fn name(&self) -> &'static str {
        "Kui"
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn polarity(&self) -> Polarity {
        Polarity::Minimize
    }

    fn predict_scores(&self, s: &Spectrum) -> Result<Vec<f64>> {
        check_len(self.cdfs[0].len(), s.len())?;
        let cdf = normalize(s)?.cdf();
        Ok(self.cdfs.iter().map(|c| kuiper_from_cdfs(&cdf, c)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use crate::sampling::{MultinomialSampler, Provenance};
    use crate::spectrum::{AlloyEntry, Calibration, DetectorProfile};
    use proptest::prelude::*;

    fn dist(p: &[f64]) -> CategoricalDistribution {
        CategoricalDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn statistic_examples() {
        let p = dist(&[0.2, 0.3, 0.5]);
        assert_eq!(kuiper_statistic(&p, &p).unwrap(), 0.0);
        // F_p = (1, 1), F_q = (0, 1): D⁺ = 1, D⁻ = 0.
        assert_eq!(kuiper_statistic(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap(), 1.0);
        assert!(kuiper_statistic(&p, &dist(&[1.0])).is_err());
    }

    fn lib(spectra: &[&[u64]]) -> AlloyLibrary {
        let det = DetectorProfile::new("t", spectra[0].len(), 1.0, Calibration { slope_kev: 1.0, intercept_kev: 0.0 })
            .unwrap();
        AlloyLibrary::new(
            spectra
                .iter()
                .enumerate()
                .map(|(i, c)| AlloyEntry { label: format!("a{i}"), long_term: Spectrum::from_counts(c).unwrap() })
                .collect(),
            det,
        )
        .unwrap()
    }

    #[test]
    fn exact_long_term_wins() {
        let l = lib(&[&[10, 20, 30, 40], &[40, 30, 20, 10]]);
        let m = KuiperModel::from_library(&l).unwrap();
        assert_eq!(m.predict(&l.entries()[1].long_term).unwrap(), 1);
        assert_eq!(m.predict_scores(&l.entries()[1].long_term).unwrap()[1], 0.0);
    }

    #[test]
    fn identical_distributions_tie_to_first() {
        let l = lib(&[&[1, 2, 3], &[2, 4, 6], &[1, 2, 3]]);
        let m = KuiperModel::from_library(&l).unwrap();
        assert_eq!(m.predict(&Spectrum::from_counts(&[9, 0, 0]).unwrap()).unwrap(), 0);
    }

    #[test]
    fn zero_total_is_rejected() {
        let l = lib(&[&[1, 2], &[2, 1]]);
        let m = KuiperModel::from_library(&l).unwrap();
        assert!(matches!(m.predict(&Spectrum::zeros(2).unwrap()), Err(Error::ZeroTotal)));
    }

    #[test]
    fn heavy_sample_is_consistent() {
        let l = lib(&[&[100, 200, 300, 400, 300, 200], &[100, 220, 290, 390, 300, 200], &[200, 200, 200, 200, 200, 200]]);
        let m = KuiperModel::from_library(&l).unwrap();
        let d = l.distributions().unwrap();
        let mut rng = crate::rng::stream_rng(1, Stream::Test, 0, 0);
        for (a, da) in d.iter().enumerate() {
            let s = MultinomialSampler::new(da).sample(1_000_000, &mut rng);
            assert_eq!(m.predict(&s).unwrap(), a);
        }
    }

    #[test]
    fn fit_pools_training_spectra() {
        let train = LabeledDataset::new(
            vec!["x".into(), "y".into()],
            vec![
                Spectrum::from_counts(&[1, 0]).unwrap(),
                Spectrum::from_counts(&[0, 1]).unwrap(),
                Spectrum::from_counts(&[0, 5]).unwrap(),
            ],
            vec![0, 0, 1],
            Provenance { generator: "t".into(), seed: 0, stream: Stream::Train, time_s: None, counts_per_second: None },
        )
        .unwrap();
        let m = KuiperModel::fit(&train).unwrap();
        assert_eq!(m.cdfs[0], vec![0.5, 1.0]);
        assert_eq!(m.cdfs[1], vec![0.0, 1.0]);
    }

    fn arb_dist(n: usize) -> impl Strategy<Value = CategoricalDistribution> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("zero mass", |w| CategoricalDistribution::from_weights(&w).ok())
    }

    proptest! {
        #[test]
        fn statistic_properties((p, q) in (1usize..30).prop_flat_map(|n| (arb_dist(n), arb_dist(n)))) {
            let v = kuiper_statistic(&p, &q).unwrap();
            prop_assert!((0.0..=2.0).contains(&v));
            prop_assert_eq!(v, kuiper_statistic(&q, &p).unwrap());
            prop_assert_eq!(kuiper_statistic(&p, &p).unwrap(), 0.0);
        }
    }
}
