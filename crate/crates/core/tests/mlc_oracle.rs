//! MLC scores against a multinomial log-pmf computed from log-gamma.

use pgnaa_core::classifiers::{mlc_log_likelihood, Classifier, MlcModel};
use pgnaa_core::sampling::{LabeledDataset, Provenance};
use pgnaa_core::rng::{stream_rng, Stream, StreamRng};
use pgnaa_core::{CategoricalDistribution, Spectrum};
use rand::Rng;

fn log_pmf(x: &[u64], p: &[f64]) -> f64 {
    let n: u64 = x.iter().sum();
    let mut out = libm::lgamma(n as f64 + 1.0);
    for (&k, &q) in x.iter().zip(p) {
        out -= libm::lgamma(k as f64 + 1.0);
        out += k as f64 * q.ln();
    }
    out
}

/// Every vector of `len` non-negative integers summing to at most `max_total`.
fn compositions(len: usize, max_total: u64) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        let mut next = Vec::new();
        for prefix in &out {
            let used: u64 = prefix.iter().sum();
            for k in 0..=(max_total - used) {
                let mut v = prefix.clone();
                v.push(k);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn random_dist(n: usize, rng: &mut StreamRng) -> CategoricalDistribution {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    CategoricalDistribution::from_weights(&w).unwrap()
}

#[test]
fn score_differences_match_log_pmf_on_small_spectra() {
    let mut rng = stream_rng(11, Stream::Test, 0, 0);
    let mut checked = 0usize;
    for n in 1..=8 {
        let refs: Vec<CategoricalDistribution> = (0..3).map(|_| random_dist(n, &mut rng)).collect();
        let logs: Vec<Vec<f64>> = refs.iter().map(|d| d.log_probs()).collect();
        for x in compositions(n, 6) {
            let xf: Vec<f64> = x.iter().map(|&k| k as f64).collect();
            let scores: Vec<f64> = logs.iter().map(|l| mlc_log_likelihood(&xf, l).unwrap()).collect();
            let oracle: Vec<f64> = refs.iter().map(|d| log_pmf(&x, d.probs())).collect();
            for a in 0..3 {
                for b in 0..3 {
                    let got = scores[a] - scores[b];
                    let want = oracle[a] - oracle[b];
                    assert!((got - want).abs() < 1e-10, "x = {x:?}, alloys {a},{b}: {got} vs {want}");
                }
            }
            checked += 1;
        }
    }
    // Σ_{n=1..8} C(n + 6, 6)
    assert_eq!(checked, 7 + 28 + 84 + 210 + 462 + 924 + 1716 + 3003);
}

#[test]
fn fitted_model_picks_the_oracle_argmax() {
    let mut rng = stream_rng(12, Stream::Test, 0, 0);
    let n = 6;
    // One high-count reference per class: the smoothed mean log-probs are
    // then close to the reference distribution itself.
    let dists: Vec<CategoricalDistribution> = (0..3).map(|_| random_dist(n, &mut rng)).collect();
    let spectra: Vec<Spectrum> = dists
        .iter()
        .map(|d| Spectrum::new(d.probs().iter().map(|p| (p * 1e7).round()).collect()).unwrap())
        .collect();
    let refs = LabeledDataset::new(
        vec!["a".into(), "b".into(), "c".into()],
        spectra,
        vec![0, 1, 2],
        Provenance {
            generator: "fixture".into(),
            seed: 0,
            stream: Stream::Reference,
            time_s: None,
            counts_per_second: None,
        },
    )
    .unwrap();
    let model = MlcModel::fit(&refs, None).unwrap();
    let smoothed: Vec<Vec<f64>> = model.mean_log_probs().iter().map(|l| l.iter().map(|v| v.exp()).collect()).collect();
    for x in compositions(n, 5) {
        if x.iter().sum::<u64>() == 0 {
            continue;
        }
        let s = Spectrum::from_counts(&x).unwrap();
        let oracle: Vec<f64> = smoothed.iter().map(|p| log_pmf(&x, p)).collect();
        let best = (0..3).max_by(|&a, &b| oracle[a].total_cmp(&oracle[b])).unwrap();
        let mut sorted = oracle.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted[2] - sorted[1] < 1e-9 {
            continue;
        }
        assert_eq!(model.predict(&s).unwrap(), best, "x = {x:?}");
    }
}
