use autoblock::diagnostics::{effective_sample_size, integrated_autocorrelation_time};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut v = rng.sample::<f64, _>(StandardNormal) / (1.0 - phi * phi).sqrt();
    for _ in 0..n {
        x.push(v);
        v = phi * v + rng.sample::<f64, _>(StandardNormal);
    }
    x
}

/// Initial positive sequence estimate: sum autocorrelations in adjacent
/// pairs until a pair sum turns negative.
fn positive_sequence_tau(x: &[f64]) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let acov = |k: usize| c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let c0 = acov(0);
    let mut tau = -1.0;
    let mut k = 0;
    while k + 1 < n {
        let pair = (acov(k) + acov(k + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    tau
}

#[test]
fn agrees_with_the_positive_sequence_estimate() {
    for (phi, seed) in [(0.5, 1), (0.9, 2), (0.95, 3)] {
        let x = ar1(phi, 100_000, seed);
        let oracle = positive_sequence_tau(&x);
        let tau = integrated_autocorrelation_time(&x).unwrap();
        assert!((tau - oracle).abs() <= 0.2 * oracle, "phi {phi}: {tau} vs {oracle}");
    }
}

#[test]
fn matches_the_analytic_ar1_value() {
    for (phi, seed) in [(0.3, 4), (0.8, 5), (0.9, 6)] {
        let x = ar1(phi, 100_000, seed);
        let analytic = (1.0 + phi) / (1.0 - phi);
        let tau = integrated_autocorrelation_time(&x).unwrap();
        assert!((tau - analytic).abs() <= 0.15 * analytic, "phi {phi}: {tau} vs {analytic}");
    }
}

#[test]
fn antithetic_chains_are_clamped() {
    let x = ar1(-0.7, 20_000, 7);
    assert_eq!(integrated_autocorrelation_time(&x).unwrap(), 1.0);
    assert_eq!(effective_sample_size(&x).unwrap(), 20_000.0);
}

#[test]
fn short_chains_are_rejected() {
    assert!(integrated_autocorrelation_time(&[1.0, 2.0, 3.0]).is_err());
}
