//! Integrated autocorrelation time, effective sample size, and the
//! algorithmic / computational / overall efficiency of a chain.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::DiagnosticsError;
use crate::sampler::ChainMatrix;

pub const MIN_CHAIN_LENGTH: usize = 10;

/// Highest autoregressive order considered for a chain of length `n`.
fn max_order(n: usize) -> usize {
    let by_log = (10.0 * (n as f64).log10()).floor() as usize;
    by_log.min(n - 1).min((n - 1) / 2)
}

/// Integrated autocorrelation time from the spectral density at frequency
/// zero of a least-squares autoregressive fit, with the order chosen by AIC.
///
/// Returns `+inf` for a constant chain. The estimate is clamped to at least
/// one so that the effective sample size never exceeds the chain length.
pub fn integrated_autocorrelation_time(x: &[f64]) -> Result<f64, DiagnosticsError> {
    let n = x.len();
    if n < MIN_CHAIN_LENGTH {
        return Err(DiagnosticsError::TooShort { len: n });
    }
    if x.iter().all(|v| *v == x[0]) {
        return Ok(f64::INFINITY);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let variance = y.iter().map(|v| v * v).sum::<f64>() / (n as f64 - 1.0);
    if variance <= 0.0 {
        return Ok(f64::INFINITY);
    }

    let pmax = max_order(n);
    let rows = n - pmax;
    // cross[i][j] = sum over t in pmax..n of y[t - i] * y[t - j]
    let mut cross = DMatrix::<f64>::zeros(pmax + 1, pmax + 1);
    for k in 0..=pmax {
        let s: f64 = (pmax..n).map(|t| y[t] * y[t - k]).sum();
        cross[(0, k)] = s;
        cross[(k, 0)] = s;
    }
    for i in 0..pmax {
        for j in i..pmax {
            let s = cross[(i, j)] - y[n - 1 - i] * y[n - 1 - j] + y[pmax - 1 - i] * y[pmax - 1 - j];
            cross[(i + 1, j + 1)] = s;
            cross[(j + 1, i + 1)] = s;
        }
    }

    let mut best = (f64::INFINITY, cross[(0, 0)] / rows as f64, 0.0);
    for p in 0..=pmax {
        let (innovation, coef_sum) = if p == 0 {
            (cross[(0, 0)] / rows as f64, 0.0)
        } else {
            let a = cross.view((1, 1), (p, p)).into_owned();
            let b = DVector::from_iterator(p, (1..=p).map(|i| cross[(i, 0)]));
            let Some(chol) = nalgebra::Cholesky::new(a) else { continue };
            let phi = chol.solve(&b);
            let rss = cross[(0, 0)] - phi.dot(&b);
            (rss.max(0.0) / rows as f64, phi.sum())
        };
        let aic = rows as f64 * innovation.ln() + 2.0 * p as f64;
        if aic < best.0 {
            best = (aic, innovation, coef_sum);
        }
    }
    let (_, innovation, coef_sum) = best;
    let denom = (1.0 - coef_sum) * (1.0 - coef_sum);
    let tau = if denom == 0.0 { f64::INFINITY } else { innovation / denom / variance };
    Ok(if tau.is_nan() { f64::INFINITY } else { tau.max(1.0) })
}

/// Effective sample size `N / tau`; zero for a constant chain.
pub fn effective_sample_size(x: &[f64]) -> Result<f64, DiagnosticsError> {
    let tau = integrated_autocorrelation_time(x)?;
    Ok(x.len() as f64 / tau)
}

/// Per-parameter mixing and the efficiency triple of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub names: Vec<String>,
    /// Iterations per effective sample; `null` in JSON for stuck parameters.
    pub tau: Vec<f64>,
    pub ess: Vec<f64>,
    pub iterations: usize,
    /// `A`: minimum over parameters of `1 / tau`.
    pub algorithmic_efficiency: f64,
    /// `C`: sampling seconds per iteration.
    pub seconds_per_iteration: f64,
    /// `E = A / C`, effective samples per second for the slowest parameter.
    pub overall_efficiency: f64,
    pub slowest: String,
    /// Parameters whose chain never moved.
    pub stuck: Vec<String>,
    pub ess_per_10k: f64,
    pub runtime_per_10k: f64,
    pub efficiency_per_second: f64,
}

impl EfficiencyReport {
    pub fn from_taus(names: Vec<String>, tau: Vec<f64>, iterations: usize, sampling_seconds: f64) -> Self {
        let ess: Vec<f64> = tau.iter().map(|t| iterations as f64 / t).collect();
        let (slowest, a) = tau
            .iter()
            .map(|t| 1.0 / t)
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, eff)| if eff < best.1 { (i, eff) } else { best });
        let a = if a.is_finite() { a } else { 0.0 };
        let c = sampling_seconds / iterations.max(1) as f64;
        let e = if a == 0.0 { 0.0 } else { a / c };
        EfficiencyReport {
            stuck: tau.iter().zip(&names).filter(|(t, _)| t.is_infinite()).map(|(_, n)| n.clone()).collect(),
            slowest: names.get(slowest).cloned().unwrap_or_default(),
            names,
            tau,
            ess,
            iterations,
            algorithmic_efficiency: a,
            seconds_per_iteration: c,
            overall_efficiency: e,
            ess_per_10k: 10_000.0 * a,
            runtime_per_10k: 10_000.0 * c,
            efficiency_per_second: e,
        }
    }

    /// Same measurements with a different runtime.
    pub fn with_seconds(&self, sampling_seconds: f64) -> Self {
        Self::from_taus(self.names.clone(), self.tau.clone(), self.iterations, sampling_seconds)
    }
}

pub fn efficiency_report(chain: &ChainMatrix) -> Result<EfficiencyReport, DiagnosticsError> {
    let tau = (0..chain.dim())
        .map(|j| integrated_autocorrelation_time(&chain.column(j)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EfficiencyReport::from_taus(chain.names().to_vec(), tau, chain.len(), chain.sampling_seconds))
}
