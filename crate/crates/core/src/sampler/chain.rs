use std::io::{self, Write};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[cfg(not(target_arch = "wasm32"))]
use std::time::Instant;
#[cfg(target_arch = "wasm32")]
use web_time::Instant;

use super::block::BlockSampler;
use super::plan::{SamplerPlan, SamplerSpec};
use super::scalar::ScalarSampler;
use super::AdaptiveWindow;
use crate::error::ModelError;
use crate::model::ModelGraph;

enum Sampler {
    Scalar(ScalarSampler),
    Block(Box<BlockSampler>),
}

impl Sampler {
    fn step(&mut self, graph: &mut ModelGraph, rng: &mut ChaCha8Rng) -> Result<bool, ModelError> {
        match self {
            Sampler::Scalar(s) => s.step(graph, rng),
            Sampler::Block(b) => b.step(graph, rng),
        }
    }

    fn stats(&self) -> SamplerStats {
        let (slots, window, scale): (Vec<usize>, &AdaptiveWindow, f64) = match self {
            Sampler::Scalar(s) => (vec![s.slot()], &s.state.window, s.state.scale),
            Sampler::Block(b) => (b.slots().to_vec(), &b.state.window, b.state.scale),
        };
        SamplerStats {
            slots,
            accepted: window.total_accepted,
            proposed: window.total_proposed,
            window_rates: window.rates.clone(),
            final_scale: scale,
        }
    }
}

/// Acceptance history of one sampler over a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplerStats {
    pub slots: Vec<usize>,
    pub accepted: u64,
    pub proposed: u64,
    /// Acceptance rate of every completed adaptation window.
    pub window_rates: Vec<f64>,
    pub final_scale: f64,
}

impl SamplerStats {
    /// Acceptance rate over the last `windows` completed windows.
    pub fn recent_rate(&self, windows: usize) -> Option<f64> {
        let tail = &self.window_rates[self.window_rates.len().saturating_sub(windows)..];
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

/// Posterior samples in theta order, one row per iteration, and the
/// wall-clock time spent inside sampler updates.
#[derive(Clone, Debug)]
pub struct ChainMatrix {
    names: Vec<String>,
    samples: Vec<f64>,
    rows: usize,
    pub sampling_seconds: f64,
    pub sampler_stats: Vec<SamplerStats>,
}

impl ChainMatrix {
    /// A chain from row-major samples; used by tests and external tooling.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>], sampling_seconds: f64) -> Self {
        let d = names.len();
        assert!(rows.iter().all(|r| r.len() == d), "every row has one value per name");
        ChainMatrix {
            names,
            samples: rows.iter().flatten().copied().collect(),
            rows: rows.len(),
            sampling_seconds,
            sampler_stats: Vec::new(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of iterations, `N`.
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.samples[i * d..(i + 1) * d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.column_from(j, 0)
    }

    pub(crate) fn column_from(&self, j: usize, start: usize) -> Vec<f64> {
        let d = self.dim();
        (start..self.rows).map(|i| self.samples[i * d + j]).collect()
    }

    pub fn seconds_per_iteration(&self) -> f64 {
        self.sampling_seconds / self.rows.max(1) as f64
    }

    /// CSV with a header of slot names. Values use the shortest
    /// round-trip representation, so equal chains give identical bytes.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.names.join(","))?;
        for i in 0..self.rows {
            let mut first = true;
            for v in self.row(i) {
                if !first {
                    out.write_all(b",")?;
                }
                first = false;
                write!(out, "{v}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Runs `plan` for `iterations` sweeps from the graph's initial values.
///
/// Each sampler runs once per sweep in plan order; the theta vector is
/// recorded after every sweep. Only sampler updates are timed. The same
/// graph, plan, iteration count and seed always give the same samples.
pub fn run_mcmc(
    graph: &mut ModelGraph,
    plan: &SamplerPlan,
    iterations: usize,
    seed: u64,
) -> Result<ChainMatrix, ModelError> {
    let d = graph.dim();
    if plan.dim() != d {
        return Err(ModelError::LengthMismatch { expected: d, found: plan.dim() });
    }
    graph.reset();
    let mut samplers: Vec<Sampler> = plan
        .samplers()
        .iter()
        .map(|s| match s {
            SamplerSpec::Scalar(slot) => Sampler::Scalar(ScalarSampler::new(graph, *slot)),
            SamplerSpec::Block(slots) => Sampler::Block(Box::new(BlockSampler::new(graph, slots))),
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![0.0; iterations * d];
    let mut elapsed = Duration::ZERO;
    for row in samples.chunks_exact_mut(d.max(1)).take(iterations) {
        let start = Instant::now();
        for sampler in samplers.iter_mut() {
            sampler.step(graph, &mut rng)?;
        }
        elapsed += start.elapsed();
        graph.theta_into(row);
    }
    Ok(ChainMatrix {
        names: graph.slot_names().to_vec(),
        samples,
        rows: iterations,
        sampling_seconds: elapsed.as_secs_f64(),
        sampler_stats: samplers.iter().map(Sampler::stats).collect(),
    })
}
