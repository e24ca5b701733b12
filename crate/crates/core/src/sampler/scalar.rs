use rand::Rng;
use rand_distr::StandardNormal;

use super::{AdaptiveWindow, ADAPT_INTERVAL};
use crate::error::ModelError;
use crate::model::{ModelGraph, UpdateScope};

pub const SCALAR_TARGET_ACCEPTANCE: f64 = 0.44;
pub(crate) const MIN_SCALE: f64 = 1e-8;
pub(crate) const MAX_SCALE: f64 = 10.0;

/// Diminishing step size for the `times_adapted`-th adaptation.
pub(crate) fn adaptation_gain(times_adapted: u32) -> f64 {
    1.0 / (times_adapted as f64 + 1.0).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarState {
    /// Proposal standard deviation.
    pub scale: f64,
    pub times_adapted: u32,
    pub(crate) window: AdaptiveWindow,
}

impl Default for ScalarState {
    fn default() -> Self {
        ScalarState { scale: 1.0, times_adapted: 0, window: AdaptiveWindow::default() }
    }
}

impl ScalarState {
    /// `log(scale) += gain * (rate - 0.44)`, clamped to `[1e-8, 10]`.
    pub fn adapt(&mut self, window_rate: f64) {
        let gain = adaptation_gain(self.times_adapted);
        let scale = self.scale * (gain * (window_rate - SCALAR_TARGET_ACCEPTANCE)).exp();
        self.scale = scale.clamp(MIN_SCALE, MAX_SCALE);
        self.times_adapted += 1;
    }

    pub(crate) fn record(&mut self, accepted: bool) {
        if let Some(rate) = self.window.record(accepted, ADAPT_INTERVAL) {
            self.adapt(rate);
        }
    }
}

/// Univariate adaptive random-walk Metropolis on one theta slot.
#[derive(Clone, Debug)]
pub struct ScalarSampler {
    slot: usize,
    scope: UpdateScope,
    pub state: ScalarState,
}

impl ScalarSampler {
    pub fn new(graph: &ModelGraph, slot: usize) -> Self {
        ScalarSampler { slot, scope: graph.scope(&[slot]), state: ScalarState::default() }
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn step<R: Rng>(&mut self, graph: &mut ModelGraph, rng: &mut R) -> Result<bool, ModelError> {
        let z: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        self.step_with(graph, z, u)
    }

    /// One update with the standard normal draw `z` and uniform draw `u`.
    pub(crate) fn step_with(&mut self, graph: &mut ModelGraph, z: f64, u: f64) -> Result<bool, ModelError> {
        let current = graph.slot_value(self.slot);
        let before = graph.cached_scope_log_density(&self.scope)?;
        graph.snapshot(&self.scope);
        graph.write_slot(self.slot, current + self.state.scale * z);
        graph.mark_stale(&self.scope);
        let after = super::proposal_log_density(graph, &self.scope)?;
        let accepted = super::accept(after - before, u);
        if !accepted {
            graph.rollback(&self.scope);
        }
        self.state.record(accepted);
        Ok(accepted)
    }
}
