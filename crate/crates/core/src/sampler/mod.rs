//! Adaptive scalar and block random-walk Metropolis samplers and the
//! driver that runs a [`SamplerPlan`].

mod block;
mod chain;
mod plan;
mod scalar;

pub use block::{block_target_acceptance, BlockSampler, BlockState};
pub use chain::{run_mcmc, ChainMatrix, SamplerStats};
pub use plan::{SamplerPlan, SamplerSpec};
pub use scalar::{ScalarSampler, ScalarState, SCALAR_TARGET_ACCEPTANCE};

/// Iterations between adaptation updates.
pub const ADAPT_INTERVAL: u32 = 200;

/// Log density of a scope at a proposed state. A proposal that gives some
/// child an invalid parameter (a negative shape, say) has zero density.
pub(crate) fn proposal_log_density(
    graph: &mut crate::model::ModelGraph,
    scope: &crate::model::UpdateScope,
) -> Result<f64, crate::ModelError> {
    match graph.scope_log_density(scope) {
        Err(crate::ModelError::InvalidParameter { .. }) => Ok(f64::NEG_INFINITY),
        other => other,
    }
}

/// Metropolis decision: accept when `ln(u) < delta`. NaN never accepts.
#[inline]
pub(crate) fn accept(delta: f64, u: f64) -> bool {
    u.ln() < delta
}

/// Acceptance counts over the current adaptation window, plus the history
/// of completed windows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdaptiveWindow {
    accepted: u32,
    proposed: u32,
    pub(crate) rates: Vec<f64>,
    pub(crate) total_accepted: u64,
    pub(crate) total_proposed: u64,
}

impl AdaptiveWindow {
    /// Returns the window's acceptance rate when the window closes.
    pub(crate) fn record(&mut self, accepted: bool, interval: u32) -> Option<f64> {
        self.proposed += 1;
        self.total_proposed += 1;
        if accepted {
            self.accepted += 1;
            self.total_accepted += 1;
        }
        if self.proposed < interval {
            return None;
        }
        let rate = self.accepted as f64 / self.proposed as f64;
        self.rates.push(rate);
        self.accepted = 0;
        self.proposed = 0;
        Some(rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_rule() {
        assert!(accept(0.0, 0.0));
        assert!(accept(0.0, 0.5));
        assert!(!accept(f64::NEG_INFINITY, 0.5));
        assert!(!accept(f64::NAN, 0.5));
        assert!(accept(f64::INFINITY, 0.9));
    }

    #[test]
    fn window_closes_every_interval() {
        let mut w = AdaptiveWindow::default();
        let mut closed = Vec::new();
        for i in 0..10 {
            if let Some(r) = w.record(i % 2 == 0, 4) {
                closed.push(r);
            }
        }
        assert_eq!(closed, vec![0.5, 0.5]);
        assert_eq!((w.total_accepted, w.total_proposed), (5, 10));
    }
}
