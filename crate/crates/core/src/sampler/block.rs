use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::scalar::{adaptation_gain, MAX_SCALE, MIN_SCALE};
use super::{AdaptiveWindow, ADAPT_INTERVAL};
use crate::error::ModelError;
use crate::model::{ModelGraph, UpdateScope};

/// Optimal-scaling acceptance targets by block size.
pub fn block_target_acceptance(size: usize) -> f64 {
    match size {
        0..=2 => 0.44,
        3 => 0.35,
        4 => 0.25,
        _ => 0.234,
    }
}

/// Adapted state of a block sampler: the proposal is `N(x, scale * covariance)`.
#[derive(Clone, Debug)]
pub struct BlockState {
    pub scale: f64,
    pub covariance: DMatrix<f64>,
    /// Lower Cholesky factor of `scale * covariance`.
    pub cholesky: DMatrix<f64>,
    pub times_adapted: u32,
    pub target: f64,
    /// Running mean and sum of squared deviations of every state visited.
    count: u64,
    mean: DVector<f64>,
    sum_sq: DMatrix<f64>,
    accepted_total: u64,
    pub(crate) window: AdaptiveWindow,
    delta: DVector<f64>,
    delta_after: DVector<f64>,
}

impl BlockState {
    pub fn new(size: usize) -> Self {
        let scale = 2.38 * 2.38 / size as f64;
        BlockState {
            scale,
            covariance: DMatrix::identity(size, size),
            cholesky: DMatrix::identity(size, size) * scale.sqrt(),
            times_adapted: 0,
            target: block_target_acceptance(size),
            count: 0,
            mean: DVector::zeros(size),
            sum_sq: DMatrix::zeros(size, size),
            accepted_total: 0,
            window: AdaptiveWindow::default(),
            delta: DVector::zeros(size),
            delta_after: DVector::zeros(size),
        }
    }

    pub fn size(&self) -> usize {
        self.mean.len()
    }

    /// Folds a visited state into the running moments.
    pub fn observe(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for (i, v) in x.iter().enumerate() {
            self.delta[i] = v - self.mean[i];
            self.mean[i] += self.delta[i] / n;
            self.delta_after[i] = v - self.mean[i];
        }
        self.sum_sq.ger(1.0, &self.delta, &self.delta_after, 1.0);
    }

    pub fn empirical_covariance(&self) -> Option<DMatrix<f64>> {
        (self.count >= 2).then(|| &self.sum_sq / (self.count as f64 - 1.0))
    }

    /// Scale update as for scalar samplers; once the history holds at least
    /// `2k` accepted moves the covariance becomes the whole-history empirical
    /// covariance plus a small ridge.
    pub fn adapt(&mut self, window_rate: f64) {
        let gain = adaptation_gain(self.times_adapted);
        let scale = self.scale * (gain * (window_rate - self.target)).exp();
        self.scale = scale.clamp(MIN_SCALE, MAX_SCALE);
        self.times_adapted += 1;
        let k = self.size();
        if self.accepted_total >= 2 * k as u64 {
            if let Some(mut cov) = self.empirical_covariance() {
                let ridge = 1e-8 * cov.trace() / k as f64 + 1e-12;
                for i in 0..k {
                    cov[(i, i)] += ridge;
                }
                self.covariance = cov;
            }
        }
        self.refactor();
    }

    /// Recomputes the proposal factor, regularizing once and then falling back
    /// to the identity if the covariance is not positive definite.
    pub(crate) fn refactor(&mut self) {
        let k = self.size();
        if let Some(l) = nalgebra::Cholesky::new(&self.covariance * self.scale) {
            self.cholesky = l.l();
            return;
        }
        let bump = 1e-6 * self.covariance.trace().max(0.0) / k as f64 + 1e-12;
        for i in 0..k {
            self.covariance[(i, i)] += bump;
        }
        if let Some(l) = nalgebra::Cholesky::new(&self.covariance * self.scale) {
            self.cholesky = l.l();
            return;
        }
        self.covariance = DMatrix::identity(k, k);
        self.cholesky = DMatrix::identity(k, k) * self.scale.sqrt();
    }

    pub(crate) fn record(&mut self, accepted: bool) {
        if accepted {
            self.accepted_total += 1;
        }
        if let Some(rate) = self.window.record(accepted, ADAPT_INTERVAL) {
            self.adapt(rate);
        }
    }
}

/// Multivariate adaptive random-walk Metropolis over a block of slots.
#[derive(Clone, Debug)]
pub struct BlockSampler {
    slots: Vec<usize>,
    scope: UpdateScope,
    pub state: BlockState,
    current: Vec<f64>,
    z: Vec<f64>,
    proposal: Vec<f64>,
}

impl BlockSampler {
    pub fn new(graph: &ModelGraph, slots: &[usize]) -> Self {
        let k = slots.len();
        BlockSampler {
            slots: slots.to_vec(),
            scope: graph.scope(slots),
            state: BlockState::new(k),
            current: vec![0.0; k],
            z: vec![0.0; k],
            proposal: vec![0.0; k],
        }
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn scope(&self) -> &UpdateScope {
        &self.scope
    }

    pub fn step<R: Rng>(&mut self, graph: &mut ModelGraph, rng: &mut R) -> Result<bool, ModelError> {
        for z in self.z.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        let u: f64 = rng.random();
        self.step_with(graph, u)
    }

    /// One update using the standard normal draws already in `self.z`.
    pub(crate) fn step_with(&mut self, graph: &mut ModelGraph, u: f64) -> Result<bool, ModelError> {
        let k = self.slots.len();
        for (c, &s) in self.current.iter_mut().zip(&self.slots) {
            *c = graph.slot_value(s);
        }
        let before = graph.cached_scope_log_density(&self.scope)?;

        self.proposal.copy_from_slice(&self.current);
        let l = &self.state.cholesky;
        for j in 0..k {
            let zj = self.z[j];
            if zj != 0.0 {
                for i in j..k {
                    self.proposal[i] += l[(i, j)] * zj;
                }
            }
        }
        graph.snapshot(&self.scope);
        for (&s, &v) in self.slots.iter().zip(&self.proposal) {
            graph.write_slot(s, v);
        }
        graph.mark_stale(&self.scope);
        let after = super::proposal_log_density(graph, &self.scope)?;
        let accepted = super::accept(after - before, u);
        if accepted {
            self.state.observe(&self.proposal);
        } else {
            graph.rollback(&self.scope);
            self.state.observe(&self.current);
        }
        self.state.record(accepted);
        Ok(accepted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_vector_is_always_accepted() {
        let mut g = ModelGraph::from_json(
            r#"{"nodes":[{"name":"v","kind":"parameter","family":"mvn","params":{"mean":[0,0],"cov":[[1,0.9],[0.9,1]]}}]}"#,
        )
        .unwrap();
        g.set_theta(&[1.5, -0.7]).unwrap();
        let mut b = BlockSampler::new(&g, &[0, 1]);
        for u in [0.0, 0.5, 0.999_999] {
            assert!(b.step_with(&mut g, u).unwrap());
        }
        assert_eq!(g.theta(), vec![1.5, -0.7]);
    }

    #[test]
    fn initial_scaling_and_targets() {
        let s = BlockState::new(4);
        assert!((s.scale - 2.38 * 2.38 / 4.0).abs() < 1e-15);
        assert_eq!(s.target, 0.25);
        assert_eq!(block_target_acceptance(2), 0.44);
        assert_eq!(block_target_acceptance(3), 0.35);
        assert_eq!(block_target_acceptance(10), 0.234);
    }

    #[test]
    fn cholesky_matches_scaled_covariance() {
        let mut s = BlockState::new(3);
        let xs = [[0.1, 1.0, -0.3], [0.4, 0.2, 0.9], [-1.0, 0.5, 0.3], [0.7, -0.2, 0.1], [0.3, 0.3, -0.8]];
        for _ in 0..5 {
            for x in &xs {
                s.observe(x);
                s.record(true);
            }
        }
        s.adapt(0.3);
        let rebuilt = &s.cholesky * s.cholesky.transpose();
        let target = &s.covariance * s.scale;
        assert!((rebuilt - &target).amax() <= 1e-10 * target.amax());
    }

    #[test]
    fn constant_history_keeps_a_positive_definite_proposal() {
        let mut s = BlockState::new(3);
        // Pretend enough moves were accepted so the (all-zero) empirical
        // covariance is folded in.
        for _ in 0..50 {
            s.observe(&[1.0, 2.0, 3.0]);
            s.record(true);
        }
        s.adapt(0.0);
        assert!(nalgebra::Cholesky::new(s.covariance.clone()).is_some());
        assert!(s.cholesky.diagonal().iter().all(|d| *d > 0.0));

        s.covariance = DMatrix::zeros(3, 3);
        s.refactor();
        assert!(s.cholesky.diagonal().iter().all(|d| *d > 0.0));
        s.covariance = DMatrix::from_element(3, 3, f64::NAN);
        s.refactor();
        assert_eq!(s.covariance, DMatrix::identity(3, 3));
    }
}
