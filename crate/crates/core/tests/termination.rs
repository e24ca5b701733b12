//! Outer-loop behaviour under scripted efficiencies.

use std::sync::atomic::{AtomicUsize, Ordering};

use autoblock::autoblock::{autoblock_with, AutoblockConfig, Scored, Scorer, Termination};
use autoblock::diagnostics::EfficiencyReport;
use autoblock::example_models::iid_normal;
use autoblock::{AutoblockError, ChainMatrix, ModelGraph, SamplerPlan};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const ITERATIONS: usize = 1000;

/// Five slots: {0,1} strongly correlated, {2,3} moderately, 4 independent.
fn correlated_rows(seed: u64) -> Vec<Vec<f64>> {
    let mut cov = DMatrix::<f64>::identity(5, 5);
    cov[(0, 1)] = 0.95;
    cov[(1, 0)] = 0.95;
    cov[(2, 3)] = 0.6;
    cov[(3, 2)] = 0.6;
    let l = cov.cholesky().unwrap().l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..ITERATIONS)
        .map(|_| {
            let z = nalgebra::DVector::from_fn(5, |_, _| StandardNormal.sample(&mut rng));
            (&l * z).iter().copied().collect()
        })
        .collect()
}

/// Reports efficiency `e` by setting every integrated autocorrelation time
/// so that effective samples per second come out at `e`.
fn scored(graph: &ModelGraph, rows: &[Vec<f64>], e: f64) -> Scored {
    let names = graph.slot_names().to_vec();
    let tau = vec![ITERATIONS as f64 / e; names.len()];
    Scored {
        report: EfficiencyReport::from_taus(names.clone(), tau, ITERATIONS, 1.0),
        chain: ChainMatrix::from_rows(names, rows, 1.0),
    }
}

struct Scripted<F> {
    calls: AtomicUsize,
    efficiency: F,
}

impl<F: Fn(usize, &SamplerPlan) -> f64 + Sync> Scripted<F> {
    fn new(efficiency: F) -> Self {
        Scripted { calls: AtomicUsize::new(0), efficiency }
    }
}

impl<F: Fn(usize, &SamplerPlan) -> f64 + Sync> Scorer for Scripted<F> {
    fn score(&self, graph: &ModelGraph, plan: &SamplerPlan, _: usize, seed: u64) -> Result<Scored, AutoblockError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(scored(graph, &correlated_rows(seed % 3), (self.efficiency)(call, plan)))
    }
}

fn graph() -> ModelGraph {
    iid_normal(5).graph().unwrap()
}

fn config(max_outer: usize) -> AutoblockConfig {
    AutoblockConfig { iterations: ITERATIONS, max_outer, ..Default::default() }
}

fn both_pairs(plan: &SamplerPlan) -> bool {
    plan.groups().iter().filter(|g| g.len() > 1).cloned().collect::<Vec<_>>() == vec![vec![0, 1], vec![2, 3]]
}

#[test]
fn stable_selection_stops_on_the_repeated_plan() {
    let scorer = Scripted::new(|_, plan: &SamplerPlan| if both_pairs(plan) { 200.0 } else { 100.0 });
    let trace = autoblock_with(&graph(), &config(10), &scorer).unwrap();
    assert_eq!(trace.termination, Termination::RepeatedPlan);
    assert!(!trace.anomaly);
    assert_eq!(trace.sweeps.len(), 3);
    assert!(both_pairs(&trace.final_plan));
    assert_eq!(trace.final_height, trace.sweeps[2].selected_height);
}

#[test]
fn ties_keep_the_lowest_height() {
    let scorer = Scripted::new(|_, _: &SamplerPlan| 100.0);
    let trace = autoblock_with(&graph(), &config(10), &scorer).unwrap();
    assert_eq!(trace.termination, Termination::RepeatedPlan);
    assert_eq!(trace.sweeps.len(), 2);
    assert!(trace.final_plan.is_all_scalar());
    assert_eq!(trace.final_height, 0.0);
}

#[test]
fn a_drop_in_efficiency_is_flagged_and_returns_the_new_plan() {
    // The baseline is measured high; every later candidate comes in lower.
    let scorer = Scripted::new(|call, plan: &SamplerPlan| match call {
        0 => 1000.0,
        _ if both_pairs(plan) => 300.0,
        _ => 100.0,
    });
    let trace = autoblock_with(&graph(), &config(10), &scorer).unwrap();
    assert_eq!(trace.termination, Termination::EfficiencyDecreased);
    assert!(trace.anomaly);
    assert_eq!(trace.sweeps.len(), 2);
    assert!(both_pairs(&trace.final_plan));
}

#[test]
fn outer_limit_stops_the_search() {
    let scorer = Scripted::new(|_, plan: &SamplerPlan| if both_pairs(plan) { 200.0 } else { 100.0 });
    let trace = autoblock_with(&graph(), &config(1), &scorer).unwrap();
    assert_eq!(trace.termination, Termination::MaxOuterIterations);
    assert!(!trace.anomaly);
    assert_eq!(trace.sweeps.len(), 2);
    assert!(both_pairs(&trace.final_plan));
}

#[test]
fn heights_sharing_a_plan_are_scored_once() {
    let scorer = Scripted::new(|_, _: &SamplerPlan| 100.0);
    let trace = autoblock_with(&graph(), &config(1), &scorer).unwrap();
    let sweep = &trace.sweeps[1];
    let listed: usize = sweep.candidates.iter().map(|c| c.heights.len()).sum();
    assert_eq!(listed, trace.config.grid.len());
    assert_eq!(scorer.calls.load(Ordering::SeqCst), 1 + sweep.candidates.len());
    for pair in sweep.candidates.windows(2) {
        assert_ne!(pair[0].plan, pair[1].plan);
        assert!(pair[0].heights[0] < pair[1].heights[0]);
    }
}

struct Frozen;

impl Scorer for Frozen {
    fn score(&self, graph: &ModelGraph, _: &SamplerPlan, _: usize, _: u64) -> Result<Scored, AutoblockError> {
        let names = graph.slot_names().to_vec();
        let rows = vec![vec![0.5; names.len()]; ITERATIONS];
        let tau = vec![f64::INFINITY; names.len()];
        Ok(Scored {
            report: EfficiencyReport::from_taus(names.clone(), tau, ITERATIONS, 1.0),
            chain: ChainMatrix::from_rows(names, &rows, 1.0),
        })
    }
}

#[test]
fn a_chain_that_never_moves_is_degenerate() {
    let err = autoblock_with(&graph(), &config(10), &Frozen).unwrap_err();
    assert!(matches!(err, AutoblockError::DegenerateChain));
}

struct Failing;

impl Scorer for Failing {
    fn score(&self, _: &ModelGraph, _: &SamplerPlan, _: usize, _: u64) -> Result<Scored, AutoblockError> {
        Err(AutoblockError::Config("scorer failed".into()))
    }
}

#[test]
fn scorer_errors_propagate() {
    assert!(autoblock_with(&graph(), &config(3), &Failing).is_err());
}
