//! The greedy blocking search: run a plan, cluster the parameters by
//! posterior correlation, score every dendrogram cut, keep the most
//! efficient plan, repeat.

use serde::Serialize;

use crate::clustering::{complete_linkage, correlation_matrix, cut, plan_from_partition, Dendrogram, DistanceMatrix};
use crate::diagnostics::{efficiency_report, EfficiencyReport};
use crate::error::AutoblockError;
use crate::model::ModelGraph;
use crate::sampler::{run_mcmc, ChainMatrix, SamplerPlan};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AutoblockConfig {
    /// MCMC iterations per scored run.
    pub iterations: usize,
    /// Cut heights tried in every sweep; sorted, within `[0, 1]`, containing both ends.
    pub grid: Vec<f64>,
    /// Leading fraction of each chain ignored when estimating correlations.
    pub discard: f64,
    pub max_outer: usize,
    pub seed: u64,
    /// Score candidates concurrently. Runtime measurements taken under
    /// contention are unreliable, so efficiency comparisons lose meaning
    /// unless each candidate has a core to itself.
    pub parallel: bool,
}

impl Default for AutoblockConfig {
    fn default() -> Self {
        AutoblockConfig {
            iterations: 10_000,
            grid: default_grid(),
            discard: 0.5,
            max_outer: 10,
            seed: 0,
            parallel: false,
        }
    }
}

/// `0, 0.1, ..., 1`.
pub fn default_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

impl AutoblockConfig {
    pub fn validate(&self) -> Result<(), AutoblockError> {
        let bad = |m: &str| Err(AutoblockError::Config(m.to_string()));
        if self.iterations < 100 {
            return bad("iterations must be at least 100");
        }
        if self.grid.iter().any(|h| !(0.0..=1.0).contains(h)) {
            return bad("cut heights must lie in [0, 1]");
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("cut heights must be strictly increasing");
        }
        if self.grid.first() != Some(&0.0) || self.grid.last() != Some(&1.0) {
            return bad("cut heights must include 0 and 1");
        }
        if !(0.0..1.0).contains(&self.discard) {
            return bad("discard fraction must lie in [0, 1)");
        }
        if self.max_outer == 0 {
            return bad("max-outer must be at least 1");
        }
        Ok(())
    }
}

/// Measured outcome of running one plan.
#[derive(Clone, Debug)]
pub struct Scored {
    pub report: EfficiencyReport,
    pub chain: ChainMatrix,
}

/// Produces the efficiency of a plan. The MCMC implementation is
/// `McmcScorer`; tests substitute synthetic scorers.
pub trait Scorer: Sync {
    fn score(&self, graph: &ModelGraph, plan: &SamplerPlan, iterations: usize, seed: u64)
        -> Result<Scored, AutoblockError>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct McmcScorer;

impl Scorer for McmcScorer {
    fn score(&self, graph: &ModelGraph, plan: &SamplerPlan, iterations: usize, seed: u64)
        -> Result<Scored, AutoblockError> {
        let mut graph = graph.clone();
        let chain = run_mcmc(&mut graph, plan, iterations, seed)?;
        let report = efficiency_report(&chain)?;
        Ok(Scored { report, chain })
    }
}

/// Runs `plan` from the graph's initial state with fresh sampler state and
/// reports its efficiency.
pub fn score_candidate(
    graph: &mut ModelGraph,
    plan: &SamplerPlan,
    iterations: usize,
    seed: u64,
) -> Result<EfficiencyReport, AutoblockError> {
    let chain = run_mcmc(graph, plan, iterations, seed)?;
    Ok(efficiency_report(&chain)?)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the candidate at `height_index` of sweep `outer`.
pub fn candidate_seed(seed: u64, outer: usize, height_index: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ outer as u64) ^ height_index as u64)
}

#[derive(Clone, Debug, Serialize)]
pub struct Candidate {
    /// Every grid height whose cut produced this plan.
    pub heights: Vec<f64>,
    pub plan: SamplerPlan,
    pub groups: Vec<Vec<String>>,
    pub seed: u64,
    pub report: EfficiencyReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct Sweep {
    pub index: usize,
    pub candidates: Vec<Candidate>,
    /// Index into `candidates`.
    pub selected: usize,
    pub selected_height: f64,
    /// Absent for the initial all-scalar run.
    pub dendrogram: Option<Dendrogram>,
}

impl Sweep {
    pub fn selection(&self) -> &Candidate {
        &self.candidates[self.selected]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    RepeatedPlan,
    EfficiencyDecreased,
    MaxOuterIterations,
}

#[derive(Clone, Debug, Serialize)]
pub struct AutoblockTrace {
    pub slot_names: Vec<String>,
    pub config: AutoblockConfig,
    pub sweeps: Vec<Sweep>,
    pub final_plan: SamplerPlan,
    pub final_groups: Vec<Vec<String>>,
    pub final_height: f64,
    pub termination: Termination,
    /// The last sweep switched to a plan that measured less efficient than
    /// the previous selection; the samples deserve a closer look.
    pub anomaly: bool,
}

impl AutoblockTrace {
    pub fn final_report(&self) -> &EfficiencyReport {
        &self.sweeps.last().expect("trace is nonempty").selection().report
    }
}

pub fn autoblock(graph: &ModelGraph, config: &AutoblockConfig) -> Result<AutoblockTrace, AutoblockError> {
    autoblock_with(graph, config, &McmcScorer)
}

pub fn autoblock_with<S: Scorer>(
    graph: &ModelGraph,
    config: &AutoblockConfig,
    scorer: &S,
) -> Result<AutoblockTrace, AutoblockError> {
    config.validate()?;
    let d = graph.dim();
    if d == 0 {
        return Err(AutoblockError::Config("model has no parameters".into()));
    }
    let names = graph.slot_names().to_vec();

    let initial = SamplerPlan::all_scalar(d);
    let seed0 = candidate_seed(config.seed, 0, 0);
    let scored = scorer.score(graph, &initial, config.iterations, seed0)?;
    let mut chain = scored.chain;
    let mut sweeps = vec![Sweep {
        index: 0,
        candidates: vec![Candidate {
            heights: vec![0.0],
            groups: initial.named_groups(&names),
            plan: initial,
            seed: seed0,
            report: scored.report,
        }],
        selected: 0,
        selected_height: 0.0,
        dendrogram: None,
    }];

    let mut termination = Termination::MaxOuterIterations;
    let mut anomaly = false;
    for outer in 1..=config.max_outer {
        let previous = sweeps.last().expect("nonempty").selection();
        if previous.report.stuck.len() == d {
            return Err(AutoblockError::DegenerateChain);
        }
        let rho = correlation_matrix(&chain, config.discard)?;
        let tree = complete_linkage(&DistanceMatrix::from_correlation(&rho));

        // Distinct plans in grid order, remembering every height that produced each.
        let mut unique: Vec<(Vec<f64>, SamplerPlan, u64)> = Vec::new();
        for (hi, &h) in config.grid.iter().enumerate() {
            let plan = plan_from_partition(&cut(&tree, h));
            match unique.iter_mut().find(|(_, p, _)| *p == plan) {
                Some((heights, _, _)) => heights.push(h),
                None => unique.push((vec![h], plan, candidate_seed(config.seed, outer, hi))),
            }
        }
        let results = score_all(scorer, graph, &unique, config)?;

        let mut candidates = Vec::with_capacity(unique.len());
        let mut chains = Vec::with_capacity(unique.len());
        for ((heights, plan, seed), scored) in unique.into_iter().zip(results) {
            candidates.push(Candidate { heights, groups: plan.named_groups(&names), plan, seed, report: scored.report });
            chains.push(scored.chain);
        }
        // Argmax of efficiency; candidates are in increasing height order, so
        // the strict comparison keeps the lowest height on ties.
        let mut selected = 0;
        for (i, c) in candidates.iter().enumerate() {
            if c.report.overall_efficiency > candidates[selected].report.overall_efficiency {
                selected = i;
            }
        }

        let previous_plan = previous.plan.clone();
        let previous_efficiency = previous.report.overall_efficiency;
        let sweep = Sweep {
            index: outer,
            selected_height: candidates[selected].heights[0],
            candidates,
            selected,
            dendrogram: Some(tree),
        };
        let repeated = sweep.selection().plan == previous_plan;
        let decreased = sweep.selection().report.overall_efficiency < previous_efficiency;
        chain = chains.swap_remove(selected);
        sweeps.push(sweep);

        if repeated {
            termination = Termination::RepeatedPlan;
            break;
        }
        if decreased {
            termination = Termination::EfficiencyDecreased;
            anomaly = true;
            break;
        }
    }

    let last = sweeps.last().expect("nonempty");
    let final_plan = last.selection().plan.clone();
    Ok(AutoblockTrace {
        final_groups: final_plan.named_groups(&names),
        final_height: last.selected_height,
        final_plan,
        slot_names: names,
        config: config.clone(),
        termination,
        anomaly,
        sweeps,
    })
}

fn score_all<S: Scorer>(
    scorer: &S,
    graph: &ModelGraph,
    candidates: &[(Vec<f64>, SamplerPlan, u64)],
    config: &AutoblockConfig,
) -> Result<Vec<Scored>, AutoblockError> {
    #[cfg(not(target_arch = "wasm32"))]
    if config.parallel {
        return std::thread::scope(|s| {
            let handles: Vec<_> = candidates
                .iter()
                .map(|(_, plan, seed)| s.spawn(move || scorer.score(graph, plan, config.iterations, *seed)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("scoring thread panicked")).collect()
        });
    }
    candidates.iter().map(|(_, plan, seed)| scorer.score(graph, plan, config.iterations, *seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example_models::{fixed_correlation_blocks, iid_normal};

    #[test]
    fn config_validation() {
        assert!(AutoblockConfig::default().validate().is_ok());
        let bad = [
            AutoblockConfig { iterations: 50, ..Default::default() },
            AutoblockConfig { grid: vec![0.0, 0.5], ..Default::default() },
            AutoblockConfig { grid: vec![0.0, 0.6, 0.5, 1.0], ..Default::default() },
            AutoblockConfig { discard: 1.0, ..Default::default() },
            AutoblockConfig { max_outer: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn sub_seeds_differ() {
        let a = candidate_seed(1, 1, 0);
        assert_ne!(a, candidate_seed(1, 1, 1));
        assert_ne!(a, candidate_seed(1, 2, 0));
        assert_ne!(a, candidate_seed(2, 1, 0));
        assert_eq!(a, candidate_seed(1, 1, 0));
    }

    #[test]
    fn single_parameter_stops_after_one_sweep() {
        let g = iid_normal(1).graph().unwrap();
        let config = AutoblockConfig { iterations: 500, ..Default::default() };
        let trace = autoblock(&g, &config).unwrap();
        assert_eq!(trace.sweeps.len(), 2);
        assert_eq!(trace.sweeps[1].candidates.len(), 1);
        assert_eq!(trace.termination, Termination::RepeatedPlan);
        assert!(trace.final_plan.is_all_scalar());
    }

    #[test]
    fn candidate_set_contains_both_extremes() {
        let g = fixed_correlation_blocks(0.8, &[4, 2]).unwrap().graph().unwrap();
        let config = AutoblockConfig { iterations: 2_000, max_outer: 1, seed: 3, ..Default::default() };
        let trace = autoblock(&g, &config).unwrap();
        assert_eq!(trace.sweeps.len(), 2);
        let sweep = &trace.sweeps[1];
        let d = g.dim();
        assert!(sweep.candidates.iter().any(|c| c.plan == SamplerPlan::all_scalar(d)));
        assert!(sweep.candidates.iter().any(|c| c.plan == SamplerPlan::all_blocked(d)));
        let best = sweep.selection().report.overall_efficiency;
        assert!(sweep.candidates.iter().all(|c| c.report.overall_efficiency <= best));
        let json = serde_json::to_value(&trace).unwrap();
        assert!(json["final_groups"].is_array());
    }

    #[test]
    fn scoring_same_plan_twice_gives_same_ess() {
        let mut g = fixed_correlation_blocks(0.5, &[3]).unwrap().graph().unwrap();
        let plan = SamplerPlan::all_blocked(g.dim());
        let a = score_candidate(&mut g, &plan, 1_000, 9).unwrap();
        let b = score_candidate(&mut g, &plan, 1_000, 9).unwrap();
        assert_eq!(a.ess, b.ess);
        assert_eq!(a.algorithmic_efficiency, b.algorithmic_efficiency);
    }
}
