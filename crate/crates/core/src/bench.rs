//! Benchmark suites comparing sampling schemes, plus the dimension and
//! correlation sweeps behind the cost and mixing curves.

use serde::Serialize;

use crate::autoblock::{autoblock, candidate_seed, AutoblockConfig};
use crate::diagnostics::{efficiency_report, EfficiencyReport};
use crate::error::AutoblockError;
use crate::example_models::{self as models, Example, Parameterization};
use crate::sampler::{run_mcmc, SamplerPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scheme {
    AllScalar,
    AllBlocked,
    Informed,
    AutoBlock,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::AllScalar => "AllScalar",
            Scheme::AllBlocked => "AllBlocked",
            Scheme::Informed => "Informed",
            Scheme::AutoBlock => "AutoBlock",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchmarkRow {
    pub model: String,
    pub scheme: Scheme,
    pub dim: usize,
    pub ess_per_10k: f64,
    pub runtime_per_10k: f64,
    pub efficiency_per_second: f64,
    pub slowest: String,
    pub block_sizes: Vec<usize>,
    /// Selected cut height, AutoBlock rows only.
    pub cut_height: Option<f64>,
    /// `"ok"` or the error that prevented this row.
    pub status: String,
}

impl BenchmarkRow {
    fn measured(model: &str, scheme: Scheme, plan: &SamplerPlan, report: &EfficiencyReport) -> Self {
        BenchmarkRow {
            model: model.to_string(),
            scheme,
            dim: plan.dim(),
            ess_per_10k: report.ess_per_10k,
            runtime_per_10k: report.runtime_per_10k,
            efficiency_per_second: report.efficiency_per_second,
            slowest: report.slowest.clone(),
            block_sizes: plan.block_sizes(),
            cut_height: None,
            status: "ok".into(),
        }
    }

    fn failed(model: &str, scheme: Scheme, error: impl ToString) -> Self {
        BenchmarkRow {
            model: model.to_string(),
            scheme,
            dim: 0,
            ess_per_10k: 0.0,
            runtime_per_10k: 0.0,
            efficiency_per_second: 0.0,
            slowest: String::new(),
            block_sizes: Vec::new(),
            cut_height: None,
            status: error.to_string(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// One point of a sweep curve.
#[derive(Clone, Debug, Serialize)]
pub struct CurvePoint {
    pub series: String,
    pub scheme: Scheme,
    pub dim: usize,
    pub rho: Option<f64>,
    pub algorithmic_efficiency: f64,
    pub runtime_per_10k: f64,
    pub efficiency_per_second: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Environment {
    pub host: String,
    pub os: String,
    pub arch: String,
    pub cpus: usize,
    pub clock_source: String,
    pub build: String,
    pub version: String,
}

impl Environment {
    pub fn capture() -> Self {
        let host = std::env::var("HOSTNAME")
            .ok()
            .or_else(|| std::fs::read_to_string("/etc/hostname").ok())
            .map(|h| h.trim().to_string())
            .unwrap_or_else(|| "unknown".into());
        Environment {
            host,
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            clock_source: "monotonic (std::time::Instant), sampler sweeps only".into(),
            build: if cfg!(debug_assertions) { "debug" } else { "optimized" }.into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchmarkReport {
    pub suite: String,
    pub iterations: usize,
    pub seed: u64,
    pub replicates: usize,
    pub environment: Environment,
    pub rows: Vec<BenchmarkRow>,
    pub curves: Vec<CurvePoint>,
}

impl BenchmarkReport {
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("model,scheme,dim,ess_per_10k,runtime_per_10k,efficiency_per_second,slowest,cut_height,status\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.model,
                r.scheme.label(),
                r.dim,
                r.ess_per_10k,
                r.runtime_per_10k,
                r.efficiency_per_second,
                r.slowest,
                r.cut_height.map(|h| h.to_string()).unwrap_or_default(),
                r.status.replace(',', ";"),
            ));
        }
        out
    }

    pub fn curves_csv(&self) -> String {
        let mut out = String::from("series,scheme,dim,rho,algorithmic_efficiency,runtime_per_10k,efficiency_per_second\n");
        for c in &self.curves {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.series,
                c.scheme.label(),
                c.dim,
                c.rho.map(|r| r.to_string()).unwrap_or_default(),
                c.algorithmic_efficiency,
                c.runtime_per_10k,
                c.efficiency_per_second,
            ));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub iterations: usize,
    pub seed: u64,
    /// Chains per scheme in `compare_schemes`; see `measure_interleaved`.
    pub replicates: usize,
    pub autoblock: AutoblockConfig,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { iterations: 10_000, seed: 1, replicates: 3, autoblock: AutoblockConfig::default() }
    }
}

pub const SUITES: &[(&str, &str)] = &[
    ("timing-sweep", "runtime of all-scalar and all-blocked sampling across dimensions for iid normal, iid gamma and MVN priors"),
    ("correlation-sweep", "algorithmic efficiency against correlation for compound-symmetric and exponential-decay targets"),
    ("toy-fixed-rho", "fixed-correlation groups {32,16,8,4,2} at rho 0.2, 0.5, 0.8"),
    ("toy-varying-rho", "nine groups at rho 0.1..0.9 with group sizes 2, 5, 10"),
    ("random-effects", "beta-binomial random effects, two groups of 16"),
    ("state-space", "AR(1) state space model in both parameterizations"),
    ("spatial", "Poisson counts over a latent exponential-covariance field, 148 sites"),
];

pub fn measure(example: &Example, plan: &SamplerPlan, iterations: usize, seed: u64) -> Result<EfficiencyReport, AutoblockError> {
    let mut graph = example.graph()?;
    let chain = run_mcmc(&mut graph, plan, iterations, seed)?;
    Ok(efficiency_report(&chain)?)
}

/// Seed of replicate `r`; the first replicate uses `seed` itself.
pub fn replicate_seed(seed: u64, r: usize) -> u64 {
    if r == 0 {
        seed
    } else {
        candidate_seed(seed, usize::MAX, r)
    }
}

/// Measures every plan `replicates` times, cycling through the plans so
/// that drift in machine speed affects them alike. Autocorrelation times
/// and sampling seconds are averaged over replicates per plan.
pub fn measure_interleaved(
    example: &Example,
    plans: &[SamplerPlan],
    iterations: usize,
    seed: u64,
    replicates: usize,
) -> Vec<Result<EfficiencyReport, String>> {
    let mut runs: Vec<Result<Vec<EfficiencyReport>, String>> = vec![Ok(Vec::new()); plans.len()];
    for r in 0..replicates.max(1) {
        for (plan, acc) in plans.iter().zip(runs.iter_mut()) {
            if let Ok(reports) = acc {
                match measure(example, plan, iterations, replicate_seed(seed, r)) {
                    Ok(report) => reports.push(report),
                    Err(e) => *acc = Err(e.to_string()),
                }
            }
        }
    }
    runs.into_iter().map(|acc| acc.map(|reports| average(&reports))).collect()
}

fn average(reports: &[EfficiencyReport]) -> EfficiencyReport {
    let n = reports.len() as f64;
    let first = &reports[0];
    let tau = (0..first.tau.len()).map(|j| reports.iter().map(|r| r.tau[j]).sum::<f64>() / n).collect();
    let seconds = reports.iter().map(|r| r.seconds_per_iteration).sum::<f64>() / n * first.iterations as f64;
    EfficiencyReport::from_taus(first.names.clone(), tau, first.iterations, seconds)
}

/// Rows for every scheme on one model. Schemes that end up with the same
/// plan share one measurement, since an identical algorithm yields an
/// identical chain.
pub fn compare_schemes(example: &Example, options: &BenchOptions) -> Vec<BenchmarkRow> {
    let name = example.name.as_str();
    let graph = match example.graph() {
        Ok(g) => g,
        Err(e) => return vec![BenchmarkRow::failed(name, Scheme::AllScalar, e)],
    };
    let d = graph.dim();
    let mut plans: Vec<(Scheme, Result<SamplerPlan, String>, Option<f64>)> = vec![
        (Scheme::AllScalar, Ok(SamplerPlan::all_scalar(d)), None),
        (Scheme::AllBlocked, Ok(SamplerPlan::all_blocked(d)), None),
    ];
    if let Some(p) = example.informed_plan(&graph) {
        plans.push((Scheme::Informed, p.map_err(|e| e.to_string()), None));
    }
    let config = AutoblockConfig { seed: options.seed, ..options.autoblock.clone() };
    match autoblock(&graph, &config) {
        Ok(trace) => plans.push((Scheme::AutoBlock, Ok(trace.final_plan), Some(trace.final_height))),
        Err(e) => plans.push((Scheme::AutoBlock, Err(e.to_string()), None)),
    }

    let mut distinct: Vec<SamplerPlan> = Vec::new();
    for (_, plan, _) in &plans {
        if let Ok(p) = plan {
            if !distinct.contains(p) {
                distinct.push(p.clone());
            }
        }
    }
    let measured = measure_interleaved(example, &distinct, options.iterations, options.seed, options.replicates);

    let mut rows = Vec::new();
    for (scheme, plan, height) in plans {
        let plan = match plan {
            Ok(p) => p,
            Err(e) => {
                rows.push(BenchmarkRow::failed(name, scheme, e));
                continue;
            }
        };
        let index = distinct.iter().position(|p| *p == plan).expect("every plan is measured");
        rows.push(match measured[index].clone() {
            Ok(r) => BenchmarkRow { cut_height: height, ..BenchmarkRow::measured(name, scheme, &plan, &r) },
            Err(e) => BenchmarkRow::failed(name, scheme, e),
        });
    }
    rows
}

fn curve_point(series: &str, scheme: Scheme, dim: usize, rho: Option<f64>, r: &EfficiencyReport) -> CurvePoint {
    CurvePoint {
        series: series.to_string(),
        scheme,
        dim,
        rho,
        algorithmic_efficiency: r.algorithmic_efficiency,
        runtime_per_10k: r.runtime_per_10k,
        efficiency_per_second: r.efficiency_per_second,
    }
}

pub const TIMING_DIMS: [usize; 4] = [10, 25, 50, 100];
pub const SWEEP_RHOS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 0.9];
pub const SWEEP_DIMS: [usize; 3] = [2, 16, 64];

fn timing_sweep(options: &BenchOptions) -> Result<Vec<CurvePoint>, AutoblockError> {
    let mut out = Vec::new();
    for &d in &TIMING_DIMS {
        for (series, ex) in [
            ("iid-normal", models::iid_normal(d)),
            ("iid-gamma", models::iid_gamma(d)),
            ("mvn-prior", models::mvn_prior(d)),
        ] {
            for (scheme, plan) in [(Scheme::AllScalar, SamplerPlan::all_scalar(d)), (Scheme::AllBlocked, SamplerPlan::all_blocked(d))] {
                let r = measure(&ex, &plan, options.iterations, options.seed)?;
                out.push(curve_point(series, scheme, d, None, &r));
            }
        }
    }
    Ok(out)
}

fn correlation_sweep(options: &BenchOptions) -> Result<Vec<CurvePoint>, AutoblockError> {
    let mut out = Vec::new();
    for &d in &SWEEP_DIMS {
        for &rho in &SWEEP_RHOS {
            for (series, ex) in [
                ("compound", models::compound_symmetric_mvn(rho, d)?),
                ("exp-decay", models::exponential_decay_mvn(rho, d)?),
            ] {
                for (scheme, plan) in [(Scheme::AllScalar, SamplerPlan::all_scalar(d)), (Scheme::AllBlocked, SamplerPlan::all_blocked(d))] {
                    let r = measure(&ex, &plan, options.iterations, options.seed)?;
                    out.push(curve_point(series, scheme, d, Some(rho), &r));
                }
            }
        }
    }
    Ok(out)
}

fn suite_models(suite: &str) -> Result<Vec<Example>, AutoblockError> {
    let seed = models::DATA_SEED;
    Ok(match suite {
        "toy-fixed-rho" => [0.2, 0.5, 0.8]
            .iter()
            .map(|&r| models::fixed_correlation_blocks(r, &models::FIXED_SIZES))
            .collect::<Result<_, _>>()?,
        "toy-varying-rho" => [2, 5, 10].iter().map(|&n| models::varying_correlation_blocks(n)).collect::<Result<_, _>>()?,
        "random-effects" => vec![models::random_effects_model(2, 16, seed)?],
        "state-space" => vec![
            models::state_space_model(Parameterization::Independent, 100, seed)?,
            models::state_space_model(Parameterization::Correlated, 100, seed)?,
        ],
        "spatial" => vec![models::spatial_model(models::DEFAULT_SITES, seed)?],
        _ => Vec::new(),
    })
}

pub fn run_suite(suite: &str, options: &BenchOptions) -> Result<BenchmarkReport, AutoblockError> {
    if !SUITES.iter().any(|(s, _)| *s == suite) {
        return Err(AutoblockError::Config(format!("unknown suite `{suite}`")));
    }
    let (rows, curves) = match suite {
        "timing-sweep" => (Vec::new(), timing_sweep(options)?),
        "correlation-sweep" => (Vec::new(), correlation_sweep(options)?),
        other => (suite_models(other)?.iter().flat_map(|ex| compare_schemes(ex, options)).collect(), Vec::new()),
    };
    Ok(BenchmarkReport {
        suite: suite.to_string(),
        iterations: options.iterations,
        seed: options.seed,
        replicates: options.replicates,
        environment: Environment::capture(),
        rows,
        curves,
    })
}
