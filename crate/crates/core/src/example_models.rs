//! Generators for the benchmark model suite: correlated toy targets and
//! synthetic analogs of applied hierarchical models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, Normal, Poisson};

use crate::error::{ModelError, PlanError};
use crate::model::{Family, ModelGraph, ModelSpec, NodeSpec, OpKind, ParamValue, ValueSpec};
use crate::sampler::SamplerPlan;

/// Weakly informative prior for positive parameters.
const POSITIVE_PRIOR: (f64, f64) = (2.0, 0.5);
/// Prior standard deviation for unconstrained parameters.
const WIDE_SD: f64 = 10.0;

/// A generated model together with its hand-designed comparison blocking,
/// when one exists.
#[derive(Clone, Debug)]
pub struct Example {
    pub name: String,
    pub spec: ModelSpec,
    /// Blocks of slot names; every other slot is sampled on its own.
    pub informed_blocks: Option<Vec<Vec<String>>>,
}

impl Example {
    fn new(name: impl Into<String>, nodes: Vec<NodeSpec>) -> Self {
        Example { name: name.into(), spec: ModelSpec { nodes }, informed_blocks: None }
    }

    pub fn graph(&self) -> Result<ModelGraph, ModelError> {
        ModelGraph::from_spec(&self.spec)
    }

    pub fn informed_plan(&self, graph: &ModelGraph) -> Option<Result<SamplerPlan, PlanError>> {
        self.informed_blocks.as_ref().map(|blocks| plan_with_blocks(graph.slot_names(), blocks))
    }
}

/// The listed blocks plus scalar samplers for everything else.
pub fn plan_with_blocks(names: &[String], blocks: &[Vec<String>]) -> Result<SamplerPlan, PlanError> {
    let mut groups: Vec<Vec<String>> = blocks.to_vec();
    for name in names {
        if !blocks.iter().flatten().any(|b| b == name) {
            groups.push(vec![name.clone()]);
        }
    }
    SamplerPlan::from_named_groups(names, &groups)
}

fn normal(mean: impl Into<ParamValue>, sd: impl Into<ParamValue>) -> [(&'static str, ParamValue); 2] {
    [("mean", mean.into()), ("sd", sd.into())]
}

fn gamma_prior() -> [(&'static str, ParamValue); 2] {
    [("shape", POSITIVE_PRIOR.0.into()), ("rate", POSITIVE_PRIOR.1.into())]
}

fn compound_symmetric(k: usize, rho: f64) -> Vec<Vec<f64>> {
    (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { rho }).collect()).collect()
}

fn mvn_node(name: &str, cov: Vec<Vec<f64>>) -> NodeSpec {
    NodeSpec::parameter(name, Family::Mvn, [("mean", 0.0.into()), ("cov", cov.into())])
}

fn check_rho(rho: f64) -> Result<(), ModelError> {
    if rho.is_finite() && rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter { node: "rho".into(), detail: format!("|rho| must be below 1, got {rho}") })
    }
}

/// Default group sizes of the fixed-correlation toy model.
pub const FIXED_SIZES: [usize; 5] = [32, 16, 8, 4, 2];
/// Independent univariate parameters appended to the fixed-correlation model.
pub const FIXED_SINGLES: usize = 2;

/// Block-diagonal compound-symmetric normal prior: one group per size, all at
/// correlation `rho`, plus two independent standard normals.
pub fn fixed_correlation_blocks(rho: f64, sizes: &[usize]) -> Result<Example, ModelError> {
    check_rho(rho)?;
    let mut nodes = Vec::new();
    for (g, &k) in sizes.iter().enumerate() {
        let name = format!("g{}", g + 1);
        if k == 1 {
            nodes.push(NodeSpec::parameter(&name, Family::Normal, normal(0.0, 1.0)));
        } else {
            nodes.push(mvn_node(&name, compound_symmetric(k, rho)));
        }
    }
    for s in 0..FIXED_SINGLES {
        nodes.push(NodeSpec::parameter(&format!("u{}", s + 1), Family::Normal, normal(0.0, 1.0)));
    }
    Ok(Example::new(format!("fixed-rho-{rho}"), nodes))
}

/// Slot-index groups of the correlated blocks in `fixed_correlation_blocks`.
pub fn fixed_correlation_groups(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut start = 0;
    let mut out = Vec::new();
    for &k in sizes {
        if k > 1 {
            out.push((start..start + k).collect());
        }
        start += k;
    }
    out
}

/// Nine groups of size `n` at correlations 0.1 through 0.9, plus `n`
/// independent parameters; `d = 10 n`.
pub fn varying_correlation_blocks(n: usize) -> Result<Example, ModelError> {
    if n < 2 {
        return Err(ModelError::InvalidParameter { node: "n".into(), detail: "group size must be at least 2".into() });
    }
    let mut nodes: Vec<NodeSpec> =
        (1..=9).map(|r| mvn_node(&format!("r{r}"), compound_symmetric(n, r as f64 / 10.0))).collect();
    for s in 0..n {
        nodes.push(NodeSpec::parameter(&format!("u{}", s + 1), Family::Normal, normal(0.0, 1.0)));
    }
    Ok(Example::new(format!("varying-rho-{n}"), nodes))
}

/// One normal prior with `cov[i][j] = rho^|i-j|`.
pub fn exponential_decay_mvn(rho: f64, d: usize) -> Result<Example, ModelError> {
    check_rho(rho)?;
    let name = format!("exp-decay-{rho}-{d}");
    if d == 1 {
        return Ok(Example::new(name, vec![NodeSpec::parameter("x", Family::Normal, normal(0.0, 1.0))]));
    }
    let cov = (0..d).map(|i| (0..d).map(|j| rho.powi((i as i32 - j as i32).abs())).collect()).collect();
    Ok(Example::new(name, vec![mvn_node("x", cov)]))
}

/// Compound-symmetric normal target of dimension `d` used for the
/// algorithmic-efficiency sweep.
pub fn compound_symmetric_mvn(rho: f64, d: usize) -> Result<Example, ModelError> {
    check_rho(rho)?;
    let name = format!("compound-{rho}-{d}");
    if d == 1 {
        return Ok(Example::new(name, vec![NodeSpec::parameter("x", Family::Normal, normal(0.0, 1.0))]));
    }
    Ok(Example::new(name, vec![mvn_node("x", compound_symmetric(d, rho))]))
}

/// `d` independent standard normal parameters.
pub fn iid_normal(d: usize) -> Example {
    let nodes = (1..=d).map(|i| NodeSpec::parameter(&format!("x{i}"), Family::Normal, normal(0.0, 1.0))).collect();
    Example::new(format!("iid-normal-{d}"), nodes)
}

/// `d` independent Gamma(2, 0.5) parameters.
pub fn iid_gamma(d: usize) -> Example {
    let nodes = (1..=d).map(|i| NodeSpec::parameter(&format!("x{i}"), Family::Gamma, gamma_prior())).collect();
    Example::new(format!("iid-gamma-{d}"), nodes)
}

/// A single `d`-variate normal prior; the timing sweep's multivariate case.
pub fn mvn_prior(d: usize) -> Example {
    let mut ex = exponential_decay_mvn(0.5, d).expect("0.5 is a valid correlation");
    ex.name = format!("mvn-prior-{d}");
    ex
}

/// Beta-binomial random effects: for each group `i`, shape parameters
/// `alpha_i`, `beta_i` with Gamma priors, success probabilities
/// `p_i[j] ~ Beta(alpha_i, beta_i)` and synthetic counts
/// `y_i[j] ~ Binomial(n_ij, p_i[j])`.
pub fn random_effects_model(groups: usize, per_group: usize, seed: u64) -> Result<Example, ModelError> {
    if groups == 0 || per_group == 0 {
        return Err(ModelError::InvalidParameter { node: "groups".into(), detail: "counts must be positive".into() });
    }
    // Generating shapes: small means with low concentration, which leaves the
    // shape pair weakly identified along the concentration direction.
    const TRUTH: [(f64, f64); 4] = [(2.0, 8.0), (3.0, 6.0), (1.5, 9.0), (2.5, 5.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    let mut blocks = Vec::new();
    for i in 1..=groups {
        let (alpha, beta) = TRUTH[(i - 1) % TRUTH.len()];
        let (a, b) = (format!("alpha{i}"), format!("beta{i}"));
        nodes.push(NodeSpec::parameter(&a, Family::Gamma, gamma_prior()));
        nodes.push(NodeSpec::parameter(&b, Family::Gamma, gamma_prior()));
        blocks.push(vec![a.clone(), b.clone()]);
        let source = Beta::new(alpha, beta).expect("valid beta");
        for j in 1..=per_group {
            let size = rng.random_range(8..=13u64);
            let prob: f64 = source.sample(&mut rng);
            let count = Binomial::new(size, prob).expect("valid binomial").sample(&mut rng) as f64;
            let p = format!("p{i}_{j}");
            let start = (count + 0.5) / (size as f64 + 1.0);
            nodes.push(
                NodeSpec::parameter(&p, Family::Beta, [("a", a.as_str().into()), ("b", b.as_str().into())])
                    .with_value(ValueSpec::Scalar(start)),
            );
            nodes.push(NodeSpec::data(
                &format!("y{i}_{j}"),
                Family::Binomial,
                [("size", (size as f64).into()), ("prob", p.as_str().into())],
                ValueSpec::Scalar(count),
            ));
        }
    }
    let mut ex = Example::new("random-effects", nodes);
    ex.informed_blocks = Some(blocks);
    Ok(ex)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parameterization {
    /// Process mean `m`: latent mean `m + b (x[t-1] - m)`.
    Independent,
    /// Intercept `a`: latent mean `a + b x[t-1]`.
    Correlated,
}

const PROCESS_MEAN: f64 = 20.0;
const AUTOCORRELATION: f64 = 0.8;
const PROCESS_SD: f64 = 1.0;
const OBSERVATION_SD: f64 = 0.5;

/// Linear Gaussian state space model with AR(1) latent states
/// `x1..x{length}` and normal observations of each state.
pub fn state_space_model(parameterization: Parameterization, length: usize, seed: u64) -> Result<Example, ModelError> {
    if length < 2 {
        return Err(ModelError::InvalidParameter { node: "length".into(), detail: "need at least 2 states".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let process = Normal::new(0.0, PROCESS_SD).expect("valid sd");
    let observation = Normal::new(0.0, OBSERVATION_SD).expect("valid sd");
    let mut x = vec![PROCESS_MEAN + process.sample(&mut rng)];
    for t in 1..length {
        x.push(PROCESS_MEAN + AUTOCORRELATION * (x[t - 1] - PROCESS_MEAN) + process.sample(&mut rng));
    }
    let y: Vec<f64> = x.iter().map(|v| v + observation.sample(&mut rng)).collect();

    let level = match parameterization {
        Parameterization::Independent => "m",
        Parameterization::Correlated => "a",
    };
    let level_start = match parameterization {
        Parameterization::Independent => PROCESS_MEAN,
        Parameterization::Correlated => PROCESS_MEAN * (1.0 - AUTOCORRELATION),
    };
    let mut nodes = vec![
        NodeSpec::parameter(level, Family::Normal, normal(0.0, WIDE_SD)).with_value(ValueSpec::Scalar(level_start)),
        NodeSpec::parameter("b", Family::Normal, normal(0.0, WIDE_SD)).with_value(ValueSpec::Scalar(AUTOCORRELATION)),
        NodeSpec::parameter("sigma_p", Family::Gamma, gamma_prior()).with_value(ValueSpec::Scalar(PROCESS_SD)),
        NodeSpec::parameter("sigma_o", Family::Gamma, gamma_prior()).with_value(ValueSpec::Scalar(OBSERVATION_SD)),
    ];
    if parameterization == Parameterization::Independent {
        nodes.push(NodeSpec::deterministic(
            "one_minus_b",
            OpKind::Affine,
            [("inputs", ParamValue::refs(&["b"])), ("coefficients", vec![-1.0].into()), ("offset", 1.0.into())],
        ));
    }
    nodes.push(
        NodeSpec::parameter("x1", Family::Normal, normal(0.0, WIDE_SD)).with_value(ValueSpec::Scalar(y[0])),
    );
    for t in 2..=length {
        let prev = format!("x{}", t - 1);
        let (inputs, coefficients, offset): (ParamValue, ParamValue, ParamValue) = match parameterization {
            Parameterization::Correlated => (ParamValue::refs(&[&prev]), ParamValue::refs(&["b"]), "a".into()),
            Parameterization::Independent => {
                (ParamValue::refs(&[&prev, "m"]), ParamValue::refs(&["b", "one_minus_b"]), 0.0.into())
            }
        };
        let mean = format!("mean{t}");
        nodes.push(NodeSpec::deterministic(
            &mean,
            OpKind::Affine,
            [("inputs", inputs), ("coefficients", coefficients), ("offset", offset)],
        ));
        nodes.push(
            NodeSpec::parameter(&format!("x{t}"), Family::Normal, normal(mean.as_str(), "sigma_p"))
                .with_value(ValueSpec::Scalar(y[t - 1])),
        );
    }
    for (t, &obs) in y.iter().enumerate() {
        let t = t + 1;
        nodes.push(NodeSpec::data(
            &format!("y{t}"),
            Family::Normal,
            normal(format!("x{t}"), "sigma_o"),
            ValueSpec::Scalar(obs),
        ));
    }
    let name = match parameterization {
        Parameterization::Independent => "state-space-independent",
        Parameterization::Correlated => "state-space-correlated",
    };
    let mut ex = Example::new(name, nodes);
    if parameterization == Parameterization::Correlated {
        ex.informed_blocks = Some(vec![vec!["a".into(), "b".into()]]);
    }
    Ok(ex)
}

pub const DEFAULT_SITES: usize = 148;
const SPATIAL_EXTENT: f64 = 10.0;
const SPATIAL_TRUTH: (f64, f64, f64) = (1.0, 1.0, 2.0);

/// Latent Gaussian field `g ~ N(mu, sigma^2 exp(-dist / range))` over random
/// planar sites with Poisson counts `y_i ~ Poisson(exp(g_i))`.
pub fn spatial_model(sites: usize, seed: u64) -> Result<Example, ModelError> {
    if sites < 2 {
        return Err(ModelError::InvalidParameter { node: "sites".into(), detail: "need at least 2 sites".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<(f64, f64)> = (0..sites)
        .map(|_| (rng.random::<f64>() * SPATIAL_EXTENT, rng.random::<f64>() * SPATIAL_EXTENT))
        .collect();
    let distances: Vec<Vec<f64>> = coords
        .iter()
        .map(|a| coords.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect())
        .collect();

    let (mu, sigma, range) = SPATIAL_TRUTH;
    let cov = nalgebra::DMatrix::from_fn(sites, sites, |i, j| sigma * sigma * (-distances[i][j] / range).exp());
    let chol = nalgebra::Cholesky::new(cov).expect("exponential covariance is positive definite");
    let z = nalgebra::DVector::from_fn(sites, |_, _| rand_distr::StandardNormal.sample(&mut rng));
    let field = chol.l() * z;
    let counts: Vec<f64> = field
        .iter()
        .map(|g| Poisson::new((mu + g).exp()).expect("positive rate").sample(&mut rng))
        .collect();

    let mut nodes = vec![
        NodeSpec::parameter("mu", Family::Normal, normal(0.0, WIDE_SD)),
        NodeSpec::parameter("sigma", Family::Gamma, gamma_prior()).with_value(ValueSpec::Scalar(sigma)),
        NodeSpec::parameter("range", Family::Gamma, gamma_prior()).with_value(ValueSpec::Scalar(range)),
        NodeSpec::deterministic(
            "cov",
            OpKind::ExpDistanceCov,
            [("sigma", "sigma".into()), ("range", "range".into()), ("distances", distances.into())],
        ),
        NodeSpec::parameter("g", Family::Mvn, [("mean", "mu".into()), ("cov", "cov".into())])
            .with_value(ValueSpec::Vector(counts.iter().map(|c| (c + 0.5).ln()).collect())),
    ];
    for (i, &count) in counts.iter().enumerate() {
        let rate = format!("lambda{}", i + 1);
        nodes.push(NodeSpec::deterministic(&rate, OpKind::Exp, [("input", format!("g[{i}]").into())]));
        nodes.push(NodeSpec::data(
            &format!("y{}", i + 1),
            Family::Poisson,
            [("rate", rate.as_str().into())],
            ValueSpec::Scalar(count),
        ));
    }
    Ok(Example::new("spatial", nodes))
}

/// Names accepted by `by_name`, with one canonical instance each.
pub const CATALOG: &[&str] = &[
    "fixed-rho-0.2",
    "fixed-rho-0.5",
    "fixed-rho-0.8",
    "varying-rho-2",
    "varying-rho-5",
    "varying-rho-10",
    "random-effects",
    "state-space-independent",
    "state-space-correlated",
    "spatial",
    "iid-normal-50",
    "iid-gamma-50",
    "mvn-prior-50",
];

/// Seed for the synthetic data of catalog examples.
pub const DATA_SEED: u64 = 1;

/// Looks up an example by name. Besides the catalog, the numeric suffixes of
/// the parametric families (`fixed-rho-<rho>`, `varying-rho-<n>`,
/// `exp-decay-<rho>-<d>`, `compound-<rho>-<d>`, `iid-normal-<d>`,
/// `iid-gamma-<d>`, `mvn-prior-<d>`) may be any valid value.
pub fn by_name(name: &str) -> Option<Example> {
    let num = |s: &str| s.parse::<f64>().ok();
    let count = |s: &str| s.parse::<usize>().ok().filter(|&n| n >= 1);
    let pair = |s: &str| {
        let (a, b) = s.rsplit_once('-')?;
        Some((num(a)?, count(b)?))
    };
    match name {
        "random-effects" => return random_effects_model(2, 16, DATA_SEED).ok(),
        "state-space-independent" => return state_space_model(Parameterization::Independent, 100, DATA_SEED).ok(),
        "state-space-correlated" => return state_space_model(Parameterization::Correlated, 100, DATA_SEED).ok(),
        "spatial" => return spatial_model(DEFAULT_SITES, DATA_SEED).ok(),
        _ => {}
    }
    if let Some(r) = name.strip_prefix("fixed-rho-") {
        return fixed_correlation_blocks(num(r)?, &FIXED_SIZES).ok();
    }
    if let Some(n) = name.strip_prefix("varying-rho-") {
        return varying_correlation_blocks(count(n)?).ok();
    }
    if let Some(rest) = name.strip_prefix("exp-decay-") {
        let (rho, d) = pair(rest)?;
        return exponential_decay_mvn(rho, d).ok();
    }
    if let Some(rest) = name.strip_prefix("compound-") {
        let (rho, d) = pair(rest)?;
        return compound_symmetric_mvn(rho, d).ok();
    }
    if let Some(d) = name.strip_prefix("iid-normal-") {
        return Some(iid_normal(count(d)?));
    }
    if let Some(d) = name.strip_prefix("iid-gamma-") {
        return Some(iid_gamma(count(d)?));
    }
    if let Some(d) = name.strip_prefix("mvn-prior-") {
        return Some(mvn_prior(count(d)?));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::run_mcmc;

    #[test]
    fn fixed_correlation_shapes() {
        let ex = fixed_correlation_blocks(0.8, &FIXED_SIZES).unwrap();
        assert_eq!(ex.graph().unwrap().dim(), 64);
        let small = fixed_correlation_blocks(0.8, &[2]).unwrap();
        assert_eq!(small.spec.nodes[0].params["cov"], vec![vec![1.0, 0.8], vec![0.8, 1.0]].into());
        assert!(fixed_correlation_blocks(1.0, &[2]).is_err());
        assert_eq!(fixed_correlation_groups(&FIXED_SIZES).iter().map(Vec::len).collect::<Vec<_>>(), FIXED_SIZES);
    }

    #[test]
    fn varying_and_decay_shapes() {
        assert_eq!(varying_correlation_blocks(2).unwrap().graph().unwrap().dim(), 20);
        assert_eq!(varying_correlation_blocks(10).unwrap().graph().unwrap().dim(), 100);
        let v = varying_correlation_blocks(2).unwrap();
        assert_eq!(v.spec.nodes[8].params["cov"], vec![vec![1.0, 0.9], vec![0.9, 1.0]].into());
        let e = exponential_decay_mvn(0.5, 3).unwrap();
        let ParamValue::Array(rows) = &e.spec.nodes[0].params["cov"] else { panic!() };
        let ParamValue::Array(first) = &rows[0] else { panic!() };
        assert_eq!(first[2], ParamValue::Number(0.25));
        assert_eq!(exponential_decay_mvn(0.0, 1).unwrap().graph().unwrap().dim(), 1);
    }

    #[test]
    fn random_effects_shape_and_reproducibility() {
        let ex = random_effects_model(2, 16, 7).unwrap();
        let g = ex.graph().unwrap();
        assert_eq!(g.dim(), 2 * 2 + 32);
        let plan = ex.informed_plan(&g).unwrap().unwrap();
        assert_eq!(plan.block_sizes(), vec![2, 2]);
        assert_eq!(random_effects_model(2, 16, 7).unwrap().spec, ex.spec);
        assert_ne!(random_effects_model(2, 16, 8).unwrap().spec, ex.spec);
    }

    #[test]
    fn state_space_shapes() {
        for p in [Parameterization::Independent, Parameterization::Correlated] {
            let ex = state_space_model(p, 100, 3).unwrap();
            let g = ex.graph().unwrap();
            assert_eq!(g.dim(), 104);
            assert_eq!(ex.informed_blocks.is_some(), p == Parameterization::Correlated);
        }
        let ex = state_space_model(Parameterization::Correlated, 100, 3).unwrap();
        let g = ex.graph().unwrap();
        assert_eq!(ex.informed_plan(&g).unwrap().unwrap().block_sizes(), vec![2]);
    }

    #[test]
    fn parameterizations_agree_at_matched_points() {
        let ind = state_space_model(Parameterization::Independent, 20, 5).unwrap();
        let cor = state_space_model(Parameterization::Correlated, 20, 5).unwrap();
        let (mut gi, mut gc) = (ind.graph().unwrap(), cor.graph().unwrap());
        for (m, b) in [(3.0, 0.0), (10.0, 0.8), (-2.0, 0.3)] {
            let mut theta = gi.theta().to_vec();
            theta[0] = m;
            theta[1] = b;
            gi.set_theta(&theta).unwrap();
            theta[0] = m * (1.0 - b);
            gc.set_theta(&theta).unwrap();
            let (li, lc) = (gi.total_log_density().unwrap(), gc.total_log_density().unwrap());
            // Priors on the level parameter differ; compare without them.
            let prior = |v: f64| -0.5 * (v / WIDE_SD).powi(2);
            assert!(((li - prior(m)) - (lc - prior(m * (1.0 - b)))).abs() < 1e-9);
        }
    }

    #[test]
    fn spatial_shapes() {
        let ex = spatial_model(DEFAULT_SITES, 2).unwrap();
        let g = ex.graph().unwrap();
        assert_eq!(g.dim(), 151);
        assert_eq!(spatial_model(DEFAULT_SITES, 2).unwrap().spec, ex.spec);
        // Very long range: near-singular covariance still builds and evaluates.
        let mut small = spatial_model(5, 2).unwrap();
        small.spec.nodes[2] = small.spec.nodes[2].clone().with_value(ValueSpec::Scalar(1e9));
        let mut g = small.graph().unwrap();
        assert!(g.total_log_density().unwrap().is_finite());
    }

    #[test]
    fn catalog_smoke() {
        for name in CATALOG {
            let ex = by_name(name).unwrap_or_else(|| panic!("{name}"));
            let mut g = ex.graph().unwrap();
            let plan = SamplerPlan::all_scalar(g.dim());
            let chain = run_mcmc(&mut g, &plan, 100, 1).unwrap();
            assert_eq!(chain.len(), 100);
            if let Some(p) = ex.informed_plan(&g) {
                p.unwrap();
            }
        }
        assert!(by_name("compound-0.5-16").is_some());
        assert!(by_name("nope").is_none());
    }
}
