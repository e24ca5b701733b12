use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};

use super::density;
use super::spec::{parse_reference, Family, ModelSpec, NodeKind, NodeSpec, OpKind, ParamValue};
use crate::error::ModelError;

/// Dense node index, assigned in declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq)]
enum Operand {
    Const(f64),
    /// Element `offset` of node `node`'s value.
    Elem(usize, usize),
}

#[derive(Clone, Debug)]
enum CovSource {
    Fixed,
    Node(usize),
}

#[derive(Clone, Debug)]
enum Dist {
    Normal(Operand, Operand),
    Gamma(Operand, Operand),
    Beta(Operand, Operand),
    Binomial(Operand, Operand),
    Poisson(Operand),
    Mvn { mean: Vec<Operand>, cov: CovSource },
}

#[derive(Clone, Debug)]
enum Op {
    Affine { offset: Operand, terms: Vec<(Operand, Operand)> },
    Exp(Vec<Operand>),
    Expit(Vec<Operand>),
    ExpDistanceCov { sigma: Operand, range: Operand, distances: Vec<f64> },
}

#[derive(Clone, Debug)]
enum Body {
    Stochastic(Dist),
    Deterministic(Op),
}

#[derive(Clone, Debug)]
struct Node {
    name: String,
    kind: NodeKind,
    body: Body,
    parents: Vec<usize>,
}

/// Cholesky factor of a multivariate normal node's covariance.
#[derive(Clone, Debug)]
struct MvnCache {
    factor: DMatrix<f64>,
    half_log_det: f64,
    /// False when factorization failed even after jitter; density is -inf.
    usable: bool,
    /// False when the covariance changed since the last factorization.
    valid: bool,
    saved: Option<(DMatrix<f64>, f64, bool, bool)>,
    scratch: DVector<f64>,
}

impl MvnCache {
    fn factorized(cov: DMatrix<f64>) -> Self {
        let dim = cov.nrows();
        let mut cache = MvnCache {
            factor: DMatrix::zeros(dim, dim),
            half_log_det: 0.0,
            usable: false,
            valid: false,
            saved: None,
            scratch: DVector::zeros(dim),
        };
        cache.refactor(cov);
        cache
    }

    fn pending(dim: usize) -> Self {
        MvnCache {
            factor: DMatrix::zeros(dim, dim),
            half_log_det: 0.0,
            usable: false,
            valid: false,
            saved: None,
            scratch: DVector::zeros(dim),
        }
    }

    fn refactor(&mut self, cov: DMatrix<f64>) {
        self.valid = true;
        match cholesky_with_jitter(cov) {
            Some(l) => {
                self.half_log_det = l.diagonal().iter().map(|v| v.ln()).sum();
                self.factor = l;
                self.usable = true;
            }
            None => self.usable = false,
        }
    }

    fn save(&mut self) {
        match &mut self.saved {
            Some((f, h, u, v)) => {
                f.copy_from(&self.factor);
                *h = self.half_log_det;
                *u = self.usable;
                *v = self.valid;
            }
            None => {
                self.saved = Some((self.factor.clone(), self.half_log_det, self.usable, self.valid))
            }
        }
    }

    fn restore(&mut self) {
        if let Some((f, h, u, v)) = &self.saved {
            self.factor.copy_from(f);
            self.half_log_det = *h;
            self.usable = *u;
            self.valid = *v;
        }
    }
}

/// Lower Cholesky factor; on failure retries once with a small diagonal
/// jitter proportional to the mean variance.
pub(crate) fn cholesky_with_jitter(cov: DMatrix<f64>) -> Option<DMatrix<f64>> {
    if cov.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let dim = cov.nrows();
    let jitter = 1e-6 * cov.trace() / dim as f64 + 1e-12;
    if let Some(c) = nalgebra::Cholesky::new(cov.clone()) {
        return Some(c.l());
    }
    let mut cov = cov;
    for i in 0..dim {
        cov[(i, i)] += jitter;
    }
    nalgebra::Cholesky::new(cov).map(|c| c.l())
}

/// Nodes touched when a set of theta slots changes.
#[derive(Clone, Debug, Default)]
pub struct UpdateScope {
    pub(crate) slots: Vec<usize>,
    /// Stochastic nodes owning the slots.
    pub(crate) owners: Vec<usize>,
    /// Stochastic dependents of the slots, each once, excluding owners.
    pub(crate) dependents: Vec<usize>,
    /// Deterministic nodes downstream of the slots, in topological order.
    pub(crate) deterministic: Vec<usize>,
    /// Multivariate normal nodes whose covariance is in `deterministic`.
    pub(crate) covariance_users: Vec<usize>,
}

impl UpdateScope {
    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn owners(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.owners.iter().map(|&i| NodeId(i))
    }

    pub fn dependents(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.dependents.iter().map(|&i| NodeId(i))
    }
}

/// A hierarchical model as a DAG of stochastic, data, and deterministic
/// nodes, together with its current state.
#[derive(Clone, Debug)]
pub struct ModelGraph {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    topo: Vec<usize>,
    topo_rank: Vec<usize>,
    /// Node-level consumers (children).
    consumers: Vec<Vec<usize>>,
    slots: Vec<(usize, usize)>,
    slot_names: Vec<String>,
    slot_dependents: Vec<Vec<usize>>,
    slot_deterministic: Vec<Vec<usize>>,
    covariance_users: Vec<Vec<usize>>,
    initial: Vec<f64>,

    values: Vec<Vec<f64>>,
    saved: Vec<Vec<f64>>,
    stale: Vec<bool>,
    any_stale: bool,
    mvn: Vec<Option<MvnCache>>,
    /// Last computed log density per stochastic node, usable while `logp_valid`.
    logp: Vec<f64>,
    logp_valid: Vec<bool>,
    logp_saved: Vec<(f64, bool)>,
    eval_counts: Vec<u64>,
}

fn spec_error(node: &str, detail: impl Into<String>) -> ModelError {
    ModelError::InvalidSpec { node: node.to_string(), detail: detail.into() }
}

fn arity(node: &str, detail: impl Into<String>) -> ModelError {
    ModelError::ArityMismatch { node: node.to_string(), detail: detail.into() }
}

struct Compiler<'a> {
    index: &'a HashMap<String, usize>,
    dims: &'a [usize],
    node: &'a str,
}

impl Compiler<'_> {
    fn resolve(&self, text: &str) -> Result<(usize, Option<usize>), ModelError> {
        let unknown = || ModelError::UnknownReference {
            node: self.node.to_string(),
            reference: text.to_string(),
        };
        let (name, element) = parse_reference(text).ok_or_else(unknown)?;
        let target = *self.index.get(name).ok_or_else(unknown)?;
        if let Some(e) = element {
            if e >= self.dims[target] {
                return Err(spec_error(
                    self.node,
                    format!("element {e} out of range for `{name}` of length {}", self.dims[target]),
                ));
            }
        }
        Ok((target, element))
    }

    fn scalar(&self, value: &ParamValue) -> Result<Operand, ModelError> {
        match value {
            ParamValue::Number(v) => Ok(Operand::Const(*v)),
            ParamValue::Ref(r) => match self.resolve(r)? {
                (target, Some(e)) => Ok(Operand::Elem(target, e)),
                (target, None) if self.dims[target] == 1 => Ok(Operand::Elem(target, 0)),
                _ => Err(spec_error(self.node, format!("`{r}` is not scalar"))),
            },
            ParamValue::Array(_) => Err(spec_error(self.node, "expected a scalar, found an array")),
        }
    }

    fn vector(&self, value: &ParamValue) -> Result<Vec<Operand>, ModelError> {
        match value {
            ParamValue::Number(v) => Ok(vec![Operand::Const(*v)]),
            ParamValue::Ref(r) => match self.resolve(r)? {
                (target, Some(e)) => Ok(vec![Operand::Elem(target, e)]),
                (target, None) => Ok((0..self.dims[target]).map(|e| Operand::Elem(target, e)).collect()),
            },
            ParamValue::Array(items) => items.iter().map(|i| self.scalar(i)).collect(),
        }
    }

    fn matrix(&self, value: &ParamValue) -> Result<DMatrix<f64>, ModelError> {
        let rows = match value {
            ParamValue::Array(rows) => rows,
            _ => return Err(spec_error(self.node, "expected a matrix literal")),
        };
        let n = rows.len();
        let mut out = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            let row = match row {
                ParamValue::Array(row) if row.len() == n => row,
                _ => return Err(spec_error(self.node, "matrix must be square")),
            };
            for (j, v) in row.iter().enumerate() {
                match v {
                    ParamValue::Number(v) => out[(i, j)] = *v,
                    _ => return Err(spec_error(self.node, "matrix entries must be numbers")),
                }
            }
        }
        Ok(out)
    }
}

fn check_params(node: &NodeSpec, expected: &[&str]) -> Result<(), ModelError> {
    let given: BTreeSet<&str> = node.params.keys().map(|k| k.as_str()).collect();
    let wanted: BTreeSet<&str> = expected.iter().copied().collect();
    if given != wanted {
        return Err(arity(&node.name, format!("expected parameters {wanted:?}, found {given:?}")));
    }
    Ok(())
}

impl ModelGraph {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Self::from_spec(&ModelSpec::from_json(text)?)
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self, ModelError> {
        let n = spec.nodes.len();
        let mut index = HashMap::with_capacity(n);
        for (i, node) in spec.nodes.iter().enumerate() {
            if node.name.is_empty() || node.name.contains(['[', ']']) {
                return Err(spec_error(&node.name, "names must be nonempty and free of brackets"));
            }
            if index.insert(node.name.clone(), i).is_some() {
                return Err(ModelError::DuplicateName(node.name.clone()));
            }
        }

        let mut parents = Vec::with_capacity(n);
        for node in &spec.nodes {
            let mut refs = Vec::new();
            node.params.values().for_each(|v| v.references(&mut refs));
            let mut set = BTreeSet::new();
            for r in refs {
                let unknown = || ModelError::UnknownReference {
                    node: node.name.clone(),
                    reference: r.clone(),
                };
                let (name, _) = parse_reference(&r).ok_or_else(unknown)?;
                let target = *index.get(name).ok_or_else(unknown)?;
                if name == node.name {
                    return Err(ModelError::Cycle { node: node.name.clone() });
                }
                set.insert(target);
            }
            parents.push(set.into_iter().collect::<Vec<usize>>());
        }

        let mut consumers = vec![Vec::new(); n];
        for (child, ps) in parents.iter().enumerate() {
            for &p in ps {
                consumers[p].push(child);
            }
        }

        // Kahn's algorithm, always taking the smallest ready index.
        let mut indegree: Vec<usize> = parents.iter().map(|p| p.len()).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            topo.push(i);
            for &c in &consumers[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if topo.len() != n {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap_or(0);
            return Err(ModelError::Cycle { node: spec.nodes[stuck].name.clone() });
        }
        let mut topo_rank = vec![0; n];
        for (rank, &i) in topo.iter().enumerate() {
            topo_rank[i] = rank;
        }

        let mut dims = vec![0usize; n];
        let mut bodies: Vec<Option<Body>> = vec![None; n];
        let mut mvn: Vec<Option<MvnCache>> = vec![None; n];
        for &i in &topo {
            let node = &spec.nodes[i];
            let c = Compiler { index: &index, dims: &dims, node: &node.name };
            let (body, dim) = match node.kind {
                NodeKind::Deterministic => {
                    if node.family.is_some() {
                        return Err(spec_error(&node.name, "deterministic nodes take an op, not a family"));
                    }
                    let op = node.op.ok_or_else(|| spec_error(&node.name, "missing op"))?;
                    check_params(node, op.param_names())?;
                    let p = &node.params;
                    let (op, dim) = match op {
                        OpKind::Affine => {
                            let inputs = c.vector(&p["inputs"])?;
                            let coefs = c.vector(&p["coefficients"])?;
                            if inputs.len() != coefs.len() {
                                return Err(arity(
                                    &node.name,
                                    format!("{} inputs but {} coefficients", inputs.len(), coefs.len()),
                                ));
                            }
                            let offset = c.scalar(&p["offset"])?;
                            (Op::Affine { offset, terms: coefs.into_iter().zip(inputs).collect() }, 1)
                        }
                        OpKind::Exp => {
                            let input = c.vector(&p["input"])?;
                            let dim = input.len();
                            (Op::Exp(input), dim)
                        }
                        OpKind::Expit => {
                            let input = c.vector(&p["input"])?;
                            let dim = input.len();
                            (Op::Expit(input), dim)
                        }
                        OpKind::ExpDistanceCov => {
                            let distances = c.matrix(&p["distances"])?;
                            let k = distances.nrows();
                            if distances.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
                                return Err(spec_error(&node.name, "distances must be finite and nonnegative"));
                            }
                            let op = Op::ExpDistanceCov {
                                sigma: c.scalar(&p["sigma"])?,
                                range: c.scalar(&p["range"])?,
                                distances: distances.transpose().as_slice().to_vec(),
                            };
                            (op, k * k)
                        }
                    };
                    (Body::Deterministic(op), dim)
                }
                NodeKind::Parameter | NodeKind::Data => {
                    if node.op.is_some() {
                        return Err(spec_error(&node.name, "stochastic nodes take a family, not an op"));
                    }
                    let family = node.family.ok_or_else(|| spec_error(&node.name, "missing family"))?;
                    if node.kind == NodeKind::Parameter && family.is_discrete() {
                        return Err(spec_error(&node.name, "discrete parameters are not supported"));
                    }
                    check_params(node, family.param_names())?;
                    let p = &node.params;
                    let two = |a: &str, b: &str| -> Result<(Operand, Operand), ModelError> {
                        Ok((c.scalar(&p[a])?, c.scalar(&p[b])?))
                    };
                    let (dist, dim) = match family {
                        Family::Normal => {
                            let (a, b) = two("mean", "sd")?;
                            (Dist::Normal(a, b), 1)
                        }
                        Family::Gamma => {
                            let (a, b) = two("shape", "rate")?;
                            (Dist::Gamma(a, b), 1)
                        }
                        Family::Beta => {
                            let (a, b) = two("a", "b")?;
                            (Dist::Beta(a, b), 1)
                        }
                        Family::Binomial => {
                            let (a, b) = two("size", "prob")?;
                            (Dist::Binomial(a, b), 1)
                        }
                        Family::Poisson => (Dist::Poisson(c.scalar(&p["rate"])?), 1),
                        Family::Mvn => {
                            let (cov, k) = match &p["cov"] {
                                ParamValue::Ref(r) => {
                                    let (target, element) = c.resolve(r)?;
                                    let size = dims[target];
                                    let k = (size as f64).sqrt().round() as usize;
                                    let deterministic = spec.nodes[target].kind == NodeKind::Deterministic;
                                    if element.is_some() || k * k != size || !deterministic {
                                        return Err(spec_error(
                                            &node.name,
                                            "cov must reference a matrix-valued deterministic node",
                                        ));
                                    }
                                    mvn[i] = Some(MvnCache::pending(k));
                                    (CovSource::Node(target), k)
                                }
                                other => {
                                    let m = c.matrix(other)?;
                                    let k = m.nrows();
                                    if k == 0 {
                                        return Err(spec_error(&node.name, "empty covariance"));
                                    }
                                    if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
                                        return Err(spec_error(&node.name, "covariance must be symmetric"));
                                    }
                                    let cache = MvnCache::factorized(m);
                                    if !cache.usable {
                                        return Err(spec_error(&node.name, "covariance is not positive definite"));
                                    }
                                    mvn[i] = Some(cache);
                                    (CovSource::Fixed, k)
                                }
                            };
                            let mut mean = c.vector(&p["mean"])?;
                            if mean.len() == 1 && k > 1 {
                                mean = vec![mean[0]; k];
                            }
                            if mean.len() != k {
                                return Err(arity(
                                    &node.name,
                                    format!("mean has length {} but covariance is {k}x{k}", mean.len()),
                                ));
                            }
                            (Dist::Mvn { mean, cov }, k)
                        }
                    };
                    (Body::Stochastic(dist), dim)
                }
            };
            dims[i] = dim;
            bodies[i] = Some(body);
        }

        let nodes: Vec<Node> = spec
            .nodes
            .iter()
            .zip(bodies)
            .zip(parents)
            .map(|((s, body), parents)| Node {
                name: s.name.clone(),
                kind: s.kind,
                body: body.expect("every node compiled"),
                parents,
            })
            .collect();

        let mut covariance_users = vec![Vec::new(); n];
        for (i, node) in nodes.iter().enumerate() {
            if let Body::Stochastic(Dist::Mvn { cov: CovSource::Node(c), .. }) = node.body {
                covariance_users[c].push(i);
            }
        }

        let mut graph = ModelGraph {
            values: dims.iter().map(|&d| vec![0.0; d]).collect(),
            saved: dims.iter().map(|&d| vec![0.0; d]).collect(),
            stale: vec![false; n],
            any_stale: false,
            mvn,
            logp: vec![0.0; n],
            logp_valid: vec![false; n],
            logp_saved: vec![(0.0, false); n],
            eval_counts: vec![0; n],
            nodes,
            index,
            topo,
            topo_rank,
            consumers,
            slots: Vec::new(),
            slot_names: Vec::new(),
            slot_dependents: Vec::new(),
            slot_deterministic: Vec::new(),
            covariance_users,
            initial: Vec::new(),
        };

        // Initial values in topological order.
        for k in 0..n {
            let i = graph.topo[k];
            let spec_node = &spec.nodes[i];
            match spec_node.kind {
                NodeKind::Deterministic => graph.compute(i),
                NodeKind::Data | NodeKind::Parameter => {
                    let value = match &spec_node.value {
                        Some(v) => v.to_vec(),
                        None if spec_node.kind == NodeKind::Data => {
                            return Err(spec_error(&spec_node.name, "data nodes need a value"));
                        }
                        None => graph.default_value(i),
                    };
                    if value.len() != dims[i] {
                        return Err(spec_error(
                            &spec_node.name,
                            format!("value has length {} but node has dimension {}", value.len(), dims[i]),
                        ));
                    }
                    if value.iter().any(|v| !v.is_finite()) {
                        return Err(spec_error(&spec_node.name, "values must be finite"));
                    }
                    graph.values[i] = value;
                }
            }
        }

        for (i, node) in graph.nodes.iter().enumerate() {
            if node.kind != NodeKind::Parameter {
                continue;
            }
            let d = dims[i];
            for e in 0..d {
                graph.slots.push((i, e));
                graph.slot_names.push(if d == 1 { node.name.clone() } else { format!("{}[{e}]", node.name) });
            }
        }
        graph.initial = graph.theta();
        graph.build_dependencies();
        Ok(graph)
    }

    fn operands(&self, i: usize) -> Vec<Operand> {
        let mut out = Vec::new();
        match &self.nodes[i].body {
            Body::Stochastic(d) => match d {
                Dist::Normal(a, b) | Dist::Gamma(a, b) | Dist::Beta(a, b) | Dist::Binomial(a, b) => {
                    out.extend([*a, *b])
                }
                Dist::Poisson(a) => out.push(*a),
                Dist::Mvn { mean, .. } => out.extend(mean.iter().copied()),
            },
            Body::Deterministic(op) => match op {
                Op::Affine { offset, terms } => {
                    out.push(*offset);
                    for (a, b) in terms {
                        out.extend([*a, *b]);
                    }
                }
                Op::Exp(v) | Op::Expit(v) => out.extend(v.iter().copied()),
                Op::ExpDistanceCov { sigma, range, .. } => out.extend([*sigma, *range]),
            },
        }
        out
    }

    fn build_dependencies(&mut self) {
        let n = self.nodes.len();
        let mut slot_of: HashMap<(usize, usize), usize> = HashMap::new();
        for (s, &key) in self.slots.iter().enumerate() {
            slot_of.insert(key, s);
        }
        let mut direct: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.slots.len()];
        for c in 0..n {
            for op in self.operands(c) {
                if let Operand::Elem(node, e) = op {
                    if let Some(&s) = slot_of.get(&(node, e)) {
                        direct[s].insert(c);
                    }
                }
            }
        }

        for consumers in direct {
            let mut stochastic = BTreeSet::new();
            let mut deterministic = BTreeSet::new();
            let mut frontier: Vec<usize> = consumers.into_iter().collect();
            while let Some(c) = frontier.pop() {
                match self.nodes[c].kind {
                    NodeKind::Deterministic => {
                        if deterministic.insert(c) {
                            frontier.extend(self.consumers[c].iter().copied());
                        }
                    }
                    _ => {
                        stochastic.insert(c);
                    }
                }
            }
            let mut deterministic: Vec<usize> = deterministic.into_iter().collect();
            deterministic.sort_by_key(|&i| self.topo_rank[i]);
            self.slot_dependents.push(stochastic.into_iter().collect());
            self.slot_deterministic.push(deterministic);
        }
    }

    fn default_value(&self, i: usize) -> Vec<f64> {
        let get = |o: &Operand| self.get(*o);
        match &self.nodes[i].body {
            Body::Stochastic(d) => match d {
                Dist::Normal(mean, _) => vec![get(mean)],
                Dist::Gamma(shape, rate) => vec![get(shape) / get(rate)],
                Dist::Beta(a, b) => vec![get(a) / (get(a) + get(b))],
                Dist::Binomial(size, prob) => vec![(get(size) * get(prob)).round()],
                Dist::Poisson(rate) => vec![get(rate).round()],
                Dist::Mvn { mean, .. } => mean.iter().map(get).collect(),
            },
            Body::Deterministic(_) => unreachable!("deterministic nodes are computed"),
        }
    }

    #[inline]
    fn get(&self, op: Operand) -> f64 {
        match op {
            Operand::Const(v) => v,
            Operand::Elem(node, e) => self.values[node][e],
        }
    }

    /// Recomputes deterministic node `i` from its (fresh) parents.
    fn compute(&mut self, i: usize) {
        let mut out = std::mem::take(&mut self.values[i]);
        match &self.nodes[i].body {
            Body::Deterministic(op) => match op {
                Op::Affine { offset, terms } => {
                    out[0] = terms.iter().fold(self.get(*offset), |acc, (c, x)| acc + self.get(*c) * self.get(*x));
                }
                Op::Exp(input) => {
                    for (o, x) in out.iter_mut().zip(input) {
                        *o = self.get(*x).exp();
                    }
                }
                Op::Expit(input) => {
                    for (o, x) in out.iter_mut().zip(input) {
                        *o = 1.0 / (1.0 + (-self.get(*x)).exp());
                    }
                }
                Op::ExpDistanceCov { sigma, range, distances } => {
                    let sigma = self.get(*sigma);
                    let variance = sigma * sigma;
                    let inv_range = 1.0 / self.get(*range);
                    for (o, d) in out.iter_mut().zip(distances) {
                        *o = variance * (-d * inv_range).exp();
                    }
                }
            },
            Body::Stochastic(_) => unreachable!("only deterministic nodes are computed"),
        }
        self.values[i] = out;
        self.stale[i] = false;
        for k in 0..self.covariance_users[i].len() {
            let user = self.covariance_users[i][k];
            if let Some(cache) = self.mvn[user].as_mut() {
                cache.valid = false;
            }
        }
    }

    /// Brings every stale deterministic node up to date.
    pub fn refresh(&mut self) {
        if !self.any_stale {
            return;
        }
        for k in 0..self.topo.len() {
            let i = self.topo[k];
            if self.stale[i] {
                self.compute(i);
            }
        }
        self.any_stale = false;
    }

    fn refresh_scope(&mut self, scope: &UpdateScope) {
        for &i in &scope.deterministic {
            if self.stale[i] {
                self.compute(i);
            }
        }
    }

    fn node_log_density(&mut self, i: usize) -> Result<f64, ModelError> {
        self.eval_counts[i] += 1;
        let Body::Stochastic(dist) = &self.nodes[i].body else {
            return Err(spec_error(&self.nodes[i].name, "log density of a deterministic node"));
        };
        let x = &self.values[i];
        let result = match dist {
            Dist::Normal(m, s) => density::normal(x[0], self.get(*m), self.get(*s)),
            Dist::Gamma(a, b) => density::gamma(x[0], self.get(*a), self.get(*b)),
            Dist::Beta(a, b) => density::beta(x[0], self.get(*a), self.get(*b)),
            Dist::Binomial(n, p) => density::binomial(x[0], self.get(*n), self.get(*p)),
            Dist::Poisson(r) => density::poisson(x[0], self.get(*r)),
            Dist::Mvn { mean, cov } => {
                let cache = self.mvn[i].as_mut().expect("mvn nodes carry a cache");
                if !cache.valid {
                    let CovSource::Node(c) = cov else { unreachable!("fixed covariances stay valid") };
                    let k = mean.len();
                    let m = DMatrix::from_row_slice(k, k, &self.values[*c]);
                    cache.refactor(m);
                }
                if !cache.usable {
                    Ok(f64::NEG_INFINITY)
                } else {
                    for (r, (v, m)) in cache.scratch.iter_mut().zip(x.iter().zip(mean)) {
                        *r = v - match *m {
                            Operand::Const(c) => c,
                            Operand::Elem(node, e) => self.values[node][e],
                        };
                    }
                    cache.factor.solve_lower_triangular_mut(&mut cache.scratch);
                    let quad = cache.scratch.norm_squared();
                    Ok(density::mvn_constant(mean.len()) - cache.half_log_det - 0.5 * quad)
                }
            }
        };
        match result {
            Ok(v) if v.is_nan() => Ok(f64::NEG_INFINITY),
            Ok(v) => Ok(v),
            Err(detail) => Err(ModelError::InvalidParameter { node: self.nodes[i].name.clone(), detail }),
        }
    }

    /// Sum of log densities of the given stochastic nodes at the current state.
    pub fn log_density(&mut self, nodes: &[NodeId]) -> Result<f64, ModelError> {
        self.refresh();
        let mut total = 0.0;
        for &NodeId(i) in nodes {
            if self.nodes[i].kind == NodeKind::Deterministic {
                return Err(spec_error(&self.nodes[i].name, "log density of a deterministic node"));
            }
            total += self.node_log_density(i)?;
        }
        Ok(total)
    }

    /// Log density of every stochastic node (the unnormalized posterior).
    pub fn total_log_density(&mut self) -> Result<f64, ModelError> {
        let nodes = self.stochastic_nodes();
        self.log_density(&nodes)
    }

    pub fn stochastic_nodes(&self) -> Vec<NodeId> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind != NodeKind::Deterministic)
            .map(NodeId)
            .collect()
    }

    /// Stochastic nodes whose densities change with `node`, looking through
    /// deterministic intermediates.
    pub fn dependents(&self, node: NodeId) -> BTreeSet<NodeId> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, &(owner, _))| owner == node.0)
            .flat_map(|(s, _)| self.slot_dependents[s].iter().map(|&i| NodeId(i)))
            .collect()
    }

    pub fn slot_dependents(&self, slot: usize) -> impl Iterator<Item = NodeId> + '_ {
        self.slot_dependents[slot].iter().map(|&i| NodeId(i))
    }

    pub fn scope(&self, slots: &[usize]) -> UpdateScope {
        let mut owners: Vec<usize> = slots.iter().map(|&s| self.slots[s].0).collect();
        owners.sort_unstable();
        owners.dedup();
        let mut dependents: Vec<usize> = slots.iter().flat_map(|&s| self.slot_dependents[s].iter().copied()).collect();
        dependents.sort_unstable();
        dependents.dedup();
        dependents.retain(|d| owners.binary_search(d).is_err());
        let mut deterministic: Vec<usize> =
            slots.iter().flat_map(|&s| self.slot_deterministic[s].iter().copied()).collect();
        deterministic.sort_unstable();
        deterministic.dedup();
        deterministic.sort_by_key(|&i| self.topo_rank[i]);
        let mut covariance_users: Vec<usize> =
            deterministic.iter().flat_map(|&c| self.covariance_users[c].iter().copied()).collect();
        covariance_users.sort_unstable();
        covariance_users.dedup();
        UpdateScope { slots: slots.to_vec(), owners, dependents, deterministic, covariance_users }
    }

    /// Log density of a scope's owners plus (unless the owners are already
    /// out of support) its dependents.
    /// Log density of a scope's owners and dependents, recomputed and cached.
    pub(crate) fn scope_log_density(&mut self, scope: &UpdateScope) -> Result<f64, ModelError> {
        self.refresh_scope(scope);
        let mut total = 0.0;
        for &i in &scope.owners {
            total += self.cache_log_density(i)?;
        }
        if total == f64::NEG_INFINITY {
            for &i in &scope.dependents {
                self.logp_valid[i] = false;
            }
            return Ok(total);
        }
        for &i in &scope.dependents {
            total += self.cache_log_density(i)?;
        }
        Ok(total)
    }

    /// Same sum, reusing cached node densities where still valid.
    pub(crate) fn cached_scope_log_density(&mut self, scope: &UpdateScope) -> Result<f64, ModelError> {
        let all_valid = scope.owners.iter().chain(&scope.dependents).all(|&i| self.logp_valid[i]);
        if !all_valid {
            return self.scope_log_density(scope);
        }
        Ok(scope.owners.iter().chain(&scope.dependents).map(|&i| self.logp[i]).sum())
    }

    fn cache_log_density(&mut self, i: usize) -> Result<f64, ModelError> {
        let v = self.node_log_density(i)?;
        self.logp[i] = v;
        self.logp_valid[i] = true;
        Ok(v)
    }

    /// Saves the state a scope's update may overwrite.
    pub(crate) fn snapshot(&mut self, scope: &UpdateScope) {
        for &i in scope.owners.iter().chain(&scope.deterministic) {
            let (values, saved) = (&self.values[i], &mut self.saved[i]);
            saved.copy_from_slice(values);
        }
        for &i in scope.owners.iter().chain(&scope.dependents) {
            self.logp_saved[i] = (self.logp[i], self.logp_valid[i]);
        }
        for &i in &scope.covariance_users {
            if let Some(cache) = self.mvn[i].as_mut() {
                cache.save();
            }
        }
    }

    pub(crate) fn rollback(&mut self, scope: &UpdateScope) {
        for &i in scope.owners.iter().chain(&scope.deterministic) {
            let (values, saved) = (&mut self.values[i], &self.saved[i]);
            values.copy_from_slice(saved);
            self.stale[i] = false;
        }
        for &i in scope.owners.iter().chain(&scope.dependents) {
            (self.logp[i], self.logp_valid[i]) = self.logp_saved[i];
        }
        for &i in &scope.covariance_users {
            if let Some(cache) = self.mvn[i].as_mut() {
                cache.restore();
            }
        }
    }

    #[inline]
    pub(crate) fn slot_value(&self, slot: usize) -> f64 {
        let (node, e) = self.slots[slot];
        self.values[node][e]
    }

    /// Writes one slot and marks the scope's deterministic nodes stale.
    #[inline]
    pub(crate) fn write_slot(&mut self, slot: usize, value: f64) {
        let (node, e) = self.slots[slot];
        self.values[node][e] = value;
    }

    pub(crate) fn mark_stale(&mut self, scope: &UpdateScope) {
        for &i in &scope.deterministic {
            self.stale[i] = true;
        }
    }

    /// Number of theta slots, `d`.
    pub fn dim(&self) -> usize {
        self.slots.len()
    }

    pub fn slot_names(&self) -> &[String] {
        &self.slot_names
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slot_names.iter().position(|n| n == name)
    }

    /// Owning node of a slot.
    pub fn slot_node(&self, slot: usize) -> NodeId {
        NodeId(self.slots[slot].0)
    }

    pub fn theta(&self) -> Vec<f64> {
        self.slots.iter().map(|&(node, e)| self.values[node][e]).collect()
    }

    pub(crate) fn theta_into(&self, out: &mut [f64]) {
        for (o, &(node, e)) in out.iter_mut().zip(&self.slots) {
            *o = self.values[node][e];
        }
    }

    pub fn set_theta(&mut self, values: &[f64]) -> Result<(), ModelError> {
        if values.len() != self.slots.len() {
            return Err(ModelError::LengthMismatch { expected: self.slots.len(), found: values.len() });
        }
        for (s, &v) in values.iter().enumerate() {
            self.write_slot(s, v);
            for k in 0..self.slot_deterministic[s].len() {
                let det = self.slot_deterministic[s][k];
                self.stale[det] = true;
            }
        }
        self.any_stale = true;
        self.logp_valid.iter_mut().for_each(|v| *v = false);
        Ok(())
    }

    pub fn initial_theta(&self) -> &[f64] {
        &self.initial
    }

    /// Restores the initial values from the model description.
    pub fn reset(&mut self) {
        let initial = std::mem::take(&mut self.initial);
        self.set_theta(&initial).expect("initial theta has length d");
        self.initial = initial;
        self.refresh();
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied().map(NodeId)
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id.0].name
    }

    pub fn node_kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.0].kind
    }

    pub fn parents(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes[id.0].parents.iter().map(|&i| NodeId(i))
    }

    pub fn topo_order(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.topo.iter().map(|&i| NodeId(i))
    }

    /// Current value of a node, with deterministic nodes brought up to date.
    pub fn node_value(&mut self, id: NodeId) -> &[f64] {
        self.refresh();
        &self.values[id.0]
    }

    /// Per-node count of log-density evaluations since the last reset.
    pub fn eval_counts(&self) -> &[u64] {
        &self.eval_counts
    }

    pub fn reset_eval_counts(&mut self) {
        self.eval_counts.iter_mut().for_each(|c| *c = 0);
    }
}
