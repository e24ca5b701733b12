//! Declarative model description, the on-disk JSON format.
//!
//! ```json
//! {"nodes": [
//!   {"name": "mu", "kind": "parameter", "family": "normal", "params": {"mean": 0, "sd": 10}},
//!   {"name": "y",  "kind": "data", "family": "normal", "params": {"mean": "mu", "sd": 1}, "value": 0.4}
//! ]}
//! ```
//!
//! A parameter value is a number, a reference string (`"node"` or
//! `"node[k]"` for one element of a vector node), or an array of either
//! (vectors; arrays of arrays for matrices).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub nodes: Vec<NodeSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Parameter,
    Data,
    Deterministic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    Gamma,
    Beta,
    Binomial,
    Poisson,
    Mvn,
}

impl Family {
    pub(crate) fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::Normal => &["mean", "sd"],
            Family::Gamma => &["shape", "rate"],
            Family::Beta => &["a", "b"],
            Family::Binomial => &["size", "prob"],
            Family::Poisson => &["rate"],
            Family::Mvn => &["mean", "cov"],
        }
    }

    pub(crate) fn is_discrete(self) -> bool {
        matches!(self, Family::Binomial | Family::Poisson)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    /// `offset + sum_k coefficients[k] * inputs[k]`; coefficients and offset
    /// may themselves reference scalar nodes.
    Affine,
    Exp,
    Expit,
    /// `sigma^2 * exp(-distance / range)` over a fixed distance matrix.
    ExpDistanceCov,
}

impl OpKind {
    pub(crate) fn param_names(self) -> &'static [&'static str] {
        match self {
            OpKind::Affine => &["inputs", "coefficients", "offset"],
            OpKind::Exp | OpKind::Expit => &["input"],
            OpKind::ExpDistanceCov => &["sigma", "range", "distances"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Ref(String),
    Array(Vec<ParamValue>),
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Ref(v.to_string())
    }
}

impl From<String> for ParamValue {
    fn from(v: String) -> Self {
        ParamValue::Ref(v)
    }
}

impl From<Vec<f64>> for ParamValue {
    fn from(v: Vec<f64>) -> Self {
        ParamValue::Array(v.into_iter().map(ParamValue::Number).collect())
    }
}

impl From<Vec<Vec<f64>>> for ParamValue {
    fn from(rows: Vec<Vec<f64>>) -> Self {
        ParamValue::Array(rows.into_iter().map(ParamValue::from).collect())
    }
}

impl ParamValue {
    pub fn refs(items: &[&str]) -> Self {
        ParamValue::Array(items.iter().map(|s| ParamValue::from(*s)).collect())
    }

    /// Every node reference reachable inside this value.
    pub(crate) fn references(&self, out: &mut Vec<String>) {
        match self {
            ParamValue::Number(_) => {}
            ParamValue::Ref(r) => out.push(r.clone()),
            ParamValue::Array(items) => items.iter().for_each(|i| i.references(out)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ValueSpec {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            ValueSpec::Scalar(v) => vec![*v],
            ValueSpec::Vector(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<OpKind>,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<ValueSpec>,
}

impl NodeSpec {
    fn stochastic(
        kind: NodeKind,
        name: &str,
        family: Family,
        params: impl IntoIterator<Item = (&'static str, ParamValue)>,
    ) -> Self {
        NodeSpec {
            name: name.to_string(),
            kind,
            family: Some(family),
            op: None,
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            value: None,
        }
    }

    pub fn parameter(
        name: &str,
        family: Family,
        params: impl IntoIterator<Item = (&'static str, ParamValue)>,
    ) -> Self {
        Self::stochastic(NodeKind::Parameter, name, family, params)
    }

    pub fn data(
        name: &str,
        family: Family,
        params: impl IntoIterator<Item = (&'static str, ParamValue)>,
        value: ValueSpec,
    ) -> Self {
        let mut node = Self::stochastic(NodeKind::Data, name, family, params);
        node.value = Some(value);
        node
    }

    pub fn deterministic(
        name: &str,
        op: OpKind,
        params: impl IntoIterator<Item = (&'static str, ParamValue)>,
    ) -> Self {
        NodeSpec {
            name: name.to_string(),
            kind: NodeKind::Deterministic,
            family: None,
            op: Some(op),
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            value: None,
        }
    }

    pub fn with_value(mut self, value: ValueSpec) -> Self {
        self.value = Some(value);
        self
    }
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }
}

/// Splits `"name[k]"` into `("name", Some(k))`.
pub(crate) fn parse_reference(text: &str) -> Option<(&str, Option<usize>)> {
    match text.find('[') {
        None => Some((text, None)),
        Some(open) => {
            let rest = text[open + 1..].strip_suffix(']')?;
            let index = rest.parse().ok()?;
            Some((&text[..open], Some(index)))
        }
    }
}
