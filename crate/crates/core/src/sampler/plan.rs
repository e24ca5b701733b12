use serde::{Deserialize, Serialize};

use crate::error::PlanError;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerSpec {
    Scalar(usize),
    Block(Vec<usize>),
}

impl SamplerSpec {
    pub fn slots(&self) -> &[usize] {
        match self {
            SamplerSpec::Scalar(s) => std::slice::from_ref(s),
            SamplerSpec::Block(b) => b,
        }
    }
}

/// A partition of the theta slots into scalar and block samplers.
///
/// Plans are canonical: block members are sorted and samplers are ordered by
/// their least member, so two plans describing the same partition compare
/// equal and execute identically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SamplerPlan {
    dim: usize,
    samplers: Vec<SamplerSpec>,
}

impl SamplerPlan {
    pub fn new(dim: usize, samplers: Vec<SamplerSpec>) -> Result<Self, PlanError> {
        let mut seen = vec![false; dim];
        let mut canonical = Vec::with_capacity(samplers.len());
        for sampler in samplers {
            let sampler = match sampler {
                SamplerSpec::Block(mut b) => {
                    if b.len() < 2 {
                        return Err(PlanError::BlockTooSmall);
                    }
                    b.sort_unstable();
                    SamplerSpec::Block(b)
                }
                scalar => scalar,
            };
            for &slot in sampler.slots() {
                if slot >= dim {
                    return Err(PlanError::OutOfRange { slot, dim });
                }
                if std::mem::replace(&mut seen[slot], true) {
                    return Err(PlanError::Overlap(slot));
                }
            }
            canonical.push(sampler);
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(PlanError::Uncovered(missing));
        }
        canonical.sort_by_key(|s| s.slots()[0]);
        Ok(SamplerPlan { dim, samplers: canonical })
    }

    /// Singleton groups become scalar samplers, larger groups blocks.
    pub fn from_groups(dim: usize, groups: &[Vec<usize>]) -> Result<Self, PlanError> {
        let samplers = groups
            .iter()
            .map(|g| match g.as_slice() {
                [single] => SamplerSpec::Scalar(*single),
                _ => SamplerSpec::Block(g.clone()),
            })
            .collect();
        Self::new(dim, samplers)
    }

    pub fn from_named_groups<S: AsRef<str>>(names: &[String], groups: &[Vec<S>]) -> Result<Self, PlanError> {
        let groups = groups
            .iter()
            .map(|g| {
                g.iter()
                    .map(|n| {
                        let n = n.as_ref();
                        names.iter().position(|m| m == n).ok_or_else(|| PlanError::UnknownSlot(n.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_groups(names.len(), &groups)
    }

    pub fn all_scalar(dim: usize) -> Self {
        SamplerPlan { dim, samplers: (0..dim).map(SamplerSpec::Scalar).collect() }
    }

    /// One block over every slot (a scalar sampler when `dim == 1`).
    pub fn all_blocked(dim: usize) -> Self {
        Self::from_groups(dim, &[(0..dim).collect()]).expect("a single group is a partition")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samplers(&self) -> &[SamplerSpec] {
        &self.samplers
    }

    pub fn groups(&self) -> Vec<Vec<usize>> {
        self.samplers.iter().map(|s| s.slots().to_vec()).collect()
    }

    pub fn named_groups(&self, names: &[String]) -> Vec<Vec<String>> {
        self.samplers.iter().map(|s| s.slots().iter().map(|&i| names[i].clone()).collect()).collect()
    }

    pub fn is_all_scalar(&self) -> bool {
        self.samplers.iter().all(|s| matches!(s, SamplerSpec::Scalar(_)))
    }

    /// Sizes of the block samplers, largest first.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self
            .samplers
            .iter()
            .filter_map(|s| match s {
                SamplerSpec::Block(b) => Some(b.len()),
                SamplerSpec::Scalar(_) => None,
            })
            .collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}
