//! Correlation-distance hierarchical clustering of parameters.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::ClusterError;
use crate::sampler::{ChainMatrix, SamplerPlan};

pub const MIN_RETAINED: usize = 10;

/// Pearson correlations of the rows kept after discarding the leading
/// `discard` fraction. Zero-variance columns correlate 0 with everything
/// else and 1 with themselves.
pub fn correlation_matrix(chain: &ChainMatrix, discard: f64) -> Result<DMatrix<f64>, ClusterError> {
    if !(0.0..1.0).contains(&discard) {
        return Err(ClusterError::BadDiscard(discard.to_string()));
    }
    let start = (chain.len() as f64 * discard).floor() as usize;
    let retained = chain.len() - start;
    if retained < MIN_RETAINED {
        return Err(ClusterError::TooFewSamples { retained });
    }
    let d = chain.dim();
    let centered: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let col = chain.column_from(j, start);
            let mean = col.iter().sum::<f64>() / retained as f64;
            col.into_iter().map(|v| v - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centered.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut rho = DMatrix::identity(d, d);
    for i in 0..d {
        for j in i + 1..d {
            let r = if norms[i] > 0.0 && norms[j] > 0.0 {
                let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            rho[(i, j)] = r;
            rho[(j, i)] = r;
        }
    }
    Ok(rho)
}

/// Symmetric dissimilarities in `[0, 1]` with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    values: DMatrix<f64>,
}

impl DistanceMatrix {
    /// `1 - |rho|` entrywise.
    pub fn from_correlation(rho: &DMatrix<f64>) -> Self {
        let d = rho.nrows();
        let values = DMatrix::from_fn(d, d, |i, j| if i == j { 0.0 } else { 1.0 - rho[(i, j)].abs() });
        DistanceMatrix { values }
    }

    /// Validates symmetry, range and the zero diagonal.
    pub fn new(values: DMatrix<f64>) -> Option<Self> {
        let d = values.nrows();
        if values.ncols() != d {
            return None;
        }
        for i in 0..d {
            if values[(i, i)] != 0.0 {
                return None;
            }
            for j in 0..d {
                let v = values[(i, j)];
                if !(0.0..=1.0).contains(&v) || v != values[(j, i)] {
                    return None;
                }
            }
        }
        Some(DistanceMatrix { values })
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// One agglomeration step. Leaves are clusters `0..d`; the cluster formed by
/// merge `m` has id `d + m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: usize,
    pub merges: Vec<Merge>,
    pub leaf_order: Vec<usize>,
}

/// Agglomerative complete-linkage clustering.
///
/// Among pairs at the minimum linkage the pair with the lexicographically
/// smallest (least member of one cluster, least member of the other) merges
/// first, so the result is fully deterministic.
pub fn complete_linkage(distances: &DistanceMatrix) -> Dendrogram {
    let d = distances.dim();
    // Active clusters: (id, least member, members). Linkage between active
    // clusters is kept in `link`, indexed by position in `active`.
    let mut active: Vec<(usize, usize, Vec<usize>)> = (0..d).map(|i| (i, i, vec![i])).collect();
    let mut link: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| distances.get(i, j)).collect()).collect();
    let mut merges = Vec::with_capacity(d.saturating_sub(1));

    while active.len() > 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                let key = ordered(active[a].1, active[b].1);
                let h = link[a][b];
                let better = match best {
                    None => true,
                    Some((bh, bkey, _, _)) => h < bh || (h == bh && key < bkey),
                };
                if better {
                    best = Some((h, key, a, b));
                }
            }
        }
        let (height, _, a, b) = best.expect("at least two active clusters");
        let (first, second) = if active[a].1 < active[b].1 { (a, b) } else { (b, a) };

        let mut members = active[first].2.clone();
        members.extend_from_slice(&active[second].2);
        merges.push(Merge { left: active[first].0, right: active[second].0, height, size: members.len() });

        let merged: Vec<f64> = link[a].iter().zip(&link[b]).map(|(x, y)| x.max(*y)).collect();
        for (k, v) in merged.into_iter().enumerate() {
            link[a][k] = v;
            link[k][a] = v;
        }
        link[a][a] = 0.0;
        let least = active[a].1.min(active[b].1);
        active[a] = (d + merges.len() - 1, least, members);
        active.remove(b);
        link.remove(b);
        for row in &mut link {
            row.remove(b);
        }
    }

    let leaf_order = match active.first() {
        Some((_, _, members)) => members.clone(),
        None => Vec::new(),
    };
    Dendrogram { leaves: d, merges, leaf_order }
}

fn ordered(x: usize, y: usize) -> (usize, usize) {
    if x < y {
        (x, y)
    } else {
        (y, x)
    }
}

/// Disjoint, covering groups of slot indices, canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    pub groups: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(mut groups: Vec<Vec<usize>>) -> Self {
        for g in &mut groups {
            g.sort_unstable();
        }
        groups.retain(|g| !g.is_empty());
        groups.sort_by_key(|g| g[0]);
        Partition { groups }
    }

    pub fn singletons(d: usize) -> Self {
        Partition { groups: (0..d).map(|i| vec![i]).collect() }
    }

    pub fn multi_member(&self) -> Vec<Vec<usize>> {
        self.groups.iter().filter(|g| g.len() > 1).cloned().collect()
    }

    /// True when every group of `self` lies inside a group of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        let n = self.groups.iter().map(Vec::len).sum::<usize>();
        let mut owner = vec![usize::MAX; n];
        for (gi, g) in coarser.groups.iter().enumerate() {
            for &i in g {
                if i < n {
                    owner[i] = gi;
                }
            }
        }
        self.groups.iter().all(|g| g.iter().all(|&i| owner[i] == owner[g[0]]))
    }

    pub fn named(&self, names: &[String]) -> Vec<Vec<String>> {
        self.groups.iter().map(|g| g.iter().map(|&i| names[i].clone()).collect()).collect()
    }
}

/// Groups whose merges all happen at heights `<= h`. A cut at zero always
/// gives singletons, even when some distances are exactly zero.
pub fn cut(tree: &Dendrogram, h: f64) -> Partition {
    let d = tree.leaves;
    if h <= 0.0 {
        return Partition::singletons(d);
    }
    // Union-find over cluster ids.
    let mut parent: Vec<usize> = (0..d + tree.merges.len()).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (m, merge) in tree.merges.iter().enumerate() {
        if merge.height <= h {
            let id = d + m;
            let l = root(&mut parent, merge.left);
            let r = root(&mut parent, merge.right);
            parent[l] = id;
            parent[r] = id;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for leaf in 0..d {
        groups.entry(root(&mut parent, leaf)).or_default().push(leaf);
    }
    Partition::new(groups.into_values().collect())
}

pub fn plan_from_partition(partition: &Partition) -> SamplerPlan {
    let d = partition.groups.iter().map(Vec::len).sum();
    SamplerPlan::from_groups(d, &partition.groups).expect("partition is disjoint and covering")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_point() -> DistanceMatrix {
        DistanceMatrix::new(DMatrix::from_row_slice(3, 3, &[0.0, 0.1, 0.9, 0.1, 0.0, 0.8, 0.9, 0.8, 0.0])).unwrap()
    }

    #[test]
    fn three_point_merges() {
        let tree = complete_linkage(&three_point());
        assert_eq!(tree.merges.len(), 2);
        assert_eq!((tree.merges[0].left, tree.merges[0].right, tree.merges[0].height), (0, 1, 0.1));
        assert_eq!((tree.merges[1].left, tree.merges[1].right, tree.merges[1].height), (3, 2, 0.9));
        assert_eq!(cut(&tree, 0.5).groups, vec![vec![0, 1], vec![2]]);
        assert_eq!(cut(&tree, 0.0), Partition::singletons(3));
        assert_eq!(cut(&tree, 1.0).groups, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn equal_distances_and_trivial_sizes() {
        let all_one = DistanceMatrix::from_correlation(&DMatrix::identity(4, 4));
        let tree = complete_linkage(&all_one);
        assert!(tree.merges.iter().all(|m| m.height == 1.0));
        // Ties resolved on least members: {0,1}, then {0,1}+{2}, then +{3}.
        assert_eq!((tree.merges[0].left, tree.merges[0].right), (0, 1));
        assert_eq!((tree.merges[1].left, tree.merges[1].right), (4, 2));
        assert!(complete_linkage(&DistanceMatrix::from_correlation(&DMatrix::identity(1, 1))).merges.is_empty());
    }

    #[test]
    fn zero_distance_still_singletons_at_zero() {
        let rho = DMatrix::from_element(3, 3, 1.0);
        let tree = complete_linkage(&DistanceMatrix::from_correlation(&rho));
        assert_eq!(cut(&tree, 0.0), Partition::singletons(3));
        assert_eq!(cut(&tree, 0.1).groups.len(), 1);
    }

    #[test]
    fn correlation_edge_cases() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| {
            let x = ((i * 7919) % 23) as f64;
            vec![x, x, -x, 3.0]
        }).collect();
        let names = ["a", "b", "c", "d"].map(String::from).to_vec();
        let chain = ChainMatrix::from_rows(names, &rows, 1.0);
        let rho = correlation_matrix(&chain, 0.5).unwrap();
        assert!((rho[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((rho[(0, 2)] + 1.0).abs() < 1e-12);
        assert_eq!(rho[(0, 3)], 0.0);
        assert_eq!(rho[(3, 3)], 1.0);
        assert!(correlation_matrix(&chain, 0.8).is_err());
        assert!(correlation_matrix(&chain, 1.0).is_err());
    }

    #[test]
    fn plans_from_partitions() {
        assert!(plan_from_partition(&Partition::singletons(3)).is_all_scalar());
        let p = plan_from_partition(&Partition::new(vec![vec![2], vec![1, 0]]));
        assert_eq!(p.block_sizes(), vec![2]);
        assert_eq!(p.groups(), vec![vec![0, 1], vec![2]]);
        assert_eq!(plan_from_partition(&Partition::new(vec![(0..5).collect()])).block_sizes(), vec![5]);
    }

    fn distance_strategy() -> impl Strategy<Value = DistanceMatrix> {
        (2usize..=7).prop_flat_map(|d| {
            proptest::collection::vec(0u8..=10, d * (d - 1) / 2).prop_map(move |cells| {
                let mut m = DMatrix::zeros(d, d);
                let mut k = 0;
                for i in 0..d {
                    for j in i + 1..d {
                        // Coarse values to provoke ties.
                        m[(i, j)] = cells[k] as f64 / 10.0;
                        m[(j, i)] = m[(i, j)];
                        k += 1;
                    }
                }
                DistanceMatrix::new(m).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn cuts_are_nested_and_tight(dist in distance_strategy(), h1 in 0.0..1.0f64, h2 in 0.0..1.0f64) {
            let tree = complete_linkage(&dist);
            prop_assert!(tree.merges.windows(2).all(|w| w[0].height <= w[1].height));
            let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
            let fine = cut(&tree, lo);
            prop_assert!(fine.refines(&cut(&tree, hi)));
            for g in &fine.groups {
                for &i in g {
                    for &j in g {
                        prop_assert!(dist.get(i, j) <= lo);
                    }
                }
            }
        }
    }
}
