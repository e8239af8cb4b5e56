//! Spanning trees of the augmented graph Γ_ρ and their rooted-forest view.
//!
//! A spanning tree `T` of Γ_ρ splits into the forest `F(T) = T ∩ E` and the
//! root set `R(T) = {i : (i∼ρ) ∈ T}`. The tree law given `t` weights `T` by
//! `∏_{e∈T} β_e e^{t_i+t_j}` with `t_ρ = 0`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{AugmentedGraph, Graph};
use crate::linalg::{check_dim, conductance_laplacian, LdlFactor, MAX_EXPONENT};

/// Largest `|V_ρ|` accepted by exhaustive enumeration.
pub const MAX_ENUMERATION_VERTICES: usize = 12;
/// Largest number of spanning trees accepted by exhaustive enumeration.
pub const MAX_ENUMERATED_TREES: f64 = 2.0e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TreeEdge {
    /// Base edge with its index in [`Graph::edges`] and endpoints `u < v`.
    Base { index: usize, u: usize, v: usize },
    /// The edge `i∼ρ`.
    Root(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpanningTree {
    n: usize,
    /// Sorted: base edges by index, then root edges by vertex.
    edges: Vec<TreeEdge>,
}

impl SpanningTree {
    /// Validates that `edges` span Γ_ρ without cycles.
    pub fn new(ag: &AugmentedGraph, mut edges: Vec<TreeEdge>) -> Result<Self> {
        let n = ag.vertex_count();
        if edges.len() != n {
            return Err(Error::InvalidConfig(format!(
                "a spanning tree of Γ_ρ has {n} edges, got {}",
                edges.len()
            )));
        }
        let mut uf = UnionFind::new(n + 1);
        for e in &edges {
            let (a, b) = match *e {
                TreeEdge::Base { index, u, v } => {
                    let edge = ag.base().edges().get(index).ok_or_else(|| {
                        Error::InvalidConfig(format!("no base edge with index {index}"))
                    })?;
                    if (edge.u, edge.v) != (u, v) {
                        return Err(Error::InvalidConfig(format!(
                            "edge {index} does not join {} and {}",
                            u + 1,
                            v + 1
                        )));
                    }
                    (u, v)
                }
                TreeEdge::Root(i) => {
                    if i >= n || ag.eps(i) <= 0.0 {
                        return Err(Error::InvalidConfig(format!(
                            "vertex {} has no ρ-edge",
                            i + 1
                        )));
                    }
                    (i, n)
                }
            };
            if !uf.union(a, b) {
                return Err(Error::InvalidConfig("edge set contains a cycle".into()));
            }
        }
        edges.sort_unstable();
        Ok(SpanningTree { n, edges })
    }

    /// Rebuilds `T` from its forest and root set.
    pub fn from_forest(ag: &AugmentedGraph, forest: &[usize], roots: &[usize]) -> Result<Self> {
        let edges = ag.base().edges();
        let mut tree = Vec::with_capacity(forest.len() + roots.len());
        for &index in forest {
            let e = edges
                .get(index)
                .ok_or_else(|| Error::InvalidConfig(format!("no base edge {index}")))?;
            tree.push(TreeEdge::Base { index, u: e.u, v: e.v });
        }
        tree.extend(roots.iter().map(|&r| TreeEdge::Root(r)));
        SpanningTree::new(ag, tree)
    }

    fn from_sorted_unchecked(n: usize, mut edges: Vec<TreeEdge>) -> Self {
        edges.sort_unstable();
        SpanningTree { n, edges }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    /// Indices of the base edges in `F(T)`.
    pub fn forest(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(|e| match e {
            TreeEdge::Base { index, .. } => Some(*index),
            TreeEdge::Root(_) => None,
        })
    }

    /// `R(T)` in increasing order.
    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(|e| match e {
            TreeEdge::Root(i) => Some(*i),
            TreeEdge::Base { .. } => None,
        })
    }

    pub fn root_count(&self) -> usize {
        self.roots().count()
    }

    pub fn has_root(&self, x: usize) -> bool {
        self.edges.binary_search(&TreeEdge::Root(x)).is_ok()
    }

    /// Connected components of `F(T)`; ρ is not a vertex of the forest.
    pub fn components(&self) -> ForestComponents {
        let mut uf = UnionFind::new(self.n);
        for e in &self.edges {
            if let TreeEdge::Base { u, v, .. } = *e {
                uf.union(u, v);
            }
        }
        ForestComponents {
            label: (0..self.n).map(|i| uf.find(i)).collect(),
        }
    }

    /// Pairs `[i, j]` with labels `1..n` and ρ written as 0.
    pub fn labelled_pairs(&self) -> Vec<[usize; 2]> {
        self.edges
            .iter()
            .map(|e| match *e {
                TreeEdge::Base { u, v, .. } => [u + 1, v + 1],
                TreeEdge::Root(i) => [i + 1, 0],
            })
            .collect()
    }
}

/// Component labels of a forest.
#[derive(Debug, Clone)]
pub struct ForestComponents {
    label: Vec<usize>,
}

impl ForestComponents {
    pub fn connected(&self, x: usize, y: usize) -> bool {
        self.label[x] == self.label[y]
    }
}

/// `(F(T), R(T))` as base-edge indices and root vertices.
pub fn forest_and_roots(tree: &SpanningTree) -> (Vec<usize>, Vec<usize>) {
    (tree.forest().collect(), tree.roots().collect())
}

/// Whether `x` and `y` are joined by a path of `F(T)`, i.e. without using ρ.
pub fn connected_in_forest(tree: &SpanningTree, x: usize, y: usize) -> bool {
    x == y || tree.components().connected(x, y)
}

/// Forest and root parts of `log ∏_{e∈T} β_e e^{t_i+t_j}`.
pub fn log_tree_weight_parts(tree: &SpanningTree, ag: &AugmentedGraph, t: &[f64]) -> (f64, f64) {
    let edges = ag.base().edges();
    let mut forest = 0.0;
    let mut roots = 0.0;
    for e in tree.edges() {
        match *e {
            TreeEdge::Base { index, u, v } => forest += edges[index].beta.ln() + t[u] + t[v],
            TreeEdge::Root(i) => roots += ag.eps(i).ln() + t[i],
        }
    }
    (forest, roots)
}

pub fn log_tree_weight(tree: &SpanningTree, ag: &AugmentedGraph, t: &[f64]) -> f64 {
    let (f, r) = log_tree_weight_parts(tree, ag, t);
    f + r
}

/// Minimal union–find with path halving.
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Returns `false` if `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Edges of Γ_ρ as `(TreeEdge, a, b)` with ρ = `n`.
fn augmented_edges(ag: &AugmentedGraph) -> Vec<(TreeEdge, usize, usize)> {
    let n = ag.vertex_count();
    let mut out: Vec<_> = ag
        .base()
        .edges()
        .iter()
        .enumerate()
        .map(|(index, e)| (TreeEdge::Base { index, u: e.u, v: e.v }, e.u, e.v))
        .collect();
    out.extend(ag.rooted_vertices().map(|i| (TreeEdge::Root(i), i, n)));
    out
}

/// Number of (unweighted) spanning trees of Γ_ρ.
pub fn spanning_tree_count(ag: &AugmentedGraph) -> Result<f64> {
    let g = ag.base();
    let unit: Vec<_> = g.edges().iter().map(|e| (e.u, e.v, 1.0)).collect();
    let unit = Graph::new(g.vertex_count(), &unit)?;
    let mut lap = conductance_laplacian(&unit, &vec![0.0; g.vertex_count()])?;
    let grounded: Vec<f64> = (0..g.vertex_count())
        .map(|i| if ag.eps(i) > 0.0 { 1.0 } else { 0.0 })
        .collect();
    lap = lap.with_excess(grounded)?;
    Ok(LdlFactor::new(&lap)?.log_det().exp().round())
}

fn check_guard(ag: &AugmentedGraph) -> Result<()> {
    let v = ag.vertex_count() + 1;
    if v > MAX_ENUMERATION_VERTICES {
        return Err(Error::EnumerationGuard(format!(
            "|V_ρ| = {v} exceeds {MAX_ENUMERATION_VERTICES}"
        )));
    }
    let count = spanning_tree_count(ag)?;
    if count > MAX_ENUMERATED_TREES {
        return Err(Error::EnumerationGuard(format!(
            "{count} spanning trees exceed {MAX_ENUMERATED_TREES}"
        )));
    }
    Ok(())
}

/// Every spanning tree of Γ_ρ exactly once.
///
/// Backtracking over the edge list: each edge is either contracted into the
/// partial tree (if it closes no cycle) or deleted (if the remaining edges
/// can still span).
pub fn enumerate_spanning_trees(ag: &AugmentedGraph) -> Result<Vec<SpanningTree>> {
    check_guard(ag)?;
    let n = ag.vertex_count();
    let edges = augmented_edges(ag);
    let mut out = Vec::new();
    let mut chosen = Vec::with_capacity(n);
    let uf = UnionFind::new(n + 1);
    enumerate_from(&edges, 0, n, &uf, &mut chosen, &mut out);
    Ok(out)
}

fn enumerate_from(
    edges: &[(TreeEdge, usize, usize)],
    k: usize,
    n: usize,
    uf: &UnionFind,
    chosen: &mut Vec<TreeEdge>,
    out: &mut Vec<SpanningTree>,
) {
    if chosen.len() == n {
        out.push(SpanningTree::from_sorted_unchecked(n, chosen.clone()));
        return;
    }
    if k == edges.len() || edges.len() - k < n - chosen.len() {
        return;
    }
    let (edge, a, b) = edges[k];
    // contract
    let mut with = uf.clone();
    if with.union(a, b) {
        chosen.push(edge);
        enumerate_from(edges, k + 1, n, &with, chosen, out);
        chosen.pop();
    }
    // delete, if the rest still spans
    let mut probe = uf.clone();
    let mut joined = (0..=n).filter(|&i| probe.find(i) == i).count();
    for &(_, a, b) in &edges[k + 1..] {
        if probe.union(a, b) {
            joined -= 1;
        }
    }
    if joined == 1 {
        enumerate_from(edges, k + 1, n, uf, chosen, out);
    }
}

/// The conditional law `P_{β,t}` of `T` given `t`, by exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct TreeLaw {
    trees: Vec<SpanningTree>,
    log_weights: Vec<f64>,
    log_normalizer: f64,
}

impl TreeLaw {
    pub fn trees(&self) -> &[SpanningTree] {
        &self.trees
    }

    /// `log Σ_{S∈𝒯} ∏_{e∈S} β_e(t)`.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    pub fn probability(&self, k: usize) -> f64 {
        (self.log_weights[k] - self.log_normalizer).exp()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.trees.len()).map(|k| self.probability(k)).collect()
    }

    /// `P_{β,t}(T ∈ A)` for the event `A` given as a predicate.
    pub fn probability_of(&self, mut event: impl FnMut(&SpanningTree) -> bool) -> f64 {
        let lw: Vec<f64> = self
            .trees
            .iter()
            .zip(&self.log_weights)
            .filter(|(tree, _)| event(tree))
            .map(|(_, &w)| w)
            .collect();
        if lw.is_empty() {
            return 0.0;
        }
        (log_sum_exp(&lw) - self.log_normalizer).exp()
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn tree_law(ag: &AugmentedGraph, t: &[f64]) -> Result<TreeLaw> {
    check_dim(ag.vertex_count(), t.len())?;
    let trees = enumerate_spanning_trees(ag)?;
    let log_weights: Vec<f64> = trees.iter().map(|tr| log_tree_weight(tr, ag, t)).collect();
    let log_normalizer = log_sum_exp(&log_weights);
    Ok(TreeLaw {
        trees,
        log_weights,
        log_normalizer,
    })
}

/// Per-vertex transition tables of the conductance random walk on Γ_ρ.
struct WalkTables {
    /// `(target, edge, cumulative probability)`; target `n` is ρ.
    steps: Vec<Vec<(usize, TreeEdge, f64)>>,
}

impl WalkTables {
    fn new(ag: &AugmentedGraph, t: &[f64]) -> Result<Self> {
        let g = ag.base();
        let n = g.vertex_count();
        let mut steps = Vec::with_capacity(n);
        for i in 0..n {
            let mut logc = Vec::new();
            let mut targets = Vec::new();
            for &(j, index) in g.neighbors(i) {
                let e = &g.edges()[index];
                let x = t[i] + t[j];
                if !x.is_finite() || x.abs() > MAX_EXPONENT {
                    return Err(Error::Overflow(x));
                }
                logc.push(e.beta.ln() + x);
                targets.push((j, TreeEdge::Base { index, u: e.u, v: e.v }));
            }
            let eps = ag.eps(i);
            if eps > 0.0 {
                if !t[i].is_finite() || t[i].abs() > MAX_EXPONENT {
                    return Err(Error::Overflow(t[i]));
                }
                logc.push(eps.ln() + t[i]);
                targets.push((n, TreeEdge::Root(i)));
            }
            let m = logc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logc.iter().map(|l| (l - m).exp()).collect();
            let total: f64 = w.iter().sum();
            let mut acc = 0.0;
            let row = targets
                .into_iter()
                .zip(w)
                .map(|((j, e), w)| {
                    acc += w / total;
                    (j, e, acc)
                })
                .collect();
            steps.push(row);
        }
        Ok(WalkTables { steps })
    }

    #[inline]
    fn step<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> (usize, TreeEdge) {
        let row = &self.steps[i];
        let u: f64 = rng.random();
        for &(j, e, c) in row {
            if u < c {
                return (j, e);
            }
        }
        let &(j, e, _) = row.last().expect("every vertex has a neighbour in Γ_ρ");
        (j, e)
    }
}

/// One exact draw from `P_{β,t}` by Wilson's algorithm rooted at ρ.
pub fn sample_tree_wilson<R: Rng + ?Sized>(
    ag: &AugmentedGraph,
    t: &[f64],
    rng: &mut R,
) -> Result<SpanningTree> {
    check_dim(ag.vertex_count(), t.len())?;
    let n = ag.vertex_count();
    let tables = WalkTables::new(ag, t)?;
    let mut in_tree = vec![false; n + 1];
    in_tree[n] = true;
    let mut next: Vec<(usize, Option<TreeEdge>)> = vec![(usize::MAX, None); n];
    let mut edges = Vec::with_capacity(n);
    for start in 0..n {
        let mut u = start;
        while !in_tree[u] {
            let (j, e) = tables.step(u, rng);
            next[u] = (j, Some(e));
            u = j;
        }
        let mut u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            let (j, e) = next[u];
            edges.push(e.expect("walk recorded a successor"));
            u = j;
        }
    }
    Ok(SpanningTree::from_sorted_unchecked(n, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{augment, Pinning};
    use crate::linalg::logdet_pinned;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn k2(pi: [f64; 2], eps: f64) -> AugmentedGraph {
        augment(&Graph::path(2, 1.0).unwrap(), &Pinning::new(pi.to_vec(), eps).unwrap()).unwrap()
    }

    const XY: TreeEdge = TreeEdge::Base { index: 0, u: 0, v: 1 };

    #[test]
    fn enumeration_small_cases() {
        let one = augment(&Graph::new(1, &[]).unwrap(), &Pinning::uniform(1, 1.0, 1.0).unwrap()).unwrap();
        let trees = enumerate_spanning_trees(&one).unwrap();
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].edges(), &[TreeEdge::Root(0)]);

        let trees = enumerate_spanning_trees(&k2([1.0, 1.0], 1.0)).unwrap();
        let mut sets: Vec<Vec<TreeEdge>> = trees.iter().map(|t| t.edges().to_vec()).collect();
        sets.sort();
        assert_eq!(
            sets,
            vec![
                vec![XY, TreeEdge::Root(0)],
                vec![XY, TreeEdge::Root(1)],
                vec![TreeEdge::Root(0), TreeEdge::Root(1)],
            ]
        );

        let trees = enumerate_spanning_trees(&k2([1.0, 0.0], 1.0)).unwrap();
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].edges(), &[XY, TreeEdge::Root(0)]);
    }

    #[test]
    fn enumeration_count_matches_matrix_tree_count() {
        let g = Graph::complete(5, 1.0).unwrap();
        let ag = augment(&g, &Pinning::new(vec![1.0, 0.0, 2.0, 0.0, 1.0], 0.3).unwrap()).unwrap();
        let trees = enumerate_spanning_trees(&ag).unwrap();
        assert_eq!(trees.len() as f64, spanning_tree_count(&ag).unwrap());
        let unique: std::collections::HashSet<_> = trees.iter().collect();
        assert_eq!(unique.len(), trees.len());
    }

    #[test]
    fn enumeration_guard() {
        let g = Graph::path(12, 1.0).unwrap();
        let ag = augment(&g, &Pinning::uniform(12, 1.0, 1.0).unwrap()).unwrap();
        assert!(matches!(enumerate_spanning_trees(&ag), Err(Error::EnumerationGuard(_))));
    }

    #[test]
    fn forest_root_split() {
        let ag = k2([1.0, 1.0], 1.0);
        let t = SpanningTree::new(&ag, vec![XY, TreeEdge::Root(0)]).unwrap();
        assert_eq!(forest_and_roots(&t), (vec![0], vec![0]));
        let t = SpanningTree::new(&ag, vec![TreeEdge::Root(0), TreeEdge::Root(1)]).unwrap();
        assert_eq!(forest_and_roots(&t), (vec![], vec![0, 1]));
        assert!(SpanningTree::new(&ag, vec![TreeEdge::Root(0), TreeEdge::Root(0)]).is_err());
    }

    #[test]
    fn forest_connectivity() {
        let ag = k2([1.0, 1.0], 1.0);
        let t = SpanningTree::new(&ag, vec![XY, TreeEdge::Root(0)]).unwrap();
        assert!(connected_in_forest(&t, 0, 1));
        let t = SpanningTree::new(&ag, vec![TreeEdge::Root(0), TreeEdge::Root(1)]).unwrap();
        assert!(!connected_in_forest(&t, 0, 1));
        assert!(connected_in_forest(&t, 1, 1));
    }

    #[test]
    fn tree_weight_examples() {
        let ag = k2([1.0, 1.0], 1.0);
        for tree in enumerate_spanning_trees(&ag).unwrap() {
            assert_eq!(log_tree_weight(&tree, &ag, &[0.0, 0.0]), 0.0);
        }
        let g = Graph::new(2, &[(0, 1, 2.0)]).unwrap();
        let ag = augment(&g, &Pinning::new(vec![1.0, 0.0], 0.5).unwrap()).unwrap();
        let tree = SpanningTree::new(&ag, vec![XY, TreeEdge::Root(0)]).unwrap();
        assert_relative_eq!(log_tree_weight(&tree, &ag, &[1.0, -1.0]), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tree_law_k2() {
        let ag = k2([1.0, 1.0], 1.0);
        let law = tree_law(&ag, &[0.0, 0.0]).unwrap();
        for p in law.probabilities() {
            assert_relative_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }
        let p = law.probability_of(|t| t.has_root(0) && connected_in_forest(t, 0, 1));
        assert_relative_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(law.log_normalizer(), logdet_pinned(&ag, &[0.0, 0.0]).unwrap(), epsilon = 1e-14);
    }

    #[test]
    fn wilson_single_pin_forces_root() {
        let g = Graph::cycle(4, 1.0).unwrap();
        let ag = augment(&g, &Pinning::delta(4, 2, 1.0, 0.5).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let tree = sample_tree_wilson(&ag, &[0.3, -0.2, 1.0, 0.0], &mut rng).unwrap();
            assert_eq!(tree.roots().collect::<Vec<_>>(), vec![2]);
            assert!(SpanningTree::new(&ag, tree.edges().to_vec()).is_ok());
        }
    }

    #[test]
    fn wilson_k2_frequencies() {
        let ag = k2([1.0, 1.0], 1.0);
        let trees = enumerate_spanning_trees(&ag).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = vec![0usize; trees.len()];
        let draws = 30_000;
        for _ in 0..draws {
            let tree = sample_tree_wilson(&ag, &[0.0, 0.0], &mut rng).unwrap();
            counts[trees.iter().position(|t| *t == tree).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 1.0 / 3.0).abs() < 0.01);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn law_sums_to_one_and_roots_roundtrip(
                t in proptest::collection::vec(-3.0f64..3.0, 4),
                eps in 0.01f64..2.0,
            ) {
                let g = Graph::new(4, &[(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (0, 3, 1.0), (0, 2, 0.7)]).unwrap();
                let ag = augment(&g, &Pinning::new(vec![1.0, 0.0, 0.5, 2.0], eps).unwrap()).unwrap();
                let law = tree_law(&ag, &t).unwrap();
                let total: f64 = law.probabilities().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                for tree in law.trees() {
                    let (f, r) = forest_and_roots(tree);
                    prop_assert_eq!(f.len() + r.len(), 4);
                    prop_assert!(!r.is_empty());
                    prop_assert_eq!(&SpanningTree::from_forest(&ag, &f, &r).unwrap(), tree);
                    for x in 0..4 {
                        for y in 0..4 {
                            if x != y {
                                let both = tree.has_root(x) && tree.has_root(y) && connected_in_forest(tree, x, y);
                                prop_assert!(!both);
                            }
                        }
                    }
                }
            }
        }
    }
}
