//! Brute-force checks of the exact identities behind the main code paths.
//!
//! The oracle side of every identity is computed here from the graph alone:
//! its own matrix assembly, cofactor-expansion determinants and spanning-tree
//! enumeration over all edge subsets of Γ_ρ. Nothing on that side calls into
//! `linalg` or `forests`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{augment, build_ladder, AugmentedGraph, Graph, LadderSpec, Pinning};
use crate::linalg::{logdet_pinned, pinned_inverse_column, pinned_matrix, signed_minor_det, green_entry};
use crate::observables::green_conditional;
use crate::parallel::{derive_seed, map_indexed, Execution};

pub const RELATIVE_TOLERANCE: f64 = 1e-10;
pub const ABSOLUTE_TOLERANCE: f64 = 1e-12;
/// Largest matrix handed to the cofactor expansion.
pub const MAX_COFACTOR_DIM: usize = 8;
/// Largest number of edge subsets the brute-force enumeration will scan.
pub const MAX_SUBSETS: f64 = 5.0e6;
pub const RANDOM_T_PER_INSTANCE: usize = 20;

/// Edges of Γ_ρ as `(u, v, weight)`, with ρ written as `n`. Every vertex gets
/// a ρ-edge, of weight zero when it is unpinned, so that the minor identity
/// also covers an unpinned `x`.
fn weighted_edges(ag: &AugmentedGraph, t: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = ag.vertex_count();
    let mut edges: Vec<(usize, usize, f64)> = ag
        .base()
        .edges()
        .iter()
        .map(|e| (e.u, e.v, e.beta * (t[e.u] + t[e.v]).exp()))
        .collect();
    for i in 0..n {
        let eps = ag.pinning().pi()[i] * ag.pinning().epsilon();
        edges.push((i, n, eps * t[i].exp()));
    }
    edges
}

/// Dense `A(t) + ε̂(t)` assembled from the edge list.
fn assemble(ag: &AugmentedGraph, t: &[f64]) -> Vec<Vec<f64>> {
    let n = ag.vertex_count();
    let mut m = vec![vec![0.0; n]; n];
    for (u, v, w) in weighted_edges(ag, t) {
        m[u][u] += w;
        if v < n {
            m[v][v] += w;
            m[u][v] -= w;
            m[v][u] -= w;
        }
    }
    m
}

/// Determinant by Laplace expansion along the first row.
pub fn cofactor_determinant(m: &[Vec<f64>]) -> Result<f64> {
    if m.len() > MAX_COFACTOR_DIM {
        return Err(Error::EnumerationGuard(format!(
            "cofactor expansion limited to {MAX_COFACTOR_DIM} rows, got {}",
            m.len()
        )));
    }
    fn expand(m: &[Vec<f64>], cols: &mut Vec<usize>, row: usize) -> f64 {
        if cols.is_empty() {
            return 1.0;
        }
        let mut total = 0.0;
        for k in 0..cols.len() {
            let c = cols.remove(k);
            let a = m[row][c];
            if a != 0.0 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                total += sign * a * expand(m, cols, row + 1);
            }
            cols.insert(k, c);
        }
        total
    }
    let mut cols: Vec<usize> = (0..m.len()).collect();
    Ok(expand(m, &mut cols, 0))
}

/// A spanning tree of Γ_ρ from the brute-force scan: its edge indices into
/// [`weighted_edges`] and its weight.
struct BruteTree {
    edges: Vec<usize>,
    weight: f64,
}

fn find(parent: &mut [usize], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

/// `(u, v, weight)` on the vertices of Γ_ρ.
type WeightedEdge = (usize, usize, f64);

fn binomial(m: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

/// Every `n`-edge subset of Γ_ρ without a cycle.
fn brute_force_trees(ag: &AugmentedGraph, t: &[f64]) -> Result<(Vec<WeightedEdge>, Vec<BruteTree>)> {
    let n = ag.vertex_count();
    let edges = weighted_edges(ag, t);
    let subsets = binomial(edges.len(), n);
    if subsets > MAX_SUBSETS {
        return Err(Error::EnumerationGuard(format!(
            "{subsets:.0} edge subsets exceed the oracle limit of {MAX_SUBSETS:.0}"
        )));
    }
    let mut trees = Vec::new();
    let mut chosen = Vec::with_capacity(n);
    fn scan(
        edges: &[(usize, usize, f64)],
        n: usize,
        start: usize,
        chosen: &mut Vec<usize>,
        out: &mut Vec<BruteTree>,
    ) {
        if chosen.len() == n {
            let mut parent: Vec<usize> = (0..=n).collect();
            let mut weight = 1.0;
            for &e in chosen.iter() {
                let (u, v, w) = edges[e];
                let (a, b) = (find(&mut parent, u), find(&mut parent, v));
                if a == b {
                    return;
                }
                parent[a] = b;
                weight *= w;
            }
            out.push(BruteTree {
                edges: chosen.clone(),
                weight,
            });
            return;
        }
        for e in start..edges.len() {
            if edges.len() - e < n - chosen.len() {
                break;
            }
            chosen.push(e);
            scan(edges, n, e + 1, chosen, out);
            chosen.pop();
        }
    }
    scan(&edges, n, 0, &mut chosen, &mut trees);
    Ok((edges, trees))
}

/// For trees with `x ∼ ρ` and `x ↔ y` in the forest: the forest weight times
/// the weights of the roots other than `x`.
fn classify(edges: &[(usize, usize, f64)], tree: &BruteTree, n: usize, x: usize, y: usize) -> Option<f64> {
    let mut parent: Vec<usize> = (0..n).collect();
    let mut x_rooted = false;
    let mut forest_weight = 1.0;
    let mut other_roots = 1.0;
    for &e in &tree.edges {
        let (u, v, w) = edges[e];
        if v == n {
            if u == x {
                x_rooted = true;
            } else {
                other_roots *= w;
            }
        } else {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            parent[a] = b;
            forest_weight *= w;
        }
    }
    (x_rooted && find(&mut parent, x) == find(&mut parent, y)).then_some(forest_weight * other_roots)
}

fn check_pair(n: usize, x: usize, y: usize) -> Result<()> {
    for v in [x, y] {
        if v >= n {
            return Err(Error::VertexOutOfRange(v + 1, n));
        }
    }
    if x == y {
        return Err(Error::SameVertex(x + 1));
    }
    Ok(())
}

/// `(log det(A + ε̂), log Σ_T weight(T))`, the determinant from the main
/// factorization and the sum from brute-force enumeration.
pub fn oracle_matrix_tree(ag: &AugmentedGraph, t: &[f64]) -> Result<(f64, f64)> {
    let lhs = logdet_pinned(ag, t)?;
    let (_, trees) = brute_force_trees(ag, t)?;
    let total: f64 = trees.iter().map(|tr| tr.weight).sum();
    Ok((lhs, total.ln()))
}

/// `(log det(A + ε̂)` from the main factorization, `log det` by cofactor
/// expansion of an independently assembled matrix).
pub fn oracle_determinant(ag: &AugmentedGraph, t: &[f64]) -> Result<(f64, f64)> {
    Ok((logdet_pinned(ag, t)?, cofactor_determinant(&assemble(ag, t))?.ln()))
}

/// Signed minor of `A + ε̂` without row `y` and column `x`, against the sum
/// over trees with `x` a root joined to `y` of the forest weight times the
/// weights of the other roots.
pub fn oracle_minor_forest(ag: &AugmentedGraph, t: &[f64], x: usize, y: usize) -> Result<(f64, f64)> {
    let n = ag.vertex_count();
    check_pair(n, x, y)?;
    let lhs = signed_minor_det(&pinned_matrix(ag, t)?, x, y)?;
    let (edges, trees) = brute_force_trees(ag, t)?;
    let rhs = trees.iter().filter_map(|tr| classify(&edges, tr, n, x, y)).sum();
    Ok((lhs, rhs))
}

/// Both orientations of the tree formula for the Green's function and the
/// assembled `G_xy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenFormula {
    /// `ε_x e^{t_x} (A + ε̂)⁻¹_xy` and `P(x ∈ R, x ↔ y)`.
    pub xy: (f64, f64),
    /// `ε_y e^{t_y} (A + ε̂)⁻¹_xy` and `P(y ∈ R, x ↔ y)`.
    pub yx: (f64, f64),
    /// `G_xy` from the matrix and from the tree probabilities; absent when
    /// neither vertex is pinned.
    pub green: Option<(f64, f64)>,
}

pub fn oracle_green_formula(ag: &AugmentedGraph, t: &[f64], x: usize, y: usize) -> Result<GreenFormula> {
    let n = ag.vertex_count();
    check_pair(n, x, y)?;
    let inv_xy = pinned_inverse_column(ag, t, y)?[x];
    let (edges, trees) = brute_force_trees(ag, t)?;
    let total: f64 = trees.iter().map(|tr| tr.weight).sum();
    let prob = |a: usize, b: usize| -> f64 {
        trees
            .iter()
            .filter(|tr| classify(&edges, tr, n, a, b).is_some())
            .map(|tr| tr.weight)
            .sum::<f64>()
            / total
    };
    let eps = |v: usize| ag.pinning().pi()[v] * ag.pinning().epsilon();
    let (pxy, pyx) = (prob(x, y), prob(y, x));
    let green = if eps(x) + eps(y) > 0.0 {
        let scale = (t[x] + t[y]).exp() / (eps(x) * t[x].exp() + eps(y) * t[y].exp());
        Some((green_entry(ag, t, x, y)?, scale * (pxy + pyx)))
    } else {
        None
    };
    Ok(GreenFormula {
        xy: (eps(x) * t[x].exp() * inv_xy, pxy),
        yx: (eps(y) * t[y].exp() * inv_xy, pyx),
        green,
    })
}

/// Relative gap, measured against the larger magnitude.
pub fn relative_gap(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

pub fn within_tolerance(lhs: f64, rhs: f64) -> bool {
    let diff = (lhs - rhs).abs();
    diff <= ABSOLUTE_TOLERANCE || relative_gap(lhs, rhs) <= RELATIVE_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRecord {
    pub identity: String,
    pub instance: String,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_gap: f64,
    pub pass: bool,
}

impl OracleRecord {
    fn new(identity: &str, instance: String, (lhs, rhs): (f64, f64)) -> Self {
        OracleRecord {
            identity: identity.to_string(),
            instance,
            lhs,
            rhs,
            rel_gap: relative_gap(lhs, rhs),
            pass: within_tolerance(lhs, rhs),
        }
    }
}

pub mod identity {
    pub const MATRIX_TREE: &str = "matrix-tree";
    pub const DETERMINANT: &str = "cofactor-determinant";
    pub const MINOR_FOREST: &str = "minor-forest";
    pub const GREEN_XY: &str = "green-root-x";
    pub const GREEN_YX: &str = "green-root-y";
    pub const GREEN_ASSEMBLED: &str = "green-tree-formula";
    pub const GREEN_CONDITIONAL: &str = "green-conditional";
}

/// A graph, a pinning and one field configuration.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub name: String,
    pub ag: AugmentedGraph,
    pub t: Vec<f64>,
}

/// Runs every identity on one instance, over all ordered pairs.
pub fn check_instance(inst: &OracleInstance) -> Result<Vec<OracleRecord>> {
    let (ag, t) = (&inst.ag, &inst.t);
    let n = ag.vertex_count();
    let mut out = vec![
        OracleRecord::new(identity::MATRIX_TREE, inst.name.clone(), oracle_matrix_tree(ag, t)?),
        OracleRecord::new(identity::DETERMINANT, inst.name.clone(), oracle_determinant(ag, t)?),
    ];
    for x in 0..n {
        for y in (0..n).filter(|&y| y != x) {
            let label = format!("{} ({},{})", inst.name, x + 1, y + 1);
            out.push(OracleRecord::new(
                identity::MINOR_FOREST,
                label.clone(),
                oracle_minor_forest(ag, t, x, y)?,
            ));
            let gf = oracle_green_formula(ag, t, x, y)?;
            out.push(OracleRecord::new(identity::GREEN_XY, label.clone(), gf.xy));
            out.push(OracleRecord::new(identity::GREEN_YX, label.clone(), gf.yx));
            if let Some(g) = gf.green {
                out.push(OracleRecord::new(identity::GREEN_ASSEMBLED, label.clone(), g));
                out.push(OracleRecord::new(
                    identity::GREEN_CONDITIONAL,
                    label,
                    (green_conditional(ag, t, x, y)?, g.1),
                ));
            }
        }
    }
    Ok(out)
}

/// Named graphs of the bundled corpus.
pub fn corpus_graphs() -> Result<Vec<(String, Graph)>> {
    let ladder = build_ladder(&LadderSpec::path_base(2, 0, 2, 1.0)?)?.into_graph();
    Ok(vec![
        ("path2".to_string(), Graph::path(2, 1.0)?),
        ("path3".to_string(), Graph::path(3, 1.0)?),
        ("cycle4".to_string(), Graph::cycle(4, 1.0)?),
        ("complete4".to_string(), Graph::complete(4, 1.0)?),
        ("ladder2x3".to_string(), ladder),
    ])
}

/// Uniform, single-point and mixed pinnings of an `n`-vertex graph.
pub fn corpus_pinnings(n: usize) -> Result<Vec<(String, Pinning)>> {
    let mixed: Vec<f64> = (0..n).map(|i| [1.0, 0.0, 2.5, 0.4][i % 4]).collect();
    Ok(vec![
        ("uniform".to_string(), Pinning::uniform(n, 1.0, 0.5)?),
        ("single".to_string(), Pinning::delta(n, 0, 1.0, 0.7)?),
        ("mixed".to_string(), Pinning::new(mixed, 0.3)?),
    ])
}

fn random_t(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
}

/// The bundled corpus restricted to graphs with at most `max_vertices`
/// vertices, with `RANDOM_T_PER_INSTANCE` field configurations each.
pub fn bundled_corpus(max_vertices: usize, seed: u64) -> Result<Vec<OracleInstance>> {
    let mut out = Vec::new();
    let mut index = 0u64;
    for (gname, g) in corpus_graphs()? {
        let n = g.vertex_count();
        if n > max_vertices {
            continue;
        }
        for (pname, p) in corpus_pinnings(n)? {
            let ag = augment(&g, &p)?;
            for k in 0..RANDOM_T_PER_INSTANCE {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index));
                index += 1;
                out.push(OracleInstance {
                    name: format!("{gname}/{pname}/t{k:02}"),
                    ag: ag.clone(),
                    t: random_t(&mut rng, n),
                });
            }
        }
    }
    Ok(out)
}

/// `count` instances of one augmented graph with random fields in [-3, 3].
pub fn instances_for(name: &str, ag: &AugmentedGraph, count: usize, seed: u64) -> Vec<OracleInstance> {
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
            OracleInstance {
                name: format!("{name}/t{k:02}"),
                ag: ag.clone(),
                t: random_t(&mut rng, ag.vertex_count()),
            }
        })
        .collect()
}

/// `count` random connected graphs with 2 to `max_vertices` vertices,
/// random weights, pinnings and fields.
pub fn random_instances(count: usize, max_vertices: usize, seed: u64) -> Result<Vec<OracleInstance>> {
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
            let n = rng.random_range(2..=max_vertices.max(2));
            let mut edges: Vec<(usize, usize, f64)> = (1..n)
                .map(|i| (rng.random_range(0..i), i, rng.random_range(0.2..3.0)))
                .collect();
            for i in 0..n {
                for j in i + 1..n {
                    if !edges.iter().any(|&(a, b, _)| (a, b) == (i, j)) && rng.random_bool(0.35) {
                        edges.push((i, j, rng.random_range(0.2..3.0)));
                    }
                }
            }
            let g = Graph::new(n, &edges)?;
            let mut pi: Vec<f64> = (0..n)
                .map(|_| if rng.random_bool(0.6) { rng.random_range(0.1..2.0) } else { 0.0 })
                .collect();
            let anchor = rng.random_range(0..n);
            pi[anchor] = 1.0;
            let ag = augment(&g, &Pinning::new(pi, rng.random_range(0.01..2.0))?)?;
            Ok(OracleInstance {
                name: format!("random{k:02}/n{n}"),
                ag,
                t: random_t(&mut rng, n),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub records: Vec<OracleRecord>,
}

impl OracleReport {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &OracleRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    /// Largest relative gap among records of one identity.
    pub fn max_gap(&self, identity: &str) -> f64 {
        self.records
            .iter()
            .filter(|r| r.identity == identity)
            .map(|r| r.rel_gap)
            .fold(0.0, f64::max)
    }

    pub fn count(&self, identity: &str) -> usize {
        self.records.iter().filter(|r| r.identity == identity).count()
    }
}

pub fn run_suite(instances: &[OracleInstance], exec: Execution) -> Result<OracleReport> {
    let chunks = map_indexed(exec, instances, |_, inst| check_instance(inst));
    let mut records = Vec::new();
    for c in chunks {
        records.extend(c?);
    }
    Ok(OracleReport { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn k2(pi: Vec<f64>) -> AugmentedGraph {
        augment(&Graph::path(2, 1.0).unwrap(), &Pinning::new(pi, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn cofactor_examples() {
        assert_eq!(cofactor_determinant(&[]).unwrap(), 1.0);
        assert_eq!(cofactor_determinant(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap(), 3.0);
        let m = vec![vec![2.0, 0.0, 1.0], vec![1.0, 3.0, 2.0], vec![1.0, 1.0, 2.0]];
        assert_relative_eq!(cofactor_determinant(&m).unwrap(), 6.0, epsilon = 1e-15);
        assert!(cofactor_determinant(&vec![vec![0.0; 9]; 9]).is_err());
    }

    #[test]
    fn matrix_tree_examples() {
        let (l, r) = oracle_matrix_tree(&k2(vec![1.0, 1.0]), &[0.0, 0.0]).unwrap();
        assert_relative_eq!(l, 3f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(r, 3f64.ln(), epsilon = 1e-15);
        let one = augment(&Graph::new(1, &[]).unwrap(), &Pinning::uniform(1, 1.0, 0.5).unwrap()).unwrap();
        let (l, r) = oracle_matrix_tree(&one, &[0.0]).unwrap();
        assert_relative_eq!(l, 0.5f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(r, 0.5f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn minor_forest_examples() {
        let (l, r) = oracle_minor_forest(&k2(vec![1.0, 1.0]), &[0.0, 0.0], 0, 1).unwrap();
        assert_relative_eq!(l, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r, 1.0, epsilon = 1e-15);
        // an unpinned x still carries the cofactor: its ρ-edge enters the
        // forest sum without a weight
        let (l, r) = oracle_minor_forest(&k2(vec![1.0, 0.0]), &[0.0, 0.0], 1, 0).unwrap();
        assert_relative_eq!(l, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn green_formula_examples() {
        let gf = oracle_green_formula(&k2(vec![1.0, 1.0]), &[0.0, 0.0], 0, 1).unwrap();
        for (l, r) in [gf.xy, gf.yx, gf.green.unwrap()] {
            assert_relative_eq!(l, 1.0 / 3.0, epsilon = 1e-15);
            assert_relative_eq!(r, 1.0 / 3.0, epsilon = 1e-15);
        }
        let gf = oracle_green_formula(&k2(vec![1.0, 0.0]), &[0.0, 0.0], 0, 1).unwrap();
        assert_eq!(gf.yx, (0.0, 0.0));
    }

    #[test]
    fn tolerance_rule() {
        assert!(within_tolerance(1.0, 1.0 + 5e-11));
        assert!(!within_tolerance(1.0, 1.0 + 5e-10));
        assert!(within_tolerance(0.0, 5e-13));
        assert!(!within_tolerance(0.0, 5e-12));
    }

    #[test]
    fn corpus_respects_vertex_limit() {
        let all = bundled_corpus(7, 1).unwrap();
        assert_eq!(all.len(), 5 * 3 * RANDOM_T_PER_INSTANCE);
        let small = bundled_corpus(3, 1).unwrap();
        assert!(small.iter().all(|i| i.ag.vertex_count() <= 3));
        assert_eq!(small.len(), 2 * 3 * RANDOM_T_PER_INSTANCE);
    }
}
