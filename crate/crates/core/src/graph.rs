//! Finite weighted graphs, pinning profiles, the ρ-augmented graph and the
//! ladder family.
//!
//! Vertices are dense indices `0..n` in Rust code. Text formats and the CLI
//! use labels `1..n`; label `i` is index `i - 1`. Since `(-1)^{x+y}` only
//! depends on the parity of `x + y`, sign conventions are the same under
//! either numbering.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub beta: f64,
}

/// Connected, simple, positively weighted undirected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    /// `adjacency[i]` lists `(neighbor, edge index)`.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    /// Builds a graph from 0-based edge triples `(i, j, beta)`.
    ///
    /// Edges are stored with `u < v` in input order.
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut seen = HashSet::new();
        let mut stored = Vec::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j, beta) in edges {
            for k in [i, j] {
                if k >= n {
                    return Err(Error::VertexOutOfRange(k + 1, n));
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i + 1));
            }
            if !(beta > 0.0) || !beta.is_finite() {
                return Err(Error::NonPositiveWeight(i + 1, j + 1, beta));
            }
            let (u, v) = if i < j { (i, j) } else { (j, i) };
            if !seen.insert((u, v)) {
                return Err(Error::DuplicateEdge(u + 1, v + 1));
            }
            adjacency[u].push((v, stored.len()));
            adjacency[v].push((u, stored.len()));
            stored.push(Edge { u, v, beta });
        }
        let g = Graph {
            n,
            edges: stored,
            adjacency,
        };
        if let Some(unreached) = g.first_unreachable() {
            return Err(Error::Disconnected(unreached + 1));
        }
        Ok(g)
    }

    fn first_unreachable(&self) -> Option<usize> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &(j, _) in &self.adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().position(|&s| !s)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn path(n: usize, beta: f64) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, beta)).collect();
        Graph::new(n, &edges)
    }

    pub fn cycle(n: usize, beta: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidConfig(format!("cycle needs n >= 3, got {n}")));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, beta)).collect();
        Graph::new(n, &edges)
    }

    pub fn complete(n: usize, beta: f64) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j, beta));
            }
        }
        Graph::new(n, &edges)
    }

    /// Parses the text format: a header line `n m`, then `m` lines `i j beta`
    /// with 1-based labels. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .enumerate()
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header line `n m`".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(Error::Parse(format!(
                "line {}: expected `n m`, got `{header}`",
                hline + 1
            )));
        }
        let n: usize = parse_field(head[0], hline)?;
        let m: usize = parse_field(head[1], hline)?;
        let mut edges = Vec::with_capacity(m);
        for (lno, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected `i j beta`, got `{line}`",
                    lno + 1
                )));
            }
            let i: usize = parse_field(f[0], lno)?;
            let j: usize = parse_field(f[1], lno)?;
            let beta: f64 = parse_field(f[2], lno)?;
            if i == 0 || j == 0 {
                return Err(Error::VertexOutOfRange(0, n));
            }
            edges.push((i - 1, j - 1, beta));
        }
        if edges.len() != m {
            return Err(Error::Parse(format!(
                "header announces {m} edges, found {}",
                edges.len()
            )));
        }
        Graph::new(n, &edges)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {}", e.u + 1, e.v + 1, e.beta);
        }
        out
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("line {}: cannot parse `{s}`", line + 1)))
}

/// Pinning profile `π` and strength `ϵ`; the pinning at vertex `i` is `π_i·ϵ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pinning {
    pi: Vec<f64>,
    epsilon: f64,
}

impl Pinning {
    pub fn new(pi: Vec<f64>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Pinning(format!("epsilon must be positive, got {epsilon}")));
        }
        if let Some(bad) = pi.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::Pinning(format!("profile entries must be >= 0, got {bad}")));
        }
        if !pi.iter().any(|&p| p > 0.0) {
            return Err(Error::Pinning("at least one vertex must be pinned".into()));
        }
        Ok(Pinning { pi, epsilon })
    }

    pub fn uniform(n: usize, value: f64, epsilon: f64) -> Result<Self> {
        Pinning::new(vec![value; n], epsilon)
    }

    /// Pinning at the single vertex `x` with profile value `pi_x`.
    pub fn delta(n: usize, x: usize, pi_x: f64, epsilon: f64) -> Result<Self> {
        if x >= n {
            return Err(Error::VertexOutOfRange(x + 1, n));
        }
        let mut pi = vec![0.0; n];
        pi[x] = pi_x;
        Pinning::new(pi, epsilon)
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// `ε_i = π_i·ϵ`.
    pub fn eps(&self, i: usize) -> f64 {
        self.pi[i] * self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Pinning::new(self.pi.clone(), epsilon)
    }

    /// `ε_x δ_x` for this profile: keeps only the pinning at `x`.
    pub fn restricted_to(&self, x: usize) -> Result<Self> {
        Pinning::delta(self.pi.len(), x, self.pi[x], self.epsilon)
    }

    /// Vertex `x` if the pinning is of the form `ε_x δ_x`.
    pub fn single_site(&self) -> Option<usize> {
        let mut support = self.pi.iter().enumerate().filter(|(_, p)| **p > 0.0);
        let first = support.next()?.0;
        support.next().is_none().then_some(first)
    }

    pub fn total(&self) -> f64 {
        self.pi.iter().sum::<f64>() * self.epsilon
    }
}

/// Base graph plus the implicit vertex ρ, joined to every `i` with `ε_i > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedGraph {
    base: Graph,
    pinning: Pinning,
}

impl AugmentedGraph {
    pub fn new(base: Graph, pinning: Pinning) -> Result<Self> {
        if pinning.len() != base.vertex_count() {
            return Err(Error::DimensionMismatch {
                expected: base.vertex_count(),
                got: pinning.len(),
            });
        }
        Ok(AugmentedGraph { base, pinning })
    }

    pub fn base(&self) -> &Graph {
        &self.base
    }

    pub fn pinning(&self) -> &Pinning {
        &self.pinning
    }

    pub fn vertex_count(&self) -> usize {
        self.base.vertex_count()
    }

    pub fn eps(&self, i: usize) -> f64 {
        self.pinning.eps(i)
    }

    /// Vertices carrying a ρ-edge.
    pub fn rooted_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertex_count()).filter(|&i| self.pinning.eps(i) > 0.0)
    }

    /// `|E| + #{i : ε_i > 0}`.
    pub fn edge_count(&self) -> usize {
        self.base.edges().len() + self.rooted_vertices().count()
    }

    pub fn with_pinning(&self, pinning: Pinning) -> Result<Self> {
        AugmentedGraph::new(self.base.clone(), pinning)
    }

    pub fn into_parts(self) -> (Graph, Pinning) {
        (self.base, self.pinning)
    }
}

pub fn augment(g: &Graph, p: &Pinning) -> Result<AugmentedGraph> {
    AugmentedGraph::new(g.clone(), p.clone())
}

/// Strip `{-l_minus..l_plus} × V₀` of copies of a base graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    pub base: Vec<(usize, usize)>,
    pub base_vertices: usize,
    pub l_minus: usize,
    pub l_plus: usize,
    /// One weight per base edge, in `base` order.
    pub vertical_weights: Vec<f64>,
    /// One weight per base vertex.
    pub horizontal_weights: Vec<f64>,
}

impl LadderSpec {
    /// Ladder with constant vertical and horizontal weights.
    pub fn uniform(
        base: &Graph,
        l_minus: usize,
        l_plus: usize,
        beta_vertical: f64,
        beta_horizontal: f64,
    ) -> Self {
        LadderSpec {
            base: base.edges().iter().map(|e| (e.u, e.v)).collect(),
            base_vertices: base.vertex_count(),
            l_minus,
            l_plus,
            vertical_weights: vec![beta_vertical; base.edges().len()],
            horizontal_weights: vec![beta_horizontal; base.vertex_count()],
        }
    }

    /// Width-`w` ladder whose rungs are paths (`w = 1` gives a path).
    pub fn path_base(width: usize, l_minus: usize, l_plus: usize, beta: f64) -> Result<Self> {
        let base = Graph::path(width, beta)?;
        Ok(LadderSpec::uniform(&base, l_minus, l_plus, beta, beta))
    }

    pub fn levels(&self) -> usize {
        self.l_minus + self.l_plus + 1
    }
}

/// A graph generated by [`build_ladder`], remembering the level structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    graph: Graph,
    l_minus: usize,
    width: usize,
    levels: usize,
}

impl Ladder {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn into_graph(self) -> Graph {
        self.graph
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Index of the vertex `(level, v)`; levels run from `-l_minus` to `l_plus`.
    pub fn vertex(&self, level: i64, v: usize) -> Result<usize> {
        let shifted = level + self.l_minus as i64;
        if shifted < 0 || shifted as usize >= self.levels || v >= self.width {
            return Err(Error::InvalidConfig(format!(
                "ladder vertex ({level}, {v}) out of range"
            )));
        }
        Ok(shifted as usize * self.width + v)
    }

    /// `(level, v)` coordinates of a vertex index.
    pub fn coordinates(&self, x: usize) -> Result<(i64, usize)> {
        if x >= self.graph.vertex_count() {
            return Err(Error::NotLadderVertex(x + 1));
        }
        Ok(((x / self.width) as i64 - self.l_minus as i64, x % self.width))
    }

    /// `|n - m|` for `x = (n, v)`, `y = (m, w)`.
    pub fn horizontal_distance(&self, x: usize, y: usize) -> Result<usize> {
        let (n, _) = self.coordinates(x)?;
        let (m, _) = self.coordinates(y)?;
        Ok(n.abs_diff(m) as usize)
    }
}

/// Vertex order is lexicographic in (level, base vertex).
pub fn build_ladder(spec: &LadderSpec) -> Result<Ladder> {
    let width = spec.base_vertices;
    if width == 0 {
        return Err(Error::EmptyGraph);
    }
    if spec.vertical_weights.len() != spec.base.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.base.len(),
            got: spec.vertical_weights.len(),
        });
    }
    if spec.horizontal_weights.len() != width {
        return Err(Error::DimensionMismatch {
            expected: width,
            got: spec.horizontal_weights.len(),
        });
    }
    // validates the base graph (connectivity, duplicates, weights)
    let base_edges: Vec<_> = spec
        .base
        .iter()
        .zip(&spec.vertical_weights)
        .map(|(&(u, v), &b)| (u, v, b))
        .collect();
    Graph::new(width, &base_edges)?;

    let levels = spec.levels();
    let mut edges = Vec::with_capacity(levels * base_edges.len() + (levels - 1) * width);
    for level in 0..levels {
        let off = level * width;
        for &(u, v, b) in &base_edges {
            edges.push((off + u, off + v, b));
        }
        if level + 1 < levels {
            for (v, &b) in spec.horizontal_weights.iter().enumerate() {
                edges.push((off + v, off + width + v, b));
            }
        }
    }
    Ok(Ladder {
        graph: Graph::new(levels * width, &edges)?,
        l_minus: spec.l_minus,
        width,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_and_k2() {
        let g = Graph::new(1, &[]).unwrap();
        assert_eq!(g.vertex_count(), 1);
        let k2 = Graph::new(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(k2.edges().len(), 1);
    }

    #[test]
    fn construction_errors_are_distinct() {
        assert!(Graph::new(3, &[(0, 1, 1.0), (1, 2, 1.0)]).is_ok());
        assert_eq!(
            Graph::new(4, &[(0, 1, 1.0), (1, 2, 1.0)]),
            Err(Error::Disconnected(4))
        );
        assert_eq!(
            Graph::new(2, &[(0, 1, 1.0), (1, 0, 2.0)]),
            Err(Error::DuplicateEdge(1, 2))
        );
        assert_eq!(
            Graph::new(2, &[(0, 1, 0.0)]),
            Err(Error::NonPositiveWeight(1, 2, 0.0))
        );
        assert_eq!(Graph::new(2, &[(1, 1, 1.0)]), Err(Error::SelfLoop(2)));
        assert_eq!(Graph::new(0, &[]), Err(Error::EmptyGraph));
    }

    #[test]
    fn augment_pinnings() {
        let k2 = Graph::path(2, 1.0).unwrap();
        let ag = augment(&k2, &Pinning::uniform(2, 1.0, 0.5).unwrap()).unwrap();
        assert_eq!(ag.rooted_vertices().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(ag.eps(0), 0.5);
        assert_eq!(ag.eps(1), 0.5);
        assert_eq!(ag.base(), &k2);

        let ag = augment(&k2, &Pinning::new(vec![1.0, 0.0], 1.0).unwrap()).unwrap();
        assert_eq!(ag.rooted_vertices().collect::<Vec<_>>(), vec![0]);
        assert_eq!(ag.edge_count(), 2);

        assert!(matches!(
            Pinning::new(vec![0.0, 0.0], 1.0),
            Err(Error::Pinning(_))
        ));
        assert!(matches!(
            augment(&k2, &Pinning::uniform(3, 1.0, 1.0).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ladder_shapes() {
        let single = LadderSpec::path_base(1, 0, 2, 1.0).unwrap();
        let l = build_ladder(&single).unwrap();
        assert_eq!(l.graph(), &Graph::path(3, 1.0).unwrap());

        let k2 = LadderSpec::path_base(2, 1, 1, 1.0).unwrap();
        let l = build_ladder(&k2).unwrap();
        assert_eq!(l.graph().vertex_count(), 6);
        assert_eq!(l.graph().edges().len(), 7);

        let flat = LadderSpec::path_base(2, 0, 0, 1.0).unwrap();
        let l = build_ladder(&flat).unwrap();
        assert_eq!(l.graph(), &Graph::path(2, 1.0).unwrap());

        let empty = LadderSpec {
            base: vec![],
            base_vertices: 0,
            l_minus: 0,
            l_plus: 1,
            vertical_weights: vec![],
            horizontal_weights: vec![],
        };
        assert_eq!(build_ladder(&empty), Err(Error::EmptyGraph));
    }

    #[test]
    fn horizontal_distances() {
        let l = build_ladder(&LadderSpec::path_base(2, 1, 2, 1.0).unwrap()).unwrap();
        let at = |n, v| l.vertex(n, v).unwrap();
        assert_eq!(l.horizontal_distance(at(0, 0), at(0, 1)).unwrap(), 0);
        assert_eq!(l.horizontal_distance(at(-1, 0), at(2, 0)).unwrap(), 3);
        assert_eq!(l.horizontal_distance(at(2, 0), at(-1, 1)).unwrap(), 3);
        assert_eq!(l.coordinates(at(-1, 1)).unwrap(), (-1, 1));
        assert_eq!(l.horizontal_distance(0, 99), Err(Error::NotLadderVertex(100)));
    }

    #[test]
    fn text_format() {
        let g = Graph::parse("# path\n3 2\n1 2 1.5\n2 3 0.5\n").unwrap();
        assert_eq!(g.edges()[0], Edge { u: 0, v: 1, beta: 1.5 });
        assert_eq!(Graph::parse(&g.to_text()).unwrap(), g);
        assert!(matches!(Graph::parse("2 1\n1 2\n"), Err(Error::Parse(_))));
        assert!(matches!(Graph::parse("2 2\n1 2 1\n"), Err(Error::Parse(_))));
        assert_eq!(
            Graph::parse("2 1\n1 2 0\n"),
            Err(Error::NonPositiveWeight(1, 2, 0.0))
        );
    }

    #[test]
    fn single_site_detection() {
        let p = Pinning::new(vec![0.0, 2.0, 0.0], 0.1).unwrap();
        assert_eq!(p.single_site(), Some(1));
        assert_eq!(Pinning::uniform(3, 1.0, 1.0).unwrap().single_site(), None);
        let u = Pinning::uniform(3, 2.0, 0.5).unwrap();
        let r = u.restricted_to(2).unwrap();
        assert_eq!(r.pi(), &[0.0, 0.0, 2.0]);
        assert_eq!(r.eps(2), 1.0);
    }
}
