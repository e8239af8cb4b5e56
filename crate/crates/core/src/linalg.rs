//! Dense symmetric linear algebra for the weighted Laplacian `A(t)` and its
//! pinned version `A(t) + ε̂(t)`.
//!
//! The pinned matrix is an M-matrix. It is factorized by an elimination that
//! never subtracts (see [`LdlFactor`]), so determinants and solves stay
//! accurate for field values spread over many orders of magnitude.

use crate::error::{Error, Result};
use crate::graph::{AugmentedGraph, Graph, Pinning};

/// Largest admissible exponent in `e^{t_i + t_j}`.
pub const MAX_EXPONENT: f64 = 700.0;

/// Real symmetric matrix in dense row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Takes the lower triangle of `rows` as authoritative.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = SymMatrix::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for j in 0..=i {
                m.set(i, j, row[j]);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] += value;
        if i != j {
            self.data[j * self.n + i] += value;
        }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        (0..self.n).map(|i| self.get(i, j)).sum()
    }

    /// Principal submatrix with row and column `k` removed.
    pub fn without(&self, k: usize) -> SymMatrix {
        let idx: Vec<usize> = (0..self.n).filter(|&i| i != k).collect();
        let mut out = SymMatrix::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out.data[a * out.n + b] = self.get(i, j);
            }
        }
        out
    }
}

/// Field values `(t, s)` on the vertices; `t_ρ = s_ρ = 0` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
}

impl FieldConfig {
    pub fn new(t: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if t.len() != s.len() {
            return Err(Error::DimensionMismatch {
                expected: t.len(),
                got: s.len(),
            });
        }
        if t.iter().chain(&s).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field configuration".into()));
        }
        Ok(FieldConfig { t, s })
    }

    pub fn zeros(n: usize) -> Self {
        FieldConfig {
            t: vec![0.0; n],
            s: vec![0.0; n],
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `e^{exponent}` with an explicit error beyond [`MAX_EXPONENT`].
#[inline]
pub fn checked_exp(exponent: f64) -> Result<f64> {
    if !exponent.is_finite() {
        return Err(Error::NonFinite(format!("exponent {exponent}")));
    }
    if exponent.abs() > MAX_EXPONENT {
        return Err(Error::Overflow(exponent));
    }
    Ok(exponent.exp())
}

/// Conductance `β_ij e^{t_i + t_j}` of an edge.
#[inline]
pub fn conductance(beta: f64, ti: f64, tj: f64) -> Result<f64> {
    Ok(beta * checked_exp(ti + tj)?)
}

/// Weighted Laplacian `A(t)`: off-diagonal `-β_ij e^{t_i+t_j}` on edges,
/// diagonal the sum of incident conductances.
pub fn laplacian(g: &Graph, t: &[f64]) -> Result<SymMatrix> {
    check_dim(g.vertex_count(), t.len())?;
    let mut a = SymMatrix::zeros(g.vertex_count());
    for e in g.edges() {
        let c = conductance(e.beta, t[e.u], t[e.v])?;
        a.add(e.u, e.v, -c);
        a.add(e.u, e.u, c);
        a.add(e.v, e.v, c);
    }
    Ok(a)
}

/// Diagonal of `ε̂(t) = diag(ε_i e^{t_i})`.
pub fn pinning_diagonal(p: &Pinning, t: &[f64]) -> Result<Vec<f64>> {
    check_dim(p.len(), t.len())?;
    (0..p.len())
        .map(|i| {
            let e = p.eps(i);
            if e > 0.0 {
                Ok(e * checked_exp(t[i])?)
            } else {
                Ok(0.0)
            }
        })
        .collect()
}

/// `A(t) + ε̂(t)`.
pub fn pinned_matrix(ag: &AugmentedGraph, t: &[f64]) -> Result<SymMatrix> {
    Ok(pinned_laplacian(ag, t)?.to_matrix())
}

/// Laplacian-type matrix `M = L_c + diag(excess)`, where `L_c` is the
/// Laplacian of the conductances `c_ij ≥ 0` and `excess_i ≥ 0` is the
/// conductance from `i` to a ground vertex (ρ, or a deleted vertex).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundedLaplacian {
    n: usize,
    /// Dense symmetric conductances, zero diagonal.
    cond: Vec<f64>,
    excess: Vec<f64>,
}

impl GroundedLaplacian {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn excess(&self) -> &[f64] {
        &self.excess
    }

    pub fn conductance(&self, i: usize, j: usize) -> f64 {
        self.cond[i * self.n + j]
    }

    pub fn to_matrix(&self) -> SymMatrix {
        let n = self.n;
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            let mut d = self.excess[i];
            for j in 0..n {
                let c = self.cond[i * n + j];
                if j != i && c != 0.0 {
                    m.data[i * n + j] = -c;
                    d += c;
                }
            }
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn with_excess(mut self, excess: Vec<f64>) -> Result<Self> {
        check_dim(self.n, excess.len())?;
        self.excess = excess;
        Ok(self)
    }

    /// Grounds vertex `k`: its conductances become excess of its neighbours.
    pub fn ground(&self, k: usize) -> GroundedLaplacian {
        let n = self.n;
        let idx: Vec<usize> = (0..n).filter(|&i| i != k).collect();
        let m = idx.len();
        let mut cond = vec![0.0; m * m];
        let mut excess = Vec::with_capacity(m);
        for (a, &i) in idx.iter().enumerate() {
            excess.push(self.excess[i] + self.cond[i * n + k]);
            for (b, &j) in idx.iter().enumerate() {
                cond[a * m + b] = self.cond[i * n + j];
            }
        }
        GroundedLaplacian { n: m, cond, excess }
    }
}

/// `A(t)` as a [`GroundedLaplacian`] with zero excess.
pub fn conductance_laplacian(g: &Graph, t: &[f64]) -> Result<GroundedLaplacian> {
    check_dim(g.vertex_count(), t.len())?;
    let n = g.vertex_count();
    let mut cond = vec![0.0; n * n];
    for e in g.edges() {
        let c = conductance(e.beta, t[e.u], t[e.v])?;
        cond[e.u * n + e.v] = c;
        cond[e.v * n + e.u] = c;
    }
    Ok(GroundedLaplacian {
        n,
        cond,
        excess: vec![0.0; n],
    })
}

/// `A(t) + ε̂(t)` as a [`GroundedLaplacian`].
pub fn pinned_laplacian(ag: &AugmentedGraph, t: &[f64]) -> Result<GroundedLaplacian> {
    let mut lap = conductance_laplacian(ag.base(), t)?;
    lap.excess = pinning_diagonal(ag.pinning(), t)?;
    Ok(lap)
}

/// `L D Lᵀ` factorization of a [`GroundedLaplacian`] with unit lower `L`.
///
/// Pivots are accumulated from nonnegative terms only (the excess of each
/// row is carried through the elimination), so they keep full relative
/// accuracy however widely the conductances are spread. A pivot that is not
/// strictly positive and finite means some component has no path to ground.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    /// Strict lower part of `L`, row-major.
    l: Vec<f64>,
    pivots: Vec<f64>,
}

impl LdlFactor {
    pub fn new(m: &GroundedLaplacian) -> Result<Self> {
        let n = m.n;
        // working copy of the conductances among not-yet-eliminated vertices
        let mut cond = m.cond.clone();
        let mut excess = m.excess.clone();
        let mut l = vec![0.0; n * n];
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let mut pivot = excess[k];
            for j in k + 1..n {
                pivot += cond[k * n + j];
            }
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { index: k, pivot });
            }
            pivots.push(pivot);
            let share = excess[k] / pivot;
            for i in k + 1..n {
                let cik = cond[i * n + k];
                if cik == 0.0 {
                    continue;
                }
                l[i * n + k] = -cik / pivot;
                excess[i] += cik * share;
                for j in k + 1..i {
                    let ckj = cond[k * n + j];
                    if ckj != 0.0 {
                        let add = cik * ckj / pivot;
                        cond[i * n + j] += add;
                        cond[j * n + i] += add;
                    }
                }
            }
        }
        Ok(LdlFactor { n, l, pivots })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn log_det(&self) -> f64 {
        self.pivots.iter().map(|p| p.ln()).sum()
    }

    fn forward(&self, y: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= self.l[i * n + k] * y[k];
            }
            y[i] = v;
        }
    }

    fn backward(&self, y: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in i + 1..n {
                v -= self.l[k * n + i] * y[k];
            }
            y[i] = v;
        }
    }

    /// Solves `M x = b` without refinement.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = b.to_vec();
        self.forward(&mut y);
        for (v, d) in y.iter_mut().zip(&self.pivots) {
            *v /= d;
        }
        self.backward(&mut y);
        y
    }

    /// Solves `M x = b` followed by one step of iterative refinement.
    pub fn solve_refined(&self, m: &SymMatrix, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve(b);
        let mx = m.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&mx).map(|(b, mx)| b - mx).collect();
        for (xi, ci) in x.iter_mut().zip(self.solve(&r)) {
            *xi += ci;
        }
        x
    }

    /// Maps standard normals `z` to a centered Gaussian with precision `M`:
    /// returns `L⁻ᵀ D^{-1/2} z`.
    pub fn sample_with_precision(&self, z: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = z
            .iter()
            .zip(&self.pivots)
            .map(|(z, d)| z / d.sqrt())
            .collect();
        self.backward(&mut y);
        y
    }
}

/// `log det(A(t) + ε̂(t))`.
pub fn logdet_pinned(ag: &AugmentedGraph, t: &[f64]) -> Result<f64> {
    Ok(LdlFactor::new(&pinned_laplacian(ag, t)?)?.log_det())
}

/// Log of the weighted number of spanning trees of the base graph with
/// conductances `β_ij e^{t_i+t_j}` (any cofactor of `A(t)`).
pub fn log_spanning_tree_weight(g: &Graph, t: &[f64]) -> Result<f64> {
    if g.vertex_count() == 1 {
        check_dim(1, t.len())?;
        return Ok(0.0);
    }
    let lap = conductance_laplacian(g, t)?;
    Ok(LdlFactor::new(&lap.ground(lap.dim() - 1))?.log_det())
}

/// `(A(t) + ε̂(t))⁻¹ e_y`.
pub fn pinned_inverse_column(ag: &AugmentedGraph, t: &[f64], y: usize) -> Result<Vec<f64>> {
    let lap = pinned_laplacian(ag, t)?;
    let factor = LdlFactor::new(&lap)?;
    let mut e = vec![0.0; lap.dim()];
    e[y] = 1.0;
    // no refinement: residuals taken in the assembled matrix lose the small
    // diagonal excess that the factorization keeps exactly
    Ok(factor.solve(&e))
}

/// Green's function `G_xy = e^{t_x+t_y} (A(t) + ε̂(t))⁻¹_xy` for `x ≠ y`.
pub fn green_entry(ag: &AugmentedGraph, t: &[f64], x: usize, y: usize) -> Result<f64> {
    let n = ag.vertex_count();
    for v in [x, y] {
        if v >= n {
            return Err(Error::VertexOutOfRange(v + 1, n));
        }
    }
    if x == y {
        return Err(Error::SameVertex(x + 1));
    }
    let col = pinned_inverse_column(ag, t, y)?;
    Ok(checked_exp(t[x] + t[y])? * col[x])
}

/// Determinant of a general square matrix by LU with partial pivoting.
pub fn determinant(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    if n == 0 {
        return 1.0;
    }
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap_or(c);
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        let pivot = a[c][c];
        det *= pivot;
        for r in c + 1..n {
            let f = a[r][c] / pivot;
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    det
}

/// `(-1)^{x+y} det M_{y^c x^c}`: delete row `y` and column `x`.
pub fn signed_minor_det(m: &SymMatrix, x: usize, y: usize) -> Result<f64> {
    let n = m.dim();
    if n < 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: n });
    }
    for v in [x, y] {
        if v >= n {
            return Err(Error::VertexOutOfRange(v + 1, n));
        }
    }
    let minor: Vec<Vec<f64>> = (0..n)
        .filter(|&r| r != y)
        .map(|r| (0..n).filter(|&c| c != x).map(|c| m.get(r, c)).collect())
        .collect();
    let sign = if (x + y).is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * determinant(&minor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::augment;
    use approx::assert_relative_eq;

    fn k2() -> Graph {
        Graph::path(2, 1.0).unwrap()
    }

    #[test]
    fn laplacian_examples() {
        assert_eq!(
            laplacian(&k2(), &[0.0, 0.0]).unwrap().rows(),
            vec![vec![1.0, -1.0], vec![-1.0, 1.0]]
        );
        let a = laplacian(&k2(), &[2f64.ln(), 0.0]).unwrap();
        assert_relative_eq!(a.get(0, 0), 2.0, epsilon = 1e-15);
        assert_relative_eq!(a.get(0, 1), -2.0, epsilon = 1e-15);
        assert_eq!(
            laplacian(&Graph::path(3, 1.0).unwrap(), &[0.0; 3]).unwrap().rows(),
            vec![
                vec![1.0, -1.0, 0.0],
                vec![-1.0, 2.0, -1.0],
                vec![0.0, -1.0, 1.0]
            ]
        );
        assert!(matches!(
            laplacian(&k2(), &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn laplacian_overflow_is_reported() {
        assert_eq!(laplacian(&k2(), &[400.0, 301.0]), Err(Error::Overflow(701.0)));
    }

    #[test]
    fn pinning_diagonal_examples() {
        let p = Pinning::uniform(2, 1.0, 1.0).unwrap();
        assert_eq!(pinning_diagonal(&p, &[0.0, 0.0]).unwrap(), vec![1.0, 1.0]);
        let p = Pinning::new(vec![1.0, 0.0], 2.0).unwrap();
        let d = pinning_diagonal(&p, &[3f64.ln(), 5.0]).unwrap();
        assert_relative_eq!(d[0], 6.0, epsilon = 1e-14);
        assert_eq!(d[1], 0.0);
        let p = Pinning::new(vec![0.0, 1.0], 0.1).unwrap();
        assert_eq!(pinning_diagonal(&p, &[0.0, 0.0]).unwrap(), vec![0.0, 0.1]);
    }

    #[test]
    fn logdet_examples() {
        let ag = augment(&k2(), &Pinning::uniform(2, 1.0, 1.0).unwrap()).unwrap();
        assert_relative_eq!(logdet_pinned(&ag, &[0.0, 0.0]).unwrap(), 3f64.ln(), epsilon = 1e-14);
        let one = Graph::new(1, &[]).unwrap();
        let ag = augment(&one, &Pinning::uniform(1, 1.0, 0.5).unwrap()).unwrap();
        assert_relative_eq!(logdet_pinned(&ag, &[0.0]).unwrap(), 0.5f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn green_examples() {
        let ag = augment(&k2(), &Pinning::uniform(2, 1.0, 1.0).unwrap()).unwrap();
        assert_relative_eq!(green_entry(&ag, &[0.0, 0.0], 0, 1).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        for eps in [0.5, 0.1, 1e-3] {
            let ag = augment(&k2(), &Pinning::uniform(2, 1.0, eps).unwrap()).unwrap();
            let g = green_entry(&ag, &[0.0, 0.0], 0, 1).unwrap();
            assert_relative_eq!(g, 1.0 / (eps * (eps + 2.0)), max_relative = 1e-13);
        }
        assert_eq!(green_entry(&ag, &[0.0, 0.0], 1, 1), Err(Error::SameVertex(2)));
    }

    #[test]
    fn green_is_symmetric() {
        let g = Graph::cycle(4, 0.7).unwrap();
        let ag = augment(&g, &Pinning::new(vec![1.0, 0.0, 0.5, 2.0], 0.3).unwrap()).unwrap();
        let t = [0.3, -1.2, 0.8, 0.1];
        for x in 0..4 {
            for y in 0..4 {
                if x != y {
                    assert_relative_eq!(
                        green_entry(&ag, &t, x, y).unwrap(),
                        green_entry(&ag, &t, y, x).unwrap(),
                        max_relative = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn signed_minor_examples() {
        let m = SymMatrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        assert_eq!(signed_minor_det(&m, 0, 1).unwrap(), 1.0);
        assert_eq!(signed_minor_det(&m, 0, 0).unwrap(), 2.0);
        assert!(matches!(
            signed_minor_det(&m, 0, 2),
            Err(Error::VertexOutOfRange(3, 2))
        ));
    }

    #[test]
    fn solve_matches_inverse_times_matrix() {
        let g = Graph::complete(4, 1.3).unwrap();
        let ag = augment(&g, &Pinning::uniform(4, 1.0, 0.01).unwrap()).unwrap();
        let t = [4.0, -3.0, 2.5, 0.0];
        let lap = pinned_laplacian(&ag, &t).unwrap();
        let m = lap.to_matrix();
        let factor = LdlFactor::new(&lap).unwrap();
        let b = [1.0, -2.0, 0.5, 3.0];
        let x = factor.solve_refined(&m, &b);
        for (mx, b) in m.mul_vec(&x).iter().zip(&b) {
            assert_relative_eq!(mx, b, epsilon = 1e-9);
        }
        assert_relative_eq!(factor.log_det(), determinant(&m.rows()).ln(), max_relative = 1e-10);
    }

    #[test]
    fn ungrounded_laplacian_is_rejected() {
        let ag = augment(&k2(), &Pinning::uniform(2, 1.0, 1.0).unwrap()).unwrap();
        let mut lap = pinned_laplacian(&ag, &[0.0, 0.0]).unwrap();
        lap.excess = vec![0.0, 0.0];
        assert!(matches!(
            LdlFactor::new(&lap),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn widely_spread_fields_keep_accuracy() {
        // 2x2: det = c*(e1 + e2) + e1*e2 with c = e^{t1+t2}
        let ag = augment(&k2(), &Pinning::new(vec![1.0, 0.0], 1e-4).unwrap()).unwrap();
        let t: [f64; 2] = [-12.0, 14.0];
        let c = (t[0] + t[1]).exp();
        let e1 = 1e-4 * t[0].exp();
        assert_relative_eq!(logdet_pinned(&ag, &t).unwrap(), (c * e1).ln(), max_relative = 1e-14);
    }

    #[test]
    fn spanning_tree_weight_of_cycle() {
        // a 4-cycle has 4 spanning trees
        let g = Graph::cycle(4, 1.0).unwrap();
        assert_relative_eq!(log_spanning_tree_weight(&g, &[0.0; 4]).unwrap(), 4f64.ln(), epsilon = 1e-13);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn laplacian_columns_sum_to_zero(t in proptest::collection::vec(-5.0f64..5.0, 5)) {
                let g = Graph::new(5, &[(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (3, 4, 1.0), (0, 4, 0.3), (1, 3, 1.1)]).unwrap();
                let a = laplacian(&g, &t).unwrap();
                for j in 0..5 {
                    let scale: f64 = (0..5).map(|i| a.get(i, j).abs()).sum();
                    prop_assert!(a.column_sum(j).abs() <= 1e-14 * scale);
                }
            }

            #[test]
            fn pinned_matrix_is_positive_definite(
                t in proptest::collection::vec(-30.0f64..30.0, 4),
                eps in 1e-4f64..2.0,
            ) {
                let g = Graph::path(4, 1.0).unwrap();
                let ag = augment(&g, &Pinning::new(vec![0.0, 0.0, 1.0, 0.0], eps).unwrap()).unwrap();
                prop_assert!(logdet_pinned(&ag, &t).is_ok());
            }
        }
    }
}
