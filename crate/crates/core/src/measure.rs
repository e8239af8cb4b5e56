//! Densities of μ^ε and its marginals, and exact draws of `s` given `t`.
//!
//! All densities are natural logs with respect to Lebesgue measure in `(t, s)`
//! and counting measure in `T`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::forests::{log_tree_weight, SpanningTree};
use crate::graph::AugmentedGraph;
use crate::linalg::{check_dim, checked_exp, pinned_laplacian, LdlFactor, MAX_EXPONENT};

/// `cosh(x) - 1` without cancellation near zero.
#[inline]
pub(crate) fn cosh_m1(x: f64) -> f64 {
    let h = (0.5 * x).sinh();
    2.0 * h * h
}

/// `B_ij = cosh(t_i - t_j) + ½ (s_i - s_j)² e^{t_i + t_j}`. For the ρ-edge
/// pass `(t_j, s_j) = (0, 0)`.
pub fn b_factor(ti: f64, tj: f64, si: f64, sj: f64) -> Result<f64> {
    Ok(1.0 + b_factor_m1(ti, tj, si, sj)?)
}

/// `B_ij - 1`, accurate when the two endpoints nearly agree.
pub fn b_factor_m1(ti: f64, tj: f64, si: f64, sj: f64) -> Result<f64> {
    if (ti - tj).abs() > MAX_EXPONENT {
        return Err(Error::Overflow(ti - tj));
    }
    let ds = si - sj;
    Ok(cosh_m1(ti - tj) + 0.5 * ds * ds * checked_exp(ti + tj)?)
}

/// The additive pieces of a log density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDensityParts {
    /// `-Σ_j t_j`
    pub site_term: f64,
    /// `-Σ_{(i∼j)∈E} β_ij (B_ij - 1)`
    pub edge_term: f64,
    /// `-Σ_i ε_i (B_iρ - 1)`
    pub pinning_term: f64,
    /// Determinant (or tree) contribution of the marginal at hand.
    pub det_term: f64,
    /// Powers of `2π`.
    pub constant: f64,
}

impl LogDensityParts {
    pub fn total(&self) -> f64 {
        self.site_term + self.edge_term + self.pinning_term + self.det_term + self.constant
    }
}

fn check_fields(ag: &AugmentedGraph, t: &[f64], s: Option<&[f64]>) -> Result<()> {
    check_dim(ag.vertex_count(), t.len())?;
    if let Some(s) = s {
        check_dim(ag.vertex_count(), s.len())?;
    }
    if t.iter().chain(s.unwrap_or(&[])).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("field value".into()));
    }
    Ok(())
}

/// Site, edge and pinning terms; `s = None` drops the `s`-dependence
/// (the `cosh` parts only).
fn interaction_terms(ag: &AugmentedGraph, t: &[f64], s: Option<&[f64]>) -> Result<(f64, f64, f64)> {
    let zero = vec![0.0; t.len()];
    let s = s.unwrap_or(&zero);
    let site = -t.iter().sum::<f64>();
    let mut edge = 0.0;
    for e in ag.base().edges() {
        edge -= e.beta * b_factor_m1(t[e.u], t[e.v], s[e.u], s[e.v])?;
    }
    let mut pin = 0.0;
    for i in ag.rooted_vertices() {
        pin -= ag.eps(i) * b_factor_m1(t[i], 0.0, s[i], 0.0)?;
    }
    Ok((site, edge, pin))
}

/// Parts of the `(t, s)`-marginal, with the tree sum replaced by
/// `det(A(t) + ε̂(t))`.
pub fn log_density_ts_parts(ag: &AugmentedGraph, t: &[f64], s: &[f64]) -> Result<LogDensityParts> {
    check_fields(ag, t, Some(s))?;
    let (site_term, edge_term, pinning_term) = interaction_terms(ag, t, Some(s))?;
    let det_term = LdlFactor::new(&pinned_laplacian(ag, t)?)?.log_det();
    Ok(LogDensityParts {
        site_term,
        edge_term,
        pinning_term,
        det_term,
        constant: -(t.len() as f64) * (2.0 * PI).ln(),
    })
}

pub fn log_density_ts(ag: &AugmentedGraph, t: &[f64], s: &[f64]) -> Result<f64> {
    Ok(log_density_ts_parts(ag, t, s)?.total())
}

/// Parts of the `t`-marginal. Integrating out `s`, a centered Gaussian with
/// precision `A(t) + ε̂(t)`, turns the determinant into its square root.
pub fn log_density_t_parts(ag: &AugmentedGraph, t: &[f64]) -> Result<LogDensityParts> {
    check_fields(ag, t, None)?;
    let (site_term, edge_term, pinning_term) = interaction_terms(ag, t, None)?;
    let det_term = 0.5 * LdlFactor::new(&pinned_laplacian(ag, t)?)?.log_det();
    Ok(LogDensityParts {
        site_term,
        edge_term,
        pinning_term,
        det_term,
        constant: -0.5 * (t.len() as f64) * (2.0 * PI).ln(),
    })
}

pub fn log_density_t(ag: &AugmentedGraph, t: &[f64]) -> Result<f64> {
    Ok(log_density_t_parts(ag, t)?.total())
}

/// Joint density of `(t, s, T)` straight from the definition of μ^ε.
pub fn log_density_full(ag: &AugmentedGraph, t: &[f64], s: &[f64], tree: &SpanningTree) -> Result<f64> {
    check_fields(ag, t, Some(s))?;
    let (site, edge, pin) = interaction_terms(ag, t, Some(s))?;
    let n = t.len() as f64;
    Ok(site + edge + pin + log_tree_weight(tree, ag, t) - n * (2.0 * PI).ln())
}

/// `t_x`-marginal under the single pinning `ε_x δ_x`:
/// `√(ε_x/2π) e^{-t/2} e^{-ε_x (cosh t - 1)}`. It does not depend on the graph.
pub fn log_single_site_t_density(eps_x: f64, t: f64) -> f64 {
    0.5 * (eps_x / (2.0 * PI)).ln() - 0.5 * t - eps_x * cosh_m1(t)
}

const TABLE_CELLS: usize = 1 << 16;
/// Log-density drop, relative to the mode, at which the support is cut.
const TAIL_CUT: f64 = 60.0;

/// The single-site `t_x` law with a tabulated CDF for goodness-of-fit tests.
#[derive(Debug, Clone)]
pub struct SingleSiteLaw {
    eps: f64,
    lo: f64,
    h: f64,
    cdf: Vec<f64>,
    mass: f64,
}

impl SingleSiteLaw {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Pinning(format!("single-site law needs ε > 0, got {eps}")));
        }
        let f = |t: f64| log_single_site_t_density(eps, t);
        let mode = (-0.5 / eps).asinh();
        let top = f(mode);
        let edge = |dir: f64| {
            let mut t = mode;
            while f(t) > top - TAIL_CUT {
                t += dir * 0.25;
            }
            t
        };
        let (lo, hi) = (edge(-1.0), edge(1.0));
        let h = (hi - lo) / TABLE_CELLS as f64;
        let density = |t: f64| f(t).exp();
        let mut cdf = Vec::with_capacity(TABLE_CELLS + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for k in 0..TABLE_CELLS {
            let a = lo + k as f64 * h;
            acc += h / 6.0 * (density(a) + 4.0 * density(a + 0.5 * h) + density(a + h));
            cdf.push(acc);
        }
        let mass = acc;
        cdf.iter_mut().for_each(|c| *c /= mass);
        Ok(SingleSiteLaw { eps, lo, h, cdf, mass })
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    pub fn density(&self, t: f64) -> f64 {
        log_single_site_t_density(self.eps, t).exp()
    }

    /// Integral of the density over the tabulated support; 1 up to the
    /// quadrature error.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let u = (t - self.lo) / self.h;
        if u <= 0.0 {
            return 0.0;
        }
        let k = u.floor() as usize;
        if k >= TABLE_CELLS {
            return 1.0;
        }
        let frac = u - k as f64;
        self.cdf[k] + frac * (self.cdf[k + 1] - self.cdf[k])
    }
}

/// Centered Gaussian draw of `s` with precision `A(t) + ε̂(t)`.
pub fn sample_s_given_t<R: Rng + ?Sized>(ag: &AugmentedGraph, t: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    check_fields(ag, t, None)?;
    let factor = LdlFactor::new(&pinned_laplacian(ag, t)?)?;
    let z: Vec<f64> = (0..t.len()).map(|_| rng.sample(StandardNormal)).collect();
    Ok(factor.sample_with_precision(&z))
}
