//! Green's function, the observable `Q^π_xy`, its root decomposition, and
//! their Monte Carlo estimators.
//!
//! Two kinds of per-draw values exist. Indicator values read the sampled tree.
//! Conditional values average the tree out exactly given `t`:
//!
//! - `P(x ∈ R, x ↔ y | t) = ε_x e^{t_x} (A(t) + ε̂(t))⁻¹_xy`
//! - `P(R = {x} | t) = ε_x e^{t_x} τ(t) / det(A(t) + ε̂(t))`, where `τ(t)` is
//!   the weighted spanning-tree count of the base graph.
//!
//! Estimators prefer the conditional values and keep the indicator path as a
//! cross-check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forests::{connected_in_forest, tree_law, SpanningTree};
use crate::graph::AugmentedGraph;
use crate::linalg::{checked_exp, log_spanning_tree_weight, pinned_laplacian, LdlFactor};
use crate::sampler::SampleBatch;
use crate::stats::Estimate;

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

fn check_observable(pi: &[f64], x: usize, y: usize) -> Result<()> {
    check_pair(pi.len(), x, y)?;
    for v in [x, y] {
        if !(pi[v] > 0.0) {
            return Err(Error::Pinning(format!(
                "Q needs π_{} > 0, got {}",
                v + 1,
                pi[v]
            )));
        }
    }
    Ok(())
}

/// `e^{t_x+t_y} / (π_x e^{t_x} + π_y e^{t_y})`, evaluated in log space.
pub fn q_prefactor(t: &[f64], x: usize, y: usize, pi: &[f64]) -> Result<f64> {
    check_observable(pi, x, y)?;
    let a = pi[x].ln() + t[x];
    let b = pi[y].ln() + t[y];
    let m = a.max(b);
    let lse = m + ((a - m).exp() + (b - m).exp()).ln();
    checked_exp(t[x] + t[y] - lse)
}

/// `Q^π_xy(t, T)`: the prefactor times `1{x ∈ R(T), x ↔ y in F(T)}`.
pub fn obs_q(t: &[f64], tree: &SpanningTree, x: usize, y: usize, pi: &[f64]) -> Result<f64> {
    let pref = q_prefactor(t, x, y, pi)?;
    let hit = tree.has_root(x) && connected_in_forest(tree, x, y);
    Ok(if hit { pref } else { 0.0 })
}

/// `Q^π_xy` split by `R(T) = {x}` versus `|R(T)| > 1`; the parts sum to
/// [`obs_q`].
pub fn obs_q_split(t: &[f64], tree: &SpanningTree, x: usize, y: usize, pi: &[f64]) -> Result<(f64, f64)> {
    let q = obs_q(t, tree, x, y, pi)?;
    Ok(if tree.root_count() == 1 { (q, 0.0) } else { (0.0, q) })
}

/// `G_xy` from the exact tree law:
/// `e^{t_x+t_y}/(ε_x e^{t_x} + ε_y e^{t_y}) · P({x ∈ R, x ↔ y} ∪ {y ∈ R, x ↔ y})`.
pub fn green_conditional(ag: &AugmentedGraph, t: &[f64], x: usize, y: usize) -> Result<f64> {
    check_pair(ag.vertex_count(), x, y)?;
    let (ex, ey) = (ag.eps(x), ag.eps(y));
    if ex + ey <= 0.0 {
        return Err(Error::Pinning(format!(
            "vertices {} and {} are both unpinned",
            x + 1,
            y + 1
        )));
    }
    let law = tree_law(ag, t)?;
    let p = law.probability_of(|tr| {
        (tr.has_root(x) || tr.has_root(y)) && connected_in_forest(tr, x, y)
    });
    // e^{t_x+t_y} / (ε_x e^{t_x} + ε_y e^{t_y}) = 1 / (ε_x e^{-t_y} + ε_y e^{-t_x})
    Ok(p / (ex * checked_exp(-t[y])? + ey * checked_exp(-t[x])?))
}

/// Per-draw values of a pair `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairValues {
    /// `ϵ G_xy` (conditional values only; zero for indicators).
    pub eps_green: f64,
    pub q_xy: f64,
    pub q_yx: f64,
    pub one_root_xy: f64,
    pub one_root_yx: f64,
}

impl PairValues {
    pub fn multi_root_xy(&self) -> f64 {
        self.q_xy - self.one_root_xy
    }

    pub fn multi_root_yx(&self) -> f64 {
        self.q_yx - self.one_root_yx
    }

    pub fn q_sum(&self) -> f64 {
        self.q_xy + self.q_yx
    }
}

/// Conditional expectations given `t` of `ϵ G_xy`, `Q^π_xy`, `Q^π_yx` and
/// their one-root parts under the pinning of `ag`. `pi` is the profile that
/// enters `Q` and may differ from the one that defines the measure.
pub fn pair_conditional(ag: &AugmentedGraph, t: &[f64], x: usize, y: usize, pi: &[f64]) -> Result<PairValues> {
    check_pair(ag.vertex_count(), x, y)?;
    let lap = pinned_laplacian(ag, t)?;
    let factor = LdlFactor::new(&lap)?;
    let mut e = vec![0.0; lap.dim()];
    e[y] = 1.0;
    let inv_xy = factor.solve(&e)[x];
    let log_one_root = log_spanning_tree_weight(ag.base(), t)? - factor.log_det();
    let pref_xy = q_prefactor(t, x, y, pi)?;
    let pref_yx = q_prefactor(t, y, x, pi)?;
    let rooted = |v: usize| -> Result<(f64, f64)> {
        let eps = ag.eps(v);
        if eps == 0.0 {
            return Ok((0.0, 0.0));
        }
        let w = eps.ln() + t[v];
        Ok((checked_exp(w)? * inv_xy, checked_exp(w + log_one_root)?))
    };
    let (conn_x, single_x) = rooted(x)?;
    let (conn_y, single_y) = rooted(y)?;
    Ok(PairValues {
        eps_green: ag.pinning().epsilon() * checked_exp(t[x] + t[y])? * inv_xy,
        q_xy: pref_xy * conn_x,
        q_yx: pref_yx * conn_y,
        one_root_xy: pref_xy * single_x,
        one_root_yx: pref_yx * single_y,
    })
}

/// Indicator values read from a sampled tree.
pub fn pair_indicators(t: &[f64], tree: &SpanningTree, x: usize, y: usize, pi: &[f64]) -> Result<PairValues> {
    let (one_xy, multi_xy) = obs_q_split(t, tree, x, y, pi)?;
    let (one_yx, multi_yx) = obs_q_split(t, tree, y, x, pi)?;
    Ok(PairValues {
        eps_green: 0.0,
        q_xy: one_xy + multi_xy,
        q_yx: one_yx + multi_yx,
        one_root_xy: one_xy,
        one_root_yx: one_yx,
    })
}

/// Whether `{x ∈ R, x ↔ y, |R| > 1}` has positive probability: `x` must be
/// pinned, and so must some `z ∉ {x, y}` whose removal leaves `x` and `y`
/// connected.
pub fn multi_root_possible(ag: &AugmentedGraph, x: usize, y: usize) -> Result<bool> {
    let g = ag.base();
    check_pair(g.vertex_count(), x, y)?;
    if ag.eps(x) == 0.0 {
        return Ok(false);
    }
    Ok(ag.rooted_vertices().filter(|&z| z != x && z != y).any(|z| {
        let mut seen = vec![false; g.vertex_count()];
        seen[z] = true;
        seen[x] = true;
        let mut stack = vec![x];
        while let Some(v) = stack.pop() {
            for &(w, _) in g.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen[y]
    }))
}

/// Conditional values of every draw. When the multi-root event is
/// impossible the one-root parts are set to the full `Q` values, so the
/// multi-root part is exactly zero rather than a rounding residue.
pub fn conditional_series(
    batch: &SampleBatch,
    ag: &AugmentedGraph,
    x: usize,
    y: usize,
    pi: &[f64],
) -> Result<Vec<PairValues>> {
    let multi_xy = multi_root_possible(ag, x, y)?;
    let multi_yx = multi_root_possible(ag, y, x)?;
    batch
        .draws
        .iter()
        .map(|d| {
            let mut v = pair_conditional(ag, &d.t, x, y, pi)?;
            if !multi_xy {
                v.one_root_xy = v.q_xy;
            }
            if !multi_yx {
                v.one_root_yx = v.q_yx;
            }
            Ok(v)
        })
        .collect()
}

pub fn indicator_series(batch: &SampleBatch, x: usize, y: usize, pi: &[f64]) -> Result<Vec<PairValues>> {
    batch
        .draws
        .iter()
        .map(|d| {
            let tree = d.tree.as_ref().ok_or(Error::MissingTrees)?;
            pair_indicators(&d.t, tree, x, y, pi)
        })
        .collect()
}

pub fn estimate_of(values: &[PairValues], f: impl Fn(&PairValues) -> f64) -> Estimate {
    Estimate::from_series(&values.iter().map(f).collect::<Vec<_>>())
}

/// Mean of `e^{t_y}`, whose exact value is 1.
pub fn estimate_ward(batch: &SampleBatch, y: usize) -> Estimate {
    Estimate::from_series(&batch.series(|d| d.t[y].exp()))
}

/// The two estimators of `ϵ E[G_xy]` and their per-draw difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenCheck {
    /// Mean of `ϵ G_xy(t)`.
    pub matrix: Estimate,
    /// Mean of `Q_xy + Q_yx` on the sampled trees.
    pub indicator: Estimate,
    pub difference: Estimate,
}

impl GreenCheck {
    /// Agreement within `k` standard errors of the paired difference.
    pub fn agrees(&self, k: f64) -> bool {
        self.difference.mean.abs() <= k * self.difference.std_error
    }
}

/// `π` of the measure itself, used when `Q` is built from the same profile.
fn own_profile(ag: &AugmentedGraph) -> Vec<f64> {
    ag.pinning().pi().to_vec()
}

pub fn check_eps_green(batch: &SampleBatch, ag: &AugmentedGraph, x: usize, y: usize) -> Result<GreenCheck> {
    let pi = own_profile(ag);
    let cond = conditional_series(batch, ag, x, y, &pi)?;
    let ind = indicator_series(batch, x, y, &pi)?;
    let diff: Vec<f64> = cond.iter().zip(&ind).map(|(c, i)| c.eps_green - i.q_sum()).collect();
    Ok(GreenCheck {
        matrix: estimate_of(&cond, |v| v.eps_green),
        indicator: estimate_of(&ind, PairValues::q_sum),
        difference: Estimate::from_series(&diff),
    })
}

/// `ϵ E[G_xy]` from the matrix path, after checking it against the indicator
/// path within three standard errors.
pub fn estimate_eps_green(batch: &SampleBatch, ag: &AugmentedGraph, x: usize, y: usize) -> Result<Estimate> {
    let check = check_eps_green(batch, ag, x, y)?;
    if !check.agrees(3.0) {
        return Err(Error::IdentityFailure(format!(
            "matrix {:.6} vs indicator {:.6}: difference {:.3e} ± {:.3e}",
            check.matrix.mean, check.indicator.mean, check.difference.mean, check.difference.std_error
        )));
    }
    Ok(check.matrix)
}

/// Estimates of `E[Q 1{R={x}}]` and `E[Q 1{|R|>1}]` from the sampled trees.
pub fn root_decomposition(batch: &SampleBatch, x: usize, y: usize, pi: &[f64]) -> Result<(Estimate, Estimate)> {
    let ind = indicator_series(batch, x, y, pi)?;
    Ok((
        estimate_of(&ind, |v| v.one_root_xy),
        estimate_of(&ind, PairValues::multi_root_xy),
    ))
}

/// Same as [`root_decomposition`] with the tree averaged out given `t`.
pub fn conditional_root_decomposition(
    batch: &SampleBatch,
    ag: &AugmentedGraph,
    x: usize,
    y: usize,
    pi: &[f64],
) -> Result<(Estimate, Estimate)> {
    let cond = conditional_series(batch, ag, x, y, pi)?;
    Ok((
        estimate_of(&cond, |v| v.one_root_xy),
        estimate_of(&cond, PairValues::multi_root_xy),
    ))
}
