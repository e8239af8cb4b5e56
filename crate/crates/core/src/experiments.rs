//! Result-level studies: pinning comparison sweeps, one-root monotonicity,
//! multi-root scaling, ladder decay and the single-pinning independence test.
//!
//! Every cell of a study (one measure at one ϵ) runs `chains` independent
//! chains. Cell `k` of a study gets seed `derive_seed(master, k)` and chain
//! `c` of that cell gets `derive_seed(cell_seed, c)`, so results do not
//! depend on how cells are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{augment, build_ladder, AugmentedGraph, Graph, LadderSpec, Pinning};
use crate::measure::SingleSiteLaw;
use crate::observables::{check_eps_green, conditional_series, GreenCheck, PairValues};
use crate::parallel::{derive_seed, map_indexed, Execution};
use crate::sampler::{run_chain, McmcConfig, SampleBatch};
use crate::stats::{
    combined_se, effective_sample_size_of, extrapolate_to_zero, ks_one_sample, ks_two_sample, linear_fit,
    mean, permutation_correlation_test, pool, t_critical, Estimate, KsResult, PermutationResult,
};

pub const DEFAULT_EPS: [f64; 6] = [0.2, 0.1, 0.05, 0.02, 0.01, 0.005];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// Per-chain sampler settings; `seed` is the master seed of the study.
    pub mcmc: McmcConfig,
    pub chains: usize,
    pub execution: Execution,
    pub permutations: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mcmc: McmcConfig {
                sample_trees: false,
                ..McmcConfig::default()
            },
            chains: 4,
            execution: Execution::default(),
            permutations: 1999,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        self.mcmc.validate()?;
        if self.chains == 0 {
            return Err(Error::InvalidConfig("chains must be at least 1".into()));
        }
        Ok(())
    }
}

/// Runs the chains of one cell.
pub fn run_cell(ag: &AugmentedGraph, cfg: &ExperimentConfig, cell_seed: u64) -> Result<Vec<SampleBatch>> {
    let seeds: Vec<u64> = (0..cfg.chains as u64).map(|c| derive_seed(cell_seed, c)).collect();
    map_indexed(cfg.execution, &seeds, |_, &seed| run_chain(ag, &cfg.mcmc.with_seed(seed)))
        .into_iter()
        .collect()
}

/// Per-chain values of a pair, estimated chain by chain and pooled.
struct CellValues {
    chains: Vec<Vec<PairValues>>,
    ess_min: f64,
}

impl CellValues {
    fn new(batches: &[SampleBatch], ag: &AugmentedGraph, x: usize, y: usize, pi: &[f64]) -> Result<Self> {
        let chains = batches
            .iter()
            .map(|b| conditional_series(b, ag, x, y, pi))
            .collect::<Result<Vec<_>>>()?;
        Ok(CellValues {
            chains,
            ess_min: ess_min(batches),
        })
    }

    fn estimate(&self, f: impl Fn(&PairValues) -> f64) -> Estimate {
        let parts: Vec<(Estimate, usize)> = self
            .chains
            .iter()
            .map(|c| (Estimate::from_series(&c.iter().map(&f).collect::<Vec<_>>()), c.len()))
            .collect();
        pool(&parts)
    }
}

/// Smallest per-coordinate effective sample size, summed over chains.
fn ess_min(batches: &[SampleBatch]) -> f64 {
    let n = batches[0].draws[0].t.len();
    (0..n)
        .map(|i| {
            batches
                .iter()
                .map(|b| effective_sample_size_of(&b.series(|d| d.t[i])))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn check_eps_list(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::InvalidConfig("empty ϵ list".into()));
    }
    if eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidConfig("ϵ values must be positive".into()));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidConfig("ϵ values must be strictly decreasing".into()));
    }
    Ok(())
}

fn check_observed(pi: &[f64], x: usize, y: usize) -> Result<()> {
    let n = pi.len();
    for v in [x, y] {
        if v >= n {
            return Err(Error::VertexOutOfRange(v + 1, n));
        }
        if !(pi[v] > 0.0) {
            return Err(Error::Pinning(format!("π_{} must be positive", v + 1)));
        }
    }
    if x == y {
        return Err(Error::SameVertex(x + 1));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    /// `ϵ E[G_xy]` under `μ^{ϵπ}`.
    pub eps_green: Estimate,
    /// `E[Q^π_xy]` under `μ^{ϵπ_x δ_x}`.
    pub single_pin_x: Estimate,
    /// `E[Q^π_yx]` under `μ^{ϵπ_y δ_y}`.
    pub single_pin_y: Estimate,
    /// `E[Q^π_xy 1{R={x}}]` under `μ^{ϵπ}`.
    pub one_root: Estimate,
    /// `E[Q^π_xy 1{|R|>1}]` under `μ^{ϵπ}`.
    pub multi_root: Estimate,
    /// Matrix against indicator estimator of `ϵ E[G_xy]`, when trees are
    /// sampled.
    pub identity: Option<GreenCheck>,
    pub ess_min: f64,
}

impl SweepRow {
    /// `ϵ E[G] ≤ E[Q_xy] + E[Q_yx] + k·SE`.
    pub fn comparison_holds(&self, k: f64) -> bool {
        let se = combined_se(&[self.eps_green, self.single_pin_x, self.single_pin_y]);
        self.eps_green.mean <= self.single_pin_x.mean + self.single_pin_y.mean + k * se
    }

    /// Fixed-ϵ one-root bound `E[Q 1{R={x}}] ≤ e^{Σ_{i≠x} ε_i} E_{ε_x δ_x}[Q]`
    /// within `k` standard errors.
    pub fn one_root_bound_holds(&self, pinning: &Pinning, x: usize, k: f64) -> bool {
        let factor = self.one_root_bound_factor(pinning, x);
        let rhs = self.single_pin_x.scaled(factor);
        self.one_root.mean <= rhs.mean + k * combined_se(&[self.one_root, rhs])
    }

    pub fn one_root_bound_factor(&self, pinning: &Pinning, x: usize) -> f64 {
        let others: f64 = (0..pinning.len()).filter(|&i| i != x).map(|i| pinning.pi()[i]).sum();
        (self.epsilon * others).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub graph: String,
    pub pi: Vec<f64>,
    pub x: usize,
    pub y: usize,
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
    /// `ϵ E[G]` at the smallest ϵ and extrapolated linearly to ϵ = 0.
    pub eps_green_limit: LimitEstimate,
    /// `E[Q_xy] + E[Q_yx]` under single pinnings, same treatment.
    pub single_pin_limit: LimitEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitEstimate {
    pub smallest_eps: Estimate,
    pub extrapolated: Estimate,
}

fn limit(eps: &[f64], values: &[Estimate]) -> LimitEstimate {
    LimitEstimate {
        smallest_eps: *values.last().expect("nonempty sweep"),
        extrapolated: extrapolate_to_zero(eps, values),
    }
}

#[derive(Clone, Copy)]
enum CellKind {
    General,
    PinX,
    PinY,
}

enum CellOutcome {
    General {
        eps_green: Estimate,
        one_root: Estimate,
        multi_root: Estimate,
        identity: Option<GreenCheck>,
        ess: f64,
    },
    Single(Estimate, f64),
}

/// Pinning comparison at each ϵ: `ϵ E[G_xy]` under the general pinning
/// against `E[Q^π_xy]` and `E[Q^π_yx]` under the single pinnings `ϵπ_xδ_x`
/// and `ϵπ_yδ_y`, plus the root decomposition. `Q` keeps the original `π`
/// throughout.
pub fn compare_pinning_sweep(
    g: &Graph,
    pi: &[f64],
    x: usize,
    y: usize,
    eps_list: &[f64],
    cfg: &ExperimentConfig,
) -> Result<SweepResult> {
    cfg.validate()?;
    check_eps_list(eps_list)?;
    check_observed(pi, x, y)?;
    let cells: Vec<(usize, CellKind)> = (0..eps_list.len())
        .flat_map(|k| [(k, CellKind::General), (k, CellKind::PinX), (k, CellKind::PinY)])
        .collect();
    let outcomes = map_indexed(cfg.execution, &cells, |index, &(k, kind)| -> Result<CellOutcome> {
        let general = Pinning::new(pi.to_vec(), eps_list[k])?;
        let seed = derive_seed(cfg.mcmc.seed, index as u64);
        match kind {
            CellKind::General => {
                let ag = augment(g, &general)?;
                let batches = run_cell(&ag, cfg, seed)?;
                let values = CellValues::new(&batches, &ag, x, y, pi)?;
                let identity = if cfg.mcmc.sample_trees {
                    let checks = batches
                        .iter()
                        .map(|b| check_eps_green(b, &ag, x, y))
                        .collect::<Result<Vec<_>>>()?;
                    Some(pool_checks(&checks, &batches))
                } else {
                    None
                };
                Ok(CellOutcome::General {
                    eps_green: values.estimate(|v| v.eps_green),
                    one_root: values.estimate(|v| v.one_root_xy),
                    multi_root: values.estimate(PairValues::multi_root_xy),
                    identity,
                    ess: values.ess_min,
                })
            }
            CellKind::PinX | CellKind::PinY => {
                let site = if matches!(kind, CellKind::PinX) { x } else { y };
                let ag = augment(g, &general.restricted_to(site)?)?;
                let batches = run_cell(&ag, cfg, seed)?;
                let values = CellValues::new(&batches, &ag, x, y, pi)?;
                let est = if site == x {
                    values.estimate(|v| v.q_xy)
                } else {
                    values.estimate(|v| v.q_yx)
                };
                Ok(CellOutcome::Single(est, values.ess_min))
            }
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let rows: Vec<SweepRow> = outcomes
        .chunks(3)
        .zip(eps_list)
        .map(|(cell, &epsilon)| match cell {
            [CellOutcome::General {
                eps_green,
                one_root,
                multi_root,
                identity,
                ess,
            }, CellOutcome::Single(qx, ex), CellOutcome::Single(qy, ey)] => SweepRow {
                epsilon,
                eps_green: *eps_green,
                single_pin_x: *qx,
                single_pin_y: *qy,
                one_root: *one_root,
                multi_root: *multi_root,
                identity: *identity,
                ess_min: ess.min(*ex).min(*ey),
            },
            _ => unreachable!("cells come in general/x/y triples"),
        })
        .collect();

    let eg: Vec<Estimate> = rows.iter().map(|r| r.eps_green).collect();
    let single: Vec<Estimate> = rows
        .iter()
        .map(|r| Estimate {
            mean: r.single_pin_x.mean + r.single_pin_y.mean,
            std_error: combined_se(&[r.single_pin_x, r.single_pin_y]),
            n_effective: r.single_pin_x.n_effective.min(r.single_pin_y.n_effective),
        })
        .collect();
    Ok(SweepResult {
        graph: g.to_text(),
        pi: pi.to_vec(),
        x,
        y,
        config: cfg.clone(),
        eps_green_limit: limit(eps_list, &eg),
        single_pin_limit: limit(eps_list, &single),
        rows,
    })
}

/// Pools per-chain identity checks.
fn pool_checks(checks: &[GreenCheck], batches: &[SampleBatch]) -> GreenCheck {
    let pooled = |f: fn(&GreenCheck) -> Estimate| {
        pool(&checks.iter().zip(batches).map(|(c, b)| (f(c), b.len())).collect::<Vec<_>>())
    };
    GreenCheck {
        matrix: pooled(|c| c.matrix),
        indicator: pooled(|c| c.indicator),
        difference: pooled(|c| c.difference),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub eps: Vec<f64>,
    /// `m(ϵ) = e^{-ϵ Σπ} E_{μ^{ϵπ}}[Q^π_xy 1{R={x}}]`.
    pub values: Vec<Estimate>,
    /// Consecutive pairs `(ϵ_i, ϵ_{i+1})` where `m(ϵ_{i+1}) < m(ϵ_i) - 3·SE`.
    pub violations: Vec<(f64, f64)>,
}

impl MonotonicityReport {
    /// `m` does not decrease as ϵ decreases, within three standard errors.
    pub fn monotone(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Trend of the damped one-root part as ϵ decreases.
pub fn one_root_monotonicity(
    g: &Graph,
    pi: &[f64],
    x: usize,
    y: usize,
    eps_list: &[f64],
    cfg: &ExperimentConfig,
) -> Result<MonotonicityReport> {
    cfg.validate()?;
    check_eps_list(eps_list)?;
    check_observed(pi, x, y)?;
    let values = map_indexed(cfg.execution, eps_list, |k, &eps| -> Result<Estimate> {
        let pinning = Pinning::new(pi.to_vec(), eps)?;
        let ag = augment(g, &pinning)?;
        let batches = run_cell(&ag, cfg, derive_seed(cfg.mcmc.seed, k as u64))?;
        let values = CellValues::new(&batches, &ag, x, y, pi)?;
        Ok(values
            .estimate(|v| v.one_root_xy)
            .scaled((-eps * pinning.total()).exp()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let violations = eps_list
        .windows(2)
        .zip(values.windows(2))
        .filter(|(_, m)| m[1].mean < m[0].mean - 3.0 * combined_se(&[m[0], m[1]]))
        .map(|(e, _)| (e[0], e[1]))
        .collect();
    Ok(MonotonicityReport {
        eps: eps_list.to_vec(),
        values,
        violations,
    })
}

/// Power law fitted to the multi-root part, `E[Q 1{|R|>1}] ≈ c ϵ^p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PowerFit {
    /// The event is impossible on this graph, so the part is zero at every ϵ
    /// and every power bound holds.
    Vanishing,
    Fitted {
        power: f64,
        power_se: f64,
        /// Rows left out because their estimate was not positive.
        excluded: Vec<f64>,
    },
}

impl PowerFit {
    pub fn power_at_least(&self, p: f64) -> bool {
        match self {
            PowerFit::Vanishing => true,
            PowerFit::Fitted { power, .. } => *power >= p,
        }
    }
}

/// Fits `log E[Q 1{|R|>1}]` against `log ϵ` over the rows of a sweep.
pub fn multi_root_power(sweep: &SweepResult) -> Result<PowerFit> {
    if sweep
        .rows
        .iter()
        .all(|r| r.multi_root.mean == 0.0 && r.multi_root.std_error == 0.0)
    {
        return Ok(PowerFit::Vanishing);
    }
    let (kept, excluded): (Vec<&SweepRow>, Vec<&SweepRow>) = sweep.rows.iter().partition(|r| r.multi_root.mean > 0.0);
    if kept.len() < 3 {
        return Err(Error::Diagnostic(format!(
            "only {} positive multi-root estimates, need 3 for a power fit",
            kept.len()
        )));
    }
    let lx: Vec<f64> = kept.iter().map(|r| r.epsilon.ln()).collect();
    let ly: Vec<f64> = kept.iter().map(|r| r.multi_root.mean.ln()).collect();
    let fit = linear_fit(&lx, &ly);
    Ok(PowerFit::Fitted {
        power: fit.slope,
        power_se: fit.slope_se,
        excluded: excluded.iter().map(|r| r.epsilon).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayPoint {
    pub x: usize,
    pub y: usize,
    pub distance: usize,
    pub estimate: Estimate,
    /// `1 / min(π_x, π_y)`, the prefactor of the decay bound.
    pub c3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub epsilon: f64,
    pub points: Vec<DecayPoint>,
    /// Fit of `log ϵE[G]` against horizontal distance over pairs at
    /// positive distance.
    pub slope: f64,
    pub intercept: f64,
    pub residual_ss: f64,
    pub slope_se: f64,
    pub ci_level: f64,
    pub slope_ci: (f64, f64),
    /// Number of draw batches behind the slope error.
    pub batches: usize,
    /// Pairs dropped from the fit, with the reason.
    pub excluded: Vec<(usize, usize, String)>,
}

impl DecayFit {
    /// The confidence interval lies strictly below zero.
    pub fn decays(&self) -> bool {
        self.slope_ci.1 < 0.0
    }
}

/// Sub-batches per chain for the slope error.
const DECAY_BATCHES_PER_CHAIN: usize = 20;
pub const DECAY_CI_LEVEL: f64 = 0.99;

/// Log-linear decay of `ϵ E[G_xy]` with horizontal distance on a ladder.
///
/// The slope error comes from the spread of slopes refitted on contiguous
/// batches of draws, which keeps the correlation between pairs measured on
/// the same chain.
pub fn ladder_decay(
    spec: &LadderSpec,
    pi: &[f64],
    eps: f64,
    pairs: &[(usize, usize)],
    cfg: &ExperimentConfig,
) -> Result<DecayFit> {
    cfg.validate()?;
    let ladder = build_ladder(spec)?;
    let g = ladder.graph();
    let pinning = Pinning::new(pi.to_vec(), eps)?;
    let mut distances = Vec::with_capacity(pairs.len());
    for &(x, y) in pairs {
        check_observed(pi, x, y)?;
        distances.push(ladder.horizontal_distance(x, y)?);
    }
    let mut distinct: Vec<usize> = distances.iter().copied().filter(|d| *d > 0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "decay fit needs 3 distinct positive distances, got {}",
            distinct.len()
        )));
    }
    let ag = augment(g, &pinning)?;
    let batches = run_cell(&ag, cfg, derive_seed(cfg.mcmc.seed, 0))?;
    // per pair, per chain, per draw
    let series = map_indexed(cfg.execution, pairs, |_, &(x, y)| -> Result<Vec<Vec<f64>>> {
        batches
            .iter()
            .map(|b| Ok(conditional_series(b, &ag, x, y, pi)?.iter().map(|v| v.eps_green).collect()))
            .collect()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::with_capacity(pairs.len());
    let mut excluded = Vec::new();
    for ((&(x, y), &distance), chains) in pairs.iter().zip(&distances).zip(&series) {
        let estimate = pool(&chains.iter().map(|c| (Estimate::from_series(c), c.len())).collect::<Vec<_>>());
        if distance == 0 {
            excluded.push((x, y, "distance 0 enters the intercept only".to_string()));
        } else if !(estimate.mean > 0.0) {
            excluded.push((x, y, format!("nonpositive estimate {}", estimate.mean)));
        }
        points.push(DecayPoint {
            x,
            y,
            distance,
            estimate,
            c3: 1.0 / pi[x].min(pi[y]),
        });
    }
    let used: Vec<usize> = (0..points.len())
        .filter(|&k| points[k].distance > 0 && points[k].estimate.mean > 0.0)
        .collect();
    let dx: Vec<f64> = used.iter().map(|&k| points[k].distance as f64).collect();
    let ly: Vec<f64> = used.iter().map(|&k| points[k].estimate.mean.ln()).collect();
    let fit = linear_fit(&dx, &ly);

    let mut slopes = Vec::new();
    for chain in 0..batches.len() {
        let len = series[0][chain].len();
        let size = len / DECAY_BATCHES_PER_CHAIN;
        if size == 0 {
            return Err(Error::BatchTooShort {
                got: len,
                need: DECAY_BATCHES_PER_CHAIN,
            });
        }
        for b in 0..DECAY_BATCHES_PER_CHAIN {
            let ys: Vec<f64> = used
                .iter()
                .map(|&k| mean(&series[k][chain][b * size..(b + 1) * size]).ln())
                .collect();
            slopes.push(linear_fit(&dx, &ys).slope);
        }
    }
    let nb = slopes.len();
    let slope_se = crate::stats::variance(&slopes).sqrt() / (nb as f64).sqrt();
    let half = t_critical(DECAY_CI_LEVEL, (nb - 1) as f64) * slope_se;
    Ok(DecayFit {
        epsilon: eps,
        points,
        slope: fit.slope,
        intercept: fit.intercept,
        residual_ss: fit.residual_ss,
        slope_se,
        ci_level: DECAY_CI_LEVEL,
        slope_ci: (fit.slope - half, fit.slope + half),
        batches: nb,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationCheck {
    /// e.g. `"t_1 vs t'_2"`; vertex labels are 1-based.
    pub label: String,
    pub result: PermutationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceCheck {
    pub label: String,
    pub result: KsResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub x: usize,
    pub eps_x: f64,
    /// Draws kept after thinning by the autocorrelation time.
    pub draws: usize,
    pub thinning: usize,
    pub correlations: Vec<CorrelationCheck>,
    /// KS test of `t_x` against the single-site law.
    pub marginal: KsResult,
    /// Two-sample KS tests of each gradient coordinate, `ε_x` against 1.
    pub invariance: Vec<InvarianceCheck>,
    /// `E[e^{t_x}]`, exactly 1.
    pub ward: Estimate,
}

impl IndependenceReport {
    pub fn correlations_pass(&self, level: f64) -> bool {
        self.correlations.iter().all(|c| c.result.p_value > level)
    }

    pub fn marginal_passes(&self, level: f64) -> bool {
        self.marginal.p_value > level
    }

    pub fn invariance_passes(&self, level: f64) -> bool {
        self.invariance.iter().all(|c| c.result.p_value > level)
    }

    pub fn passes(&self, level: f64) -> bool {
        self.correlations_pass(level) && self.marginal_passes(level) && self.invariance_passes(level)
    }

    /// Whether at least one statistic rejects at `level`.
    pub fn rejects(&self, level: f64) -> bool {
        !self.passes(level)
    }
}

/// `(t_x, s_x)` and the rescaled gradients `(t_i - t_x, (s_i - s_x) e^{t_x})`
/// of the draws of one chain, thinned by `step`.
struct Decomposed {
    tx: Vec<f64>,
    sx: Vec<f64>,
    /// Per vertex `i ≠ x`: `(t'_i, s'_i)` series.
    gradients: Vec<(usize, Vec<f64>, Vec<f64>)>,
}

fn decompose(batches: &[SampleBatch], x: usize, step: usize) -> Decomposed {
    let n = batches[0].draws[0].t.len();
    let draws: Vec<_> = batches.iter().flat_map(|b| b.draws.iter().step_by(step)).collect();
    let tx = draws.iter().map(|d| d.t[x]).collect();
    let sx = draws.iter().map(|d| d.s[x]).collect();
    let gradients = (0..n)
        .filter(|&i| i != x)
        .map(|i| {
            (
                i,
                draws.iter().map(|d| d.t[i] - d.t[x]).collect(),
                draws.iter().map(|d| (d.s[i] - d.s[x]) * d.t[x].exp()).collect(),
            )
        })
        .collect();
    Decomposed { tx, sx, gradients }
}

/// Thinning step of twice the largest autocorrelation time of `t`.
fn independence_step(batches: &[SampleBatch]) -> usize {
    let tau = batches
        .iter()
        .flat_map(|b| b.diagnostics.iact.iter().copied())
        .fold(1.0, f64::max);
    (2.0 * tau).ceil() as usize
}

/// Runs the three independence statistics for the measure of `ag`, whatever
/// its pinning; the invariance test compares against the same pinning shape
/// rescaled so that `ε_x = 1`.
fn independence_statistics(ag: &AugmentedGraph, x: usize, cfg: &ExperimentConfig) -> Result<IndependenceReport> {
    cfg.validate()?;
    let eps_x = ag.eps(x);
    if !(eps_x > 0.0) {
        return Err(Error::Pinning(format!("vertex {} is not pinned", x + 1)));
    }
    let reference = ag.with_pinning(ag.pinning().with_epsilon(ag.pinning().epsilon() / eps_x)?)?;
    let main = run_cell(ag, cfg, derive_seed(cfg.mcmc.seed, 0))?;
    let other = run_cell(&reference, cfg, derive_seed(cfg.mcmc.seed, 1))?;
    let step = independence_step(&main).max(independence_step(&other));
    let a = decompose(&main, x, step);
    let b = decompose(&other, x, step);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.mcmc.seed, 2));
    let lx = x + 1;
    let mut correlations = Vec::new();
    for (i, ti, si) in &a.gradients {
        let li = i + 1;
        for (base_label, base) in [(format!("t_{lx}"), &a.tx), (format!("s_{lx}"), &a.sx)] {
            for (grad_label, grad) in [(format!("t'_{li}"), ti), (format!("s'_{li}"), si)] {
                correlations.push(CorrelationCheck {
                    label: format!("{base_label} vs {grad_label}"),
                    result: permutation_correlation_test(base, grad, cfg.permutations, &mut rng),
                });
            }
        }
    }
    let law = SingleSiteLaw::new(eps_x)?;
    let marginal = ks_one_sample(&a.tx, |t| law.cdf(t));
    let invariance = a
        .gradients
        .iter()
        .zip(&b.gradients)
        .flat_map(|((i, ta, sa), (_, tb, sb))| {
            [
                InvarianceCheck {
                    label: format!("t'_{}", i + 1),
                    result: ks_two_sample(ta, tb),
                },
                InvarianceCheck {
                    label: format!("s'_{}", i + 1),
                    result: ks_two_sample(sa, sb),
                },
            ]
        })
        .collect();
    let ward = pool(
        &main
            .iter()
            .map(|b| (Estimate::from_series(&b.series(|d| d.t[x].exp())), b.len()))
            .collect::<Vec<_>>(),
    );
    Ok(IndependenceReport {
        x,
        eps_x,
        draws: a.tx.len(),
        thinning: step,
        correlations,
        marginal,
        invariance,
        ward,
    })
}

/// Independence of `(t_x, s_x)` from the rescaled gradients under the single
/// pinning `ε_x δ_x`, the `t_x` marginal, and invariance of the gradient law
/// under a change of `ε_x`.
pub fn independence_test(g: &Graph, x: usize, eps_x: f64, cfg: &ExperimentConfig) -> Result<IndependenceReport> {
    let ag = augment(g, &Pinning::delta(g.vertex_count(), x, 1.0, eps_x)?)?;
    independence_test_on(&ag, x, cfg)
}

/// [`independence_test`] on a given augmented graph, which must be pinned at
/// `x` only.
pub fn independence_test_on(ag: &AugmentedGraph, x: usize, cfg: &ExperimentConfig) -> Result<IndependenceReport> {
    if ag.pinning().single_site() != Some(x) {
        return Err(Error::Pinning(format!(
            "independence test needs pinning at vertex {} only",
            x + 1
        )));
    }
    independence_statistics(ag, x, cfg)
}

/// The same statistics under uniform pinning, where the product structure
/// fails; at least one of them should reject.
pub fn independence_negative_control(g: &Graph, x: usize, eps: f64, cfg: &ExperimentConfig) -> Result<IndependenceReport> {
    let ag = augment(g, &Pinning::uniform(g.vertex_count(), 1.0, eps)?)?;
    independence_statistics(&ag, x, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(n: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            mcmc: McmcConfig {
                n_samples: n,
                burn_in: 500,
                seed,
                sample_trees: false,
                ..McmcConfig::default()
            },
            chains: 2,
            permutations: 199,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn sweep_rejects_bad_inputs() {
        let g = Graph::path(2, 1.0).unwrap();
        let cfg = quick(100, 1);
        assert!(matches!(
            compare_pinning_sweep(&g, &[1.0, 1.0], 0, 1, &[0.1, 0.2], &cfg),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            compare_pinning_sweep(&g, &[1.0, 0.0], 0, 1, &[0.2, 0.1], &cfg),
            Err(Error::Pinning(_))
        ));
        assert!(matches!(
            one_root_monotonicity(&g, &[1.0, 0.0], 0, 1, &[0.2, 0.1], &cfg),
            Err(Error::Pinning(_))
        ));
    }

    #[test]
    fn sweep_shape_and_determinism() {
        let g = Graph::path(2, 1.0).unwrap();
        let cfg = quick(400, 3);
        let a = compare_pinning_sweep(&g, &[1.0, 1.0], 0, 1, &[0.2, 0.1], &cfg).unwrap();
        assert_eq!(a.rows.len(), 2);
        for r in &a.rows {
            assert!(r.eps_green.mean > 0.0 && r.single_pin_x.mean > 0.0 && r.single_pin_y.mean > 0.0);
            assert_eq!(r.multi_root, Estimate { mean: 0.0, std_error: 0.0, n_effective: r.multi_root.n_effective });
            assert!(r.identity.is_none());
        }
        assert_eq!(multi_root_power(&a).unwrap(), PowerFit::Vanishing);
        let seq = ExperimentConfig {
            execution: Execution::Sequential,
            ..cfg
        };
        let b = compare_pinning_sweep(&g, &[1.0, 1.0], 0, 1, &[0.2, 0.1], &seq).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn ladder_needs_three_distances() {
        let spec = LadderSpec::path_base(1, 0, 2, 1.0).unwrap();
        let r = ladder_decay(&spec, &[1.0; 3], 0.1, &[(0, 1), (0, 2)], &quick(100, 1));
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn independence_needs_single_pinning() {
        let g = Graph::path(2, 1.0).unwrap();
        let ag = augment(&g, &Pinning::uniform(2, 1.0, 0.5).unwrap()).unwrap();
        assert!(matches!(independence_test_on(&ag, 0, &quick(100, 1)), Err(Error::Pinning(_))));
        let single = augment(&g, &Pinning::delta(2, 1, 1.0, 0.5).unwrap()).unwrap();
        assert!(matches!(independence_test_on(&single, 0, &quick(100, 1)), Err(Error::Pinning(_))));
    }
}
