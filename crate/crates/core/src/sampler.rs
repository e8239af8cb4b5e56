//! Metropolis chain on the `t`-marginal of μ^ε, decorated with exact draws of
//! `s` and `T` given `t`.
//!
//! Each sweep updates every coordinate with a Gaussian random-walk proposal
//! and then proposes a common shift `t → t + δ·(1,…,1)`. The shift moves along
//! the soft direction of the field that opens up as ϵ ↓ 0. Both step sizes
//! adapt toward [`TARGET_ACCEPTANCE`] during burn-in and are frozen after it.
//!
//! Randomness comes from three ChaCha8 streams of the same seed: stream 0
//! drives the chain, stream 1 the `s` draws and stream 2 the tree draws, so
//! switching tree sampling off leaves `t` and `s` unchanged.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forests::{sample_tree_wilson, SpanningTree};
use crate::graph::AugmentedGraph;
use crate::measure::{log_density_t, sample_s_given_t};
use crate::stats::integrated_autocorrelation;

pub const TARGET_ACCEPTANCE: f64 = 0.35;
pub const MIN_ACCEPTANCE: f64 = 0.01;
/// Pinning strengths at or below this get ten times the burn-in.
pub const SMALL_EPSILON: f64 = 1e-3;
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed); streams 0=chain 1=s 2=tree";

const STREAM_CHAIN: u64 = 0;
const STREAM_S: u64 = 1;
const STREAM_TREE: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Scale of the coordinatewise proposals.
    pub step_size: f64,
    /// Scale of the common-shift proposal.
    pub shift_step: f64,
    pub n_samples: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub adapt: bool,
    /// Decorate every retained draw with a tree; the tree walk is the most
    /// expensive part of a draw at small ϵ.
    pub sample_trees: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            step_size: 1.0,
            shift_step: 1.0,
            n_samples: 10_000,
            burn_in: 2_000,
            thinning: 1,
            seed: 0,
            adapt: true,
            sample_trees: true,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return bad("step_size must be positive");
        }
        if !(self.shift_step > 0.0) || !self.shift_step.is_finite() {
            return bad("shift_step must be positive");
        }
        if self.n_samples == 0 {
            return bad("n_samples must be positive");
        }
        if self.thinning == 0 {
            return bad("thinning must be at least 1");
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        McmcConfig {
            seed,
            ..self.clone()
        }
    }
}

/// One retained draw `(t, s, T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub tree: Option<SpanningTree>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDiagnostics {
    /// Coordinate-move acceptance after burn-in.
    pub acceptance_rate: f64,
    /// Shift-move acceptance after burn-in.
    pub shift_acceptance_rate: f64,
    pub adapted_step: f64,
    pub adapted_shift_step: f64,
    pub burn_in_sweeps: usize,
    /// Proposals rejected because the density could not be evaluated
    /// (exponent overflow).
    pub numerical_rejections: usize,
    /// Integrated autocorrelation time of each `t_i` over the retained draws.
    pub iact: Vec<f64>,
    pub rng: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub draws: Vec<Draw>,
    pub diagnostics: ChainDiagnostics,
    pub config: McmcConfig,
}

#[derive(Serialize)]
struct DrawRecord<'a> {
    t: &'a [f64],
    s: &'a [f64],
    tree: Option<Vec<[usize; 2]>>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn has_trees(&self) -> bool {
        self.draws.iter().all(|d| d.tree.is_some())
    }

    /// Series of `f(draw)` over the batch.
    pub fn series(&self, f: impl Fn(&Draw) -> f64) -> Vec<f64> {
        self.draws.iter().map(f).collect()
    }

    /// JSON-lines, one `{"t":[..],"s":[..],"tree":[[i,j],..]}` record per draw;
    /// vertices are labelled `1..n` and ρ is 0.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for d in &self.draws {
            let rec = DrawRecord {
                t: &d.t,
                s: &d.s,
                tree: d.tree.as_ref().map(|t| t.labelled_pairs()),
            };
            serde_json::to_writer(&mut w, &rec).map_err(|e| Error::Io(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

struct Chain<'a> {
    ag: &'a AugmentedGraph,
    t: Vec<f64>,
    logp: f64,
    numerical_rejections: usize,
}

impl Chain<'_> {
    fn propose(&mut self, u: f64, apply: impl Fn(&mut [f64]), undo: impl Fn(&mut [f64])) -> Result<bool> {
        apply(&mut self.t);
        match log_density_t(self.ag, &self.t) {
            Ok(lp) if u.ln() < lp - self.logp => {
                self.logp = lp;
                Ok(true)
            }
            Ok(_) => {
                undo(&mut self.t);
                Ok(false)
            }
            Err(e) if e.is_numerical() => {
                self.numerical_rejections += 1;
                undo(&mut self.t);
                Ok(false)
            }
            Err(e) => Err(e),
        }
    }
}

/// Runs one chain targeting the `t`-marginal of μ^ε from `t = 0`.
pub fn run_chain(ag: &AugmentedGraph, cfg: &McmcConfig) -> Result<SampleBatch> {
    cfg.validate()?;
    let n = ag.vertex_count();
    let mut rng = stream(cfg.seed, STREAM_CHAIN);
    let mut rng_s = stream(cfg.seed, STREAM_S);
    let mut rng_tree = stream(cfg.seed, STREAM_TREE);

    let t0 = vec![0.0; n];
    let logp = match log_density_t(ag, &t0) {
        Ok(v) if v.is_finite() => v,
        Ok(v) => return Err(Error::Diagnostic(format!("log-density {v} at t = 0"))),
        Err(e) => return Err(Error::Diagnostic(format!("log-density at t = 0: {e}"))),
    };
    let mut chain = Chain {
        ag,
        t: t0,
        logp,
        numerical_rejections: 0,
    };

    let burn_in = if ag.pinning().epsilon() <= SMALL_EPSILON {
        cfg.burn_in * 10
    } else {
        cfg.burn_in
    };
    let mut log_step = cfg.step_size.ln();
    let mut log_shift = cfg.shift_step.ln();
    let shift_moves = n > 1;

    let mut accepted = 0usize;
    let mut proposed = 0usize;
    let mut shift_accepted = 0usize;
    let mut shift_proposed = 0usize;
    let mut draws = Vec::with_capacity(cfg.n_samples);
    let total = burn_in + cfg.n_samples * cfg.thinning;

    for sweep in 0..total {
        let step = log_step.exp();
        let mut acc = 0usize;
        for i in 0..n {
            let d = step * rng.sample::<f64, _>(StandardNormal);
            let u: f64 = rng.random();
            if chain.propose(u, |t| t[i] += d, |t| t[i] -= d)? {
                acc += 1;
            }
        }
        let mut shift_acc = false;
        if shift_moves {
            let d = log_shift.exp() * rng.sample::<f64, _>(StandardNormal);
            let u: f64 = rng.random();
            shift_acc = chain.propose(
                u,
                |t| t.iter_mut().for_each(|v| *v += d),
                |t| t.iter_mut().for_each(|v| *v -= d),
            )?;
        }

        if sweep < burn_in {
            if cfg.adapt {
                let gain = 1.0 / ((sweep + 1) as f64).powf(0.6);
                log_step += gain * (acc as f64 / n as f64 - TARGET_ACCEPTANCE);
                if shift_moves {
                    log_shift += gain * (if shift_acc { 1.0 } else { 0.0 } - TARGET_ACCEPTANCE);
                }
            }
            continue;
        }
        accepted += acc;
        proposed += n;
        shift_accepted += usize::from(shift_acc);
        shift_proposed += usize::from(shift_moves);

        if (sweep - burn_in + 1) % cfg.thinning == 0 {
            let s = sample_s_given_t(ag, &chain.t, &mut rng_s)?;
            let tree = if cfg.sample_trees {
                Some(sample_tree_wilson(ag, &chain.t, &mut rng_tree)?)
            } else {
                None
            };
            draws.push(Draw {
                t: chain.t.clone(),
                s,
                tree,
            });
        }
    }

    let acceptance_rate = accepted as f64 / proposed.max(1) as f64;
    if acceptance_rate < MIN_ACCEPTANCE {
        return Err(Error::Diagnostic(format!(
            "acceptance rate {acceptance_rate:.4} below {MIN_ACCEPTANCE} after adaptation"
        )));
    }
    let iact = (0..n)
        .map(|i| {
            let x: Vec<f64> = draws.iter().map(|d| d.t[i]).collect();
            integrated_autocorrelation(&x)
        })
        .collect();
    Ok(SampleBatch {
        draws,
        diagnostics: ChainDiagnostics {
            acceptance_rate,
            shift_acceptance_rate: if shift_moves {
                shift_accepted as f64 / shift_proposed.max(1) as f64
            } else {
                f64::NAN
            },
            adapted_step: log_step.exp(),
            adapted_shift_step: log_shift.exp(),
            burn_in_sweeps: burn_in,
            numerical_rejections: chain.numerical_rejections,
            iact,
            rng: RNG_ALGORITHM.to_string(),
        },
        config: cfg.clone(),
    })
}

/// Minimum batch length accepted by [`effective_sample_size`].
pub const MIN_ESS_DRAWS: usize = 100;

/// `n / (1 + 2 Σ ρ_k)` for each `t_i`, truncated at the first nonpositive
/// autocorrelation.
pub fn effective_sample_size(batch: &SampleBatch) -> Result<Vec<f64>> {
    if batch.len() < MIN_ESS_DRAWS {
        return Err(Error::BatchTooShort {
            got: batch.len(),
            need: MIN_ESS_DRAWS,
        });
    }
    let n = batch.draws[0].t.len();
    Ok((0..n)
        .map(|i| crate::stats::effective_sample_size_of(&batch.series(|d| d.t[i])))
        .collect())
}
