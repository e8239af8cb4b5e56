use std::fs;

use serde::Serialize;
use sigma_forest::experiments::{
    compare_pinning_sweep, independence_test, ladder_decay, multi_root_power, DecayFit, ExperimentConfig,
    IndependenceReport, PowerFit, SweepResult,
};
use sigma_forest::graph::{augment, build_ladder, Graph, Ladder, LadderSpec, Pinning};
use sigma_forest::observables::estimate_ward;
use sigma_forest::oracle::{bundled_corpus, identity, instances_for, random_instances, run_suite, OracleRecord};
use sigma_forest::parallel::derive_seed;
use sigma_forest::sampler::{effective_sample_size, run_chain, ChainDiagnostics, McmcConfig};
use sigma_forest::stats::Estimate;

use crate::config::{Command, GraphSource, RunConfig};
use crate::output::{file_name, num, Writer};
use crate::CliError;

/// Significance level of the independence checks.
pub const INDEPENDENCE_LEVEL: f64 = 1e-3;
/// Multiple of the combined standard error allowed in inequality checks.
pub const SE_MULTIPLE: f64 = 3.0;
const PERMUTATIONS: usize = 1999;
const VERIFY_FIELDS: usize = 20;

/// What a command reports back to `main`.
pub struct Outcome {
    pub passed: bool,
    pub summary: Vec<String>,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut w = Writer::new(cfg)?;
    let mut outcome = match cfg.command {
        Command::Verify => verify(cfg, &mut w)?,
        Command::Sample => sample(cfg, &mut w)?,
        Command::ComparePinning => compare_pinning(cfg, &mut w)?,
        Command::LadderDecay => ladder(cfg, &mut w)?,
        Command::Independence => independence(cfg, &mut w)?,
    };
    for p in w.written() {
        outcome.summary.push(format!("wrote {}", file_name(p)));
    }
    Ok(outcome)
}

fn read(path: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::config(format!("{path}: {e}")))
}

struct Loaded {
    graph: Graph,
    ladder: Option<(LadderSpec, Ladder)>,
}

fn load(cfg: &RunConfig) -> Result<Loaded, CliError> {
    match &cfg.graph {
        None => Err(CliError::config("no graph given: use --graph FILE or --ladder-base FILE")),
        Some(GraphSource::File(f)) => Ok(Loaded {
            graph: Graph::parse(&read(f)?)?,
            ladder: None,
        }),
        Some(GraphSource::Ladder {
            base,
            l_minus,
            l_plus,
            beta_vertical,
            beta_horizontal,
        }) => {
            let base = Graph::parse(&read(base)?)?;
            let spec = LadderSpec::uniform(&base, *l_minus, *l_plus, *beta_vertical, *beta_horizontal);
            let ladder = build_ladder(&spec)?;
            Ok(Loaded {
                graph: ladder.graph().clone(),
                ladder: Some((spec, ladder)),
            })
        }
    }
}

fn zero_based_pairs(cfg: &RunConfig, n: usize) -> Result<Vec<(usize, usize)>, CliError> {
    cfg.pairs
        .iter()
        .map(|&(x, y)| {
            for v in [x, y] {
                if v == 0 || v > n {
                    return Err(CliError::config(format!("pair {x},{y}: vertex {v} out of range 1..={n}")));
                }
            }
            Ok((x - 1, y - 1))
        })
        .collect()
}

fn mcmc(cfg: &RunConfig) -> McmcConfig {
    McmcConfig {
        n_samples: cfg.samples,
        burn_in: cfg.burn_in,
        thinning: cfg.thin,
        seed: cfg.seed,
        sample_trees: cfg.trees,
        ..McmcConfig::default()
    }
}

fn experiment(cfg: &RunConfig) -> ExperimentConfig {
    ExperimentConfig {
        mcmc: mcmc(cfg),
        chains: cfg.chains,
        execution: cfg.execution,
        permutations: PERMUTATIONS,
    }
}

fn single_eps(cfg: &RunConfig) -> Result<f64, CliError> {
    match cfg.eps.as_slice() {
        [e] => Ok(*e),
        _ => Err(CliError::config(format!(
            "`{}` takes exactly one eps value, got {}",
            cfg.command.name(),
            cfg.eps.len()
        ))),
    }
}

#[derive(Serialize)]
struct IdentitySummary {
    identity: &'static str,
    count: usize,
    max_rel_gap: f64,
}

#[derive(Serialize)]
struct VerifyOut<'a> {
    all_pass: bool,
    summary: Vec<IdentitySummary>,
    records: &'a [OracleRecord],
}

fn verify(cfg: &RunConfig, w: &mut Writer) -> Result<Outcome, CliError> {
    let mut instances = bundled_corpus(cfg.max_vertices, cfg.seed)?;
    instances.extend(random_instances(cfg.random, cfg.max_vertices, derive_seed(cfg.seed, 1))?);
    if cfg.graph.is_some() {
        let g = load(cfg)?.graph;
        let pi = cfg.pi.profile(g.vertex_count())?;
        for (k, &eps) in cfg.eps.iter().enumerate() {
            let ag = augment(&g, &Pinning::new(pi.clone(), eps)?)?;
            let seed = derive_seed(cfg.seed, 2 + k as u64);
            instances.extend(instances_for(&format!("input/eps={eps}"), &ag, VERIFY_FIELDS, seed));
        }
    }
    let report = run_suite(&instances, cfg.execution)?;
    let names = [
        identity::MATRIX_TREE,
        identity::DETERMINANT,
        identity::MINOR_FOREST,
        identity::GREEN_XY,
        identity::GREEN_YX,
        identity::GREEN_ASSEMBLED,
        identity::GREEN_CONDITIONAL,
    ];
    let summary: Vec<IdentitySummary> = names
        .iter()
        .map(|&identity| IdentitySummary {
            identity,
            count: report.count(identity),
            max_rel_gap: report.max_gap(identity),
        })
        .collect();
    let passed = report.all_pass();
    let mut lines: Vec<String> = summary
        .iter()
        .map(|s| format!("{:<20} {:>6} records, max gap {:.2e}", s.identity, s.count, s.max_rel_gap))
        .collect();
    lines.extend(
        report
            .failures()
            .map(|r| format!("FAIL {} {}: lhs {} rhs {}", r.identity, r.instance, r.lhs, r.rhs)),
    );
    w.json(
        "oracle_report.json",
        &VerifyOut {
            all_pass: passed,
            summary,
            records: &report.records,
        },
    )?;
    Ok(Outcome { passed, summary: lines })
}

#[derive(Serialize)]
struct VertexWard {
    vertex: usize,
    ess: f64,
    ward: Estimate,
}

#[derive(Serialize)]
struct SampleOut<'a> {
    draws: usize,
    diagnostics: &'a ChainDiagnostics,
    vertices: Vec<VertexWard>,
}

fn sample(cfg: &RunConfig, w: &mut Writer) -> Result<Outcome, CliError> {
    let g = load(cfg)?.graph;
    let pinning = Pinning::new(cfg.pi.profile(g.vertex_count())?, single_eps(cfg)?)?;
    let ag = augment(&g, &pinning)?;
    let batch = run_chain(&ag, &mcmc(cfg))?;
    let ess = effective_sample_size(&batch)?;
    let vertices: Vec<VertexWard> = ess
        .iter()
        .enumerate()
        .map(|(y, &ess)| VertexWard {
            vertex: y + 1,
            ess,
            ward: estimate_ward(&batch, y),
        })
        .collect();
    let summary = vertices
        .iter()
        .map(|v| format!("vertex {}: E[e^t] = {} ± {}, ess {:.0}", v.vertex, v.ward.mean, v.ward.std_error, v.ess))
        .collect();
    w.jsonl("samples.jsonl", &batch)?;
    w.json(
        "sample_summary.json",
        &SampleOut {
            draws: batch.len(),
            diagnostics: &batch.diagnostics,
            vertices,
        },
    )?;
    Ok(Outcome { passed: true, summary })
}

#[derive(Serialize)]
struct RowChecks {
    epsilon: f64,
    comparison: bool,
    one_root_bound: bool,
    one_root_bound_factor: f64,
    identity: Option<bool>,
}

#[derive(Serialize)]
struct CompareOut<'a> {
    passed: bool,
    checks: Vec<RowChecks>,
    multi_root_power: Option<PowerFit>,
    multi_root_power_note: Option<String>,
    sweep: &'a SweepResult,
}

pub const COMPARE_COLUMNS: [&str; 12] = [
    "epsilon",
    "eps_green_mean",
    "eps_green_se",
    "singlepin_x_mean",
    "singlepin_x_se",
    "singlepin_y_mean",
    "singlepin_y_se",
    "one_root_mean",
    "one_root_se",
    "multi_root_mean",
    "multi_root_se",
    "ess_min",
];

fn compare_pinning(cfg: &RunConfig, w: &mut Writer) -> Result<Outcome, CliError> {
    let g = load(cfg)?.graph;
    let pi = cfg.pi.profile(g.vertex_count())?;
    let pairs = zero_based_pairs(cfg, g.vertex_count())?;
    if pairs.is_empty() {
        return Err(CliError::config("compare-pinning needs at least one --pair X,Y"));
    }
    let exp = experiment(cfg);
    let profile = Pinning::new(pi.clone(), 1.0)?;
    let mut passed = true;
    let mut summary = Vec::new();
    for (k, &(x, y)) in pairs.iter().enumerate() {
        let sweep = compare_pinning_sweep(&g, &pi, x, y, &cfg.eps, &seeded(&exp, cfg.seed, k))?;
        let checks: Vec<RowChecks> = sweep
            .rows
            .iter()
            .map(|r| RowChecks {
                epsilon: r.epsilon,
                comparison: r.comparison_holds(SE_MULTIPLE),
                one_root_bound: r.one_root_bound_holds(&profile, x, SE_MULTIPLE),
                one_root_bound_factor: r.one_root_bound_factor(&profile, x),
                identity: r.identity.as_ref().map(|c| c.agrees(SE_MULTIPLE)),
            })
            .collect();
        let pair_ok = checks
            .iter()
            .all(|c| c.comparison && c.one_root_bound && c.identity != Some(false));
        passed &= pair_ok;
        let (power, note) = match multi_root_power(&sweep) {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e.to_string())),
        };
        summary.push(format!(
            "pair {},{}: {} over {} eps values, multi-root power {}",
            x + 1,
            y + 1,
            if pair_ok { "checks hold" } else { "CHECK FAILED" },
            checks.len(),
            match &power {
                Some(PowerFit::Vanishing) => "vanishing".to_string(),
                Some(PowerFit::Fitted { power, power_se, .. }) => format!("{power:.3} ± {power_se:.3}"),
                None => "n/a".to_string(),
            }
        ));
        let rows: Vec<Vec<String>> = sweep
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![num(r.epsilon)];
                for e in [r.eps_green, r.single_pin_x, r.single_pin_y, r.one_root, r.multi_root] {
                    row.push(num(e.mean));
                    row.push(num(e.std_error));
                }
                row.push(num(r.ess_min));
                row
            })
            .collect();
        let stem = format!("compare_pinning_{}_{}", x + 1, y + 1);
        w.csv(&format!("{stem}.csv"), &COMPARE_COLUMNS, &rows)?;
        w.json(
            &format!("{stem}.json"),
            &CompareOut {
                passed: pair_ok,
                checks,
                multi_root_power: power,
                multi_root_power_note: note,
                sweep: &sweep,
            },
        )?;
    }
    Ok(Outcome { passed, summary })
}

/// Experiment `k` of a run gets its own master seed.
fn seeded(exp: &ExperimentConfig, master: u64, k: usize) -> ExperimentConfig {
    ExperimentConfig {
        mcmc: exp.mcmc.with_seed(derive_seed(master, k as u64)),
        ..exp.clone()
    }
}

#[derive(Serialize)]
struct DecayOut<'a> {
    passed: bool,
    fits: &'a [DecayFit],
}

fn ladder(cfg: &RunConfig, w: &mut Writer) -> Result<Outcome, CliError> {
    let loaded = load(cfg)?;
    let Some((spec, ladder)) = loaded.ladder else {
        return Err(CliError::config("ladder-decay needs --ladder-base FILE --ladder-L MINUS,PLUS"));
    };
    let n = loaded.graph.vertex_count();
    let pi = cfg.pi.profile(n)?;
    let mut pairs = zero_based_pairs(cfg, n)?;
    if pairs.is_empty() {
        // base vertex 1 at the leftmost level against its copies further right
        let lo = -(spec.l_minus as i64);
        let origin = ladder.vertex(lo, 0)?;
        for d in 1..spec.levels() as i64 {
            pairs.push((origin, ladder.vertex(lo + d, 0)?));
        }
    }
    let exp = experiment(cfg);
    let fits = cfg
        .eps
        .iter()
        .enumerate()
        .map(|(k, &eps)| ladder_decay(&spec, &pi, eps, &pairs, &seeded(&exp, cfg.seed, k)))
        .collect::<Result<Vec<_>, _>>()?;
    let passed = fits.iter().all(DecayFit::decays);
    let summary = fits
        .iter()
        .map(|f| {
            format!(
                "eps {}: slope {:.4}, {}% CI [{:.4}, {:.4}]{}",
                f.epsilon,
                f.slope,
                f.ci_level * 100.0,
                f.slope_ci.0,
                f.slope_ci.1,
                if f.decays() { "" } else { "  CHECK FAILED" }
            )
        })
        .collect();
    let rows: Vec<Vec<String>> = fits
        .iter()
        .flat_map(|f| {
            f.points.iter().map(move |p| {
                vec![
                    num(f.epsilon),
                    (p.x + 1).to_string(),
                    (p.y + 1).to_string(),
                    p.distance.to_string(),
                    num(p.estimate.mean),
                    num(p.estimate.std_error),
                    num(p.c3),
                ]
            })
        })
        .collect();
    w.csv(
        "ladder_decay.csv",
        &["epsilon", "x", "y", "distance", "eps_green_mean", "eps_green_se", "c3"],
        &rows,
    )?;
    w.json("ladder_decay.json", &DecayOut { passed, fits: &fits })?;
    Ok(Outcome { passed, summary })
}

#[derive(Serialize)]
struct IndependenceOut<'a> {
    passed: bool,
    level: f64,
    reports: &'a [IndependenceReport],
}

fn independence(cfg: &RunConfig, w: &mut Writer) -> Result<Outcome, CliError> {
    let g = load(cfg)?.graph;
    let pi = cfg.pi.profile(g.vertex_count())?;
    let x = Pinning::new(pi, 1.0)?
        .single_site()
        .ok_or_else(|| CliError::config("independence needs a single-site pinning, e.g. --pi delta:1"))?;
    let exp = experiment(cfg);
    let reports = cfg
        .eps
        .iter()
        .enumerate()
        .map(|(k, &e)| independence_test(&g, x, e, &seeded(&exp, cfg.seed, k)))
        .collect::<Result<Vec<_>, _>>()?;
    let level = INDEPENDENCE_LEVEL;
    let passed = reports.iter().all(|r| r.passes(level));
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for r in &reports {
        let mut push = |check: &str, statistic: f64, p: f64| {
            rows.push(vec![
                num(r.eps_x),
                check.to_string(),
                num(statistic),
                num(p),
                (p > level).to_string(),
            ])
        };
        for c in &r.correlations {
            push(&format!("corr {}", c.label), c.result.correlation, c.result.p_value);
        }
        push(&format!("ks t_{}", r.x + 1), r.marginal.statistic, r.marginal.p_value);
        for c in &r.invariance {
            push(&format!("ks2 {}", c.label), c.result.statistic, c.result.p_value);
        }
        summary.push(format!(
            "eps_x {}: {} thinned draws, {}",
            r.eps_x,
            r.draws,
            if r.passes(level) { "all checks pass" } else { "CHECK FAILED" }
        ));
    }
    w.csv("independence.csv", &["eps_x", "check", "statistic", "p_value", "pass"], &rows)?;
    w.json(
        "independence.json",
        &IndependenceOut {
            passed,
            level,
            reports: &reports,
        },
    )?;
    Ok(Outcome { passed, summary })
}
