use sigma_forest::experiments::{
    compare_pinning_sweep, independence_negative_control, independence_test, ladder_decay, one_root_monotonicity,
    ExperimentConfig,
};
use sigma_forest::graph::{build_ladder, Graph, LadderSpec, Pinning};
use sigma_forest::sampler::McmcConfig;

fn cfg(n: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        mcmc: McmcConfig {
            n_samples: n,
            burn_in: 2_000,
            seed,
            sample_trees: false,
            ..McmcConfig::default()
        },
        chains: 4,
        permutations: 999,
        ..ExperimentConfig::default()
    }
}

#[test]
fn one_root_part_grows_as_epsilon_shrinks() {
    let g = Graph::path(2, 1.0).unwrap();
    let r = one_root_monotonicity(&g, &[1.0, 1.0], 0, 1, &[0.2, 0.1, 0.05], &cfg(20_000, 31)).unwrap();
    assert!(r.monotone(), "{r:?}");
    let (first, last) = (r.values[0], r.values[2]);
    assert!(last.mean >= first.mean - 3.0 * (first.std_error.hypot(last.std_error)));

    let single = one_root_monotonicity(&g, &[1.0, 1e-9], 0, 1, &[0.2, 0.1, 0.05], &cfg(20_000, 32)).unwrap();
    assert!(single.monotone(), "{single:?}");
}

#[test]
fn sweep_rows_are_positive_and_bounded() {
    let g = Graph::path(2, 1.0).unwrap();
    let pi = [1.0, 1.0];
    let sweep = compare_pinning_sweep(&g, &pi, 0, 1, &[0.1, 0.05], &cfg(20_000, 33)).unwrap();
    let pinning = Pinning::new(pi.to_vec(), 1.0).unwrap();
    for row in &sweep.rows {
        assert!(row.eps_green.mean > 0.0 && row.single_pin_x.mean > 0.0 && row.single_pin_y.mean > 0.0);
        assert!(row.comparison_holds(3.0), "{row:?}");
        assert!(row.one_root_bound_holds(&pinning, 0, 3.0), "{row:?}");
        assert!(row.ess_min > 1000.0);
    }
    assert!(sweep.eps_green_limit.extrapolated.std_error > 0.0);
}

#[test]
fn ladder_decay_is_reproducible_across_seeds() {
    let spec = LadderSpec::path_base(1, 0, 4, 1.0).unwrap();
    let pairs: Vec<(usize, usize)> = (0..=4).map(|d| (0, d)).filter(|&(x, y)| x != y).collect();
    let a = ladder_decay(&spec, &[1.0; 5], 0.05, &pairs, &cfg(20_000, 34)).unwrap();
    let b = ladder_decay(&spec, &[1.0; 5], 0.05, &pairs, &cfg(20_000, 35)).unwrap();
    assert!(a.decays() && b.decays(), "{a:?} {b:?}");
    let joint = a.slope_se.hypot(b.slope_se);
    assert!((a.slope - b.slope).abs() <= 3.0 * joint, "{} vs {}", a.slope, b.slope);
}

#[test]
fn distance_zero_pair_is_kept_out_of_the_slope() {
    let spec = LadderSpec::path_base(2, 0, 3, 1.0).unwrap();
    let ladder = build_ladder(&spec).unwrap();
    let v = |level, k| ladder.vertex(level, k).unwrap();
    let pairs = [(v(0, 0), v(0, 1)), (v(0, 0), v(1, 0)), (v(0, 0), v(2, 0)), (v(0, 0), v(3, 0))];
    let fit = ladder_decay(&spec, &[1.0; 8], 0.1, &pairs, &cfg(5_000, 36)).unwrap();
    assert_eq!(fit.points.len(), 4);
    assert_eq!(fit.points[0].distance, 0);
    assert_eq!(fit.excluded.len(), 1);
    assert_eq!(fit.points[0].c3, 1.0);
}

#[test]
fn independence_holds_under_single_pinning_only() {
    let g = Graph::path(2, 1.0).unwrap();
    let report = independence_test(&g, 0, 0.5, &cfg(20_000, 37)).unwrap();
    assert!(report.passes(1e-3), "{report:#?}");
    assert!(report.ward.z_score(1.0).abs() <= 3.0);
    let control = independence_negative_control(&g, 0, 0.5, &cfg(20_000, 38)).unwrap();
    assert!(control.rejects(1e-3), "{control:#?}");
}
