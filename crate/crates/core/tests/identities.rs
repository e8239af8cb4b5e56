use proptest::prelude::*;
use sigma_forest::forests::{connected_in_forest, enumerate_spanning_trees, tree_law};
use sigma_forest::graph::{augment, Graph, Pinning};
use sigma_forest::linalg::green_entry;
use sigma_forest::observables::{green_conditional, multi_root_possible, obs_q, q_prefactor};
use sigma_forest::oracle::{self, bundled_corpus, identity, random_instances, run_suite};
use sigma_forest::parallel::Execution;

#[test]
fn bundled_corpus_satisfies_every_identity() {
    let report = run_suite(&bundled_corpus(7, 11).unwrap(), Execution::Parallel).unwrap();
    let failures: Vec<_> = report.failures().take(5).collect();
    assert!(failures.is_empty(), "{failures:#?}");
    assert_eq!(report.count(identity::MATRIX_TREE), 300);
}

#[test]
fn random_instances_satisfy_every_identity() {
    let report = run_suite(&random_instances(50, 6, 12).unwrap(), Execution::Sequential).unwrap();
    for id in [identity::MATRIX_TREE, identity::MINOR_FOREST, identity::GREEN_XY, identity::GREEN_YX] {
        assert!(report.count(id) > 0);
        assert!(report.max_gap(id) <= oracle::RELATIVE_TOLERANCE, "{id}: {}", report.max_gap(id));
    }
    assert!(report.all_pass());
}

#[test]
fn green_conditional_matches_matrix_on_small_graphs() {
    for inst in random_instances(30, 6, 13).unwrap() {
        let n = inst.ag.vertex_count();
        for x in 0..n {
            for y in (0..n).filter(|&y| y != x) {
                if inst.ag.eps(x) + inst.ag.eps(y) == 0.0 {
                    continue;
                }
                let a = green_conditional(&inst.ag, &inst.t, x, y).unwrap();
                let b = green_entry(&inst.ag, &inst.t, x, y).unwrap();
                assert!(oracle::within_tolerance(a, b), "{}: {a} vs {b}", inst.name);
            }
        }
    }
}

fn small_instance() -> impl Strategy<Value = (Graph, Vec<f64>, Vec<f64>)> {
    (2usize..6).prop_flat_map(|n| {
        let extra = proptest::collection::vec(any::<bool>(), n * (n - 1) / 2);
        let parents = proptest::collection::vec(0usize..1000, n - 1);
        let pi = proptest::collection::vec(prop_oneof![Just(0.0), 0.1f64..2.0], n);
        let t = proptest::collection::vec(-4.0f64..4.0, n);
        (Just(n), parents, extra, pi, t).prop_map(|(n, parents, extra, mut pi, t)| {
            let mut edges: Vec<(usize, usize, f64)> =
                (1..n).map(|i| (parents[i - 1] % i, i, 1.0)).collect();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if extra[k] && !edges.iter().any(|&(a, b, _)| (a, b) == (i, j)) {
                        edges.push((i, j, 0.5 + (k % 3) as f64));
                    }
                    k += 1;
                }
            }
            pi[0] = 1.0;
            (Graph::new(n, &edges).unwrap(), pi, t)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multi_root_possibility_matches_enumeration((g, pi, _t) in small_instance()) {
        let ag = augment(&g, &Pinning::new(pi, 0.5).unwrap()).unwrap();
        let trees = enumerate_spanning_trees(&ag).unwrap();
        let n = g.vertex_count();
        for x in 0..n {
            for y in (0..n).filter(|&y| y != x) {
                let seen = trees.iter().any(|tr| {
                    tr.has_root(x) && tr.root_count() > 1 && connected_in_forest(tr, x, y)
                });
                prop_assert_eq!(multi_root_possible(&ag, x, y).unwrap(), seen);
            }
        }
    }

    #[test]
    fn root_events_are_disjoint_and_q_is_bounded((g, pi, t) in small_instance()) {
        let ag = augment(&g, &Pinning::new(pi, 0.3).unwrap()).unwrap();
        let law = tree_law(&ag, &t).unwrap();
        let q_pi = vec![1.0; g.vertex_count()];
        let (x, y) = (0, g.vertex_count() - 1);
        let bound = (t[x].exp() / q_pi[y]).min(t[y].exp() / q_pi[x]);
        prop_assert!(q_prefactor(&t, x, y, &q_pi).unwrap() <= bound * (1.0 + 1e-12));
        for tr in law.trees() {
            let a = tr.has_root(x) && connected_in_forest(tr, x, y);
            let b = tr.has_root(y) && connected_in_forest(tr, x, y);
            prop_assert!(!(a && b));
            prop_assert!(obs_q(&t, tr, x, y, &q_pi).unwrap() <= bound * (1.0 + 1e-12));
        }
        let total: f64 = law.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
