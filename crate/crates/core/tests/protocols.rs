mod common;

use common::*;
use incest_core::harness::networks::{corporate, graded_model, mesh, selective_memory};
use incest_core::incest::{fair_fusion, run_protocol1};
use incest_core::{Error, FusionMode, InfoFlowGraph, LearningModel, LogBelief};
use proptest::prelude::*;
use rand::Rng;

/// Checks fused, private and public beliefs of every node against the
/// enumeration oracle at the realization `ys`.
fn assert_matches_oracle(graph: &InfoFlowGraph, model: &LearningModel, oracle: &ActionOracle, ys: &[usize]) {
    let trace = run_protocol1(graph, model, ys, FusionMode::FairRating).unwrap();
    for n in 1..=graph.n_nodes() {
        let rec = trace.record(n);
        let mut nodes = oracle.ancestors(n);
        let fused = oracle.posterior_given_actions(ys, &nodes);
        assert!(
            max_abs_diff(rec.fused_prior.probs(), &fused) < 1e-9,
            "node {n}: {:?} vs {fused:?}",
            rec.fused_prior
        );
        let b = model.obs().rows();
        let private: Vec<f64> = fused.iter().enumerate().map(|(x, p)| p * b[x][ys[n - 1]]).collect();
        let s: f64 = private.iter().sum();
        let private: Vec<f64> = private.iter().map(|p| p / s).collect();
        assert!(max_abs_diff(rec.private.probs(), &private) < 1e-9, "node {n} private");
        assert_eq!(rec.action, oracle.actions[ys.iter().rev().fold(0, |a, &y| a * model.observations() + y)][n - 1]);
        nodes.push(n);
        let public = oracle.posterior_given_actions(ys, &nodes);
        assert!(max_abs_diff(rec.public.probs(), &public) < 1e-9, "node {n} public");
    }
}

#[test]
fn corporate_fair_rating_is_exact_on_a_reduced_model() {
    let g = corporate();
    let mut r = rng(7);
    let model = random_model(2, 2, 2, &mut r);
    let oracle = ActionOracle::new(&g, &model);
    for _ in 0..20 {
        let ys: Vec<usize> = (0..10).map(|_| r.random_range(0..2)).collect();
        assert_matches_oracle(&g, &model, &oracle, &ys);
    }
}

#[test]
fn selective_memory_and_mesh_fair_rating_are_exact() {
    let mut r = rng(11);
    for g in [selective_memory(), mesh()] {
        let model = random_model(3, 2, 3, &mut r);
        let oracle = ActionOracle::new(&g, &model);
        for _ in 0..10 {
            let ys: Vec<usize> = (0..g.n_nodes()).map(|_| r.random_range(0..2)).collect();
            assert_matches_oracle(&g, &model, &oracle, &ys);
        }
    }
}

#[test]
fn naive_fusion_departs_from_the_oracle_on_corporate() {
    // naive fusion double counts node 1 at node 8 whenever node 1 acts informatively
    let g = corporate();
    let model = LearningModel::from_rows(
        vec![vec![0.8, 0.2], vec![0.2, 0.8]],
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        vec![0.5, 0.5],
    )
    .unwrap();
    let oracle = ActionOracle::new(&g, &model);
    let ys = vec![0; 10];
    let naive = run_protocol1(&g, &model, &ys, FusionMode::Naive).unwrap();
    let fused = oracle.posterior_given_actions(&ys, &oracle.ancestors(8));
    assert!(max_abs_diff(naive.record(8).fused_prior.probs(), &fused) > 1e-3);
    assert_matches_oracle(&g, &model, &oracle, &ys);
}

#[test]
fn last_node_subtracts_the_shared_source() {
    let g = selective_memory();
    let w = g.weight_vector(7).unwrap();
    assert_eq!((1..=6).map(|m| w.get(m)).collect::<Vec<_>>(), vec![-1, 0, 0, 0, 1, 1]);
    let l = |v: [f64; 2]| LogBelief::from_logs(v.to_vec()).unwrap();
    let (b1, b5, b6) = (l([-0.1, -2.0]), l([-0.5, -0.9]), l([-1.2, -0.4]));
    let beliefs = [Some(&b1), None, None, None, Some(&b5), Some(&b6)];
    let fused = fair_fusion(w, &beliefs, 2).unwrap();
    let expected = l([-0.5 - 1.2 + 0.1, -0.9 - 0.4 + 2.0]);
    assert!(max_abs_diff(fused.logs(), expected.logs()) < 1e-12);
    let missing = [None, None, None, None, Some(&b5), Some(&b6)];
    assert!(matches!(
        fair_fusion(w, &missing, 2),
        Err(Error::NotAchievable { node: 7, .. })
    ));
}

#[test]
fn removing_the_shortcut_edge_blocks_fair_rating() {
    let edges = selective_memory().edges().into_iter().filter(|&e| e != (1, 7));
    let g = InfoFlowGraph::new(8, edges).unwrap();
    let model = graded_model(2, 2, 2);
    assert!(matches!(
        run_protocol1(&g, &model, &[0; 8], FusionMode::FairRating),
        Err(Error::NotAchievable { node: 7, .. })
    ));
    assert!(run_protocol1(&g, &model, &[0; 8], FusionMode::Naive).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fair_rating_matches_enumeration(seed in any::<u64>(), n in 2usize..=6, p in 0.2f64..0.8) {
        let mut r = rng(seed);
        let g = random_dag(n, p, &mut r);
        prop_assume!(g.all_achievable());
        let model = random_model(r.random_range(2..=3), r.random_range(2..=3), r.random_range(2..=3), &mut r);
        let oracle = ActionOracle::new(&g, &model);
        let ys: Vec<usize> = (0..n).map(|_| r.random_range(0..model.observations())).collect();
        assert_matches_oracle(&g, &model, &oracle, &ys);
    }

    #[test]
    fn prefix_graph_keeps_weights(seed in any::<u64>(), n in 2usize..=9, k in 1usize..=9) {
        let mut r = rng(seed);
        let g = random_dag(n, 0.4, &mut r);
        let k = k.min(n);
        let sub = g.prefix(k).unwrap();
        for m in 1..=k {
            prop_assert_eq!(sub.weight_vector(m).unwrap(), g.weight_vector(m).unwrap());
            prop_assert_eq!(sub.multi_hop_set(m).unwrap(), g.multi_hop_set(m).unwrap());
        }
    }
}
