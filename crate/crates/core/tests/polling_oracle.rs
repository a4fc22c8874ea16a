mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use incest_core::harness::networks::{polling_model, star_poll};
use incest_core::learning::{sample_categorical, sample_observations};
use incest_core::polling::{
    exact_poll_correction, full_information_posterior, posterior_from_incestious,
    run_protocol2, sufficient_extra_nodes,
};
use incest_core::{Belief, PollRun};
use proptest::prelude::*;
use rand::Rng;

fn random_poll(seed: u64, max_nodes: usize) -> (PollRun, Vec<(usize, Vec<f64>)>) {
    let mut r = rng(seed);
    let n = r.random_range(1..=max_nodes);
    let g = random_dag(n, 0.5, &mut r);
    let model = random_model(2, 2, 2, &mut r);
    let ys: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
    let mut recruits: BTreeSet<usize> = (1..n).filter(|_| r.random::<f64>() < 0.4).collect();
    recruits.insert(n);
    let run = PollRun::simulate(g, model, ys, recruits).unwrap();
    let reported = run
        .recruit_beliefs()
        .into_iter()
        .map(|(m, b)| (m, b.probs().to_vec()))
        .collect();
    (run, reported)
}

#[test]
fn protocol2_beliefs_match_direct_products() {
    for seed in 0..50 {
        let (run, _) = random_poll(seed, 7);
        let lib = run_protocol2(&run.graph, &run.model, &run.observations).unwrap();
        let direct = naive_beliefs(&run.graph, &run.model, &run.observations);
        for (a, b) in lib.iter().zip(&direct) {
            assert!(max_abs_diff(a.probs(), b) < 1e-12);
        }
    }
}

#[test]
fn four_node_poll_matches_joint_enumeration() {
    let g = incest_core::InfoFlowGraph::new(4, [(1, 2), (1, 3), (2, 4), (3, 4)]).unwrap();
    let model = polling_model();
    for ys in all_observation_vectors(4, 2) {
        let run = PollRun::simulate(g.clone(), model.clone(), ys, BTreeSet::from([4])).unwrap();
        let post = posterior_from_incestious(&run.graph, &run.model, &run.recruit_beliefs()).unwrap();
        let reported = vec![(4, run.belief(4).probs().to_vec())];
        let oracle = posterior_given_beliefs(&g, &model, &reported);
        assert!(max_abs_diff(post.probs(), &oracle) < 1e-9);
    }
}

/// Over the star poll, the corrected estimate beats the posterior from the
/// raw beliefs, which beats reading off the pollster's most likely state.
#[test]
fn data_processing_ordering_on_the_star_poll() {
    let g = star_poll(6).unwrap();
    let model = incest_core::LearningModel::from_rows(
        vec![vec![0.8, 0.2], vec![0.2, 0.8]],
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        vec![0.5, 0.5],
    )
    .unwrap();
    let recruits: BTreeSet<usize> = (2..=8).collect();
    let extras = sufficient_extra_nodes(&g, &recruits).unwrap();
    let mut r = rng(3);
    let (mut exact, mut incestious, mut naive) = (0.0, 0.0, 0.0);
    for _ in 0..500 {
        let x = sample_categorical(model.prior().probs(), &mut r);
        let ys = sample_observations(model.obs(), x, 8, &mut r);
        let run = PollRun::simulate(g.clone(), model.clone(), ys, recruits.clone()).unwrap();
        let supplied = extras.iter().map(|&m| (m, run.beliefs[m - 1].clone())).collect();
        let corrected = exact_poll_correction(&run, &supplied).unwrap();
        let truth = x as f64 + 1.0;
        exact += (corrected[&8].to_belief().conditional_mean() - truth).powi(2);
        let post = posterior_from_incestious(&g, &model, &run.recruit_beliefs()).unwrap();
        incestious += (post.conditional_mean() - truth).powi(2);
        naive += (run.belief(8).map_state() as f64 + 1.0 - truth).powi(2);
    }
    assert!(exact <= incestious + 1e-12, "{exact} > {incestious}");
    assert!(incestious <= naive, "{incestious} > {naive}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incestious_posterior_matches_enumeration(seed in any::<u64>()) {
        let (run, reported) = random_poll(seed, 6);
        let post = posterior_from_incestious(&run.graph, &run.model, &run.recruit_beliefs()).unwrap();
        let oracle = posterior_given_beliefs(&run.graph, &run.model, &reported);
        prop_assert!(max_abs_diff(post.probs(), &oracle) < 1e-9);
    }

    #[test]
    fn sufficient_extras_recover_full_information(seed in any::<u64>()) {
        let (run, _) = random_poll(seed, 8);
        let extras = sufficient_extra_nodes(&run.graph, &run.recruits).unwrap();
        prop_assert!(extras.is_superset(&run.extra_nodes().unwrap()));
        let supplied: BTreeMap<usize, _> =
            extras.iter().map(|&m| (m, run.beliefs[m - 1].clone())).collect();
        let corrected = exact_poll_correction(&run, &supplied).unwrap();
        for (&n, belief) in &corrected {
            let direct = full_information_posterior(&run.model, &observed_by(&run, n)).unwrap();
            prop_assert!(belief.to_belief().total_variation(&direct) < 1e-9);
        }
    }

    #[test]
    fn linear_identity_holds_on_simulated_runs(seed in any::<u64>()) {
        let (run, _) = random_poll(seed, 8);
        prop_assert!(run.linear_identity_residual().unwrap() < 1e-9);
    }

    #[test]
    fn path_matrix_is_integral_and_counts_self(seed in any::<u64>()) {
        let (run, _) = random_poll(seed, 8);
        let o = run.path_matrix().unwrap();
        for (row, &r) in o.iter().zip(&run.recruits) {
            prop_assert_eq!(row[r - 1], 1);
            for (j, &v) in row.iter().enumerate() {
                prop_assert!(v >= 0);
                prop_assert_eq!(v > 0, j + 1 == r || run.graph.reaches(j + 1, r));
            }
        }
    }
}

/// Observations of `n` and its ancestors in index order.
fn observed_by(run: &PollRun, n: usize) -> Vec<usize> {
    (1..=n)
        .filter(|&m| m == n || run.graph.reaches(m, n))
        .map(|m| run.observations[m - 1])
        .collect()
}

#[test]
fn full_information_is_order_free() {
    let model = polling_model();
    let a = full_information_posterior(&model, &[0, 1, 1]).unwrap();
    let b = full_information_posterior(&model, &[1, 1, 0]).unwrap();
    assert!(a.total_variation(&b) < 1e-15);
    let closed = Belief::from_weights(vec![0.4 * 0.8 * 0.2 * 0.2, 0.6 * 0.2 * 0.8 * 0.8]).unwrap();
    assert!(a.total_variation(&closed) < 1e-15);
}
