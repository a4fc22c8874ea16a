//! Brute-force oracles and random fixtures shared by the integration tests.
//!
//! The oracles enumerate joint outcomes directly and share no code with the
//! library beyond the model and graph containers.

#![allow(dead_code)]

use std::collections::HashMap;

use incest_core::{Belief, InfoFlowGraph, LearningModel};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Lowest-index minimizer with the same relative tie slack as the library.
pub fn argmin_cost(posterior: &[f64], cost: &[Vec<f64>]) -> usize {
    let actions = cost[0].len();
    let costs: Vec<f64> = (0..actions)
        .map(|a| posterior.iter().zip(cost).map(|(p, row)| p * row[a]).sum())
        .collect();
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = 1e-12 * min.abs().max(1.0);
    costs.iter().position(|&c| c <= min + slack).unwrap()
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

/// Every observation vector in lexicographic order.
pub fn all_observation_vectors(nodes: usize, ys: usize) -> Vec<Vec<usize>> {
    let total = ys.pow(nodes as u32);
    (0..total)
        .map(|mut code| {
            let mut v = vec![0; nodes];
            for slot in v.iter_mut() {
                *slot = code % ys;
                code /= ys;
            }
            v
        })
        .collect()
}

fn joint_weights(model: &LearningModel, ys: &[usize]) -> Vec<f64> {
    let prior = model.prior().probs();
    let b = model.obs().rows();
    (0..model.states())
        .map(|x| prior[x] * ys.iter().map(|&y| b[x][y]).product::<f64>())
        .collect()
}

/// Posteriors over the state given the actions of each node's ancestors and
/// given those actions plus the node's own, when every node acts on the exact
/// posterior given its observation and its ancestors' actions.
pub struct ActionOracle {
    /// `actions[v][m - 1]`: action of node `m` under observation vector `v`.
    pub actions: Vec<Vec<usize>>,
    pub vectors: Vec<Vec<usize>>,
    model: LearningModel,
    graph: InfoFlowGraph,
}

impl ActionOracle {
    pub fn new(graph: &InfoFlowGraph, model: &LearningModel) -> Self {
        let n = graph.n_nodes();
        let vectors = all_observation_vectors(n, model.observations());
        let weights: Vec<Vec<f64>> = vectors.iter().map(|v| joint_weights(model, v)).collect();
        let mut actions = vec![vec![0usize; n]; vectors.len()];
        for m in 1..=n {
            let ancestors = ancestors(graph, m);
            let mut table: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
            let keys: Vec<Vec<usize>> = vectors
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let mut key: Vec<usize> = ancestors.iter().map(|&j| actions[i][j - 1]).collect();
                    key.push(v[m - 1]);
                    key
                })
                .collect();
            for (key, w) in keys.iter().zip(&weights) {
                let acc = table.entry(key.clone()).or_insert_with(|| vec![0.0; w.len()]);
                for (a, x) in acc.iter_mut().zip(w) {
                    *a += x;
                }
            }
            for (i, key) in keys.iter().enumerate() {
                let post = normalize(&table[key]);
                actions[i][m - 1] = argmin_cost(&post, model.cost().rows());
            }
        }
        Self {
            actions,
            vectors,
            model: model.clone(),
            graph: graph.clone(),
        }
    }

    fn index_of(&self, ys: &[usize]) -> usize {
        let base = self.model.observations();
        ys.iter().rev().fold(0, |acc, &y| acc * base + y)
    }

    /// `P(x | actions of the given nodes)` at the realization `ys`.
    pub fn posterior_given_actions(&self, ys: &[usize], nodes: &[usize]) -> Vec<f64> {
        let target = &self.actions[self.index_of(ys)];
        let mut acc = vec![0.0; self.model.states()];
        for (i, v) in self.vectors.iter().enumerate() {
            if nodes.iter().all(|&j| self.actions[i][j - 1] == target[j - 1]) {
                for (a, w) in acc.iter_mut().zip(joint_weights(&self.model, v)) {
                    *a += w;
                }
            }
        }
        normalize(&acc)
    }

    pub fn ancestors(&self, n: usize) -> Vec<usize> {
        ancestors(&self.graph, n)
    }
}

pub fn ancestors(graph: &InfoFlowGraph, n: usize) -> Vec<usize> {
    (1..n).filter(|&j| graph.reaches(j, n)).collect()
}

/// Beliefs formed by multiplying parents' beliefs (the prior at a root) and
/// then the own observation likelihood.
pub fn naive_beliefs(graph: &InfoFlowGraph, model: &LearningModel, ys: &[usize]) -> Vec<Vec<f64>> {
    let b = model.obs().rows();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for n in 1..=ys.len() {
        let parents: Vec<usize> = (1..n).filter(|&m| graph.has_edge(m, n)).collect();
        let mut fused = if parents.is_empty() {
            model.prior().probs().to_vec()
        } else {
            normalize(
                &(0..model.states())
                    .map(|x| parents.iter().map(|&m| out[m - 1][x]).product())
                    .collect::<Vec<f64>>(),
            )
        };
        for (x, f) in fused.iter_mut().enumerate() {
            *f *= b[x][ys[n - 1]];
        }
        out.push(normalize(&fused));
    }
    out
}

/// `P(x | recruits hold these beliefs)` by enumerating every observation
/// vector of nodes `1..=pollster`.
pub fn posterior_given_beliefs(
    graph: &InfoFlowGraph,
    model: &LearningModel,
    reported: &[(usize, Vec<f64>)],
) -> Vec<f64> {
    let pollster = reported.iter().map(|r| r.0).max().unwrap();
    let mut acc = vec![0.0; model.states()];
    for v in all_observation_vectors(pollster, model.observations()) {
        let beliefs = naive_beliefs(graph, model, &v);
        let matches = reported.iter().all(|(m, target)| {
            let tv: f64 = beliefs[m - 1].iter().zip(target).map(|(a, b)| (a - b).abs()).sum();
            tv / 2.0 <= 1e-9
        });
        if matches {
            for (a, w) in acc.iter_mut().zip(joint_weights(model, &v)) {
                *a += w;
            }
        }
    }
    normalize(&acc)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random DAG on `n` nodes with edge probability `p`.
pub fn random_dag<R: Rng>(n: usize, p: f64, rng: &mut R) -> InfoFlowGraph {
    let edges: Vec<(usize, usize)> = (1..=n)
        .flat_map(|i| (i + 1..=n).map(move |j| (i, j)))
        .filter(|_| rng.random::<f64>() < p)
        .collect();
    InfoFlowGraph::new(n, edges).unwrap()
}

fn random_simplex<R: Rng>(k: usize, floor: f64, rng: &mut R) -> Vec<f64> {
    normalize(&(0..k).map(|_| floor + rng.random::<f64>()).collect::<Vec<_>>())
}

/// Random model with strictly positive likelihoods and prior.
pub fn random_model<R: Rng>(states: usize, ys: usize, actions: usize, rng: &mut R) -> LearningModel {
    let b = (0..states).map(|_| random_simplex(ys, 0.05, rng)).collect();
    let cost = (0..states)
        .map(|_| (0..actions).map(|_| rng.random::<f64>() * 4.0).collect())
        .collect();
    LearningModel::from_rows(b, cost, random_simplex(states, 0.1, rng)).unwrap()
}

/// TP2 likelihoods `exp(theta_x phi_y)` with increasing `theta` and `phi`,
/// and a cost `f(x) + g(a) - alpha_x beta_a` with increasing `alpha`, `beta`,
/// which has decreasing differences.
pub fn random_monotone_model<R: Rng>(
    states: usize,
    ys: usize,
    actions: usize,
    rng: &mut R,
) -> LearningModel {
    let increasing = |k: usize, rng: &mut R| -> Vec<f64> {
        let mut acc = rng.random::<f64>();
        (0..k)
            .map(|_| {
                acc += 0.1 + rng.random::<f64>();
                acc
            })
            .collect()
    };
    let theta = increasing(states, rng);
    let phi = increasing(ys, rng);
    let b = theta
        .iter()
        .map(|t| normalize(&phi.iter().map(|p| (t * p * 0.5).exp()).collect::<Vec<_>>()))
        .collect();
    let alpha = increasing(states, rng);
    let beta = increasing(actions, rng);
    let f: Vec<f64> = (0..states).map(|_| rng.random::<f64>()).collect();
    let g: Vec<f64> = beta.iter().map(|b| b * b / 2.0 + rng.random::<f64>()).collect();
    let cost = (0..states)
        .map(|x| (0..actions).map(|a| f[x] + g[a] - alpha[x] * beta[a]).collect())
        .collect();
    LearningModel::from_rows(b, cost, random_simplex(states, 0.1, rng)).unwrap()
}

pub fn random_belief<R: Rng>(states: usize, rng: &mut R) -> Belief {
    Belief::new(random_simplex(states, 0.01, rng)).unwrap()
}

/// A belief MLR-dominating `p`: reweights by an increasing positive ratio.
pub fn mlr_above<R: Rng>(p: &Belief, rng: &mut R) -> Belief {
    let mut r = 1.0;
    let w: Vec<f64> = p
        .probs()
        .iter()
        .map(|x| {
            let v = x * r;
            r *= 1.0 + 2.0 * rng.random::<f64>();
            v
        })
        .collect();
    Belief::from_weights(w).unwrap()
}
