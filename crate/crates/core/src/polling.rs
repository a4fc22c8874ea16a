//! Belief-based expectation polling: nodes multiply their friends' beliefs
//! and update with their own observation; a pollster reads the beliefs of a
//! recruited set of nodes.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::belief::{Belief, LogBelief};
use crate::error::{Error, Result};
use crate::exact::{solve_integer_system, to_f64};
use crate::graph::InfoFlowGraph;
use crate::incest::naive_fusion_log;
use crate::learning::{bayes_private_log, LearningModel};

/// Largest number of candidate observation sequences the posterior
/// enumeration will visit.
pub const ENUMERATION_LIMIT: f64 = 1e7;
/// Total-variation distance below which replayed and reported beliefs match.
pub const MATCH_TOLERANCE: f64 = 1e-9;

/// Belief of every node under naive multiplication plus private update.
pub fn run_protocol2_log(
    graph: &InfoFlowGraph,
    model: &LearningModel,
    observations: &[usize],
) -> Result<Vec<LogBelief>> {
    if observations.len() != graph.n_nodes() {
        return Err(Error::Domain(format!(
            "{} observations for {} nodes",
            observations.len(),
            graph.n_nodes()
        )));
    }
    let prior = model.prior().to_log();
    let mut beliefs: Vec<LogBelief> = Vec::with_capacity(graph.n_nodes());
    for n in 1..=graph.n_nodes() {
        let refs: Vec<&LogBelief> = graph.one_hop_set(n)?.iter().map(|&m| &beliefs[m - 1]).collect();
        let fused = naive_fusion_log(&refs, &prior)?;
        beliefs.push(bayes_private_log(&fused, observations[n - 1], model.obs())?);
    }
    Ok(beliefs)
}

pub fn run_protocol2(
    graph: &InfoFlowGraph,
    model: &LearningModel,
    observations: &[usize],
) -> Result<Vec<Belief>> {
    Ok(run_protocol2_log(graph, model, observations)?
        .iter()
        .map(LogBelief::to_belief)
        .collect())
}

/// One poll: the network, its beliefs and the recruited nodes.
#[derive(Debug, Clone)]
pub struct PollRun {
    pub graph: InfoFlowGraph,
    pub model: LearningModel,
    pub observations: Vec<usize>,
    pub beliefs: Vec<LogBelief>,
    pub recruits: BTreeSet<usize>,
}

impl PollRun {
    pub fn simulate(
        graph: InfoFlowGraph,
        model: LearningModel,
        observations: Vec<usize>,
        recruits: BTreeSet<usize>,
    ) -> Result<Self> {
        check_recruits(&graph, &recruits)?;
        let beliefs = run_protocol2_log(&graph, &model, &observations)?;
        Ok(Self {
            graph,
            model,
            observations,
            beliefs,
            recruits,
        })
    }

    pub fn pollster(&self) -> usize {
        *self.recruits.last().expect("recruits are nonempty")
    }

    pub fn belief(&self, node: usize) -> Belief {
        self.beliefs[node - 1].to_belief()
    }

    /// Beliefs reported by the recruits.
    pub fn recruit_beliefs(&self) -> BTreeMap<usize, Belief> {
        self.recruits.iter().map(|&r| (r, self.belief(r))).collect()
    }

    /// Nodes whose beliefs must be sampled in addition to the recruits.
    pub fn extra_nodes(&self) -> Result<BTreeSet<usize>> {
        self.graph.minimal_extra_nodes(&self.recruits)
    }

    /// Rows `O(r, j)` = number of paths from `j` to recruit `r` (1 on `j = r`).
    pub fn path_matrix(&self) -> Result<Vec<Vec<i128>>> {
        let paths = self.graph.path_counts()?;
        Ok(self
            .recruits
            .iter()
            .map(|&r| (0..self.graph.n_nodes()).map(|j| paths[j][r - 1]).collect())
            .collect())
    }

    /// Largest deviation from the linear identity
    /// `O o(x) = l_R(x) - rho l_0(x)` over recruits and state pairs, where
    /// `o(x)` stacks the per-node observation log-likelihoods and `rho`
    /// counts root-to-recruit paths. Differences across states remove the
    /// normalizing constants.
    pub fn linear_identity_residual(&self) -> Result<f64> {
        let o = self.path_matrix()?;
        let rho = root_path_counts(&self.graph)?;
        let l0 = self.model.prior().to_log();
        let states = self.model.states();
        let obs_log = |x: usize| -> Vec<f64> {
            self.observations
                .iter()
                .map(|&y| self.model.obs().log_likelihood(y)[x])
                .collect()
        };
        let mut worst: f64 = 0.0;
        for (row, &r) in o.iter().zip(&self.recruits) {
            let side = |x: usize| -> (f64, f64) {
                let lhs: f64 = row.iter().zip(obs_log(x)).map(|(&c, v)| c as f64 * v).sum();
                let rhs = self.beliefs[r - 1].logs()[x] - rho[r - 1] as f64 * l0.logs()[x];
                (lhs, rhs)
            };
            let (lhs0, rhs0) = side(0);
            for x in 1..states {
                let (lhs, rhs) = side(x);
                let dev = ((lhs - lhs0) - (rhs - rhs0)).abs();
                if dev.is_nan() {
                    continue;
                }
                worst = worst.max(dev);
            }
        }
        Ok(worst)
    }
}

fn check_recruits(graph: &InfoFlowGraph, recruits: &BTreeSet<usize>) -> Result<()> {
    let Some(&pollster) = recruits.last() else {
        return Err(Error::Domain("recruit set is empty".into()));
    };
    if let Some(&bad) = recruits.iter().find(|&&r| r == 0 || r > graph.n_nodes()) {
        return Err(Error::NodeOutOfRange {
            node: bad,
            n_nodes: graph.n_nodes(),
        });
    }
    if !graph.children(pollster)?.is_empty() {
        return Err(Error::Domain(format!(
            "pollster {pollster} must not have outgoing edges"
        )));
    }
    Ok(())
}

/// Number of paths from any root to each node; roots count themselves once.
pub fn root_path_counts(graph: &InfoFlowGraph) -> Result<Vec<i128>> {
    let paths = graph.path_counts()?;
    let roots = graph.roots();
    (0..graph.n_nodes())
        .map(|m| {
            roots.iter().try_fold(0i128, |acc, &r| {
                acc.checked_add(paths[r - 1][m])
                    .ok_or(Error::Overflow("root path counts"))
            })
        })
        .collect()
}

/// Coefficients `c_m` over the sampled ancestors of `n` (and `n` itself)
/// with `sum_m c_m P(j, m) = 1` for every `j` in the ancestry of `n`.
fn correction_coefficients(
    graph: &InfoFlowGraph,
    paths: &[Vec<i128>],
    sampled: &BTreeSet<usize>,
    n: usize,
) -> Option<(Vec<usize>, Vec<BigRational>)> {
    let in_scope = |m: usize| m == n || graph.reaches(m, n);
    let used: Vec<usize> = sampled.iter().copied().filter(|&m| in_scope(m)).collect();
    let matrix: Vec<Vec<i128>> = (1..=n)
        .filter(|&j| in_scope(j))
        .map(|j| used.iter().map(|&m| paths[j - 1][m - 1]).collect())
        .collect();
    let rhs = vec![1i128; matrix.len()];
    solve_integer_system(&matrix, &rhs).map(|c| (used, c))
}

/// Incest-free log belief at every recruit, reconstructed from the recruits'
/// beliefs and those of extra voters.
///
/// For recruit `n` the sampled beliefs `L_m` of ancestors (and `n` itself)
/// are combined as `sum c_m L_m + (1 - sum c_m rho_m) l_0`, where the
/// coefficients solve `sum_m c_m P(j, m) = [j reaches n or j = n]` exactly.
/// Every node of [`PollRun::extra_nodes`] must be supplied; further supplied
/// beliefs are used when those alone do not determine the posterior.
pub fn exact_poll_correction(
    run: &PollRun,
    extra_beliefs: &BTreeMap<usize, LogBelief>,
) -> Result<BTreeMap<usize, LogBelief>> {
    let extras = run.extra_nodes()?;
    if let Some(&node) = extras.iter().find(|m| !extra_beliefs.contains_key(m)) {
        return Err(Error::MissingBelief { node });
    }
    if let Some(&bad) = extra_beliefs.keys().find(|&&m| m == 0 || m > run.graph.n_nodes()) {
        return Err(Error::NodeOutOfRange {
            node: bad,
            n_nodes: run.graph.n_nodes(),
        });
    }
    let available: BTreeSet<usize> = run
        .recruits
        .iter()
        .chain(extra_beliefs.keys())
        .copied()
        .collect();
    let belief_of = |m: usize| -> &LogBelief {
        if run.recruits.contains(&m) {
            &run.beliefs[m - 1]
        } else {
            &extra_beliefs[&m]
        }
    };
    let paths = run.graph.path_counts()?;
    let rho = root_path_counts(&run.graph)?;
    let l0 = run.model.prior().to_log();
    let states = run.model.states();

    let mut out = BTreeMap::new();
    for &n in &run.recruits {
        let (used, coeffs) = correction_coefficients(&run.graph, &paths, &available, n)
            .ok_or(Error::InsufficientBeliefs { node: n })?;
        let mut prior_coeff = BigRational::one();
        let mut acc = vec![0.0; states];
        for (&m, c) in used.iter().zip(&coeffs) {
            if c.is_zero() {
                continue;
            }
            prior_coeff -= c * BigRational::from_integer(rho[m - 1].into());
            accumulate(&mut acc, belief_of(m).logs(), to_f64(c));
        }
        accumulate(&mut acc, l0.logs(), to_f64(&prior_coeff));
        out.insert(n, LogBelief::from_logs(acc)?);
    }
    Ok(out)
}

/// Candidate pools above this size skip the exhaustive search and sample
/// every remaining ancestor.
const EXHAUSTIVE_EXTRA_LIMIT: usize = 16;

/// Smallest superset of [`InfoFlowGraph::minimal_extra_nodes`] whose beliefs,
/// together with the recruits', determine the incest-free posterior of every
/// recruit when beliefs are formed by naive multiplication.
///
/// The weight-based set alone can fall short: on `1 -> 2 -> 3` plus `1 -> 3`
/// the pollster 3 double counts node 1 through node 2, so node 1's belief is
/// needed as well.
pub fn sufficient_extra_nodes(
    graph: &InfoFlowGraph,
    recruits: &BTreeSet<usize>,
) -> Result<BTreeSet<usize>> {
    check_recruits(graph, recruits)?;
    let base = graph.minimal_extra_nodes(recruits)?;
    let paths = graph.path_counts()?;
    let sampled: BTreeSet<usize> = recruits.union(&base).copied().collect();
    let solvable = |set: &BTreeSet<usize>| {
        recruits
            .iter()
            .all(|&n| correction_coefficients(graph, &paths, set, n).is_some())
    };
    if solvable(&sampled) {
        return Ok(base);
    }
    let candidates: Vec<usize> = (1..=graph.n_nodes())
        .filter(|m| !sampled.contains(m) && recruits.iter().any(|&r| graph.reaches(*m, r)))
        .collect();
    if candidates.len() <= EXHAUSTIVE_EXTRA_LIMIT {
        for size in 1..=candidates.len() {
            for mask in 0u32..(1 << candidates.len()) {
                if mask.count_ones() as usize != size {
                    continue;
                }
                let mut trial = sampled.clone();
                trial.extend(
                    candidates
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| mask >> k & 1 == 1)
                        .map(|(_, &m)| m),
                );
                if solvable(&trial) {
                    return Ok(trial.difference(recruits).copied().collect());
                }
            }
        }
    }
    // every ancestor sampled: each system is unit triangular
    Ok(base.into_iter().chain(candidates).collect())
}

fn accumulate(acc: &mut [f64], logs: &[f64], w: f64) {
    if w == 0.0 {
        return;
    }
    for (a, l) in acc.iter_mut().zip(logs) {
        *a = if *l == f64::NEG_INFINITY || *a == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            *a + w * l
        };
    }
}

/// Posterior over the state given only the recruits' (incest-contaminated)
/// beliefs.
///
/// Enumerates observation sequences for nodes `1..=pollster`, keeping those
/// whose replay reproduces every recruit belief, and sums their prior-weighted
/// likelihoods per state. Branches are pruned as soon as a recruit mismatches.
pub fn posterior_from_incestious(
    graph: &InfoFlowGraph,
    model: &LearningModel,
    recruit_beliefs: &BTreeMap<usize, Belief>,
) -> Result<Belief> {
    let recruits: BTreeSet<usize> = recruit_beliefs.keys().copied().collect();
    check_recruits(graph, &recruits)?;
    let pollster = *recruits.last().expect("checked nonempty");
    let ys = model.observations();
    let candidates = (ys as f64).powi(pollster as i32);
    if candidates > ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            candidates,
            limit: ENUMERATION_LIMIT,
        });
    }
    for b in recruit_beliefs.values() {
        if b.len() != model.states() {
            return Err(Error::InvalidBelief("recruit belief length does not match model".into()));
        }
    }
    let parents: Vec<Vec<usize>> = (1..=pollster)
        .map(|n| graph.one_hop_set(n).map(|s| s.into_iter().collect()))
        .collect::<Result<_>>()?;
    let mut search = Search {
        model,
        parents: &parents,
        targets: recruit_beliefs,
        prior: model.prior().to_log(),
        beliefs: Vec::with_capacity(pollster),
        total: vec![0.0; model.states()],
    };
    let start: Vec<f64> = model.prior().probs().to_vec();
    search.descend(1, &start);
    if search.total.iter().all(|&t| t == 0.0) {
        return Err(Error::InconsistentBeliefs);
    }
    Belief::from_weights(search.total)
}

struct Search<'a> {
    model: &'a LearningModel,
    parents: &'a [Vec<usize>],
    targets: &'a BTreeMap<usize, Belief>,
    prior: LogBelief,
    /// Replayed beliefs of nodes `1..n`.
    beliefs: Vec<LogBelief>,
    total: Vec<f64>,
}

impl Search<'_> {
    /// `joint[x]` is `pi_0(x)` times the likelihood of the observations so far.
    fn descend(&mut self, n: usize, joint: &[f64]) {
        if n > self.parents.len() {
            for (t, j) in self.total.iter_mut().zip(joint) {
                *t += j;
            }
            return;
        }
        let refs: Vec<&LogBelief> = self.parents[n - 1].iter().map(|&m| &self.beliefs[m - 1]).collect();
        let Ok(fused) = naive_fusion_log(&refs, &self.prior) else {
            return;
        };
        for y in 0..self.model.observations() {
            let Ok(belief) = bayes_private_log(&fused, y, self.model.obs()) else {
                continue;
            };
            if let Some(target) = self.targets.get(&n) {
                if belief.to_belief().total_variation(target) > MATCH_TOLERANCE {
                    continue;
                }
            }
            let next: Vec<f64> = joint
                .iter()
                .enumerate()
                .map(|(x, j)| j * self.model.obs().prob(x, y))
                .collect();
            self.beliefs.push(belief);
            self.descend(n + 1, &next);
            self.beliefs.pop();
        }
    }
}

/// `P(x | y_1..y_n)` for the first `n` observations.
pub fn full_information_posterior(model: &LearningModel, observations: &[usize]) -> Result<Belief> {
    let mut l = model.prior().to_log();
    for &y in observations {
        l = bayes_private_log(&l, y, model.obs())?;
    }
    Ok(l.to_belief())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(prior: [f64; 2]) -> LearningModel {
        LearningModel::from_rows(
            vec![vec![0.8, 0.2], vec![0.2, 0.8]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            prior.to_vec(),
        )
        .unwrap()
    }

    fn star(leaves: usize) -> InfoFlowGraph {
        let hub = leaves + 2;
        let edges = (2..=leaves + 1).flat_map(|k| [(1, k), (k, hub)]);
        InfoFlowGraph::new(hub, edges).unwrap()
    }

    fn extreme_run() -> PollRun {
        PollRun::simulate(
            star(6),
            model([0.5, 0.5]),
            vec![1, 0, 0, 0, 0, 0, 0, 1],
            (2..=8).collect(),
        )
        .unwrap()
    }

    #[test]
    fn star_poll_naive_belief() {
        let run = extreme_run();
        assert!((run.belief(8).get(0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn star_poll_exact_correction() {
        let run = extreme_run();
        assert_eq!(run.extra_nodes().unwrap(), BTreeSet::from([1]));
        let extras = BTreeMap::from([(1, run.beliefs[0].clone())]);
        let corrected = exact_poll_correction(&run, &extras).unwrap();
        let p = corrected[&8].to_belief().get(0);
        assert!((p - 256.0 / 257.0).abs() < 1e-12, "{p}");
        let direct = full_information_posterior(&run.model, &run.observations).unwrap();
        assert!((direct.get(0) - p).abs() < 1e-12);
    }

    #[test]
    fn missing_extra_belief_is_named() {
        let run = extreme_run();
        assert!(matches!(
            exact_poll_correction(&run, &BTreeMap::new()),
            Err(Error::MissingBelief { node: 1 })
        ));
    }

    #[test]
    fn weight_based_extras_can_fall_short() {
        let g = InfoFlowGraph::new(3, [(1, 2), (1, 3), (2, 3)]).unwrap();
        let recruits = BTreeSet::from([3]);
        assert_eq!(g.minimal_extra_nodes(&recruits).unwrap(), BTreeSet::from([2]));
        let run = PollRun::simulate(g.clone(), model([0.4, 0.6]), vec![0, 1, 0], recruits.clone())
            .unwrap();
        let only_two = BTreeMap::from([(2, run.beliefs[1].clone())]);
        assert!(matches!(
            exact_poll_correction(&run, &only_two),
            Err(Error::InsufficientBeliefs { node: 3 })
        ));
        let needed = sufficient_extra_nodes(&g, &recruits).unwrap();
        assert_eq!(needed, BTreeSet::from([1, 2]));
        let supplied = needed.iter().map(|&m| (m, run.beliefs[m - 1].clone())).collect();
        let corrected = exact_poll_correction(&run, &supplied).unwrap();
        let direct = full_information_posterior(&run.model, &run.observations).unwrap();
        assert!(corrected[&3].to_belief().total_variation(&direct) < 1e-12);
    }

    #[test]
    fn star_needs_only_the_source() {
        let run = extreme_run();
        assert_eq!(
            sufficient_extra_nodes(&run.graph, &run.recruits).unwrap(),
            BTreeSet::from([1])
        );
    }

    #[test]
    fn star_poll_incestious_posterior() {
        let run = extreme_run();
        let only_pollster = BTreeMap::from([(8, run.belief(8))]);
        let p = posterior_from_incestious(&run.graph, &run.model, &only_pollster).unwrap();
        // The pollster's log-odds pin 6 s_1 + s_2 + ... + s_8 = -1 (s = +-1 per
        // observation): either s_1 = +1 and all others -1, or s_1 = -1 and
        // exactly one of the other seven is -1.
        let first = 0.8 * 0.2f64.powi(7) + 7.0 * 0.2f64.powi(2) * 0.8f64.powi(6);
        let second = 0.2 * 0.8f64.powi(7) + 7.0 * 0.8f64.powi(2) * 0.2f64.powi(6);
        assert!((p.get(0) - first / (first + second)).abs() < 1e-12, "{}", p.get(0));
    }

    #[test]
    fn tree_poll_needs_no_correction() {
        let g = InfoFlowGraph::new(3, [(1, 2), (2, 3)]).unwrap();
        let run = PollRun::simulate(g, model([0.4, 0.6]), vec![0, 1, 0], BTreeSet::from([1, 2, 3]))
            .unwrap();
        assert!(run.extra_nodes().unwrap().is_empty());
        let corrected = exact_poll_correction(&run, &BTreeMap::new()).unwrap();
        for (&r, l) in &corrected {
            assert!(l.to_belief().total_variation(&run.belief(r)) < 1e-12);
        }
    }

    #[test]
    fn chain_pollster_needs_its_parent() {
        let g = InfoFlowGraph::new(3, [(1, 2), (2, 3)]).unwrap();
        let run =
            PollRun::simulate(g, model([0.4, 0.6]), vec![0, 1, 1], BTreeSet::from([3])).unwrap();
        assert_eq!(run.extra_nodes().unwrap(), BTreeSet::from([2]));
        let extras = BTreeMap::from([(2, run.beliefs[1].clone())]);
        let corrected = exact_poll_correction(&run, &extras).unwrap();
        let direct = full_information_posterior(&run.model, &run.observations).unwrap();
        assert!(corrected[&3].to_belief().total_variation(&direct) < 1e-12);
    }

    #[test]
    fn chain_is_sequential_bayes() {
        let g = InfoFlowGraph::new(2, [(1, 2)]).unwrap();
        let m = model([0.4, 0.6]);
        let beliefs = run_protocol2(&g, &m, &[0, 1]).unwrap();
        let direct = full_information_posterior(&m, &[0, 1]).unwrap();
        assert!(beliefs[1].total_variation(&direct) < 1e-15);
    }

    #[test]
    fn single_node_poll_recovers_observation_posterior() {
        let g = InfoFlowGraph::empty(1);
        let m = model([0.4, 0.6]);
        let beliefs = run_protocol2(&g, &m, &[1]).unwrap();
        let post =
            posterior_from_incestious(&g, &m, &BTreeMap::from([(1, beliefs[0].clone())])).unwrap();
        assert!(post.total_variation(&beliefs[0]) < 1e-12);
    }

    #[test]
    fn inconsistent_beliefs_are_rejected() {
        let g = InfoFlowGraph::empty(1);
        let m = model([0.4, 0.6]);
        let bogus = BTreeMap::from([(1, Belief::new(vec![0.5, 0.5]).unwrap())]);
        assert!(matches!(
            posterior_from_incestious(&g, &m, &bogus),
            Err(Error::InconsistentBeliefs)
        ));
    }

    #[test]
    fn capacity_limit() {
        let g = InfoFlowGraph::empty(30);
        let m = model([0.5, 0.5]);
        let beliefs = BTreeMap::from([(30, Belief::uniform(2))]);
        assert!(matches!(
            posterior_from_incestious(&g, &m, &beliefs),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn linear_identity_holds_on_star() {
        let run = extreme_run();
        assert!(run.linear_identity_residual().unwrap() < 1e-9);
        let o = run.path_matrix().unwrap();
        assert_eq!(o.last().unwrap()[0], 6);
    }

    #[test]
    fn pollster_must_be_a_sink() {
        let g = InfoFlowGraph::new(2, [(1, 2)]).unwrap();
        assert!(PollRun::simulate(g, model([0.5, 0.5]), vec![0, 0], BTreeSet::from([1])).is_err());
    }
}
