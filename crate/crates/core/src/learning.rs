//! Classical social learning: private Bayes update, myopic action, the
//! social-learning filter on observed actions, and cascade detection.
//!
//! Also hosts the structural checks behind ordinal decisions: total
//! positivity of the observation matrix, submodular costs and the MLR order.

use rand::Rng;

use crate::belief::{Belief, LogBelief};
use crate::error::{Error, Result};

/// Row tolerance for the observation matrix.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;
/// Expected costs within this (relative) distance of the minimum are ties.
pub const TIE_TOLERANCE: f64 = 1e-12;
/// Beliefs closer than this (max-abs) count as unchanged.
pub const FREEZE_TOLERANCE: f64 = 1e-12;
const ORDER_SLACK: f64 = 1e-12;
const MLR_SLACK: f64 = 1e-15;

/// Row-stochastic `X x Y` matrix with entries `P(y | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    rows: Vec<Vec<f64>>,
    /// `log_cols[y][x] = ln P(y | x)`
    log_cols: Vec<Vec<f64>>,
}

impl ObservationMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ys = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || ys == 0 {
            return Err(Error::InvalidModel("observation matrix is empty".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ys {
                return Err(Error::InvalidModel(format!(
                    "observation row {} has {} entries, expected {ys}",
                    i + 1,
                    row.len()
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "observation row {} has a negative or non-finite entry",
                    i + 1
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidModel(format!(
                    "observation row {} sums to {sum}",
                    i + 1
                )));
            }
        }
        let log_cols = (0..ys)
            .map(|y| rows.iter().map(|r| r[y].ln()).collect())
            .collect();
        Ok(Self { rows, log_cols })
    }

    /// Normalizes each row of a nonnegative kernel.
    pub fn from_kernel(kernel: Vec<Vec<f64>>) -> Result<Self> {
        let rows = kernel
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let s: f64 = r.iter().sum();
                if s > 0.0 && s.is_finite() {
                    Ok(r.into_iter().map(|v| v / s).collect())
                } else {
                    Err(Error::InvalidModel(format!("kernel row {} has no mass", i + 1)))
                }
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Self::new(rows)
    }

    pub fn states(&self) -> usize {
        self.rows.len()
    }

    pub fn observations(&self) -> usize {
        self.log_cols.len()
    }

    pub fn prob(&self, state: usize, y: usize) -> f64 {
        self.rows[state][y]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Per-state log likelihood of observation `y`.
    pub fn log_likelihood(&self, y: usize) -> &[f64] {
        &self.log_cols[y]
    }
}

/// `X x A` cost matrix `c(x, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: Vec<Vec<f64>>,
}

impl CostMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let acts = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || acts == 0 {
            return Err(Error::InvalidModel("cost matrix is empty".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != acts {
                return Err(Error::InvalidModel(format!(
                    "cost row {} has {} entries, expected {acts}",
                    i + 1,
                    row.len()
                )));
            }
            if row.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidModel(format!("cost row {} is not finite", i + 1)));
            }
        }
        Ok(Self { rows })
    }

    /// Zero cost for naming the true state, unit cost otherwise.
    pub fn zero_one(states: usize) -> Self {
        Self {
            rows: (0..states)
                .map(|i| (0..states).map(|a| if i == a { 0.0 } else { 1.0 }).collect())
                .collect(),
        }
    }

    pub fn states(&self) -> usize {
        self.rows.len()
    }

    pub fn actions(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `c_a' belief` for every action.
    pub fn expected_costs(&self, belief: &Belief) -> Vec<f64> {
        (0..self.actions())
            .map(|a| {
                self.rows
                    .iter()
                    .zip(belief.probs())
                    .map(|(row, p)| if *p == 0.0 { 0.0 } else { row[a] * p })
                    .sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningModel {
    obs: ObservationMatrix,
    cost: CostMatrix,
    prior: Belief,
}

impl LearningModel {
    pub fn new(obs: ObservationMatrix, cost: CostMatrix, prior: Belief) -> Result<Self> {
        if cost.states() != obs.states() {
            return Err(Error::InvalidModel(format!(
                "cost matrix has {} states, observation matrix {}",
                cost.states(),
                obs.states()
            )));
        }
        if prior.len() != obs.states() {
            return Err(Error::InvalidModel(format!(
                "prior has {} entries, expected {}",
                prior.len(),
                obs.states()
            )));
        }
        Ok(Self { obs, cost, prior })
    }

    pub fn from_rows(obs: Vec<Vec<f64>>, cost: Vec<Vec<f64>>, prior: Vec<f64>) -> Result<Self> {
        Self::new(
            ObservationMatrix::new(obs)?,
            CostMatrix::new(cost)?,
            Belief::new(prior)?,
        )
    }

    pub fn states(&self) -> usize {
        self.obs.states()
    }

    pub fn observations(&self) -> usize {
        self.obs.observations()
    }

    pub fn actions(&self) -> usize {
        self.cost.actions()
    }

    pub fn obs(&self) -> &ObservationMatrix {
        &self.obs
    }

    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }

    pub fn prior(&self) -> &Belief {
        &self.prior
    }

    pub fn with_prior(&self, prior: Belief) -> Result<Self> {
        Self::new(self.obs.clone(), self.cost.clone(), prior)
    }
}

fn check_observation(y: usize, obs: &ObservationMatrix) -> Result<()> {
    if y >= obs.observations() {
        return Err(Error::Domain(format!(
            "observation {y} outside 0..{}",
            obs.observations()
        )));
    }
    Ok(())
}

/// Private belief after observing `y`, in the log domain.
pub fn bayes_private_log(prior: &LogBelief, y: usize, obs: &ObservationMatrix) -> Result<LogBelief> {
    check_observation(y, obs)?;
    if prior.len() != obs.states() {
        return Err(Error::InvalidBelief("belief length does not match model".into()));
    }
    prior
        .update(obs.log_likelihood(y))
        .map_err(|_| Error::ZeroLikelihood(format!("observation {} impossible under the prior", y + 1)))
}

/// `eta(i) ∝ B(i, y) pi(i)`.
pub fn bayes_private(prior: &Belief, y: usize, obs: &ObservationMatrix) -> Result<Belief> {
    Ok(bayes_private_log(&prior.to_log(), y, obs)?.to_belief())
}

/// Action minimizing expected cost; ties go to the lowest action index.
pub fn myopic_action(belief: &Belief, cost: &CostMatrix) -> usize {
    let costs = cost.expected_costs(belief);
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = TIE_TOLERANCE * min.abs().max(1.0);
    costs
        .iter()
        .position(|&c| c <= min + slack)
        .expect("cost matrix has at least one action")
}

/// Action chosen for each observation given the public belief. An
/// observation impossible under the belief maps to the belief's own action.
pub fn decision_rule(pi: &Belief, model: &LearningModel) -> Vec<usize> {
    let fallback = myopic_action(pi, model.cost());
    (0..model.observations())
        .map(|y| match bayes_private(pi, y, model.obs()) {
            Ok(eta) => myopic_action(&eta, model.cost()),
            Err(_) => fallback,
        })
        .collect()
}

/// `P(a | x = i, pi)` as an `X x A` matrix.
pub fn action_likelihood(pi: &Belief, model: &LearningModel) -> Vec<Vec<f64>> {
    let rule = decision_rule(pi, model);
    let mut out = vec![vec![0.0; model.actions()]; model.states()];
    for (i, row) in out.iter_mut().enumerate() {
        for (y, &a) in rule.iter().enumerate() {
            row[a] += model.obs().prob(i, y);
        }
    }
    out
}

/// Public-belief update from an observed action, in the log domain.
pub fn slf_update_log(pi: &LogBelief, action: usize, model: &LearningModel) -> Result<LogBelief> {
    if action >= model.actions() {
        return Err(Error::Domain(format!(
            "action {action} outside 0..{}",
            model.actions()
        )));
    }
    let lik = action_likelihood(&pi.to_belief(), model);
    let log_lik: Vec<f64> = lik.iter().map(|row| row[action].ln()).collect();
    pi.update(&log_lik).map_err(|_| {
        Error::ZeroLikelihood(format!("action {} has zero probability", action + 1))
    })
}

/// Social-learning filter `T(pi, a)`.
pub fn slf_update(pi: &Belief, action: usize, model: &LearningModel) -> Result<Belief> {
    Ok(slf_update_log(&pi.to_log(), action, model)?.to_belief())
}

fn beliefs_equal(a: &Belief, b: &Belief) -> bool {
    a.len() == b.len()
        && a.probs()
            .iter()
            .zip(b.probs())
            .all(|(x, y)| (x - y).abs() <= FREEZE_TOLERANCE)
}

/// Onset of an information cascade.
///
/// `beliefs[k]` is the public belief after `k` actions and `actions[k]` is
/// the action of agent `k + 1`. Returns the smallest `k` such that the public
/// belief never changes after step `k` and every later agent takes the same
/// action, provided at least one agent acts after `k`.
pub fn detect_cascade(actions: &[usize], beliefs: &[Belief]) -> Option<usize> {
    let steps = beliefs.len().checked_sub(1)?.min(actions.len());
    if steps == 0 {
        return None;
    }
    let mut k = steps;
    while k > 0 {
        let j = k - 1;
        let frozen = beliefs_equal(&beliefs[j], &beliefs[j + 1]);
        let same_action = k == steps || actions[j] == actions[k];
        if frozen && same_action {
            k = j;
        } else {
            break;
        }
    }
    (k < steps).then_some(k)
}

/// Sequential run of classical social learning.
#[derive(Debug, Clone)]
pub struct SequentialTrace {
    pub observations: Vec<usize>,
    pub private: Vec<Belief>,
    pub actions: Vec<usize>,
    /// Public beliefs `pi_0 ..= pi_N`.
    pub public: Vec<Belief>,
}

impl SequentialTrace {
    pub fn cascade_onset(&self) -> Option<usize> {
        detect_cascade(&self.actions, &self.public)
    }
}

/// Runs agents `1..=N` in order on the given observations.
pub fn run_sequential(model: &LearningModel, observations: &[usize]) -> Result<SequentialTrace> {
    let mut public = vec![model.prior().clone()];
    let mut log_pi = model.prior().to_log();
    let mut private = Vec::with_capacity(observations.len());
    let mut actions = Vec::with_capacity(observations.len());
    for &y in observations {
        let eta = bayes_private_log(&log_pi, y, model.obs())?.to_belief();
        let a = myopic_action(&eta, model.cost());
        log_pi = slf_update_log(&log_pi, a, model)?;
        private.push(eta);
        actions.push(a);
        public.push(log_pi.to_belief());
    }
    Ok(SequentialTrace {
        observations: observations.to_vec(),
        private,
        actions,
        public,
    })
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the final partial sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws observations for `horizon` agents given the true state.
pub fn sample_observations<R: Rng + ?Sized>(
    obs: &ObservationMatrix,
    state: usize,
    horizon: usize,
    rng: &mut R,
) -> Vec<usize> {
    (0..horizon)
        .map(|_| sample_categorical(&obs.rows()[state], rng))
        .collect()
}

/// Adjacent 2x2 minors of `b` are nonnegative.
pub fn is_tp2(b: &[Vec<f64>]) -> bool {
    b.windows(2).all(|w| {
        let (lo, hi) = (&w[0], &w[1]);
        (0..lo.len().min(hi.len()).saturating_sub(1))
            .all(|y| hi[y] * lo[y + 1] <= lo[y] * hi[y + 1] + ORDER_SLACK)
    })
}

/// Decreasing differences: `c(x, a+1) - c(x, a)` does not increase in `x`.
pub fn is_submodular(cost: &[Vec<f64>]) -> bool {
    cost.windows(2).all(|w| {
        let (lo, hi) = (&w[0], &w[1]);
        (0..lo.len().min(hi.len()).saturating_sub(1))
            .all(|a| lo[a + 1] - lo[a] >= hi[a + 1] - hi[a] - ORDER_SLACK)
    })
}

/// `p` dominates `q` in the monotone likelihood ratio order:
/// `p_i q_j <= p_j q_i` for `i < j`, the cross-multiplied form of
/// `log p_i - log p_{i+1} <= log q_i - log q_{i+1}` that stays defined at 0.
pub fn mlr_dominates(p: &Belief, q: &Belief) -> bool {
    let (p, q) = (p.probs(), q.probs());
    if p.len() != q.len() {
        return false;
    }
    (0..p.len()).all(|i| (i + 1..p.len()).all(|j| p[i] * q[j] <= p[j] * q[i] + MLR_SLACK))
}
