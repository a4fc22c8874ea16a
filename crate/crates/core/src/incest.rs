//! Reputation protocol on an information-flow graph: each node fuses the
//! public beliefs of its parents, observes privately, acts myopically and
//! publishes the belief implied by its action.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::belief::{Belief, LogBelief};
use crate::error::{Error, Result};
use crate::graph::{InfoFlowGraph, WeightVector};
use crate::learning::{bayes_private_log, myopic_action, slf_update_log, LearningModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Multiply the parents' beliefs (double counts shared ancestry).
    Naive,
    /// Weighted log-linear fusion that removes the double counting.
    #[serde(alias = "fair")]
    FairRating,
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::Naive => "naive",
            FusionMode::FairRating => "fair",
        })
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(FusionMode::Naive),
            "fair" | "fair_rating" => Ok(FusionMode::FairRating),
            other => Err(Error::Config(format!("unknown fusion mode '{other}'"))),
        }
    }
}

/// What happened at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub node: usize,
    pub observation: usize,
    /// Belief fused from the parents before observing.
    pub fused_prior: Belief,
    pub private: Belief,
    pub action: usize,
    pub public: Belief,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolTrace {
    pub mode: FusionMode,
    pub records: Vec<NodeRecord>,
}

impl ProtocolTrace {
    pub fn record(&self, node: usize) -> &NodeRecord {
        &self.records[node - 1]
    }

    /// Conditional mean of the 1-based state under each node's private belief.
    pub fn estimates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.private.conditional_mean()).collect()
    }

    /// CSV with columns `n,y,a,fused_prior,private,public`; observations and
    /// actions 1-based, beliefs as `;`-joined decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "y", "a", "fused_prior", "private", "public"])?;
        for r in &self.records {
            w.write_record([
                r.node.to_string(),
                (r.observation + 1).to_string(),
                (r.action + 1).to_string(),
                join_belief(&r.fused_prior),
                join_belief(&r.private),
                join_belief(&r.public),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rounds to 12 significant digits and prints the shortest representation.
pub fn format_sig12(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    format!("{rounded}")
}

pub fn join_belief(b: &Belief) -> String {
    b.probs()
        .iter()
        .map(|&p| format_sig12(p))
        .collect::<Vec<_>>()
        .join(";")
}

/// Normalized entrywise product; an empty list yields `prior`.
pub fn naive_fusion(beliefs: &[Belief], prior: &Belief) -> Result<Belief> {
    let logs: Vec<LogBelief> = beliefs.iter().map(Belief::to_log).collect();
    let refs: Vec<&LogBelief> = logs.iter().collect();
    Ok(naive_fusion_log(&refs, &prior.to_log())?.to_belief())
}

pub fn naive_fusion_log(beliefs: &[&LogBelief], prior: &LogBelief) -> Result<LogBelief> {
    let Some(first) = beliefs.first() else {
        return Ok(prior.clone());
    };
    let states = first.len();
    if beliefs.iter().any(|b| b.len() != states) {
        return Err(Error::InvalidBelief("fused beliefs differ in length".into()));
    }
    let sum = (0..states)
        .map(|i| beliefs.iter().map(|b| b.logs()[i]).sum())
        .collect();
    LogBelief::from_logs(sum)
        .map_err(|_| Error::ZeroLikelihood("fused beliefs have disjoint supports".into()))
}

/// Weighted sum of log beliefs of nodes `1..n`; `beliefs[m - 1]` is node
/// `m`'s belief if available. A nonzero weight on an unavailable belief is an
/// achievability violation. A state excluded by any weighted belief stays
/// excluded.
pub fn fair_fusion(
    weights: &WeightVector,
    beliefs: &[Option<&LogBelief>],
    states: usize,
) -> Result<LogBelief> {
    weighted_log_sum(weights, states, |m| {
        beliefs.get(m - 1).copied().flatten().map(|b| b.logs().to_vec())
    })
}

fn weighted_log_sum<F>(weights: &WeightVector, states: usize, mut belief: F) -> Result<LogBelief>
where
    F: FnMut(usize) -> Option<Vec<f64>>,
{
    let missing: Vec<usize> = weights
        .support()
        .into_iter()
        .filter(|&m| belief(m).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::NotAchievable {
            node: weights.node,
            missing,
        });
    }
    let mut acc = vec![0.0; states];
    for m in weights.support() {
        let w = weights.get(m) as f64;
        let logs = belief(m).expect("checked above");
        if logs.len() != states {
            return Err(Error::InvalidBelief("fused beliefs differ in length".into()));
        }
        for (a, l) in acc.iter_mut().zip(&logs) {
            if *l == f64::NEG_INFINITY || *a == f64::NEG_INFINITY {
                *a = f64::NEG_INFINITY;
            } else {
                *a += w * l;
            }
        }
    }
    LogBelief::from_logs(acc)
}

/// Fair fusion with the prior counted exactly once: fuses the parents'
/// evidence `l_m - l_0` and adds `l_0` back.
fn fair_fusion_with_prior(
    weights: &WeightVector,
    publics: &[LogBelief],
    available: &[bool],
    prior: &LogBelief,
) -> Result<LogBelief> {
    let l0 = prior.logs();
    let evidence = weighted_log_sum(weights, prior.len(), |m| {
        available[m - 1].then(|| {
            publics[m - 1]
                .logs()
                .iter()
                .zip(l0)
                .map(|(l, p)| if *l == f64::NEG_INFINITY { *l } else { l - p })
                .collect()
        })
    })?;
    LogBelief::from_logs(evidence.logs().iter().zip(l0).map(|(e, p)| e + p).collect())
}

/// Runs the protocol over all nodes in index order. `observations[n - 1]` is
/// node `n`'s private observation (0-based).
pub fn run_protocol1(
    graph: &InfoFlowGraph,
    model: &LearningModel,
    observations: &[usize],
    mode: FusionMode,
) -> Result<ProtocolTrace> {
    let n_nodes = graph.n_nodes();
    if observations.len() != n_nodes {
        return Err(Error::Domain(format!(
            "{} observations for {n_nodes} nodes",
            observations.len()
        )));
    }
    if mode == FusionMode::FairRating {
        if let Some((node, missing)) = graph.first_unachievable() {
            return Err(Error::NotAchievable { node, missing });
        }
    }
    let prior = model.prior().to_log();
    let mut publics: Vec<LogBelief> = Vec::with_capacity(n_nodes);
    let mut records = Vec::with_capacity(n_nodes);
    let mut available = vec![false; n_nodes];
    for n in 1..=n_nodes {
        let parents = graph.one_hop_set(n)?;
        let fused = match mode {
            FusionMode::Naive => {
                let refs: Vec<&LogBelief> = parents.iter().map(|&m| &publics[m - 1]).collect();
                naive_fusion_log(&refs, &prior)?
            }
            FusionMode::FairRating => {
                for &m in &parents {
                    available[m - 1] = true;
                }
                let fused =
                    fair_fusion_with_prior(graph.weight_vector(n)?, &publics, &available, &prior);
                for &m in &parents {
                    available[m - 1] = false;
                }
                fused?
            }
        };
        let y = observations[n - 1];
        let eta = bayes_private_log(&fused, y, model.obs())?;
        let eta_belief = eta.to_belief();
        let action = myopic_action(&eta_belief, model.cost());
        let public = slf_update_log(&fused, action, model)?;
        records.push(NodeRecord {
            node: n,
            observation: y,
            fused_prior: fused.to_belief(),
            private: eta_belief,
            action,
            public: public.to_belief(),
        });
        publics.push(public);
    }
    Ok(ProtocolTrace { mode, records })
}
