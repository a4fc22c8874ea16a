//! Seeded Monte Carlo experiments and the fixed polling example.
//!
//! Every run draws from its own `ChaCha8Rng` seeded with the experiment seed
//! and switched to the stream numbered by the run index, so results do not
//! depend on how runs are scheduled across threads. Per-run squared errors
//! are summed in run order.

pub mod networks;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::graph::InfoFlowGraph;
use crate::incest::{run_protocol1, FusionMode};
use crate::io::{GraphSpec, ModelSpec};
use crate::learning::{sample_categorical, sample_observations, LearningModel};
use crate::polling::{
    exact_poll_correction, full_information_posterior, posterior_from_incestious,
    sufficient_extra_nodes, PollRun,
};

pub use networks::build_named_network;

pub const RNG_IDENTITY: &str = "ChaCha8Rng: seed_from_u64(seed), set_stream(run index)";

/// RNG for run `run` of an experiment seeded with `seed`.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SocialLearning,
    Polling,
}

/// Named network or explicit graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSpec {
    Named(String),
    Explicit(GraphSpec),
}

impl NetworkSpec {
    pub fn build(&self) -> Result<InfoFlowGraph> {
        match self {
            NetworkSpec::Named(name) => build_named_network(name),
            NetworkSpec::Explicit(spec) => spec.to_graph(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Naive fusion (social learning) or the pollster's own belief (polling).
    Naive,
    /// Fair-rating fusion.
    Fair,
    /// Pollster belief corrected with the extra voters' beliefs.
    ExactPoll,
    /// Posterior given only the recruits' beliefs.
    IncestiousPosterior,
    /// Posterior given every observation up to the pollster.
    FullInformation,
}

impl Estimator {
    pub fn label(self) -> &'static str {
        match self {
            Estimator::Naive => "naive",
            Estimator::Fair => "fair",
            Estimator::ExactPoll => "exact_poll",
            Estimator::IncestiousPosterior => "incestious_posterior",
            Estimator::FullInformation => "full_information",
        }
    }
}

fn default_runs() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub network: NetworkSpec,
    /// Defaults to the experiment's standard model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults: naive and fair for social learning; naive and the
    /// incestious posterior for polling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimators: Option<Vec<Estimator>>,
    /// Polling only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recruit_sets: Vec<Vec<usize>>,
    /// Polling only; defaults to the last node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pollster: Option<usize>,
    /// Social learning only; defaults to the nodes reached by multiple paths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<usize>>,
}

impl ExperimentConfig {
    pub fn social_learning(network: &str, runs: usize, seed: u64) -> Self {
        Self {
            experiment: ExperimentKind::SocialLearning,
            network: NetworkSpec::Named(network.into()),
            model: None,
            runs,
            seed,
            estimators: None,
            recruit_sets: Vec::new(),
            pollster: None,
            nodes: None,
        }
    }

    pub fn polling(network: &str, recruit_sets: Vec<Vec<usize>>, runs: usize, seed: u64) -> Self {
        Self {
            experiment: ExperimentKind::Polling,
            recruit_sets,
            ..Self::social_learning(network, runs, seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs: must be at least 1".into()));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<LearningModel> {
        match (&self.model, self.experiment) {
            (Some(spec), _) => spec.to_model(),
            (None, ExperimentKind::SocialLearning) => Ok(networks::social_learning_model()),
            (None, ExperimentKind::Polling) => Ok(networks::polling_model()),
        }
    }

    fn estimators_or(&self, default: &[Estimator]) -> Vec<Estimator> {
        let mut v = self.estimators.clone().unwrap_or_else(|| default.to_vec());
        v.sort();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub node: usize,
    /// Estimator label; polling rows carry the recruit set, e.g.
    /// `incestious_posterior{8;9;10}`.
    pub estimator: String,
    pub mse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub config: ExperimentConfig,
    pub runs: usize,
    pub seed: u64,
    pub rng: String,
    pub rows: Vec<ReportRow>,
    pub wall_clock_seconds: f64,
}

impl SimReport {
    pub fn mse(&self, node: usize, estimator: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.node == node && r.estimator == estimator)
            .map(|r| r.mse)
    }

    /// CSV `node,estimator,mse,runs,seed`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "estimator", "mse", "runs", "seed"])?;
        for r in &self.rows {
            w.write_record([
                r.node.to_string(),
                r.estimator.clone(),
                r.mse.to_string(),
                self.runs.to_string(),
                self.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

pub fn recruit_label(estimator: Estimator, recruits: &BTreeSet<usize>) -> String {
    let nodes: Vec<String> = recruits.iter().map(usize::to_string).collect();
    format!("{}{{{}}}", estimator.label(), nodes.join(";"))
}

/// Runs `per_run` for every run index in parallel and averages the returned
/// squared errors component-wise, summing in run order.
fn average_over_runs<F>(runs: usize, width: usize, per_run: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    let errors: Vec<Vec<f64>> = (0..runs as u64)
        .into_par_iter()
        .map(&per_run)
        .collect::<Result<_>>()?;
    let mut sums = vec![0.0; width];
    for run in &errors {
        for (s, e) in sums.iter_mut().zip(run) {
            *s += e;
        }
    }
    Ok(sums.into_iter().map(|s| s / runs as f64).collect())
}

fn squared_error(estimate: f64, state: usize) -> f64 {
    let d = estimate - (state + 1) as f64;
    d * d
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<SimReport> {
    match config.experiment {
        ExperimentKind::SocialLearning => monte_carlo_social_learning(config),
        ExperimentKind::Polling => monte_carlo_polling(config),
    }
}

/// Mean squared error of each node's conditional-mean estimate (under its
/// private belief) for naive and fair fusion.
pub fn monte_carlo_social_learning(config: &ExperimentConfig) -> Result<SimReport> {
    config.validate()?;
    let start = Instant::now();
    let graph = config.network.build()?;
    let model = config.build_model()?;
    let estimators = config.estimators_or(&[Estimator::Naive, Estimator::Fair]);
    let modes: Vec<FusionMode> = estimators
        .iter()
        .map(|e| match e {
            Estimator::Naive => Ok(FusionMode::Naive),
            Estimator::Fair => Ok(FusionMode::FairRating),
            other => Err(Error::Config(format!(
                "estimators: '{}' does not apply to social learning",
                other.label()
            ))),
        })
        .collect::<Result<_>>()?;
    if modes.contains(&FusionMode::FairRating) {
        if let Some((node, missing)) = graph.first_unachievable() {
            return Err(Error::NotAchievable { node, missing });
        }
    }
    let nodes: Vec<usize> = match &config.nodes {
        Some(n) => n.clone(),
        None => graph.incest_nodes().into_iter().collect(),
    };
    if let Some(&bad) = nodes.iter().find(|&&n| n == 0 || n > graph.n_nodes()) {
        return Err(Error::Config(format!("nodes: {bad} outside 1..={}", graph.n_nodes())));
    }

    let width = modes.len() * nodes.len();
    let means = average_over_runs(config.runs, width, |run| {
        let mut rng = run_rng(config.seed, run);
        let state = sample_categorical(model.prior().probs(), &mut rng);
        let ys = sample_observations(model.obs(), state, graph.n_nodes(), &mut rng);
        let mut out = Vec::with_capacity(width);
        for &mode in &modes {
            let estimates = run_protocol1(&graph, &model, &ys, mode)?.estimates();
            out.extend(nodes.iter().map(|&n| squared_error(estimates[n - 1], state)));
        }
        Ok(out)
    })?;

    let mut rows = Vec::with_capacity(width);
    for (k, est) in estimators.iter().enumerate() {
        for (j, &node) in nodes.iter().enumerate() {
            rows.push(ReportRow {
                node,
                estimator: est.label().to_string(),
                mse: means[k * nodes.len() + j],
            });
        }
    }
    Ok(finish(config, rows, start))
}

fn finish(config: &ExperimentConfig, rows: Vec<ReportRow>, start: Instant) -> SimReport {
    SimReport {
        config: config.clone(),
        runs: config.runs,
        seed: config.seed,
        rng: RNG_IDENTITY.to_string(),
        rows,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Mean squared error of conditional-mean estimates of the state at the
/// pollster. The naive estimate is the most probable state under the
/// pollster's own belief.
pub fn monte_carlo_polling(config: &ExperimentConfig) -> Result<SimReport> {
    config.validate()?;
    let start = Instant::now();
    let graph = config.network.build()?;
    let model = config.build_model()?;
    let pollster = config.pollster.unwrap_or(graph.n_nodes());
    if pollster == 0 || pollster > graph.n_nodes() {
        return Err(Error::Config(format!(
            "pollster: {pollster} outside 1..={}",
            graph.n_nodes()
        )));
    }
    let estimators = config.estimators_or(&[Estimator::Naive, Estimator::IncestiousPosterior]);
    if estimators.contains(&Estimator::Fair) {
        return Err(Error::Config("estimators: 'fair' does not apply to polling".into()));
    }
    let sets: Vec<BTreeSet<usize>> = config
        .recruit_sets
        .iter()
        .map(|s| s.iter().copied().collect())
        .collect();
    for set in &sets {
        if set.iter().any(|&r| r == 0 || r > graph.n_nodes()) {
            return Err(Error::Config(format!(
                "recruit_sets: {set:?} has a node outside 1..={}",
                graph.n_nodes()
            )));
        }
    }
    let per_set: Vec<Estimator> = estimators
        .iter()
        .copied()
        .filter(|e| matches!(e, Estimator::IncestiousPosterior | Estimator::ExactPoll))
        .collect();
    if !per_set.is_empty() && sets.is_empty() {
        return Err(Error::Config("recruit_sets: required for the chosen estimators".into()));
    }

    let mut labels: Vec<String> = Vec::new();
    for &e in &estimators {
        match e {
            Estimator::Naive | Estimator::FullInformation => labels.push(e.label().into()),
            _ => labels.extend(sets.iter().map(|s| recruit_label(e, s))),
        }
    }

    let means = average_over_runs(config.runs, labels.len(), |run| {
        let mut rng = run_rng(config.seed, run);
        let state = sample_categorical(model.prior().probs(), &mut rng);
        let ys = sample_observations(model.obs(), state, graph.n_nodes(), &mut rng);
        let beliefs = crate::polling::run_protocol2_log(&graph, &model, &ys)?;
        let mut out = Vec::with_capacity(labels.len());
        for &e in &estimators {
            match e {
                Estimator::Naive => {
                    let own = beliefs[pollster - 1].to_belief();
                    out.push(squared_error(own.conditional_mean(), state));
                }
                Estimator::FullInformation => {
                    let post = full_information_posterior(&model, &ys[..pollster])?;
                    out.push(squared_error(post.conditional_mean(), state));
                }
                Estimator::IncestiousPosterior => {
                    for set in &sets {
                        let reported: BTreeMap<usize, Belief> =
                            set.iter().map(|&r| (r, beliefs[r - 1].to_belief())).collect();
                        let post = posterior_from_incestious(&graph, &model, &reported)?;
                        out.push(squared_error(post.conditional_mean(), state));
                    }
                }
                Estimator::ExactPoll => {
                    for set in &sets {
                        let poll = PollRun {
                            graph: graph.clone(),
                            model: model.clone(),
                            observations: ys.clone(),
                            beliefs: beliefs.clone(),
                            recruits: set.clone(),
                        };
                        let extras = sufficient_extra_nodes(&graph, set)?
                            .into_iter()
                            .map(|m| (m, beliefs[m - 1].clone()))
                            .collect();
                        let corrected = exact_poll_correction(&poll, &extras)?;
                        let top = corrected[&poll.pollster()].to_belief();
                        out.push(squared_error(top.conditional_mean(), state));
                    }
                }
                Estimator::Fair => unreachable!("rejected above"),
            }
        }
        Ok(out)
    })?;

    let rows = labels
        .into_iter()
        .zip(means)
        .map(|(estimator, mse)| ReportRow {
            node: pollster,
            estimator,
            mse,
        })
        .collect();
    Ok(finish(config, rows, start))
}

/// The three pollster estimates of state 1 on the star poll.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtremeReport {
    /// Pollster's own (incest-contaminated) belief.
    pub naive: f64,
    /// Belief corrected with the shared source's belief.
    pub exact: f64,
    /// Posterior given only the pollster's belief.
    pub incestious_posterior: f64,
}

impl ExtremeReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["estimator", "state", "probability"])?;
        for (name, p) in [
            ("naive", self.naive),
            ("exact", self.exact),
            ("incestious_posterior", self.incestious_posterior),
        ] {
            w.write_record([name, "1", &p.to_string()])?;
            w.write_record([name, "2", &(1.0 - p).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Star poll with six middle nodes, uniform prior, 0.8 accuracy and
/// observations `2,1,1,1,1,1,1,2` (1-based).
pub fn run_extreme_example() -> Result<ExtremeReport> {
    let model = LearningModel::from_rows(
        vec![vec![0.8, 0.2], vec![0.2, 0.8]],
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        vec![0.5, 0.5],
    )?;
    run_extreme_example_with(&model, &[1, 0, 0, 0, 0, 0, 0, 1])
}

/// Same star poll with an arbitrary model and 0-based observations.
pub fn run_extreme_example_with(model: &LearningModel, observations: &[usize]) -> Result<ExtremeReport> {
    let graph = networks::star_poll(6)?;
    let run = PollRun::simulate(graph, model.clone(), observations.to_vec(), (2..=8).collect())?;
    let extras = run
        .extra_nodes()?
        .into_iter()
        .map(|m| (m, run.beliefs[m - 1].clone()))
        .collect();
    let corrected = exact_poll_correction(&run, &extras)?;
    let only_pollster = BTreeMap::from([(8, run.belief(8))]);
    let post = posterior_from_incestious(&run.graph, model, &only_pollster)?;
    Ok(ExtremeReport {
        naive: run.belief(8).get(0),
        exact: corrected[&8].to_belief().get(0),
        incestious_posterior: post.get(0),
    })
}
