use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use incest_core::harness::{self, run_rng, ExperimentConfig, NetworkSpec};
use incest_core::incest::{run_protocol1, FusionMode};
use incest_core::io::{self as fmt_io, read_json, to_zero_based, GraphSpec, ModelSpec};
use incest_core::learning::{sample_categorical, sample_observations};
use incest_core::polling::{
    exact_poll_correction, full_information_posterior, posterior_from_incestious,
    sufficient_extra_nodes, PollRun,
};
use incest_core::revealed::{afriat_solve, ar_fit, garp_check};
use incest_core::{Error, InfoFlowGraph, LearningModel, Result};

#[derive(Parser)]
#[command(name = "incest", version, about = "Social learning and polling on information-flow graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo experiment, or a single protocol trace with --trace.
    Simulate(SimulateArgs),
    /// Expectation poll: naive, incestious-posterior and corrected estimates.
    Poll(PollArgs),
    /// The fixed star-poll example.
    Extreme(OutArgs),
    /// GARP and Afriat analysis of a choice dataset.
    Afriat(AfriatArgs),
    /// Fits the AR public-belief model to a series.
    ArFit(InputArgs),
    /// Graph queries.
    Graph {
        #[command(subcommand)]
        query: GraphQuery,
    },
}

#[derive(Args)]
struct OutArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct AfriatArgs {
    /// Dataset CSV `t,p_1..p_m,a_1..a_m`.
    #[arg(long)]
    input: PathBuf,
    /// Optional belief series CSV `t,pi_1,a_2` to fit alongside.
    #[arg(long)]
    series: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Naive,
    Fair,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Run the protocol once and write the per-node trace.
    #[arg(long)]
    trace: bool,
    #[arg(long, value_enum, default_value = "fair")]
    mode: ModeArg,
    /// Write the JSON report instead of CSV.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct PollArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct GraphSource {
    /// Graph JSON, or any config with a `network` field.
    #[arg(long, conflicts_with = "network")]
    config: Option<PathBuf>,
    /// Named network, e.g. `corporate` or `star_poll(6)`.
    #[arg(long)]
    network: Option<String>,
}

#[derive(Subcommand)]
enum GraphQuery {
    /// Reachability matrix, one row per node.
    Closure {
        #[command(flatten)]
        source: GraphSource,
    },
    /// Fusion weights of one node, or of every node.
    Weights {
        #[command(flatten)]
        source: GraphSource,
        #[arg(long)]
        node: Option<usize>,
    },
    /// Achievability of exact incest removal and the multi-path nodes.
    Check {
        #[command(flatten)]
        source: GraphSource,
    },
    /// Extra voters needed to correct a poll.
    ExtraVoters {
        #[command(flatten)]
        source: GraphSource,
        /// Comma-separated recruits, pollster included.
        #[arg(long, value_delimiter = ',', required = true)]
        recruits: Vec<usize>,
    },
}

/// Single-run inputs shared by `simulate --trace` and `poll`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    network: NetworkSpec,
    #[serde(default)]
    model: Option<ModelSpec>,
    /// 1-based observations; drawn from the seed when absent.
    #[serde(default)]
    observations: Option<Vec<usize>>,
    /// 1-based true state used when drawing observations.
    #[serde(default)]
    state: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    recruits: Option<Vec<usize>>,
    #[serde(default)]
    pollster: Option<usize>,
}

impl RunConfig {
    fn resolve(
        &self,
        default_model: fn() -> LearningModel,
        seed: Option<u64>,
    ) -> Result<(InfoFlowGraph, LearningModel, Vec<usize>)> {
        let graph = self.network.build()?;
        let model = match &self.model {
            Some(spec) => spec.to_model()?,
            None => default_model(),
        };
        let ys = match &self.observations {
            Some(ys) => {
                if ys.len() != graph.n_nodes() {
                    return Err(Error::Config(format!(
                        "observations: {} values for {} nodes",
                        ys.len(),
                        graph.n_nodes()
                    )));
                }
                to_zero_based("observations", ys, model.observations())?
            }
            None => {
                let mut rng = run_rng(seed.or(self.seed).unwrap_or(0), 0);
                let state = match self.state {
                    Some(s) => to_zero_based("state", &[s], model.states())?[0],
                    None => sample_categorical(model.prior().probs(), &mut rng),
                };
                sample_observations(model.obs(), state, graph.n_nodes(), &mut rng)
            }
        };
        Ok((graph, model, ys))
    }
}

fn output(out: &OutArgs) -> Result<Box<dyn Write>> {
    Ok(match &out.out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json_value<T: Serialize>(out: &OutArgs, value: &T) -> Result<()> {
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn load_graph(source: &GraphSource) -> Result<InfoFlowGraph> {
    match (&source.config, &source.network) {
        (_, Some(name)) => harness::build_named_network(name),
        (Some(path), None) => {
            let value: serde_json::Value = read_json(path)?;
            match value.get("network") {
                Some(net) => serde_json::from_value::<NetworkSpec>(net.clone())?.build(),
                None => serde_json::from_value::<GraphSpec>(value)?.to_graph(),
            }
        }
        (None, None) => Err(Error::Config("either --config or --network is required".into())),
    }
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    if args.trace {
        let cfg: RunConfig = read_json(&args.config)?;
        let (graph, model, ys) = cfg.resolve(harness::networks::social_learning_model, args.seed)?;
        let mode = match args.mode {
            ModeArg::Naive => FusionMode::Naive,
            ModeArg::Fair => FusionMode::FairRating,
        };
        let trace = run_protocol1(&graph, &model, &ys, mode)?;
        return trace.write_csv(output(&args.out)?);
    }
    let mut cfg: ExperimentConfig = read_json(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    let report = harness::run_experiment(&cfg)?;
    let as_json = args.json
        || args
            .out
            .out
            .as_deref()
            .and_then(Path::extension)
            .is_some_and(|e| e == "json");
    if as_json {
        report.write_json(output(&args.out)?)
    } else {
        report.write_csv(output(&args.out)?)
    }
}

fn poll(args: &PollArgs) -> Result<()> {
    let cfg: RunConfig = read_json(&args.config)?;
    let (graph, model, ys) = cfg.resolve(harness::networks::polling_model, args.seed)?;
    let mut recruits: BTreeSet<usize> = cfg
        .recruits
        .clone()
        .ok_or_else(|| Error::Config("recruits: required for poll".into()))?
        .into_iter()
        .collect();
    if let Some(p) = cfg.pollster {
        if recruits.last().is_some_and(|&r| r > p) {
            return Err(Error::Config(format!(
                "pollster: {p} must not precede a recruit"
            )));
        }
        recruits.insert(p);
    }
    let run = PollRun::simulate(graph, model, ys, recruits)?;
    let pollster = run.pollster();
    let naive = run.belief(pollster);
    let incestious = posterior_from_incestious(&run.graph, &run.model, &run.recruit_beliefs())?;
    let extras = sufficient_extra_nodes(&run.graph, &run.recruits)?
        .into_iter()
        .map(|m| (m, run.beliefs[m - 1].clone()))
        .collect::<BTreeMap<_, _>>();
    let exact = exact_poll_correction(&run, &extras)?[&pollster].to_belief();
    let full = full_information_posterior(&run.model, &run.observations[..pollster])?;

    let mut w = csv::Writer::from_writer(output(&args.out)?);
    w.write_record(["estimator", "state", "probability"])?;
    for (name, belief) in [
        ("naive", &naive),
        ("incestious_posterior", &incestious),
        ("exact", &exact),
        ("full_information", &full),
    ] {
        for (i, p) in belief.probs().iter().enumerate() {
            w.write_record([name.to_string(), (i + 1).to_string(), p.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn afriat(args: &AfriatArgs) -> Result<()> {
    let data = fmt_io::read_choice_dataset(BufReader::new(File::open(&args.input)?))?;
    let garp = garp_check(&data);
    let certificate = afriat_solve(&data)?;
    let fit = match &args.series {
        Some(path) => Some(ar_fit(&fmt_io::read_belief_series(BufReader::new(File::open(path)?))?)?),
        None => None,
    };
    let cycle = garp
        .violating_cycle
        .map(|c| c.into_iter().map(|t| t + 1).collect::<Vec<_>>())
        .unwrap_or_default();
    write_json_value(
        &args.out,
        &json!({
            "garp": garp.holds,
            "violating_cycle": cycle,
            "certificate": certificate,
            "b": fit.as_ref().map(|f| f.b),
            "mape": fit.as_ref().map(|f| f.mape),
        }),
    )
}

fn ar(args: &InputArgs) -> Result<()> {
    let series = fmt_io::read_belief_series(BufReader::new(File::open(&args.input)?))?;
    write_json_value(&args.out, &ar_fit(&series)?)
}

fn graph(query: &GraphQuery) -> Result<()> {
    let mut out = io::stdout().lock();
    match query {
        GraphQuery::Closure { source } => {
            let g = load_graph(source)?;
            for row in g.closure_matrix() {
                let cells: Vec<String> = row.iter().map(u8::to_string).collect();
                writeln!(out, "{}", cells.join(","))?;
            }
        }
        GraphQuery::Weights { source, node } => {
            let g = load_graph(source)?;
            let nodes: Vec<usize> = match node {
                Some(n) => vec![*n],
                None => (1..=g.n_nodes()).collect(),
            };
            for n in nodes {
                let w = g.weight_vector(n)?;
                let cells: Vec<String> = w.weights.iter().map(i64::to_string).collect();
                if node.is_some() {
                    writeln!(out, "{}", cells.join(","))?;
                } else {
                    writeln!(out, "{n}: {}", cells.join(","))?;
                }
            }
        }
        GraphQuery::Check { source } => {
            let g = load_graph(source)?;
            match g.first_unachievable() {
                None => writeln!(out, "achievable: true")?,
                Some((node, missing)) => {
                    writeln!(out, "achievable: false (node {node} needs {missing:?})")?
                }
            }
            let incest: Vec<usize> = g.incest_nodes().into_iter().collect();
            writeln!(out, "multipath_nodes: {incest:?}")?;
        }
        GraphQuery::ExtraVoters { source, recruits } => {
            let g = load_graph(source)?;
            let set: BTreeSet<usize> = recruits.iter().copied().collect();
            let extra: Vec<String> = g
                .minimal_extra_nodes(&set)?
                .iter()
                .map(usize::to_string)
                .collect();
            writeln!(out, "{}", extra.join(","))?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Poll(args) => poll(args),
        Command::Extreme(out) => harness::run_extreme_example()?.write_csv(output(out)?),
        Command::Afriat(args) => afriat(args),
        Command::ArFit(args) => ar(args),
        Command::Graph { query } => graph(query),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_operational() { 2 } else { 1 })
        }
    }
}
