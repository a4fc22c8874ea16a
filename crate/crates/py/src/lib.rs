//! Python bindings: graph queries, the experiment harness, the star-poll
//! example and revealed-preference tools.

use std::collections::BTreeSet;

use incest_core::harness::{self, ExperimentConfig};
use incest_core::revealed;
use incest_core::{BeliefSeries, ChoiceDataset, Error, InfoFlowGraph};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    if e.is_operational() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn graph(n_nodes: usize, edges: Vec<(usize, usize)>) -> PyResult<InfoFlowGraph> {
    InfoFlowGraph::new(n_nodes, edges).map_err(to_py)
}

/// Fusion weights of `node` over nodes `1..node`.
#[pyfunction]
fn fusion_weights(n_nodes: usize, edges: Vec<(usize, usize)>, node: usize) -> PyResult<Vec<i64>> {
    Ok(graph(n_nodes, edges)?.weight_vector(node).map_err(to_py)?.weights.clone())
}

/// Whether every node can remove incest from its parents' messages alone.
#[pyfunction]
fn is_achievable(n_nodes: usize, edges: Vec<(usize, usize)>) -> PyResult<bool> {
    Ok(graph(n_nodes, edges)?.all_achievable())
}

/// Nodes reached from an ancestor by more than one path.
#[pyfunction]
fn multipath_nodes(n_nodes: usize, edges: Vec<(usize, usize)>) -> PyResult<Vec<usize>> {
    Ok(graph(n_nodes, edges)?.incest_nodes().into_iter().collect())
}

/// Non-recruited nodes whose beliefs the poll correction needs.
#[pyfunction]
fn extra_voters(n_nodes: usize, edges: Vec<(usize, usize)>, recruits: Vec<usize>) -> PyResult<Vec<usize>> {
    let set: BTreeSet<usize> = recruits.into_iter().collect();
    Ok(graph(n_nodes, edges)?
        .minimal_extra_nodes(&set)
        .map_err(to_py)?
        .into_iter()
        .collect())
}

/// `(naive, exact, incestious_posterior)` probabilities of state 1.
#[pyfunction]
fn extreme_example() -> PyResult<(f64, f64, f64)> {
    let r = harness::run_extreme_example().map_err(to_py)?;
    Ok((r.naive, r.exact, r.incestious_posterior))
}

/// Runs an experiment from its JSON config and returns the JSON report.
#[pyfunction]
fn run_experiment(config_json: &str) -> PyResult<String> {
    let cfg: ExperimentConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = harness::run_experiment(&cfg).map_err(to_py)?;
    let mut out = Vec::new();
    report.write_json(&mut out).map_err(to_py)?;
    String::from_utf8(out).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn dataset(probes: Vec<Vec<f64>>, responses: Vec<Vec<f64>>) -> PyResult<ChoiceDataset> {
    ChoiceDataset::new(probes, responses).map_err(to_py)
}

/// `(holds, violating_cycle)` with 0-based observation indices.
#[pyfunction]
fn garp_check(probes: Vec<Vec<f64>>, responses: Vec<Vec<f64>>) -> PyResult<(bool, Option<Vec<usize>>)> {
    let g = revealed::garp_check(&dataset(probes, responses)?);
    Ok((g.holds, g.violating_cycle))
}

/// `(u, lambda)` rationalizing the data, or `None`.
#[pyfunction]
fn afriat_solve(
    probes: Vec<Vec<f64>>,
    responses: Vec<Vec<f64>>,
) -> PyResult<Option<(Vec<f64>, Vec<f64>)>> {
    let cert = revealed::afriat_solve(&dataset(probes, responses)?).map_err(to_py)?;
    Ok(cert.map(|c| (c.u, c.lambda)))
}

/// `(b, mape)` of `belief[t+1] = belief[t] + b driver[t]`.
#[pyfunction]
fn ar_fit(belief: Vec<f64>, driver: Vec<f64>) -> PyResult<(f64, f64)> {
    let series = BeliefSeries::new(belief, driver).map_err(to_py)?;
    let fit = revealed::ar_fit(&series).map_err(to_py)?;
    Ok((fit.b, fit.mape))
}

#[pymodule]
fn incest(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(fusion_weights, m)?)?;
    m.add_function(wrap_pyfunction!(is_achievable, m)?)?;
    m.add_function(wrap_pyfunction!(multipath_nodes, m)?)?;
    m.add_function(wrap_pyfunction!(extra_voters, m)?)?;
    m.add_function(wrap_pyfunction!(extreme_example, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(garp_check, m)?)?;
    m.add_function(wrap_pyfunction!(afriat_solve, m)?)?;
    m.add_function(wrap_pyfunction!(ar_fit, m)?)?;
    m.add("RNG_IDENTITY", harness::RNG_IDENTITY)?;
    Ok(())
}
