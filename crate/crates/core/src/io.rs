//! File formats: graph and model JSON, choice-dataset and belief-series CSV.
//!
//! Everything external is 1-based: nodes, states, observations, actions and
//! observation indices in reports.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::graph::InfoFlowGraph;
use crate::learning::{CostMatrix, LearningModel, ObservationMatrix};
use crate::revealed::{BeliefSeries, ChoiceDataset};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub n_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

impl GraphSpec {
    pub fn to_graph(&self) -> Result<InfoFlowGraph> {
        for &(from, to) in &self.edges {
            if from == 0 || to == 0 || from > self.n_nodes || to > self.n_nodes {
                return Err(Error::Config(format!(
                    "edges: [{from}, {to}] references a node outside 1..={}",
                    self.n_nodes
                )));
            }
            if from >= to {
                return Err(Error::Config(format!(
                    "edges: [{from}, {to}] must point from a lower to a higher node"
                )));
            }
        }
        InfoFlowGraph::new(self.n_nodes, self.edges.iter().copied())
    }
}

impl From<&InfoFlowGraph> for GraphSpec {
    fn from(g: &InfoFlowGraph) -> Self {
        Self {
            n_nodes: g.n_nodes(),
            edges: g.edges(),
        }
    }
}

/// Model JSON. `A` and `cost` default to naming the state under 0/1 loss,
/// `prior` defaults to uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(rename = "X")]
    pub states: usize,
    #[serde(rename = "Y")]
    pub observations: usize,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<usize>,
    #[serde(rename = "B")]
    pub obs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
}

impl ModelSpec {
    pub fn to_model(&self) -> Result<LearningModel> {
        if self.obs.len() != self.states {
            return Err(Error::Config(format!(
                "B: {} rows but X = {}",
                self.obs.len(),
                self.states
            )));
        }
        if let Some(i) = self.obs.iter().position(|r| r.len() != self.observations) {
            return Err(Error::Config(format!(
                "B: row {} has {} entries but Y = {}",
                i + 1,
                self.obs[i].len(),
                self.observations
            )));
        }
        let cost = match &self.cost {
            Some(rows) => {
                if rows.len() != self.states {
                    return Err(Error::Config(format!(
                        "cost: {} rows but X = {}",
                        rows.len(),
                        self.states
                    )));
                }
                if let Some(a) = self.actions {
                    if let Some(i) = rows.iter().position(|r| r.len() != a) {
                        return Err(Error::Config(format!(
                            "cost: row {} has {} entries but A = {a}",
                            i + 1,
                            rows[i].len()
                        )));
                    }
                }
                CostMatrix::new(rows.clone())?
            }
            None => {
                if self.actions.is_some_and(|a| a != self.states) {
                    return Err(Error::Config("cost: required when A differs from X".into()));
                }
                CostMatrix::zero_one(self.states)
            }
        };
        let prior = match &self.prior {
            Some(p) => Belief::new(p.clone()).map_err(|e| Error::Config(format!("prior: {e}")))?,
            None => Belief::uniform(self.states),
        };
        let obs = ObservationMatrix::new(self.obs.clone())
            .map_err(|e| Error::Config(format!("B: {e}")))?;
        LearningModel::new(obs, cost, prior)
    }
}

impl From<&LearningModel> for ModelSpec {
    fn from(m: &LearningModel) -> Self {
        Self {
            states: m.states(),
            observations: m.observations(),
            actions: Some(m.actions()),
            obs: m.obs().rows().to_vec(),
            cost: Some(m.cost().rows().to_vec()),
            prior: Some(m.prior().probs().to_vec()),
        }
    }
}

/// Converts 1-based labels to 0-based indices, checking the range.
pub fn to_zero_based(field: &str, values: &[usize], upper: usize) -> Result<Vec<usize>> {
    values
        .iter()
        .map(|&v| {
            if v == 0 || v > upper {
                Err(Error::Config(format!("{field}: value {v} outside 1..={upper}")))
            } else {
                Ok(v - 1)
            }
        })
        .collect()
}

fn parse_field(raw: &str, row: usize, column: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| {
        Error::InvalidDataset(format!("row {row}, column {column}: '{raw}' is not a number"))
    })
}

/// Reads `t,p_1..p_m,a_1..a_m`.
pub fn read_choice_dataset<R: Read>(reader: R) -> Result<ChoiceDataset> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = headers.len();
    if cols < 3 || cols % 2 == 0 {
        return Err(Error::InvalidDataset(format!(
            "expected header t,p_1..p_m,a_1..a_m; got {cols} columns"
        )));
    }
    let m = (cols - 1) / 2;
    for (k, name) in headers.iter().enumerate().skip(1) {
        let expected = if k <= m {
            format!("p_{k}")
        } else {
            format!("a_{}", k - m)
        };
        if name.trim() != expected {
            return Err(Error::InvalidDataset(format!(
                "column {}: expected '{expected}', found '{name}'",
                k + 1
            )));
        }
    }
    let (mut probes, mut responses) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let values = (1..cols)
            .map(|k| parse_field(&rec[k], i + 1, &headers[k]))
            .collect::<Result<Vec<f64>>>()?;
        probes.push(values[..m].to_vec());
        responses.push(values[m..].to_vec());
    }
    ChoiceDataset::new(probes, responses)
}

pub fn write_choice_dataset<W: std::io::Write>(data: &ChoiceDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let m = data.dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|k| format!("p_{k}")));
    header.extend((1..=m).map(|k| format!("a_{k}")));
    w.write_record(&header)?;
    for t in 0..data.len() {
        let mut row = vec![(t + 1).to_string()];
        row.extend(data.probe(t).iter().map(f64::to_string));
        row.extend(data.response(t).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `t,pi_1,a_2`.
pub fn read_belief_series<R: Read>(reader: R) -> Result<BeliefSeries> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != ["t", "pi_1", "a_2"] {
        return Err(Error::InvalidDataset(format!(
            "expected header t,pi_1,a_2; got {}",
            names.join(",")
        )));
    }
    let (mut belief, mut driver) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        belief.push(parse_field(&rec[1], i + 1, "pi_1")?);
        driver.push(parse_field(&rec[2], i + 1, "a_2")?);
    }
    BeliefSeries::new(belief, driver)
}
