//! Fixed networks and models used by the experiments.

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::graph::InfoFlowGraph;
use crate::learning::{CostMatrix, LearningModel, ObservationMatrix};

pub const CORPORATE_EDGES: [(usize, usize); 15] = [
    (1, 2),
    (1, 3),
    (1, 10),
    (2, 4),
    (2, 5),
    (2, 8),
    (3, 6),
    (3, 7),
    (3, 9),
    (4, 8),
    (5, 8),
    (6, 9),
    (7, 9),
    (8, 10),
    (9, 10),
];

pub const MESH_EDGES: [(usize, usize); 12] = [
    (1, 2),
    (1, 6),
    (2, 3),
    (2, 5),
    (3, 4),
    (4, 5),
    (4, 9),
    (5, 6),
    (5, 8),
    (6, 7),
    (7, 8),
    (8, 9),
];

/// Seven-node example with a negative fusion weight at its last node, plus
/// an eighth node hanging off node 6.
pub const SELECTIVE_MEMORY_EDGES: [(usize, usize); 9] = [
    (1, 3),
    (1, 4),
    (1, 7),
    (2, 4),
    (3, 5),
    (4, 6),
    (5, 7),
    (6, 7),
    (6, 8),
];

pub fn corporate() -> InfoFlowGraph {
    InfoFlowGraph::new(10, CORPORATE_EDGES).expect("fixed edge list")
}

pub fn corporate_no_110() -> InfoFlowGraph {
    InfoFlowGraph::new(10, CORPORATE_EDGES.into_iter().filter(|&e| e != (1, 10)))
        .expect("fixed edge list")
}

pub fn mesh() -> InfoFlowGraph {
    InfoFlowGraph::new(9, MESH_EDGES).expect("fixed edge list")
}

pub fn selective_memory() -> InfoFlowGraph {
    InfoFlowGraph::new(8, SELECTIVE_MEMORY_EDGES).expect("fixed edge list")
}

/// Node 1 feeds `leaves` middle nodes, which all feed node `leaves + 2`.
pub fn star_poll(leaves: usize) -> Result<InfoFlowGraph> {
    if leaves == 0 {
        return Err(Error::Domain("star poll needs at least one middle node".into()));
    }
    let hub = leaves + 2;
    InfoFlowGraph::new(hub, (2..=leaves + 1).flat_map(|k| [(1, k), (k, hub)]))
}

/// Resolves `corporate`, `corporate_no_110`, `mesh`, `selective_memory` and
/// `star_poll(L)`.
pub fn build_named_network(name: &str) -> Result<InfoFlowGraph> {
    let name = name.trim();
    match name {
        "corporate" => Ok(corporate()),
        "corporate_no_110" => Ok(corporate_no_110()),
        "mesh" => Ok(mesh()),
        "selective_memory" => Ok(selective_memory()),
        _ => {
            let leaves = name
                .strip_prefix("star_poll(")
                .and_then(|rest| rest.strip_suffix(')'))
                .and_then(|l| l.trim().parse::<usize>().ok())
                .ok_or_else(|| Error::UnknownNetwork(name.to_string()))?;
            star_poll(leaves)
        }
    }
}

/// Ten states and actions, twenty observations with a discretized Gaussian
/// kernel, cost `|A/X i - a|` and a uniform prior.
pub fn social_learning_model() -> LearningModel {
    graded_model(10, 10, 20)
}

pub fn graded_model(states: usize, actions: usize, observations: usize) -> LearningModel {
    let kernel = (1..=states)
        .map(|x| {
            (1..=observations)
                .map(|y| {
                    let d = y as f64 - x as f64;
                    (-d * d / 2.0).exp()
                })
                .collect()
        })
        .collect();
    // |A i - X a| / X keeps the ratio exact until the final division
    let cost = (1..=states)
        .map(|i| {
            (1..=actions)
                .map(|a| (actions * i).abs_diff(states * a) as f64 / states as f64)
                .collect()
        })
        .collect();
    LearningModel::new(
        ObservationMatrix::from_kernel(kernel).expect("positive kernel"),
        CostMatrix::new(cost).expect("finite costs"),
        Belief::uniform(states),
    )
    .expect("consistent dimensions")
}

fn symmetric_binary(prior: [f64; 2], cost: [[f64; 2]; 2]) -> LearningModel {
    LearningModel::from_rows(
        vec![vec![0.8, 0.2], vec![0.2, 0.8]],
        cost.iter().map(|r| r.to_vec()).collect(),
        prior.to_vec(),
    )
    .expect("fixed model")
}

/// Two states, prior `[0.4, 0.6]`, symmetric 0.8 observation accuracy.
pub fn polling_model() -> LearningModel {
    symmetric_binary([0.4, 0.6], [[0.0, 1.0], [1.0, 0.0]])
}

/// Binary herding fixture: uniform prior, 0.8 accuracy, cost 2 for a wrong
/// action.
pub fn binary_model() -> LearningModel {
    symmetric_binary([0.5, 0.5], [[0.0, 2.0], [2.0, 0.0]])
}
