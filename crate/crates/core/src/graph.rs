//! Event-indexed information-flow DAGs.
//!
//! Nodes are numbered `1..=n` in causal order, so every edge `m -> n` has
//! `m < n` and the adjacency matrix is strictly upper triangular. The
//! adjacency entry `(m, n)` is set when the action of node `m` reaches node
//! `n`; with this orientation the closure is upper triangular with a unit
//! diagonal and the fusion weights solve a unit-triangular integer system.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Agent/epoch coordinates of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeCoordinates {
    pub agent: usize,
    pub epoch: usize,
    pub agents_total: usize,
}

/// Maps agent `s` at epoch `k` (both 1-based) to the node `s + S(k-1)`.
pub fn node_index(agent: usize, epoch: usize, agents_total: usize) -> Result<usize> {
    if agents_total == 0 {
        return Err(Error::Domain("agent count must be positive".into()));
    }
    if agent == 0 || agent > agents_total {
        return Err(Error::Domain(format!(
            "agent {agent} outside 1..={agents_total}"
        )));
    }
    if epoch == 0 {
        return Err(Error::Domain("epoch must be at least 1".into()));
    }
    agents_total
        .checked_mul(epoch - 1)
        .and_then(|v| v.checked_add(agent))
        .ok_or(Error::Overflow("node index"))
}

/// Inverse of [`node_index`].
pub fn node_coords(node: usize, agents_total: usize) -> Result<NodeCoordinates> {
    if agents_total == 0 {
        return Err(Error::Domain("agent count must be positive".into()));
    }
    if node == 0 {
        return Err(Error::Domain("node ids start at 1".into()));
    }
    Ok(NodeCoordinates {
        agent: (node - 1) % agents_total + 1,
        epoch: (node - 1) / agents_total + 1,
        agents_total,
    })
}

/// Integer fusion weights of node `n` over nodes `1..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightVector {
    pub node: usize,
    pub weights: Vec<i64>,
}

impl WeightVector {
    /// Weight attached to node `m` (1-based); zero outside `1..node`.
    pub fn get(&self, m: usize) -> i64 {
        if m == 0 || m > self.weights.len() {
            0
        } else {
            self.weights[m - 1]
        }
    }

    /// Nodes carrying a nonzero weight.
    pub fn support(&self) -> BTreeSet<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfoFlowGraph {
    n_nodes: usize,
    adjacency: Vec<Vec<bool>>,
    closure: Vec<Vec<bool>>,
    weights: Vec<WeightVector>,
}

impl InfoFlowGraph {
    /// Builds the graph, its closure and every node's fusion weights.
    ///
    /// Duplicate edges are merged; an edge `(m, n)` with `m >= n` is rejected.
    pub fn new<I>(n_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adjacency = vec![vec![false; n_nodes]; n_nodes];
        for (from, to) in edges {
            if from >= to {
                return Err(Error::DagOrder { from, to });
            }
            if from == 0 {
                return Err(Error::NodeOutOfRange { node: from, n_nodes });
            }
            if to > n_nodes {
                return Err(Error::NodeOutOfRange { node: to, n_nodes });
            }
            adjacency[from - 1][to - 1] = true;
        }
        let closure = reachability(&adjacency);
        let weights = (1..=n_nodes)
            .map(|n| solve_weights(&closure, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_nodes,
            adjacency,
            closure,
            weights,
        })
    }

    /// Graph with nodes `1..=n_nodes` and no edges.
    pub fn empty(n_nodes: usize) -> Self {
        Self::new(n_nodes, std::iter::empty()).expect("edgeless graph is valid")
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.adjacency.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                if e {
                    out.push((i + 1, j + 1));
                }
            }
        }
        out
    }

    fn check(&self, node: usize) -> Result<()> {
        if node == 0 || node > self.n_nodes {
            Err(Error::NodeOutOfRange {
                node,
                n_nodes: self.n_nodes,
            })
        } else {
            Ok(())
        }
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        from >= 1
            && to >= 1
            && from <= self.n_nodes
            && to <= self.n_nodes
            && self.adjacency[from - 1][to - 1]
    }

    /// `true` when `to == from` or a directed path `from -> ... -> to` exists.
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        from >= 1
            && to >= 1
            && from <= self.n_nodes
            && to <= self.n_nodes
            && self.closure[from - 1][to - 1]
    }

    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        to_u8(&self.adjacency)
    }

    pub fn closure_matrix(&self) -> Vec<Vec<u8>> {
        to_u8(&self.closure)
    }

    /// Direct predecessors of `node` (the one-hop set).
    pub fn one_hop_set(&self, node: usize) -> Result<BTreeSet<usize>> {
        self.check(node)?;
        Ok((1..node).filter(|&m| self.has_edge(m, node)).collect())
    }

    /// All ancestors of `node`, excluding the node itself.
    pub fn multi_hop_set(&self, node: usize) -> Result<BTreeSet<usize>> {
        self.check(node)?;
        Ok((1..node).filter(|&m| self.reaches(m, node)).collect())
    }

    pub fn children(&self, node: usize) -> Result<BTreeSet<usize>> {
        self.check(node)?;
        Ok((node + 1..=self.n_nodes)
            .filter(|&m| self.has_edge(node, m))
            .collect())
    }

    /// Nodes without predecessors; they start from the prior.
    pub fn roots(&self) -> Vec<usize> {
        (1..=self.n_nodes)
            .filter(|&n| (1..n).all(|m| !self.has_edge(m, n)))
            .collect()
    }

    /// Fusion weights of `node`, the solution of `T_{n-1} w = t_n`.
    pub fn weight_vector(&self, node: usize) -> Result<&WeightVector> {
        self.check(node)?;
        Ok(&self.weights[node - 1])
    }

    /// Weighted nodes that are not one-hop predecessors of `node`.
    pub fn unreachable_weights(&self, node: usize) -> Result<Vec<usize>> {
        self.check(node)?;
        Ok(self.weights[node - 1]
            .support()
            .into_iter()
            .filter(|&m| !self.has_edge(m, node))
            .collect())
    }

    /// Whether node `node` can fuse the fair rating from one-hop beliefs only.
    pub fn is_achievable(&self, node: usize) -> Result<bool> {
        Ok(self.unreachable_weights(node)?.is_empty())
    }

    pub fn all_achievable(&self) -> bool {
        (1..=self.n_nodes).all(|n| self.is_achievable(n).unwrap_or(false))
    }

    /// First node violating achievability, with the weighted nodes it lacks.
    pub fn first_unachievable(&self) -> Option<(usize, Vec<usize>)> {
        (1..=self.n_nodes).find_map(|n| {
            let missing = self.unreachable_weights(n).ok()?;
            (!missing.is_empty()).then_some((n, missing))
        })
    }

    /// Smallest set of non-recruited nodes whose beliefs every recruit's
    /// weight vector refers to.
    pub fn minimal_extra_nodes(&self, recruits: &BTreeSet<usize>) -> Result<BTreeSet<usize>> {
        if recruits.is_empty() {
            return Err(Error::Domain("recruit set is empty".into()));
        }
        let mut extra = BTreeSet::new();
        for &n in recruits {
            self.check(n)?;
            extra.extend(
                self.weights[n - 1]
                    .support()
                    .into_iter()
                    .filter(|m| !recruits.contains(m)),
            );
        }
        Ok(extra)
    }

    /// Subgraph induced by nodes `1..=k`.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k > self.n_nodes {
            return Err(Error::NodeOutOfRange {
                node: k,
                n_nodes: self.n_nodes,
            });
        }
        Ok(Self {
            n_nodes: k,
            adjacency: self.adjacency[..k].iter().map(|r| r[..k].to_vec()).collect(),
            closure: self.closure[..k].iter().map(|r| r[..k].to_vec()).collect(),
            weights: self.weights[..k].to_vec(),
        })
    }

    /// `counts[i][j]` is the number of directed paths from node `i+1` to
    /// node `j+1`, with one (empty) path from a node to itself. This is the
    /// entry `(i, j)` of `(I - A)^{-1}`.
    pub fn path_counts(&self) -> Result<Vec<Vec<i128>>> {
        let n = self.n_nodes;
        let mut counts = vec![vec![0i128; n]; n];
        for i in 0..n {
            counts[i][i] = 1;
            for j in i + 1..n {
                let mut total = 0i128;
                for k in i..j {
                    if self.adjacency[k][j] && counts[i][k] != 0 {
                        total = total
                            .checked_add(counts[i][k])
                            .ok_or(Error::Overflow("path counts"))?;
                    }
                }
                counts[i][j] = total;
            }
        }
        Ok(counts)
    }

    /// Nodes where at least one ancestor's information arrives through two or
    /// more distinct direct predecessors, i.e. where incest first arises.
    pub fn incest_nodes(&self) -> BTreeSet<usize> {
        (1..=self.n_nodes)
            .filter(|&n| {
                let parents: Vec<usize> = (1..n).filter(|&m| self.has_edge(m, n)).collect();
                (1..n).any(|j| parents.iter().filter(|&&p| self.reaches(j, p)).count() >= 2)
            })
            .collect()
    }

    /// `true` when no pair of nodes is joined by more than one path, so naive
    /// fusion never double counts.
    pub fn is_multipath_free(&self) -> bool {
        self.incest_nodes().is_empty()
    }
}

fn to_u8(m: &[Vec<bool>]) -> Vec<Vec<u8>> {
    m.iter()
        .map(|r| r.iter().map(|&b| u8::from(b)).collect())
        .collect()
}

fn reachability(adjacency: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = adjacency.len();
    let mut reach = vec![vec![false; n]; n];
    // Edges point forward, so sweeping sources backwards sees every
    // successor's row completed.
    for i in (0..n).rev() {
        reach[i][i] = true;
        for j in i + 1..n {
            if adjacency[i][j] {
                let (head, tail) = reach.split_at_mut(j);
                for (dst, &src) in head[i].iter_mut().zip(tail[0].iter()) {
                    *dst |= src;
                }
            }
        }
    }
    reach
}

fn solve_weights(closure: &[Vec<bool>], node: usize) -> Result<WeightVector> {
    let dim = node - 1;
    let rhs: Vec<i64> = (0..dim).map(|i| i64::from(closure[i][node - 1])).collect();
    let weights = solve_unit_upper(
        |i, j| i64::from(closure[i][j]),
        &rhs,
    )?;
    Ok(WeightVector { node, weights })
}

/// Back-substitution for a unit upper-triangular integer system `U w = b`,
/// where `entry(i, j)` yields `U[i][j]` for `i < j`.
pub fn solve_unit_upper<F>(entry: F, rhs: &[i64]) -> Result<Vec<i64>>
where
    F: Fn(usize, usize) -> i64,
{
    let dim = rhs.len();
    let mut w = vec![0i64; dim];
    for i in (0..dim).rev() {
        let mut acc = rhs[i];
        for j in i + 1..dim {
            let u = entry(i, j);
            if u != 0 && w[j] != 0 {
                let term = u.checked_mul(w[j]).ok_or(Error::Overflow("fusion weights"))?;
                acc = acc.checked_sub(term).ok_or(Error::Overflow("fusion weights"))?;
            }
        }
        w[i] = acc;
    }
    Ok(w)
}

/// Transitive closure of a strictly upper-triangular 0/1 adjacency matrix.
pub fn transitive_closure(adjacency: &[Vec<u8>]) -> Result<Vec<Vec<u8>>> {
    let n = adjacency.len();
    let mut bools = vec![vec![false; n]; n];
    for (i, row) in adjacency.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Domain(format!(
                "adjacency row {} has length {}, expected {n}",
                i + 1,
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            match v {
                0 => {}
                1 if i < j => bools[i][j] = true,
                _ => {
                    return Err(Error::NotTriangular {
                        row: i + 1,
                        col: j + 1,
                    })
                }
            }
        }
    }
    Ok(to_u8(&reachability(&bools)))
}
