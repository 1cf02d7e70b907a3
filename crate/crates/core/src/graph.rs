//! Anonymous, port-labelled, simple, connected, undirected graphs.
//!
//! Nodes are numbered `1..=n` and ports at a node `v` are numbered
//! `1..=deg(v)`. Node numbers exist for construction, validation and trace
//! output only: protocols never see them (see [`crate::engine::LocalView`]).

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A node number, `1..=n`.
pub type Node = usize;
/// A local port label, `1..=deg(v)`. `0` is reserved for "no port".
pub type Port = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("node {0} is outside 1..={1}")]
    NodeOutOfRange(Node, usize),
    #[error("self-loop at node {0}")]
    SelfLoop(Node),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(Node, Node),
    #[error("graph is disconnected: node {0} unreachable from node 1")]
    DisconnectedGraph(Node),
    #[error("port {port} out of range at node {node} (degree {degree})")]
    PortOutOfRange {
        node: Node,
        port: Port,
        degree: usize,
    },
    #[error("invalid port table: {0}")]
    InvalidPortTable(String),
    #[error("infeasible generator parameters: {0}")]
    InfeasibleParameters(String),
}

/// How port numbers are assigned when building from an edge list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortRule {
    /// Port `p` at `v` leads to the `p`-th smallest neighbour of `v`.
    Sorted,
    /// A deterministic per-node permutation of the sorted assignment.
    SeededShuffle(u64),
}

/// Parameterised graph families used as the test corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GraphKind {
    Ring { n: usize },
    Path { n: usize },
    Complete { n: usize },
    Star { n: usize },
    RandomConnected { n: usize, m: usize, seed: u64 },
}

/// An immutable port-labelled graph.
///
/// `adjacency[v-1][p-1] = (u, q)` means port `p` at `v` leads to `u`, where
/// the edge is labelled `q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PortGraph {
    adjacency: Vec<Vec<(Node, Port)>>,
    edge_count: usize,
}

impl PortGraph {
    /// Builds a graph on nodes `1..=n` from an edge list.
    pub fn build(n: usize, edges: &[(Node, Node)], rule: PortRule) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut neighbours: Vec<BTreeSet<Node>> = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            for v in [a, b] {
                if v == 0 || v > n {
                    return Err(GraphError::NodeOutOfRange(v, n));
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if !neighbours[a - 1].insert(b) {
                return Err(GraphError::DuplicateEdge(a.min(b), a.max(b)));
            }
            neighbours[b - 1].insert(a);
        }

        // order[v] lists v's neighbours in port order.
        let mut order: Vec<Vec<Node>> = neighbours
            .into_iter()
            .map(|set| set.into_iter().collect())
            .collect();
        if let PortRule::SeededShuffle(seed) = rule {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for list in &mut order {
                list.shuffle(&mut rng);
            }
        }

        let mut adjacency: Vec<Vec<(Node, Port)>> =
            order.iter().map(|l| Vec::with_capacity(l.len())).collect();
        for (vi, list) in order.iter().enumerate() {
            let v = vi + 1;
            for &u in list {
                let q = order[u - 1]
                    .iter()
                    .position(|&w| w == v)
                    .expect("neighbour sets are symmetric") as Port
                    + 1;
                adjacency[vi].push((u, q));
            }
        }
        Self::from_port_table(adjacency)
    }

    /// Builds a graph from an explicit port table, validating every invariant.
    pub fn from_port_table(adjacency: Vec<Vec<(Node, Port)>>) -> Result<Self, GraphError> {
        let degree_sum: usize = adjacency.iter().map(Vec::len).sum();
        if !degree_sum.is_multiple_of(2) {
            return Err(GraphError::InvalidPortTable(format!(
                "degree sum {degree_sum} is odd"
            )));
        }
        let graph = PortGraph {
            adjacency,
            edge_count: degree_sum / 2,
        };
        graph.validate()?;
        Ok(graph)
    }

    /// Generates a member of one of the corpus families.
    pub fn generate(kind: GraphKind) -> Result<Self, GraphError> {
        let infeasible = |msg: String| Err(GraphError::InfeasibleParameters(msg));
        match kind {
            GraphKind::Ring { n } => {
                if n < 3 {
                    return infeasible(format!("ring needs n >= 3, got {n}"));
                }
                let edges: Vec<_> = (1..=n).map(|v| (v, v % n + 1)).collect();
                Self::build(n, &edges, PortRule::Sorted)
            }
            GraphKind::Path { n } => {
                if n < 1 {
                    return infeasible("path needs n >= 1".into());
                }
                let edges: Vec<_> = (1..n).map(|v| (v, v + 1)).collect();
                Self::build(n, &edges, PortRule::Sorted)
            }
            GraphKind::Complete { n } => {
                if n < 1 {
                    return infeasible("complete graph needs n >= 1".into());
                }
                let edges: Vec<_> = (1..=n)
                    .flat_map(|a| (a + 1..=n).map(move |b| (a, b)))
                    .collect();
                Self::build(n, &edges, PortRule::Sorted)
            }
            GraphKind::Star { n } => {
                if n < 2 {
                    return infeasible(format!("star needs n >= 2, got {n}"));
                }
                let edges: Vec<_> = (2..=n).map(|leaf| (1, leaf)).collect();
                Self::build(n, &edges, PortRule::Sorted)
            }
            GraphKind::RandomConnected { n, m, seed } => {
                let max_m = n * n.saturating_sub(1) / 2;
                if n == 0 || m + 1 < n || m > max_m {
                    return infeasible(format!(
                        "random_connected needs n-1 <= m <= n(n-1)/2, got n={n}, m={m}"
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                // Random spanning tree: each node in a shuffled order attaches
                // to a uniformly chosen earlier node.
                let mut perm: Vec<Node> = (1..=n).collect();
                perm.shuffle(&mut rng);
                let mut present = BTreeSet::new();
                for i in 1..n {
                    let parent = perm[rng.gen_range(0..i)];
                    let child = perm[i];
                    present.insert((parent.min(child), parent.max(child)));
                }
                let mut missing: Vec<(Node, Node)> = (1..=n)
                    .flat_map(|a| (a + 1..=n).map(move |b| (a, b)))
                    .filter(|e| !present.contains(e))
                    .collect();
                missing.shuffle(&mut rng);
                present.extend(missing.into_iter().take(m - (n - 1)));
                let edges: Vec<_> = present.into_iter().collect();
                Self::build(n, &edges, PortRule::SeededShuffle(seed))
            }
        }
    }

    /// Checks the five structural invariants.
    pub fn validate(&self) -> Result<(), GraphError> {
        let n = self.adjacency.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        for (vi, ports) in self.adjacency.iter().enumerate() {
            let v = vi + 1;
            let mut seen = BTreeSet::new();
            for (pi, &(u, q)) in ports.iter().enumerate() {
                let p = pi as Port + 1;
                if u == 0 || u > n {
                    return Err(GraphError::NodeOutOfRange(u, n));
                }
                if u == v {
                    return Err(GraphError::SelfLoop(v));
                }
                if !seen.insert(u) {
                    return Err(GraphError::DuplicateEdge(v.min(u), v.max(u)));
                }
                let back = self.adjacency[u - 1].get(q.wrapping_sub(1) as usize);
                if q == 0 || back != Some(&(v, p)) {
                    return Err(GraphError::InvalidPortTable(format!(
                        "port {p} at node {v} leads to ({u}, {q}) but the reverse entry does not match"
                    )));
                }
            }
        }
        let degree_sum: usize = self.adjacency.iter().map(Vec::len).sum();
        if degree_sum != 2 * self.edge_count {
            return Err(GraphError::InvalidPortTable(format!(
                "degree sum {degree_sum} != 2m = {}",
                2 * self.edge_count
            )));
        }
        let mut reached = vec![false; n];
        reached[0] = true;
        let mut queue = VecDeque::from([1usize]);
        while let Some(v) = queue.pop_front() {
            for &(u, _) in &self.adjacency[v - 1] {
                if !reached[u - 1] {
                    reached[u - 1] = true;
                    queue.push_back(u);
                }
            }
        }
        if let Some(missing) = reached.iter().position(|r| !r) {
            return Err(GraphError::DisconnectedGraph(missing + 1));
        }
        Ok(())
    }

    /// Follows port `p` out of `v`, returning the far node and its port.
    pub fn neighbor(&self, v: Node, p: Port) -> Result<(Node, Port), GraphError> {
        let ports = self
            .adjacency
            .get(v.wrapping_sub(1))
            .ok_or(GraphError::NodeOutOfRange(v, self.node_count()))?;
        if p == 0 || p as usize > ports.len() {
            return Err(GraphError::PortOutOfRange {
                node: v,
                port: p,
                degree: ports.len(),
            });
        }
        Ok(ports[p as usize - 1])
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Degree of `v`. Panics if `v` is not a node.
    pub fn degree(&self, v: Node) -> usize {
        self.adjacency[v - 1].len()
    }

    /// Δ, the maximum degree.
    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> {
        1..=self.adjacency.len()
    }

    /// The raw port table, indexed by `node - 1` then `port - 1`.
    pub fn port_table(&self) -> &[Vec<(Node, Port)>] {
        &self.adjacency
    }
}
