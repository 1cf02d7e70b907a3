//! Run configuration files and their resolution into runnable instances.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use dispersim::arbitrary::{Arbitrary, Knowledge};
use dispersim::engine::{CrashSchedule, RobotId};
use dispersim::graph::{GraphKind, Node, Port, PortGraph, PortRule};
use dispersim::rooted::Rooted;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid graph: {0}")]
    Graph(#[from] dispersim::graph::GraphError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// A generator call, an edge list, or a full port table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Generator(GraphKind),
    Edges {
        n: usize,
        edges: Vec<(Node, Node)>,
        #[serde(default = "sorted")]
        port_rule: PortRule,
    },
    PortTable {
        port_table: Vec<Vec<(Node, Port)>>,
    },
}

fn sorted() -> PortRule {
    PortRule::Sorted
}

impl GraphSpec {
    pub fn build(&self) -> Result<PortGraph, ConfigError> {
        Ok(match self {
            GraphSpec::Generator(kind) => PortGraph::generate(*kind)?,
            GraphSpec::Edges {
                n,
                edges,
                port_rule,
            } => PortGraph::build(*n, edges, *port_rule)?,
            GraphSpec::PortTable { port_table } => PortGraph::from_port_table(port_table.clone())?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Rooted,
    Arbitrary,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Rooted => "rooted",
            ProtocolKind::Arbitrary => "arbitrary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cluster {
    pub node: Node,
    pub robots: Vec<RobotId>,
}

/// Robots `1..=k` on one node, or explicit clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Placement {
    Root { root: Node, k: u32 },
    Clusters { clusters: Vec<Cluster> },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultSpec {
    #[default]
    None,
    /// `[robot, round]` pairs.
    Explicit(Vec<(RobotId, u64)>),
    /// `f` distinct victims crashing at uniform rounds within the protocol's
    /// round limit.
    Random {
        f: u32,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Every schedule of `f` crashes within `horizon` rounds (default: the
    /// protocol's round limit).
    Exhaustive {
        f: u32,
        #[serde(default)]
        horizon: Option<u64>,
    },
}

impl FaultSpec {
    pub fn fault_count(&self) -> u32 {
        match self {
            FaultSpec::None => 0,
            FaultSpec::Explicit(v) => v.len() as u32,
            FaultSpec::Random { f, .. } | FaultSpec::Exhaustive { f, .. } => *f,
        }
    }
}

/// Overrides for what arbitrary-start robots are told.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeOverrides {
    #[serde(default)]
    pub f: Option<u32>,
    #[serde(default)]
    pub l: Option<u32>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub max_degree: Option<usize>,
    #[serde(default)]
    pub phase_len: Option<u64>,
    #[serde(default)]
    pub num_phases: Option<u64>,
    /// Only `k` is known: `k²`-round phases, `k + 1` of them.
    #[serde(default)]
    pub k_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub graph: GraphSpec,
    pub protocol: ProtocolKind,
    pub placement: Placement,
    #[serde(default)]
    pub faults: FaultSpec,
    #[serde(default)]
    pub knowledge: KnowledgeOverrides,
    #[serde(default)]
    pub max_rounds: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub enum AnyProtocol {
    Rooted(Rooted),
    Arbitrary(Arbitrary),
}

#[derive(Debug, Clone)]
pub enum Faults {
    Fixed(CrashSchedule),
    Exhaustive { f: usize, horizon: u64 },
}

/// A validated configuration, ready to run.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: PortGraph,
    pub placement: Vec<(RobotId, Node)>,
    pub protocol: AnyProtocol,
    pub kind: ProtocolKind,
    pub k: u32,
    pub f: u32,
    pub l: u32,
    pub faults: Faults,
    pub max_rounds: u64,
}

impl Instance {
    pub fn round_limit(&self) -> u64 {
        use dispersim::engine::Protocol;
        match &self.protocol {
            AnyProtocol::Rooted(p) => p.round_limit(),
            AnyProtocol::Arbitrary(p) => p.round_limit(),
        }
    }
}

impl RunConfig {
    /// Validates the config and builds the graph, placement, protocol and
    /// crash schedule. `seed` overrides the config's own seed.
    pub fn resolve(&self, seed: Option<u64>) -> Result<Instance, ConfigError> {
        let graph = self.graph.build()?;
        let n = graph.node_count();
        let clusters = match &self.placement {
            Placement::Root { root, k } => vec![Cluster {
                node: *root,
                robots: (1..=*k).collect(),
            }],
            Placement::Clusters { clusters } => clusters.clone(),
        };
        if self.protocol == ProtocolKind::Rooted && clusters.len() != 1 {
            return invalid("rooted placement must name exactly one node");
        }
        let mut nodes = BTreeSet::new();
        let mut placement = Vec::new();
        for c in &clusters {
            if c.node == 0 || c.node > n {
                return invalid(format!("cluster node {} outside 1..={n}", c.node));
            }
            if !nodes.insert(c.node) {
                return invalid(format!("two clusters on node {}", c.node));
            }
            if c.robots.is_empty() {
                return invalid(format!("empty cluster on node {}", c.node));
            }
            placement.extend(c.robots.iter().map(|&id| (id, c.node)));
        }
        placement.sort_unstable();
        let k = placement.len() as u32;
        if k == 0 {
            return invalid("no robots placed");
        }
        let ids: Vec<RobotId> = placement.iter().map(|&(id, _)| id).collect();
        if ids != (1..=k).collect::<Vec<_>>() {
            return invalid(format!("robot ids must be exactly 1..={k}, each once"));
        }
        let l = clusters.len() as u32;
        let f = self.faults.fault_count();
        if f > k {
            return invalid(format!("{f} faults for {k} robots"));
        }

        let protocol = match self.protocol {
            ProtocolKind::Rooted => AnyProtocol::Rooted(Rooted::new(k, graph.max_degree())),
            ProtocolKind::Arbitrary => {
                let o = &self.knowledge;
                let knowledge = Knowledge {
                    k,
                    f: o.f.unwrap_or(f),
                    l: o.l.unwrap_or(l),
                    m: o.m.unwrap_or(graph.edge_count()),
                    max_degree: o.max_degree.unwrap_or(graph.max_degree()),
                };
                let p = if o.k_only {
                    Arbitrary::k_only(k, graph.max_degree())
                } else {
                    Arbitrary::new(knowledge)
                };
                let p = match (o.phase_len, o.num_phases) {
                    (None, None) => p,
                    (len, phases) => Arbitrary::with_phases(
                        k,
                        graph.max_degree(),
                        len.unwrap_or(p.phase_len()),
                        phases.unwrap_or(p.num_phases()),
                    ),
                };
                if p.phase_len() == 0 || p.num_phases() == 0 {
                    return invalid("phase length and phase count must be positive");
                }
                AnyProtocol::Arbitrary(p)
            }
        };

        let mut instance = Instance {
            graph,
            placement,
            protocol,
            kind: self.protocol,
            k,
            f,
            l,
            faults: Faults::Fixed(CrashSchedule::none()),
            max_rounds: 0,
        };
        let limit = instance.round_limit();
        instance.max_rounds = self.max_rounds.unwrap_or(limit);
        if instance.max_rounds == 0 {
            return invalid("max_rounds must be at least 1");
        }
        let seed = seed.or(self.seed).unwrap_or(0);
        instance.faults = match &self.faults {
            FaultSpec::None => Faults::Fixed(CrashSchedule::none()),
            FaultSpec::Explicit(entries) => {
                if let Some((id, _)) = entries.iter().find(|(id, _)| *id == 0 || *id > k) {
                    return invalid(format!("crash of nonexistent robot {id}"));
                }
                Faults::Fixed(
                    CrashSchedule::new(entries.iter().copied())
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?,
                )
            }
            FaultSpec::Random { f, seed: own } => {
                Faults::Fixed(random_schedule(k, *f, limit, own.unwrap_or(seed)))
            }
            FaultSpec::Exhaustive { f, horizon } => Faults::Exhaustive {
                f: *f as usize,
                horizon: horizon.unwrap_or(limit),
            },
        };
        Ok(instance)
    }
}

/// `f` distinct robots out of `1..=k`, each crashing in a uniform round of
/// `1..=horizon`.
pub fn random_schedule(k: u32, f: u32, horizon: u64, seed: u64) -> CrashSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<RobotId> = (1..=k).collect();
    ids.shuffle(&mut rng);
    let mut victims = ids[..f.min(k) as usize].to_vec();
    victims.sort_unstable();
    CrashSchedule::new(
        victims
            .into_iter()
            .map(|v| (v, rng.gen_range(1..=horizon.max(1)))),
    )
    .expect("victims are distinct")
}

/// Deals robots `1..=k` into `l` clusters on distinct random nodes, the
/// first clusters taking any remainder.
pub fn random_clusters(n: usize, k: u32, l: u32, seed: u64) -> Vec<Cluster> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<Node> = (1..=n).collect();
    nodes.shuffle(&mut rng);
    let l = l.clamp(1, k.min(n as u32)) as usize;
    let mut clusters: Vec<Cluster> = nodes[..l]
        .iter()
        .map(|&node| Cluster {
            node,
            robots: Vec::new(),
        })
        .collect();
    for id in 1..=k {
        clusters[(id as usize - 1) % l].robots.push(id);
    }
    clusters
}
