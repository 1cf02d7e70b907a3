//! Parameter sweeps: one run per point of a grid, one CSV row per run.

use std::io::Write;
use std::path::Path;

use dispersim::graph::GraphKind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{random_clusters, ConfigError, FaultSpec, GraphSpec, Placement, RunConfig};
use crate::exec::{execute, exhaust};

/// Values to substitute into the base config. A missing axis keeps the base
/// value; an empty one yields no points at all.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    #[serde(default)]
    pub k: Option<Vec<u32>>,
    #[serde(default)]
    pub f: Option<Vec<u32>>,
    #[serde(default)]
    pub l: Option<Vec<u32>>,
    #[serde(default)]
    pub graph_seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: RunConfig,
    #[serde(default)]
    pub axes: Axes,
}

impl SweepConfig {
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

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Point {
    pub graph_seed: Option<u64>,
    pub k: Option<u32>,
    pub f: Option<u32>,
    pub l: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub n: usize,
    pub m: usize,
    pub delta: usize,
    pub k: u32,
    pub f: u32,
    pub l: u32,
    pub protocol: String,
    pub rounds: u64,
    pub dispersed: bool,
    pub max_memory_bits: u32,
    pub trace_hash: String,
    pub error: String,
}

fn axis<T: Copy>(values: &Option<Vec<T>>) -> Vec<Option<T>> {
    match values {
        None => vec![None],
        Some(v) => v.iter().copied().map(Some).collect(),
    }
}

/// Grid points in a fixed order: graph seed, then `k`, `f`, `l`.
pub fn points(axes: &Axes) -> Vec<Point> {
    let mut out = Vec::new();
    for graph_seed in axis(&axes.graph_seeds) {
        for k in axis(&axes.k) {
            for f in axis(&axes.f) {
                for l in axis(&axes.l) {
                    out.push(Point {
                        graph_seed,
                        k,
                        f,
                        l,
                    });
                }
            }
        }
    }
    out
}

pub(crate) fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The base config with one point's values substituted.
pub fn point_config(base: &RunConfig, point: &Point, seed: u64) -> Result<RunConfig, ConfigError> {
    let mut c = base.clone();
    if let Some(s) = point.graph_seed {
        if let GraphSpec::Generator(GraphKind::RandomConnected { seed, .. }) = &mut c.graph {
            *seed = s;
        }
    }
    let n = c.graph.build()?.node_count();
    let (base_k, base_l) = match &c.placement {
        Placement::Root { k, .. } => (*k, 1),
        Placement::Clusters { clusters } => (
            clusters.iter().map(|c| c.robots.len() as u32).sum(),
            clusters.len() as u32,
        ),
    };
    let k = point.k.unwrap_or(base_k);
    match &mut c.placement {
        Placement::Root { k: pk, .. } => *pk = k,
        Placement::Clusters { clusters } => {
            if point.k.is_some() || point.l.is_some() {
                *clusters = random_clusters(n, k, point.l.unwrap_or(base_l), seed);
            }
        }
    }
    if let Some(f) = point.f {
        c.faults = match c.faults {
            FaultSpec::Exhaustive { horizon, .. } => FaultSpec::Exhaustive { f, horizon },
            _ => FaultSpec::Random {
                f: f.min(k),
                seed: Some(seed),
            },
        };
    }
    c.seed = Some(seed);
    Ok(c)
}

fn row(config: &RunConfig) -> Row {
    let mut row = Row {
        n: 0,
        m: 0,
        delta: 0,
        k: 0,
        f: 0,
        l: 0,
        protocol: config.protocol.as_str().to_string(),
        rounds: 0,
        dispersed: false,
        max_memory_bits: 0,
        trace_hash: String::new(),
        error: String::new(),
    };
    let inst = match config.resolve(None) {
        Ok(inst) => inst,
        Err(e) => {
            row.error = e.to_string();
            return row;
        }
    };
    row.n = inst.graph.node_count();
    row.m = inst.graph.edge_count();
    row.delta = inst.graph.max_degree();
    row.k = inst.k;
    row.f = inst.f;
    row.l = inst.l;
    match &inst.faults {
        crate::config::Faults::Fixed(schedule) => match execute(&inst, schedule.clone()) {
            Ok(o) => {
                row.rounds = o.summary.rounds_elapsed;
                row.dispersed = o.summary.dispersed;
                row.max_memory_bits = o.summary.max_memory_bits;
                row.trace_hash = o.summary.trace_hash;
                row.error = o.problems.join("; ");
            }
            Err(e) => row.error = e.to_string(),
        },
        crate::config::Faults::Exhaustive { f, horizon } => match exhaust(&inst, *f, *horizon) {
            Ok(r) => {
                row.rounds = r.max_rounds;
                row.dispersed = r.passed();
                row.max_memory_bits = r.max_memory_bits;
                row.trace_hash = r.worst_trace_hash.clone();
                row.error = r
                    .failures
                    .iter()
                    .map(|f| f.reason.as_str())
                    .collect::<Vec<_>>()
                    .join("; ");
            }
            Err(e) => row.error = e.to_string(),
        },
    }
    row
}

/// Runs every point, in parallel, and returns the rows in grid order.
pub fn sweep(config: &SweepConfig, seed: Option<u64>) -> Vec<Row> {
    let base_seed = seed.or(config.base.seed).unwrap_or(0);
    points(&config.axes)
        .par_iter()
        .enumerate()
        .map(
            |(i, p)| match point_config(&config.base, p, mix(base_seed, i as u64)) {
                Ok(c) => row(&c),
                Err(e) => Row {
                    n: 0,
                    m: 0,
                    delta: 0,
                    k: p.k.unwrap_or(0),
                    f: p.f.unwrap_or(0),
                    l: p.l.unwrap_or(0),
                    protocol: config.base.protocol.as_str().to_string(),
                    rounds: 0,
                    dispersed: false,
                    max_memory_bits: 0,
                    trace_hash: String::new(),
                    error: e.to_string(),
                },
            },
        )
        .collect()
}

pub const HEADER: [&str; 12] = [
    "n",
    "m",
    "delta",
    "k",
    "f",
    "l",
    "protocol",
    "rounds",
    "dispersed",
    "max_memory_bits",
    "trace_hash",
    "error",
];

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
