//! Append-only simulation traces, their canonical digest, and the summary
//! record derived from them.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::RobotId;
use crate::graph::{Node, Port};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Crash,
    Reset,
    Merge,
    Repair,
    Bounce,
    Release,
    Overrun,
    Settle,
    Move,
    Wait,
}

impl EventKind {
    /// Within a round, events sort by this value and then by robot id.
    pub fn order(self) -> u8 {
        self as u8
    }

    /// Kinds emitted exactly once per alive robot per round.
    pub fn is_action(self) -> bool {
        matches!(self, EventKind::Settle | EventKind::Move | EventKind::Wait)
    }
}

/// Protocol state as it appears in the trace. Every field is optional so
/// both protocols share one record shape.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub mode: String,
    pub settled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<Port>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cdr: Option<Port>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cdr_used: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub backtrack: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cid: Option<RobotId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<RobotId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counter: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<u64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub waiting: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock: Option<u64>,
}

impl StateSnapshot {
    /// The pointer fields a visiting robot can observe on a settled robot.
    pub fn pointer_key(&self) -> (Option<Port>, Option<Port>, bool, bool) {
        (self.parent, self.cdr, self.cdr_used, self.backtrack)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Payload {
    /// Node the robot occupied when the round began.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<Node>,
    /// Port the robot entered `node` through (0 if it did not move).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_port: Option<Port>,
    /// Exit port of a move.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub port: Option<Port>,
    /// Destination of a move.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<Node>,
    /// Robot affected by a write (repair, adoption) or merge target cid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<RobotId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_bits: Option<u32>,
    /// State observed at the start of the round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceEvent {
    pub round: u64,
    pub robot: RobotId,
    pub kind: EventKind,
    pub payload: Payload,
}

impl TraceEvent {
    pub fn new(round: u64, robot: RobotId, kind: EventKind) -> Self {
        TraceEvent {
            round,
            robot,
            kind,
            payload: Payload::default(),
        }
    }
}

/// Incremental SHA-256 over the canonical JSON-lines encoding.
#[derive(Clone, Default)]
pub struct TraceHasher {
    hasher: Sha256,
}

impl TraceHasher {
    pub fn update(&mut self, event: &TraceEvent) {
        let line = serde_json::to_vec(event).expect("trace events always serialize");
        self.hasher.update(&line);
        self.hasher.update(b"\n");
    }

    pub fn finish(self) -> String {
        hex::encode(self.hasher.finalize())
    }
}

/// Digest of an ordered event sequence. Identical to the SHA-256 of the
/// JSONL file written by [`write_jsonl`].
pub fn trace_hash(events: &[TraceEvent]) -> String {
    let mut h = TraceHasher::default();
    for e in events {
        h.update(e);
    }
    h.finish()
}

pub fn write_jsonl<W: Write>(mut out: W, events: &[TraceEvent]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TraceEvent>, TraceError> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| TraceError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Starting node of every robot, read from the first round of a trace. In
/// round 1 every robot either acts or crashes, and both events carry its
/// node.
pub fn initial_placement(events: &[TraceEvent]) -> Vec<(RobotId, Node)> {
    let mut placement: Vec<_> = events
        .iter()
        .take_while(|e| e.round == 1)
        .filter(|e| e.kind == EventKind::Crash || e.kind.is_action())
        .filter_map(|e| e.payload.node.map(|node| (e.robot, node)))
        .collect();
    placement.sort_unstable();
    placement
}

/// One-line run summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub rounds_elapsed: u64,
    pub dispersed: bool,
    pub alive_count: usize,
    pub max_memory_bits: u32,
    pub trace_hash: String,
}

/// Recomputes the summary from a trace alone.
///
/// `robots` lists every robot of the run with its starting node. Every round
/// of a run carries at least one event (an action per alive robot, or the
/// crash that emptied the world), so the last event's round is the length of
/// the run.
pub fn summarize(events: &[TraceEvent], robots: &[(RobotId, Node)]) -> Summary {
    let rounds_elapsed = events.last().map_or(0, |e| e.round);
    #[derive(Clone, Copy)]
    struct Last {
        node: Node,
        settled: bool,
        alive: bool,
    }
    let mut last: BTreeMap<RobotId, Last> = robots
        .iter()
        .map(|&(id, node)| {
            (
                id,
                Last {
                    node,
                    settled: false,
                    alive: true,
                },
            )
        })
        .collect();
    let mut max_memory_bits = 0;
    for e in events {
        let Some(entry) = last.get_mut(&e.robot) else {
            continue;
        };
        match e.kind {
            EventKind::Crash => entry.alive = false,
            k if k.is_action() => {
                let p = &e.payload;
                max_memory_bits = max_memory_bits.max(p.memory_bits.unwrap_or(0));
                if let Some(node) = p.to.or(p.node) {
                    entry.node = node;
                }
                let was_settled = p.state.as_ref().is_some_and(|s| s.settled);
                entry.settled = was_settled || k == EventKind::Settle;
            }
            _ => {}
        }
    }
    let alive: Vec<Last> = last.values().copied().filter(|l| l.alive).collect();
    let mut occupied = BTreeMap::new();
    for l in &alive {
        *occupied.entry(l.node).or_insert(0usize) += 1;
    }
    let dispersed = alive.iter().all(|l| l.settled) && occupied.values().all(|&c| c <= 1);
    Summary {
        rounds_elapsed,
        dispersed,
        alive_count: alive.len(),
        max_memory_bits,
        trace_hash: trace_hash(events),
    }
}
