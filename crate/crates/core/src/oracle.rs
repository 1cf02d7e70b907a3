//! Ground truth for checking runs: a reference DFS, bound checks, trace
//! monitors and an exhaustive crash adversary.
//!
//! Monitors read traces only, so they work equally on live results and on
//! JSONL files loaded from disk.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ceil_log2, run, CrashSchedule, EngineError, Protocol, RobotId, SimResult};
use crate::graph::{Node, Port, PortGraph};
use crate::trace::{EventKind, StateSnapshot, Summary, TraceEvent};

/// Default cap on the number of schedules [`enumerate_adversary`] will run.
pub const ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{what}: observed {observed}, bound {bound}")]
    BoundViolation {
        what: &'static str,
        observed: u64,
        bound: u64,
        trace_hash: String,
    },
    #[error("{monitor} violated in round {round}: {detail}")]
    MonitorViolation {
        monitor: &'static str,
        round: u64,
        detail: String,
    },
    #[error("{count} schedules exceed the enumeration cap of {cap}")]
    EnumerationTooLarge { count: u128, cap: u128 },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Nodes in first-visit order of a DFS from `root` that always takes the
/// smallest unexplored port.
pub fn reference_dfs(g: &PortGraph, root: Node) -> Vec<Node> {
    let mut order = vec![root];
    let mut seen = vec![false; g.node_count() + 1];
    seen[root] = true;
    let mut stack: Vec<(Node, Port)> = vec![(root, 0)];
    while let Some(&mut (v, ref mut last)) = stack.last_mut() {
        let next = (*last + 1..=g.degree(v) as Port).find_map(|p| {
            let (u, _) = g.neighbor(v, p).expect("port in range");
            (!seen[u]).then_some((p, u))
        });
        match next {
            Some((p, u)) => {
                *last = p;
                seen[u] = true;
                order.push(u);
                stack.push((u, 0));
            }
            None => {
                stack.pop();
            }
        }
    }
    order
}

/// The first `k` nodes discovered by [`reference_dfs`].
pub fn reference_first_k(g: &PortGraph, root: Node, k: usize) -> BTreeSet<Node> {
    reference_dfs(g, root).into_iter().take(k).collect()
}

/// Memory allowance per robot: `4(⌈log2(k+1)⌉ + ⌈log2(Δ+2)⌉) + 16` bits.
pub fn memory_envelope(k: u32, max_degree: usize) -> u32 {
    4 * (ceil_log2(u64::from(k) + 1) + ceil_log2(max_degree as u64 + 2)) + 16
}

/// Round allowance of the arbitrary protocol: `phases · phase_len`.
pub fn phase_bound(phases: u64, phase_len: u64) -> u64 {
    phases * phase_len
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundReport {
    pub rounds: u64,
    pub round_bound: u64,
    pub memory_bits: u32,
    pub memory_bound: u32,
}

/// Checks a run summary against a round bound and the memory envelope.
pub fn check_bounds(
    summary: &Summary,
    round_bound: u64,
    k: u32,
    max_degree: usize,
) -> Result<BoundReport, OracleError> {
    let memory_bound = memory_envelope(k, max_degree);
    if summary.rounds_elapsed > round_bound {
        return Err(OracleError::BoundViolation {
            what: "rounds",
            observed: summary.rounds_elapsed,
            bound: round_bound,
            trace_hash: summary.trace_hash.clone(),
        });
    }
    if summary.max_memory_bits > memory_bound {
        return Err(OracleError::BoundViolation {
            what: "memory bits",
            observed: u64::from(summary.max_memory_bits),
            bound: u64::from(memory_bound),
            trace_hash: summary.trace_hash.clone(),
        });
    }
    Ok(BoundReport {
        rounds: summary.rounds_elapsed,
        round_bound,
        memory_bits: summary.max_memory_bits,
        memory_bound,
    })
}

const MOVER_MODES: [&str; 3] = ["forward", "backtrack", "retreat"];

fn is_mover(state: &StateSnapshot) -> bool {
    !state.settled && MOVER_MODES.contains(&state.mode.as_str())
}

fn actions(trace: &[TraceEvent]) -> impl Iterator<Item = (&TraceEvent, &StateSnapshot)> {
    trace
        .iter()
        .filter(|e| e.kind.is_action())
        .filter_map(|e| e.payload.state.as_ref().map(|s| (e, s)))
}

/// Rooted runs: at most one alive robot is travelling in any round.
pub fn one_mover_monitor(trace: &[TraceEvent]) -> Result<(), OracleError> {
    let mut per_round: BTreeMap<u64, Vec<RobotId>> = BTreeMap::new();
    for (e, s) in actions(trace) {
        if is_mover(s) {
            per_round.entry(e.round).or_default().push(e.robot);
        }
    }
    match per_round.into_iter().find(|(_, movers)| movers.len() > 1) {
        Some((round, movers)) => Err(OracleError::MonitorViolation {
            monitor: "one-mover",
            round,
            detail: format!("robots {movers:?} travelling together"),
        }),
        None => Ok(()),
    }
}

type LoopKey = (Node, Port, String, Option<PointerKey>);

type PointerKey = (Option<Port>, Option<Port>, bool, bool);

/// Rooted runs: between a release and its return or settlement, an explorer
/// never repeats the same (node, entry port, mode, host pointers).
pub fn loop_monitor(trace: &[TraceEvent]) -> Result<(), OracleError> {
    let mut hosts: BTreeMap<(u64, Node), PointerKey> = BTreeMap::new();
    for (e, s) in actions(trace) {
        if s.settled {
            if let Some(node) = e.payload.node {
                hosts.insert((e.round, node), s.pointer_key());
            }
        }
    }
    let mut seen: BTreeMap<RobotId, HashSet<LoopKey>> = BTreeMap::new();
    for e in trace {
        if e.kind == EventKind::Release {
            seen.remove(&e.robot);
            continue;
        }
        let Some(s) = e.payload.state.as_ref().filter(|_| e.kind.is_action()) else {
            continue;
        };
        if !is_mover(s) {
            seen.remove(&e.robot);
            continue;
        }
        let node = e.payload.node.unwrap_or(0);
        let key = (
            node,
            e.payload.entry_port.unwrap_or(0),
            s.mode.clone(),
            hosts.get(&(e.round, node)).copied(),
        );
        if !seen.entry(e.robot).or_default().insert(key) {
            return Err(OracleError::MonitorViolation {
                monitor: "loop",
                round: e.round,
                detail: format!("robot {} repeated a configuration at node {node}", e.robot),
            });
        }
    }
    Ok(())
}

/// Arbitrary runs: every robot acting in a round holds the same counter.
pub fn counter_agreement_monitor(trace: &[TraceEvent]) -> Result<(), OracleError> {
    let mut per_round: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for (e, s) in actions(trace) {
        if let Some(c) = s.counter {
            per_round.entry(e.round).or_default().insert(c);
        }
    }
    match per_round.into_iter().find(|(_, cs)| cs.len() > 1) {
        Some((round, cs)) => Err(OracleError::MonitorViolation {
            monitor: "counter agreement",
            round,
            detail: format!("counters {cs:?}"),
        }),
        None => Ok(()),
    }
}

/// Arbitrary runs: the number of clusters seen at each phase start, as
/// `(round, clusters)`. A phase starts in a round whose counters read zero;
/// its clusters are the nodes then holding unsettled robots.
pub fn phase_start_clusters(trace: &[TraceEvent]) -> Vec<(u64, usize)> {
    let mut starts: BTreeMap<u64, BTreeSet<Node>> = BTreeMap::new();
    for (e, s) in actions(trace) {
        if s.counter == Some(0) {
            let nodes = starts.entry(e.round).or_default();
            if !s.settled {
                nodes.extend(e.payload.node);
            }
        }
    }
    starts
        .into_iter()
        .map(|(r, nodes)| (r, nodes.len()))
        .collect()
}

/// Arbitrary runs: cluster counts never grow from one phase start to the next.
pub fn cluster_monotonicity_monitor(trace: &[TraceEvent]) -> Result<(), OracleError> {
    let counts = phase_start_clusters(trace);
    match counts.windows(2).find(|w| w[1].1 > w[0].1) {
        Some(w) => Err(OracleError::MonitorViolation {
            monitor: "cluster monotonicity",
            round: w[1].0,
            detail: format!("{} clusters after {}", w[1].1, w[0].1),
        }),
        None => Ok(()),
    }
}

/// Exact `C(n, r)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, r: u64) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = match acc.checked_mul(u128::from(n - i)) {
            Some(v) => v / u128::from(i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All schedules crashing `f` distinct robots from `ids`, each at a round in
/// `1..=horizon`, in lexicographic order.
#[derive(Debug, Clone)]
pub struct AdversaryEnumeration {
    ids: Vec<RobotId>,
    horizon: u64,
    victims: Vec<usize>,
    rounds: Vec<u64>,
    done: bool,
}

impl AdversaryEnumeration {
    pub fn new(ids: &[RobotId], f: usize, horizon: u64) -> Self {
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        let done = f > ids.len() || (f > 0 && horizon == 0);
        AdversaryEnumeration {
            ids,
            horizon,
            victims: (0..f).collect(),
            rounds: vec![1; f],
            done,
        }
    }

    /// `C(k, f) · horizon^f`, saturating.
    pub fn count(k: usize, f: usize, horizon: u64) -> u128 {
        let mut total = binomial(k as u64, f as u64);
        for _ in 0..f {
            total = total.saturating_mul(u128::from(horizon));
        }
        total
    }

    fn bump(&mut self) {
        let f = self.victims.len();
        for i in (0..f).rev() {
            if self.rounds[i] < self.horizon {
                self.rounds[i] += 1;
                return;
            }
            self.rounds[i] = 1;
        }
        let k = self.ids.len();
        for i in (0..f).rev() {
            if self.victims[i] < k - f + i {
                self.victims[i] += 1;
                for j in i + 1..f {
                    self.victims[j] = self.victims[j - 1] + 1;
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for AdversaryEnumeration {
    type Item = CrashSchedule;

    fn next(&mut self) -> Option<CrashSchedule> {
        if self.done {
            return None;
        }
        let schedule = CrashSchedule::new(
            self.victims
                .iter()
                .zip(&self.rounds)
                .map(|(&v, &r)| (self.ids[v], r)),
        )
        .expect("victims are distinct and rounds positive");
        if self.victims.is_empty() {
            self.done = true;
        } else {
            self.bump();
        }
        Some(schedule)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub schedule: Vec<(RobotId, u64)>,
    pub reason: String,
    pub trace_hash: String,
}

/// Aggregate over many runs. [`AdversaryReport::merge`] is associative and
/// commutative, so reports do not depend on the order runs complete in.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryReport {
    pub schedules_tested: u64,
    pub failures: Vec<Failure>,
    pub max_rounds: u64,
    pub max_memory_bits: u32,
    /// Trace hash of the longest run; ties go to the smallest hash.
    pub worst_trace_hash: String,
}

impl AdversaryReport {
    /// Report for one run; `problems` lists every check the run failed.
    pub fn single(schedule: &CrashSchedule, summary: &Summary, problems: Vec<String>) -> Self {
        AdversaryReport {
            schedules_tested: 1,
            failures: problems
                .into_iter()
                .map(|reason| Failure {
                    schedule: schedule.entries().collect(),
                    reason,
                    trace_hash: summary.trace_hash.clone(),
                })
                .collect(),
            max_rounds: summary.rounds_elapsed,
            max_memory_bits: summary.max_memory_bits,
            worst_trace_hash: summary.trace_hash.clone(),
        }
    }

    pub fn merge(mut self, other: AdversaryReport) -> Self {
        if self.schedules_tested == 0 {
            return other;
        }
        if other.schedules_tested == 0 {
            return self;
        }
        self.schedules_tested += other.schedules_tested;
        self.failures.extend(other.failures);
        self.failures.sort_by(|a, b| {
            (&a.schedule, &a.reason, &a.trace_hash).cmp(&(&b.schedule, &b.reason, &b.trace_hash))
        });
        self.max_memory_bits = self.max_memory_bits.max(other.max_memory_bits);
        let mine = (
            self.max_rounds,
            std::cmp::Reverse(self.worst_trace_hash.clone()),
        );
        let theirs = (
            other.max_rounds,
            std::cmp::Reverse(other.worst_trace_hash.clone()),
        );
        if theirs > mine {
            self.max_rounds = other.max_rounds;
            self.worst_trace_hash = other.worst_trace_hash;
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every schedule of `f` crashes within `horizon` rounds and checks each
/// result with `check`, which returns the list of problems found.
pub fn enumerate_adversary<P, F>(
    g: &PortGraph,
    placement: &[(RobotId, Node)],
    make: impl Fn() -> P,
    f: usize,
    horizon: u64,
    cap: u128,
    check: F,
) -> Result<AdversaryReport, OracleError>
where
    P: Protocol,
    F: Fn(&SimResult<P>) -> Vec<String>,
{
    let ids: Vec<RobotId> = placement.iter().map(|&(id, _)| id).collect();
    let count = AdversaryEnumeration::count(ids.len(), f, horizon);
    if count > cap {
        return Err(OracleError::EnumerationTooLarge { count, cap });
    }
    let mut report = AdversaryReport::default();
    for schedule in AdversaryEnumeration::new(&ids, f, horizon) {
        let protocol = make();
        let limit = protocol.round_limit();
        let result = run(g, placement, protocol, schedule.clone(), limit)?;
        let problems = check(&result);
        report = report.merge(AdversaryReport::single(
            &schedule,
            &result.summary,
            problems,
        ));
    }
    Ok(report)
}
