//! Verification suites. Each one runs a fixed family of cases and returns a
//! report listing every case with what went wrong in it.

use std::collections::{BTreeMap, BTreeSet};

use dispersim::engine::{CrashSchedule, RobotId};
use dispersim::graph::{GraphKind, Node, PortGraph};
use dispersim::oracle::{memory_envelope, reference_first_k, AdversaryReport};
use dispersim::trace::{
    initial_placement, read_jsonl, summarize, write_jsonl, EventKind, TraceEvent,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    random_clusters, random_schedule, Cluster, FaultSpec, GraphSpec, Instance, KnowledgeOverrides,
    Placement, ProtocolKind, RunConfig,
};
use crate::exec::{execute, exhaust, Outcome};
use crate::sweep::mix;

pub const SUITES: [&str; 10] = [
    "rooted-faultfree",
    "rooted-exhaustive",
    "rooted-random",
    "arbitrary-faultfree",
    "arbitrary-random",
    "arbitrary-exhaustive",
    "isolation",
    "memory",
    "determinism",
    "unknown-params",
];

pub const ROOTED_TRIALS: u64 = 200;
pub const SCHEDULES_PER_CASE: u64 = 50;
pub const ISOLATION_CONFIGS: u64 = 20;
const UNKNOWN_PARAM_TRIALS: u64 = 5;
const KEPT_FAILURES: usize = 3;

/// Rings, paths, two cliques, stars and 50 random connected graphs with at
/// most 20 nodes and 40 edges.
pub fn corpus() -> Vec<(GraphKind, PortGraph)> {
    let mut kinds = Vec::new();
    kinds.extend((3..=12).map(|n| GraphKind::Ring { n }));
    kinds.extend((2..=12).map(|n| GraphKind::Path { n }));
    kinds.extend((4..=5).map(|n| GraphKind::Complete { n }));
    kinds.extend((4..=8).map(|n| GraphKind::Star { n }));
    kinds.extend((0..50u64).map(|seed| {
        let n = 3 + (seed as usize % 18);
        let max_m = (n * (n - 1) / 2).min(40);
        let m = n - 1 + (seed as usize * 7) % (max_m - (n - 1) + 1);
        GraphKind::RandomConnected { n, m, seed }
    }));
    kinds
        .into_iter()
        .map(|kind| {
            (
                kind,
                PortGraph::generate(kind).expect("corpus graphs are valid"),
            )
        })
        .collect()
}

fn graph_name(kind: &GraphKind) -> String {
    match kind {
        GraphKind::Ring { n } => format!("ring({n})"),
        GraphKind::Path { n } => format!("path({n})"),
        GraphKind::Complete { n } => format!("complete({n})"),
        GraphKind::Star { n } => format!("star({n})"),
        GraphKind::RandomConnected { n, m, seed } => format!("random({n},{m},{seed})"),
    }
}

fn half(n: usize) -> u32 {
    n.div_ceil(2) as u32
}

/// What went on in one case, over all of its runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub group: String,
    pub name: String,
    pub k: u32,
    pub max_degree: usize,
    pub runs: u64,
    pub max_rounds: u64,
    pub max_memory_bits: u32,
    pub repair_runs: u64,
    pub failed_runs: u64,
    /// The first few failures, each prefixed with the run it came from.
    pub failures: Vec<String>,
}

impl CaseRecord {
    pub fn new(
        group: impl Into<String>,
        name: impl Into<String>,
        k: u32,
        max_degree: usize,
    ) -> Self {
        CaseRecord {
            group: group.into(),
            name: name.into(),
            k,
            max_degree,
            runs: 0,
            max_rounds: 0,
            max_memory_bits: 0,
            repair_runs: 0,
            failed_runs: 0,
            failures: Vec::new(),
        }
    }

    fn fail(&mut self, label: &str, problems: impl IntoIterator<Item = String>) {
        let mut any = false;
        for p in problems {
            any = true;
            if self.failures.len() < KEPT_FAILURES {
                self.failures.push(if label.is_empty() {
                    p
                } else {
                    format!("{label}: {p}")
                });
            }
        }
        if any {
            self.failed_runs += 1;
        }
    }

    fn error(&mut self, label: &str, e: impl ToString) {
        self.runs += 1;
        self.fail(label, [e.to_string()]);
    }

    /// Adds a run, failing it for its own problems and for `extra`.
    fn record(&mut self, label: &str, o: &Outcome, extra: Vec<String>) {
        self.runs += 1;
        self.max_rounds = self.max_rounds.max(o.summary.rounds_elapsed);
        self.max_memory_bits = self.max_memory_bits.max(o.summary.max_memory_bits);
        self.repair_runs += u64::from(o.repairs > 0);
        self.fail(label, o.problems.iter().cloned().chain(extra));
    }

    fn absorb(&mut self, r: &AdversaryReport) {
        self.runs += r.schedules_tested;
        self.max_rounds = self.max_rounds.max(r.max_rounds);
        self.max_memory_bits = self.max_memory_bits.max(r.max_memory_bits);
        let mut by_schedule: BTreeMap<&[(RobotId, u64)], Vec<String>> = BTreeMap::new();
        for f in &r.failures {
            by_schedule
                .entry(&f.schedule)
                .or_default()
                .push(f.reason.clone());
        }
        for (schedule, reasons) in by_schedule {
            self.fail(&format!("crashes {schedule:?}"), reasons);
        }
    }

    pub fn passed(&self) -> bool {
        self.failed_runs == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub runs: u64,
    pub failed_runs: u64,
    pub repair_runs: u64,
    pub max_memory_bits: u32,
    pub cases: Vec<CaseRecord>,
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>, cases: Vec<CaseRecord>) -> Self {
        SuiteReport {
            suite: suite.into(),
            passed: cases.iter().all(CaseRecord::passed),
            runs: cases.iter().map(|c| c.runs).sum(),
            failed_runs: cases.iter().map(|c| c.failed_runs).sum(),
            repair_runs: cases.iter().map(|c| c.repair_runs).sum(),
            max_memory_bits: cases.iter().map(|c| c.max_memory_bits).max().unwrap_or(0),
            cases,
        }
    }

    /// The cases of one group, as a report of their own.
    pub fn group(&self, group: &str) -> SuiteReport {
        let cases = self
            .cases
            .iter()
            .filter(|c| c.group == group)
            .cloned()
            .collect();
        SuiteReport::new(format!("{} [{group}]", self.suite), cases)
    }

    pub fn groups(&self) -> BTreeSet<&str> {
        self.cases.iter().map(|c| c.group.as_str()).collect()
    }

    pub fn first_failure(&self) -> Option<String> {
        self.cases.iter().find(|c| !c.passed()).map(|c| {
            format!(
                "{}: {}",
                c.name,
                c.failures.first().map_or("", String::as_str)
            )
        })
    }

    /// One line: suite, verdict and counts.
    pub fn headline(&self) -> String {
        format!(
            "{}: {} ({} cases, {} runs, {} failed, {} with repairs, max memory {} bits)",
            self.suite,
            if self.passed { "PASS" } else { "FAIL" },
            self.cases.len(),
            self.runs,
            self.failed_runs,
            self.repair_runs,
            self.max_memory_bits
        )
    }
}

fn rooted_config(kind: GraphKind, root: Node, k: u32) -> RunConfig {
    RunConfig {
        graph: GraphSpec::Generator(kind),
        protocol: ProtocolKind::Rooted,
        placement: Placement::Root { root, k },
        faults: FaultSpec::None,
        knowledge: KnowledgeOverrides::default(),
        max_rounds: None,
        seed: None,
        out: None,
    }
}

/// Arbitrary-start config whose robots are told to expect `f` crashes.
fn arbitrary_config(kind: GraphKind, clusters: Vec<Cluster>, f: u32) -> RunConfig {
    RunConfig {
        graph: GraphSpec::Generator(kind),
        protocol: ProtocolKind::Arbitrary,
        placement: Placement::Clusters { clusters },
        faults: FaultSpec::None,
        knowledge: KnowledgeOverrides {
            f: Some(f),
            ..KnowledgeOverrides::default()
        },
        max_rounds: None,
        seed: None,
        out: None,
    }
}

fn schedule_label(s: &CrashSchedule) -> String {
    format!("crashes {:?}", s.entries().collect::<Vec<_>>())
}

/// Every corpus graph from root 1 with `k` in {1, ⌈n/2⌉, n}: dispersion,
/// the round budget, the monitors, and the settled set against an
/// independent DFS.
pub fn rooted_faultfree() -> SuiteReport {
    let cases: Vec<(GraphKind, PortGraph, u32)> = corpus()
        .into_iter()
        .flat_map(|(kind, g)| {
            let n = g.node_count();
            let mut ks = vec![1, half(n), n as u32];
            ks.dedup();
            ks.into_iter().map(move |k| (kind, g.clone(), k))
        })
        .collect();
    let records = cases
        .par_iter()
        .map(|(kind, g, k)| {
            let mut rec = CaseRecord::new(
                "",
                format!("{} k={k}", graph_name(kind)),
                *k,
                g.max_degree(),
            );
            let run = rooted_config(*kind, 1, *k)
                .resolve(None)
                .map_err(|e| e.to_string())
                .and_then(|inst| execute(&inst, CrashSchedule::none()).map_err(|e| e.to_string()));
            match run {
                Ok(o) => {
                    let want = reference_first_k(g, 1, *k as usize);
                    let extra = if o.settled == want {
                        vec![]
                    } else {
                        vec![format!("settled {:?}, reference {:?}", o.settled, want)]
                    };
                    rec.record("", &o, extra);
                }
                Err(e) => rec.error("", e),
            }
            rec
        })
        .collect();
    SuiteReport::new("rooted-faultfree", records)
}

/// Every single-crash schedule, crash round up to 7k², on the corpus graphs
/// with at most six nodes and `k` in {1, ⌈n/2⌉, n} up to 5.
pub fn rooted_exhaustive() -> SuiteReport {
    let cases: Vec<(GraphKind, usize, u32)> = corpus()
        .into_iter()
        .filter(|(_, g)| g.node_count() <= 6)
        .flat_map(|(kind, g)| {
            let n = g.node_count();
            let mut ks = vec![1, half(n), n as u32];
            ks.dedup();
            let delta = g.max_degree();
            ks.into_iter()
                .filter(|&k| k <= 5)
                .map(move |k| (kind, delta, k))
        })
        .collect();
    let records = cases
        .par_iter()
        .map(|(kind, delta, k)| {
            let mut rec =
                CaseRecord::new("", format!("{} k={k} f=1", graph_name(kind)), *k, *delta);
            match rooted_config(*kind, 1, *k).resolve(None) {
                Ok(inst) => match exhaust(&inst, 1, inst.round_limit()) {
                    Ok(r) => rec.absorb(&r),
                    Err(e) => rec.error("", e),
                },
                Err(e) => rec.error("", e),
            }
            rec
        })
        .collect();
    SuiteReport::new("rooted-exhaustive", records)
}

/// Fault-free run of `inst`, then a run with `f` random crashes inside the
/// rounds the fault-free run took. Returns both outcomes.
fn with_random_crashes(
    inst: &Instance,
    f: u32,
    seed: u64,
) -> Result<(Outcome, CrashSchedule, Outcome), String> {
    let reference = execute(inst, CrashSchedule::none()).map_err(|e| e.to_string())?;
    let schedule = random_schedule(inst.k, f, reference.summary.rounds_elapsed, seed);
    let crashed = execute(inst, schedule.clone()).map_err(|e| e.to_string())?;
    Ok((reference, schedule, crashed))
}

/// Seeded random graphs with up to 20 nodes, random `k`, and `1..k` crashes
/// falling inside the fault-free running time.
pub fn rooted_random(seed: u64) -> SuiteReport {
    let records = (0..ROOTED_TRIALS)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, i));
            let n = rng.gen_range(3..=20usize);
            let max_m = (n * (n - 1) / 2).min(40);
            let m = rng.gen_range(n - 1..=max_m);
            let kind = GraphKind::RandomConnected {
                n,
                m,
                seed: rng.gen(),
            };
            let k = rng.gen_range(2..=n as u32);
            let f = rng.gen_range(1..k);
            let root = rng.gen_range(1..=n);
            let name = format!("trial {i}: {} root={root} k={k} f={f}", graph_name(&kind));
            let config = rooted_config(kind, root, k);
            let inst = match config.resolve(None) {
                Ok(inst) => inst,
                Err(e) => {
                    let mut rec = CaseRecord::new("", name, k, 0);
                    rec.error("", e);
                    return rec;
                }
            };
            let mut rec = CaseRecord::new("", name, k, inst.graph.max_degree());
            match with_random_crashes(&inst, f, rng.gen()) {
                Ok((reference, schedule, crashed)) => {
                    rec.record("fault-free", &reference, vec![]);
                    rec.record(&schedule_label(&schedule), &crashed, vec![]);
                }
                Err(e) => rec.error("", e),
            }
            rec
        })
        .collect();
    SuiteReport::new("rooted-random", records)
}

/// Group of an arbitrary-start case by robot count.
fn k_group(k: u32, n: usize) -> &'static str {
    if k as usize == n {
        "k=n"
    } else {
        "k=ceil(n/2)"
    }
}

/// `(graph, k, l)` for every corpus graph, `k` in {⌈n/2⌉, n} and
/// `1 ≤ l ≤ min(4, k/2)`.
fn cluster_cases(max_n: usize) -> Vec<(GraphKind, usize, u32, u32)> {
    let mut out = Vec::new();
    for (kind, g) in corpus()
        .into_iter()
        .filter(|(_, g)| g.node_count() <= max_n)
    {
        let n = g.node_count();
        let mut ks = vec![half(n), n as u32];
        ks.dedup();
        for k in ks {
            for l in (1..=4).filter(|l| 2 * l <= k) {
                out.push((kind, n, k, l));
            }
        }
    }
    out
}

fn arbitrary_campaign(suite: &str, fs: &[u32], seed: u64) -> SuiteReport {
    let cases: Vec<_> = cluster_cases(usize::MAX)
        .into_iter()
        .flat_map(|c| fs.iter().map(move |&f| (c, f)))
        .collect();
    let records = cases
        .par_iter()
        .enumerate()
        .map(|(ci, ((kind, n, k, l), f))| {
            let name = format!("{} k={k} l={l} f={f}", graph_name(kind));
            let mut rec = CaseRecord::new(k_group(*k, *n), name, *k, 0);
            for t in 0..SCHEDULES_PER_CASE {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(mix(seed, ci as u64 * SCHEDULES_PER_CASE + t));
                let clusters = random_clusters(*n, *k, *l, rng.gen());
                let label = format!(
                    "clusters {:?}",
                    clusters.iter().map(|c| c.node).collect::<Vec<_>>()
                );
                let inst = match arbitrary_config(*kind, clusters, *f).resolve(None) {
                    Ok(inst) => inst,
                    Err(e) => {
                        rec.error(&label, e);
                        continue;
                    }
                };
                rec.max_degree = inst.graph.max_degree();
                if *f == 0 {
                    match execute(&inst, CrashSchedule::none()) {
                        Ok(o) => rec.record(&label, &o, vec![]),
                        Err(e) => rec.error(&label, e),
                    }
                } else {
                    match with_random_crashes(&inst, *f, rng.gen()) {
                        Ok((_, schedule, o)) => rec.record(
                            &format!("{label} {}", schedule_label(&schedule)),
                            &o,
                            vec![],
                        ),
                        Err(e) => rec.error(&label, e),
                    }
                }
            }
            rec
        })
        .collect();
    SuiteReport::new(suite, records)
}

/// Fault-free arbitrary starts: 50 random placements per (graph, k, l).
pub fn arbitrary_faultfree(seed: u64) -> SuiteReport {
    arbitrary_campaign("arbitrary-faultfree", &[0], seed)
}

/// Arbitrary starts with one or two crashes: 50 random placements and
/// schedules per (graph, k, l, f).
pub fn arbitrary_random(seed: u64) -> SuiteReport {
    arbitrary_campaign("arbitrary-random", &[1, 2], seed)
}

/// Every single-crash schedule within the round limit, for arbitrary starts
/// on the corpus graphs with at most six nodes.
pub fn arbitrary_exhaustive(seed: u64) -> SuiteReport {
    let cases = cluster_cases(6);
    let records = cases
        .par_iter()
        .enumerate()
        .map(|(ci, (kind, n, k, l))| {
            let clusters = random_clusters(*n, *k, *l, mix(seed, ci as u64));
            let name = format!(
                "{} k={k} clusters {:?} f=1",
                graph_name(kind),
                clusters.iter().map(|c| c.node).collect::<Vec<_>>()
            );
            let mut rec = CaseRecord::new(k_group(*k, *n), name, *k, 0);
            match arbitrary_config(*kind, clusters, 1).resolve(None) {
                Ok(inst) => {
                    rec.max_degree = inst.graph.max_degree();
                    match exhaust(&inst, 1, inst.round_limit()) {
                        Ok(r) => rec.absorb(&r),
                        Err(e) => rec.error("", e),
                    }
                }
                Err(e) => rec.error("", e),
            }
            rec
        })
        .collect();
    SuiteReport::new("arbitrary-exhaustive", records)
}

/// Unsettled robots sharing a node with the highest unsettled id at the
/// start of `round`.
pub fn top_cluster(trace: &[TraceEvent], round: u64) -> BTreeSet<RobotId> {
    let unsettled: Vec<(RobotId, Option<Node>)> = trace
        .iter()
        .filter(|e| e.round == round && e.kind.is_action())
        .filter(|e| e.payload.state.as_ref().is_some_and(|s| !s.settled))
        .map(|e| (e.robot, e.payload.node))
        .collect();
    let Some(&(_, node)) = unsettled.iter().max_by_key(|(id, _)| *id) else {
        return BTreeSet::new();
    };
    unsettled
        .iter()
        .filter(|(_, v)| *v == node)
        .map(|(id, _)| *id)
        .collect()
}

fn settle_rounds(trace: &[TraceEvent]) -> BTreeMap<RobotId, u64> {
    trace
        .iter()
        .filter(|e| e.kind == EventKind::Settle)
        .map(|e| (e.robot, e.round))
        .collect()
}

/// `f` random victims crashing at random rounds of phases `1..=last`, except
/// phase `skip`.
fn schedule_outside(
    k: u32,
    f: u32,
    phase_len: u64,
    skip: u64,
    last: u64,
    rng: &mut ChaCha8Rng,
) -> CrashSchedule {
    let rounds: Vec<u64> = (1..=last * phase_len)
        .filter(|r| (r - 1) / phase_len + 1 != skip)
        .collect();
    let mut ids: Vec<RobotId> = (1..=k).collect();
    ids.shuffle(rng);
    let mut victims = ids[..f.min(k) as usize].to_vec();
    victims.sort_unstable();
    CrashSchedule::new(
        victims
            .into_iter()
            .map(|v| (v, *rounds.choose(rng).expect("rounds exist"))),
    )
    .expect("victims are distinct")
}

/// Crashes only outside phase `j`: the cluster holding the highest priority
/// at the start of `j` must be settled by the end of `j`. Phase 2 is used
/// when robots are still unsettled then, phase 1 otherwise.
pub fn isolation(seed: u64) -> SuiteReport {
    let graphs: Vec<(GraphKind, usize)> = corpus()
        .into_iter()
        .map(|(kind, g)| (kind, g.node_count()))
        .filter(|&(_, n)| n >= 7)
        .collect();
    let records = (0..ISOLATION_CONFIGS)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, i));
            let &(kind, n) = graphs.choose(&mut rng).expect("corpus has large graphs");
            let k = half(n);
            let l = if 2 * 3 <= k && rng.gen_bool(0.5) {
                3
            } else {
                2
            };
            let f = 2;
            let clusters = random_clusters(n, k, l, rng.gen());
            let name = format!(
                "config {i}: {} k={k} clusters {:?} f={f}",
                graph_name(&kind),
                clusters.iter().map(|c| c.node).collect::<Vec<_>>()
            );
            let inst = match arbitrary_config(kind, clusters, f).resolve(None) {
                Ok(inst) => inst,
                Err(e) => {
                    let mut rec = CaseRecord::new("", name, k, 0);
                    rec.error("", e);
                    return rec;
                }
            };
            let len = match &inst.protocol {
                crate::config::AnyProtocol::Arbitrary(p) => p.phase_len(),
                crate::config::AnyProtocol::Rooted(_) => unreachable!("arbitrary config"),
            };
            let mut rec = CaseRecord::new("", name, k, inst.graph.max_degree());
            for j in [2u64, 1] {
                let schedule = schedule_outside(k, f, len, j, j + 1, &mut rng);
                let o = match execute(&inst, schedule.clone()) {
                    Ok(o) => o,
                    Err(e) => {
                        rec.error(&schedule_label(&schedule), e);
                        break;
                    }
                };
                let designated = top_cluster(&o.trace, (j - 1) * len + 1);
                if designated.is_empty() {
                    continue;
                }
                rec.group = format!("phase {j}");
                let settled = settle_rounds(&o.trace);
                let late: Vec<RobotId> = designated
                    .iter()
                    .copied()
                    .filter(|id| settled.get(id).is_none_or(|&r| r > j * len))
                    .collect();
                let extra = if late.is_empty() {
                    vec![]
                } else {
                    vec![format!(
                        "cluster {designated:?} of phase {j}: {late:?} not settled by round {}",
                        j * len
                    )]
                };
                rec.record(&schedule_label(&schedule), &o, extra);
                break;
            }
            rec
        })
        .collect();
    SuiteReport::new("isolation", records)
}

/// Largest memory footprint per `(k, Δ)` seen in `sources`, against the
/// envelope.
pub fn memory(sources: &[SuiteReport]) -> SuiteReport {
    let mut worst: BTreeMap<(u32, usize), (u32, u64)> = BTreeMap::new();
    for c in sources.iter().flat_map(|s| &s.cases) {
        let entry = worst.entry((c.k, c.max_degree)).or_default();
        entry.0 = entry.0.max(c.max_memory_bits);
        entry.1 += c.runs;
    }
    let cases = worst
        .into_iter()
        .map(|((k, delta), (bits, runs))| {
            let mut rec = CaseRecord::new("", format!("k={k} delta={delta}"), k, delta);
            rec.runs = runs;
            rec.max_memory_bits = bits;
            let envelope = memory_envelope(k, delta);
            if bits > envelope {
                rec.fail(
                    "",
                    [format!("{bits} bits above the envelope of {envelope}")],
                );
            }
            rec
        })
        .collect();
    SuiteReport::new("memory", cases)
}

/// The configs rerun by the determinism suite.
pub fn determinism_configs() -> Vec<RunConfig> {
    let rooted = |kind, root, k, faults| RunConfig {
        faults,
        ..rooted_config(kind, root, k)
    };
    let arbitrary = |kind, clusters: &[(Node, &[RobotId])], faults: FaultSpec| {
        let clusters = clusters
            .iter()
            .map(|&(node, robots)| Cluster {
                node,
                robots: robots.to_vec(),
            })
            .collect();
        let mut c = arbitrary_config(kind, clusters, 0);
        c.knowledge.f = None;
        c.faults = faults;
        c
    };
    let random = |n, m, seed| GraphKind::RandomConnected { n, m, seed };
    let mut out = vec![
        rooted(GraphKind::Ring { n: 8 }, 1, 8, FaultSpec::None),
        rooted(
            GraphKind::Complete { n: 5 },
            2,
            5,
            FaultSpec::Explicit(vec![(2, 3)]),
        ),
        rooted(
            random(15, 30, 3),
            4,
            10,
            FaultSpec::Random { f: 3, seed: None },
        ),
        rooted(GraphKind::Star { n: 7 }, 1, 4, FaultSpec::None),
        rooted(
            GraphKind::Path { n: 9 },
            5,
            9,
            FaultSpec::Random { f: 2, seed: None },
        ),
        arbitrary(
            GraphKind::Ring { n: 12 },
            &[(1, &[1, 3, 5]), (7, &[2, 4, 6])],
            FaultSpec::None,
        ),
        arbitrary(
            random(16, 30, 7),
            &[(2, &[1, 4, 7]), (9, &[2, 5, 8]), (14, &[3, 6])],
            FaultSpec::Random { f: 2, seed: None },
        ),
        arbitrary(
            GraphKind::Star { n: 8 },
            &[(3, &[1, 2, 3, 4])],
            FaultSpec::Random { f: 1, seed: None },
        ),
        arbitrary(
            GraphKind::Path { n: 10 },
            &[(2, &[1, 2]), (8, &[3, 4, 5])],
            FaultSpec::None,
        ),
        arbitrary(
            GraphKind::Complete { n: 5 },
            &[(1, &[1, 2]), (4, &[3, 4])],
            FaultSpec::Explicit(vec![(4, 2)]),
        ),
    ];
    out[8].knowledge.k_only = true;
    out
}

fn summary_json(s: &dispersim::trace::Summary) -> String {
    serde_json::to_string(s).expect("summaries serialize")
}

/// Runs each config twice and replays its trace through JSONL: hashes and
/// summaries must match byte for byte.
pub fn determinism(seed: u64) -> SuiteReport {
    let records = determinism_configs()
        .par_iter()
        .enumerate()
        .map(|(i, config)| {
            let name = format!(
                "config {i}: {} {}",
                config.protocol.as_str(),
                graph_label(&config.graph)
            );
            let mut rec = CaseRecord::new("", name, 0, 0);
            let outcome = |c: &RunConfig| -> Result<Outcome, String> {
                let inst = c.resolve(Some(seed)).map_err(|e| e.to_string())?;
                match &inst.faults {
                    crate::config::Faults::Fixed(s) => {
                        execute(&inst, s.clone()).map_err(|e| e.to_string())
                    }
                    crate::config::Faults::Exhaustive { .. } => Err("exhaustive faults".into()),
                }
            };
            let (a, b) = match (outcome(config), outcome(config)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    rec.error("", e);
                    return rec;
                }
            };
            let mut problems = Vec::new();
            if a.summary.trace_hash != b.summary.trace_hash {
                problems.push(format!(
                    "hashes {} and {}",
                    a.summary.trace_hash, b.summary.trace_hash
                ));
            }
            let mut buf = Vec::new();
            write_jsonl(&mut buf, &a.trace).expect("writing to memory");
            match read_jsonl(buf.as_slice()) {
                Ok(events) => {
                    let replayed = summarize(&events, &initial_placement(&events));
                    if summary_json(&replayed) != summary_json(&a.summary) {
                        problems.push(format!(
                            "replayed {} against {}",
                            summary_json(&replayed),
                            summary_json(&a.summary)
                        ));
                    }
                }
                Err(e) => problems.push(e.to_string()),
            }
            rec.k = a.summary.alive_count as u32;
            rec.runs = 2;
            rec.max_rounds = a.summary.rounds_elapsed;
            rec.max_memory_bits = a.summary.max_memory_bits;
            rec.fail("", problems);
            rec
        })
        .collect();
    SuiteReport::new("determinism", records)
}

fn graph_label(g: &GraphSpec) -> String {
    match g {
        GraphSpec::Generator(kind) => graph_name(kind),
        GraphSpec::Edges { n, edges, .. } => format!("edges(n={n}, m={})", edges.len()),
        GraphSpec::PortTable { port_table } => format!("port table(n={})", port_table.len()),
    }
}

/// Arbitrary starts told only `k`: phases of k² rounds, k+1 of them, on the
/// corpus graphs with at most twelve nodes.
pub fn unknown_params(seed: u64) -> SuiteReport {
    let cases: Vec<_> = cluster_cases(12)
        .into_iter()
        .filter(|&(_, _, _, l)| l <= 2)
        .flat_map(|c| [0u32, 1].map(move |f| (c, f)))
        .collect();
    let records = cases
        .par_iter()
        .enumerate()
        .map(|(ci, ((kind, n, k, l), f))| {
            let name = format!("{} k={k} l={l} f={f}", graph_name(kind));
            let mut rec = CaseRecord::new(k_group(*k, *n), name, *k, 0);
            for t in 0..UNKNOWN_PARAM_TRIALS {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(mix(seed, ci as u64 * UNKNOWN_PARAM_TRIALS + t));
                let clusters = random_clusters(*n, *k, *l, rng.gen());
                let label = format!(
                    "clusters {:?}",
                    clusters.iter().map(|c| c.node).collect::<Vec<_>>()
                );
                let mut config = arbitrary_config(*kind, clusters, *f);
                config.knowledge = KnowledgeOverrides {
                    k_only: true,
                    ..KnowledgeOverrides::default()
                };
                let inst = match config.resolve(None) {
                    Ok(inst) => inst,
                    Err(e) => {
                        rec.error(&label, e);
                        continue;
                    }
                };
                rec.max_degree = inst.graph.max_degree();
                match with_random_crashes(&inst, *f, rng.gen()) {
                    Ok((_, schedule, o)) => rec.record(
                        &format!("{label} {}", schedule_label(&schedule)),
                        &o,
                        vec![],
                    ),
                    Err(e) => rec.error(&label, e),
                }
            }
            rec
        })
        .collect();
    SuiteReport::new("unknown-params", records)
}

/// Runs the named suite; `None` for an unknown name.
pub fn run_suite(name: &str, seed: u64) -> Option<SuiteReport> {
    Some(match name {
        "rooted-faultfree" => rooted_faultfree(),
        "rooted-exhaustive" => rooted_exhaustive(),
        "rooted-random" => rooted_random(seed),
        "arbitrary-faultfree" => arbitrary_faultfree(seed),
        "arbitrary-random" => arbitrary_random(seed),
        "arbitrary-exhaustive" => arbitrary_exhaustive(seed),
        "isolation" => isolation(seed),
        "memory" => memory(&[
            rooted_faultfree(),
            rooted_exhaustive(),
            rooted_random(seed),
            arbitrary_faultfree(seed),
            arbitrary_random(seed),
            isolation(seed),
        ]),
        "determinism" => determinism(seed),
        "unknown-params" => unknown_params(seed),
        _ => return None,
    })
}
