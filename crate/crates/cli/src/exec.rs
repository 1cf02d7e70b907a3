//! Running instances and judging the results.

use std::collections::BTreeSet;

use dispersim::engine::{run, CrashSchedule, EngineError, Protocol, SimResult};
use dispersim::graph::Node;
use dispersim::oracle::{
    check_bounds, cluster_monotonicity_monitor, counter_agreement_monitor, enumerate_adversary,
    loop_monitor, one_mover_monitor, AdversaryReport, OracleError, ENUMERATION_CAP,
};
use dispersim::trace::{Summary, TraceEvent};

use crate::config::{AnyProtocol, Instance, ProtocolKind};

/// One finished run with everything the checks found wrong with it.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Summary,
    pub trace: Vec<TraceEvent>,
    pub problems: Vec<String>,
    pub repairs: usize,
    /// Nodes holding a settled alive robot at the end.
    pub settled: BTreeSet<Node>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.problems.is_empty()
    }
}

type Monitor = fn(&[TraceEvent]) -> Result<(), OracleError>;

/// Dispersion, the round and memory envelopes, and the protocol's trace
/// monitors.
pub fn problems<P: Protocol>(
    result: &SimResult<P>,
    kind: ProtocolKind,
    k: u32,
    max_degree: usize,
) -> Vec<String> {
    let mut out = Vec::new();
    if !result.dispersed {
        out.push(format!(
            "not dispersed after {} rounds",
            result.rounds_elapsed
        ));
    }
    let bound = result.protocol.round_limit();
    let bounds = check_bounds(&result.summary, bound, k, max_degree).map(|_| ());
    let monitors: [Monitor; 2] = match kind {
        ProtocolKind::Rooted => [one_mover_monitor, loop_monitor],
        ProtocolKind::Arbitrary => [counter_agreement_monitor, cluster_monotonicity_monitor],
    };
    let checks = std::iter::once(bounds).chain(monitors.iter().map(|m| m(result.trace())));
    out.extend(checks.filter_map(Result::err).map(|e| e.to_string()));
    out
}

fn finish<P: Protocol>(result: SimResult<P>, inst: &Instance) -> Outcome {
    let problems = problems(&result, inst.kind, inst.k, inst.graph.max_degree());
    let repairs = result
        .trace()
        .iter()
        .filter(|e| e.kind == dispersim::trace::EventKind::Repair)
        .count();
    Outcome {
        problems,
        repairs,
        settled: result.settled_nodes(),
        summary: result.summary,
        trace: result.world.trace,
    }
}

/// Runs `inst` under `schedule`.
pub fn execute(inst: &Instance, schedule: CrashSchedule) -> Result<Outcome, EngineError> {
    let g = &inst.graph;
    Ok(match inst.protocol {
        AnyProtocol::Rooted(p) => {
            finish(run(g, &inst.placement, p, schedule, inst.max_rounds)?, inst)
        }
        AnyProtocol::Arbitrary(p) => {
            finish(run(g, &inst.placement, p, schedule, inst.max_rounds)?, inst)
        }
    })
}

/// Runs every schedule of `f` crashes within `horizon` rounds.
pub fn exhaust(inst: &Instance, f: usize, horizon: u64) -> Result<AdversaryReport, OracleError> {
    let g = &inst.graph;
    let (k, delta) = (inst.k, g.max_degree());
    match inst.protocol {
        AnyProtocol::Rooted(p) => enumerate_adversary(
            g,
            &inst.placement,
            || p,
            f,
            horizon,
            ENUMERATION_CAP,
            |r| problems(r, inst.kind, k, delta),
        ),
        AnyProtocol::Arbitrary(p) => enumerate_adversary(
            g,
            &inst.placement,
            || p,
            f,
            horizon,
            ENUMERATION_CAP,
            |r| problems(r, inst.kind, k, delta),
        ),
    }
}
