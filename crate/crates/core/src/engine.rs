//! Synchronous Communicate-Compute-Move engine.
//!
//! The engine owns node identities. A protocol only ever receives its own
//! state plus a [`LocalView`] of the node it stands on, and answers with a
//! [`Decision`]. Each round runs in a fixed order:
//!
//! 1. robots scheduled to crash in this round are removed;
//! 2. every alive robot observes its local view (all from the same snapshot);
//! 3. transitions are evaluated;
//! 4. writes to co-located settled robots are arbitrated (highest priority,
//!    then highest writer id) and applied on top of the targets' own updates;
//! 5. all moves happen simultaneously.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Node, Port, PortGraph};
use crate::trace::{summarize, EventKind, StateSnapshot, Summary, TraceEvent};

pub type RobotId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Stay,
    Settle,
    Move(Port),
}

/// A write into a co-located settled robot's persistent fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Write<P> {
    pub target: RobotId,
    pub priority: u32,
    pub patch: P,
}

/// Protocol-level events that are not actions (repairs, merges, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Note {
    pub kind: EventKind,
    pub target: Option<RobotId>,
}

impl Note {
    pub fn new(kind: EventKind) -> Self {
        Note { kind, target: None }
    }

    pub fn on(kind: EventKind, target: RobotId) -> Self {
        Note {
            kind,
            target: Some(target),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Decision<S, P> {
    pub state: S,
    pub action: Action,
    pub writes: Vec<Write<P>>,
    pub notes: Vec<Note>,
}

impl<S, P> Decision<S, P> {
    pub fn new(state: S, action: Action) -> Self {
        Decision {
            state,
            action,
            writes: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn write(mut self, target: RobotId, priority: u32, patch: P) -> Self {
        self.writes.push(Write {
            target,
            priority,
            patch,
        });
        self
    }

    pub fn note(mut self, note: Note) -> Self {
        self.notes.push(note);
        self
    }
}

/// Another alive robot on the same node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Peer<S> {
    pub id: RobotId,
    pub state: S,
}

/// Everything a robot can sense in one round. Carries no node identity.
#[derive(Debug, Clone)]
pub struct LocalView<'a, S> {
    pub degree: usize,
    /// Port this robot entered through on its last move, 0 if it stayed.
    pub entry_port: Port,
    /// Alive robots at this node other than the observer, sorted by id.
    pub co_located: &'a [Peer<S>],
}

impl<S> LocalView<'_, S> {
    pub fn peers(&self) -> impl Iterator<Item = &Peer<S>> {
        self.co_located.iter()
    }
}

/// One bit-metered persistent field: it occupies `⌈log2(range)⌉` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Field {
    pub name: &'static str,
    pub range: u64,
}

impl Field {
    pub fn new(name: &'static str, range: u64) -> Self {
        Field { name, range }
    }

    pub fn flag(name: &'static str) -> Self {
        Field { name, range: 2 }
    }

    pub fn bits(&self) -> u32 {
        ceil_log2(self.range)
    }
}

/// `⌈log2(x)⌉`, with `ceil_log2(0) = ceil_log2(1) = 0`.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Total bits of a field layout.
pub fn memory_bits(fields: &[Field]) -> u32 {
    fields.iter().map(Field::bits).sum()
}

/// A robot protocol: a pure transition function over local views.
pub trait Protocol {
    type State: Clone + Debug + PartialEq + Eq;
    type Patch: Clone + Debug;

    fn name(&self) -> &'static str;

    /// Initial state of robot `id` before round 1.
    fn init(&self, id: RobotId) -> Self::State;

    fn transition(
        &self,
        id: RobotId,
        state: &Self::State,
        view: &LocalView<'_, Self::State>,
    ) -> Decision<Self::State, Self::Patch>;

    /// Applies a write another robot made to `state`.
    fn apply(&self, state: &mut Self::State, patch: &Self::Patch);

    fn is_settled(&self, state: &Self::State) -> bool;

    /// Persistent field layout used for memory metering.
    fn layout(&self, state: &Self::State) -> Vec<Field>;

    fn snapshot(&self, state: &Self::State) -> StateSnapshot;

    /// Number of rounds after which the protocol declares global termination.
    fn round_limit(&self) -> u64;
}

/// The adversary's plan: robot `id` crashes at the start of round `r ≥ 1`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CrashSchedule {
    entries: BTreeMap<RobotId, u64>,
}

impl CrashSchedule {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(entries: impl IntoIterator<Item = (RobotId, u64)>) -> Result<Self, EngineError> {
        let mut map = BTreeMap::new();
        for (id, round) in entries {
            if round == 0 {
                return Err(EngineError::InvalidSchedule(format!(
                    "robot {id} crash round must be >= 1"
                )));
            }
            if map.insert(id, round).is_some() {
                return Err(EngineError::InvalidSchedule(format!(
                    "robot {id} scheduled to crash twice"
                )));
            }
        }
        Ok(CrashSchedule { entries: map })
    }

    pub fn crash_round(&self, id: RobotId) -> Option<u64> {
        self.entries.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (RobotId, u64)> + '_ {
        self.entries.iter().map(|(&id, &r)| (id, r))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("robot {robot} chose port {port} at a node of degree {degree}")]
    InvalidMovePort {
        robot: RobotId,
        port: Port,
        degree: usize,
    },
    #[error("robot {writer} wrote to robot {target}, which is not a co-located settled robot")]
    WriteToNonCoLocated { writer: RobotId, target: RobotId },
    #[error("settled robot {0} tried to move")]
    SettledRobotMoved(RobotId),
    #[error("robot {0} announced a settle without becoming settled")]
    SettleWithoutState(RobotId),
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("invalid crash schedule: {0}")]
    InvalidSchedule(String),
    #[error("max_rounds must be at least 1")]
    ZeroRoundBudget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Robot<S> {
    pub id: RobotId,
    /// `None` once crashed.
    pub location: Option<Node>,
    pub entry_port: Port,
    pub state: S,
}

impl<S> Robot<S> {
    pub fn alive(&self) -> bool {
        self.location.is_some()
    }
}

/// Engine-owned snapshot of the whole system.
#[derive(Debug, Clone)]
pub struct WorldState<S> {
    pub round: u64,
    /// Sorted by id.
    pub robots: Vec<Robot<S>>,
    pub trace: Vec<TraceEvent>,
}

impl<S> WorldState<S> {
    pub fn alive(&self) -> impl Iterator<Item = &Robot<S>> {
        self.robots.iter().filter(|r| r.alive())
    }

    pub fn robot(&self, id: RobotId) -> Option<&Robot<S>> {
        self.robots
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.robots[i])
    }
}

/// `true` iff every node hosts at most one alive robot and every alive robot
/// is settled. Vacuously true when no robot is alive.
pub fn is_dispersed<P: Protocol>(protocol: &P, world: &WorldState<P::State>) -> bool {
    let mut occupied = BTreeSet::new();
    world
        .alive()
        .all(|r| protocol.is_settled(&r.state) && occupied.insert(r.location))
}

/// Drives one protocol over one graph under one crash schedule.
pub struct Simulation<'g, P: Protocol> {
    graph: &'g PortGraph,
    protocol: P,
    schedule: CrashSchedule,
    world: WorldState<P::State>,
    placement: Vec<(RobotId, Node)>,
}

impl<'g, P: Protocol> Simulation<'g, P> {
    pub fn new(
        graph: &'g PortGraph,
        placement: &[(RobotId, Node)],
        protocol: P,
        schedule: CrashSchedule,
    ) -> Result<Self, EngineError> {
        let mut ids = BTreeSet::new();
        for &(id, node) in placement {
            if node == 0 || node > graph.node_count() {
                return Err(EngineError::InvalidPlacement(format!(
                    "robot {id} placed on node {node}, graph has {} nodes",
                    graph.node_count()
                )));
            }
            if !ids.insert(id) {
                return Err(EngineError::InvalidPlacement(format!(
                    "robot {id} placed twice"
                )));
            }
        }
        if let Some((id, _)) = schedule.entries().find(|(id, _)| !ids.contains(id)) {
            return Err(EngineError::InvalidSchedule(format!(
                "robot {id} does not exist"
            )));
        }
        let mut placement = placement.to_vec();
        placement.sort_unstable();
        let robots = placement
            .iter()
            .map(|&(id, node)| Robot {
                id,
                location: Some(node),
                entry_port: 0,
                state: protocol.init(id),
            })
            .collect();
        Ok(Simulation {
            graph,
            protocol,
            schedule,
            world: WorldState {
                round: 0,
                robots,
                trace: Vec::new(),
            },
            placement,
        })
    }

    /// Replaces the initial state of robot `id`. Only valid before the first
    /// step.
    pub fn with_state(mut self, id: RobotId, state: P::State) -> Result<Self, EngineError> {
        if self.world.round > 0 {
            return Err(EngineError::InvalidPlacement(format!(
                "cannot set the state of robot {id} after round 0"
            )));
        }
        let robot = self
            .world
            .robots
            .iter_mut()
            .find(|r| r.id == id)
            .ok_or_else(|| EngineError::InvalidPlacement(format!("robot {id} is not placed")))?;
        robot.state = state;
        Ok(self)
    }

    pub fn world(&self) -> &WorldState<P::State> {
        &self.world
    }

    pub fn protocol(&self) -> &P {
        &self.protocol
    }

    pub fn placement(&self) -> &[(RobotId, Node)] {
        &self.placement
    }

    pub fn is_dispersed(&self) -> bool {
        is_dispersed(&self.protocol, &self.world)
    }

    /// Advances the world by exactly one round.
    pub fn step(&mut self) -> Result<(), EngineError> {
        let round = self.world.round + 1;
        let mut events = Vec::new();

        // (1) crashes
        for robot in &mut self.world.robots {
            if robot.alive() && self.schedule.crash_round(robot.id) == Some(round) {
                let mut e = TraceEvent::new(round, robot.id, EventKind::Crash);
                e.payload.node = robot.location;
                events.push(e);
                robot.location = None;
            }
        }

        // (2) local views, from one consistent snapshot
        let mut by_node: BTreeMap<Node, Vec<Peer<P::State>>> = BTreeMap::new();
        for r in self.world.alive() {
            by_node.entry(r.location.unwrap()).or_default().push(Peer {
                id: r.id,
                state: r.state.clone(),
            });
        }

        // (3) transitions
        let mut decisions = Vec::new();
        for (idx, r) in self.world.robots.iter().enumerate() {
            let Some(node) = r.location else { continue };
            let here = &by_node[&node];
            let others: Vec<Peer<P::State>> =
                here.iter().filter(|p| p.id != r.id).cloned().collect();
            let view = LocalView {
                degree: self.graph.degree(node),
                entry_port: r.entry_port,
                co_located: &others,
            };
            let decision = self.protocol.transition(r.id, &r.state, &view);

            let settled_before = self.protocol.is_settled(&r.state);
            match decision.action {
                Action::Move(port) => {
                    if settled_before {
                        return Err(EngineError::SettledRobotMoved(r.id));
                    }
                    if port == 0 || port as usize > view.degree {
                        return Err(EngineError::InvalidMovePort {
                            robot: r.id,
                            port,
                            degree: view.degree,
                        });
                    }
                }
                Action::Settle if !self.protocol.is_settled(&decision.state) => {
                    return Err(EngineError::SettleWithoutState(r.id));
                }
                _ => {}
            }
            for w in &decision.writes {
                let ok = here.iter().any(|p| {
                    p.id == w.target && p.id != r.id && self.protocol.is_settled(&p.state)
                });
                if !ok {
                    return Err(EngineError::WriteToNonCoLocated {
                        writer: r.id,
                        target: w.target,
                    });
                }
            }
            decisions.push((idx, node, decision));
        }

        // (4) own updates, then arbitrated writes
        let mut winning: BTreeMap<RobotId, (u32, RobotId, P::Patch)> = BTreeMap::new();
        for (idx, _, d) in &decisions {
            let writer = self.world.robots[*idx].id;
            for w in &d.writes {
                let key = (w.priority, writer);
                match winning.get(&w.target) {
                    Some((p, id, _)) if (*p, *id) >= key => {}
                    _ => {
                        winning.insert(w.target, (w.priority, writer, w.patch.clone()));
                    }
                }
            }
        }

        for (idx, node, d) in &decisions {
            let robot = &self.world.robots[*idx];
            let kind = match d.action {
                Action::Stay => EventKind::Wait,
                Action::Settle => EventKind::Settle,
                Action::Move(_) => EventKind::Move,
            };
            let mut e = TraceEvent::new(round, robot.id, kind);
            e.payload.node = Some(*node);
            e.payload.entry_port = Some(robot.entry_port);
            e.payload.memory_bits = Some(memory_bits(&self.protocol.layout(&robot.state)));
            e.payload.state = Some(self.protocol.snapshot(&robot.state));
            if let Action::Move(port) = d.action {
                let (to, _) = self
                    .graph
                    .neighbor(*node, port)
                    .expect("port checked above");
                e.payload.port = Some(port);
                e.payload.to = Some(to);
            }
            events.push(e);
            for note in &d.notes {
                let mut e = TraceEvent::new(round, robot.id, note.kind);
                e.payload.node = Some(*node);
                e.payload.target = note.target;
                events.push(e);
            }
        }

        for (idx, node, d) in decisions {
            let robot = &mut self.world.robots[idx];
            robot.state = d.state;
            match d.action {
                Action::Move(port) => {
                    let (to, back) = self.graph.neighbor(node, port).expect("port checked above");
                    robot.location = Some(to);
                    robot.entry_port = back;
                }
                Action::Stay | Action::Settle => robot.entry_port = 0,
            }
        }
        for (target, (_, _, patch)) in winning {
            let idx = self
                .world
                .robots
                .binary_search_by_key(&target, |r| r.id)
                .expect("target validated as co-located");
            self.protocol
                .apply(&mut self.world.robots[idx].state, &patch);
        }

        events.sort_by_key(|e| (e.kind.order(), e.robot));
        self.world.trace.extend(events);
        self.world.round = round;
        Ok(())
    }

    /// Steps until the protocol's round limit, `max_rounds`, or the first round
    /// after which every alive robot is settled on a distinct node.
    pub fn run(mut self, max_rounds: u64) -> Result<SimResult<P>, EngineError> {
        if max_rounds == 0 {
            return Err(EngineError::ZeroRoundBudget);
        }
        let limit = max_rounds.min(self.protocol.round_limit());
        while self.world.round < limit {
            self.step()?;
            if self.is_dispersed() {
                break;
            }
        }
        let summary = summarize(&self.world.trace, &self.placement);
        debug_assert_eq!(summary.dispersed, self.is_dispersed());
        Ok(SimResult {
            dispersed: self.is_dispersed(),
            rounds_elapsed: self.world.round,
            summary,
            placement: self.placement,
            protocol: self.protocol,
            world: self.world,
        })
    }
}

pub struct SimResult<P: Protocol> {
    pub world: WorldState<P::State>,
    pub protocol: P,
    pub placement: Vec<(RobotId, Node)>,
    pub rounds_elapsed: u64,
    pub dispersed: bool,
    pub summary: Summary,
}

impl<P: Protocol> SimResult<P> {
    pub fn trace(&self) -> &[TraceEvent] {
        &self.world.trace
    }

    pub fn trace_hash(&self) -> &str {
        &self.summary.trace_hash
    }

    pub fn max_memory_bits(&self) -> u32 {
        self.summary.max_memory_bits
    }

    /// Nodes holding an alive settled robot.
    pub fn settled_nodes(&self) -> BTreeSet<Node> {
        self.world
            .alive()
            .filter(|r| self.protocol.is_settled(&r.state))
            .filter_map(|r| r.location)
            .collect()
    }
}

/// Convenience wrapper around [`Simulation::new`] and [`Simulation::run`].
pub fn run<P: Protocol>(
    graph: &PortGraph,
    placement: &[(RobotId, Node)],
    protocol: P,
    schedule: CrashSchedule,
    max_rounds: u64,
) -> Result<SimResult<P>, EngineError> {
    Simulation::new(graph, placement, protocol, schedule)?.run(max_rounds)
}
