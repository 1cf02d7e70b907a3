mod common;

use dispersim::engine::{
    is_dispersed, run, Action, CrashSchedule, Decision, EngineError, Field, LocalView, Protocol,
    RobotId, Simulation,
};
use dispersim::graph::{GraphKind, PortGraph};
use dispersim::oracle::memory_envelope;
use dispersim::rooted::Rooted;
use dispersim::trace::{
    initial_placement, read_jsonl, summarize, write_jsonl, EventKind, StateSnapshot,
};

use common::rooted_at;

/// Scripted robots: the lowest id settles on the spot, everyone else writes
/// its own id into every settled robot it sees with `priority`, then moves
/// through `port` if set.
#[derive(Clone)]
struct Scripted {
    priority: fn(RobotId) -> u32,
    port: Option<u32>,
    write_self: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cell {
    settled: bool,
    mark: RobotId,
}

impl Protocol for Scripted {
    type State = Cell;
    type Patch = RobotId;

    fn name(&self) -> &'static str {
        "scripted"
    }
    fn init(&self, _: RobotId) -> Cell {
        Cell {
            settled: false,
            mark: 0,
        }
    }
    fn transition(
        &self,
        id: RobotId,
        s: &Cell,
        view: &LocalView<'_, Cell>,
    ) -> Decision<Cell, RobotId> {
        if s.settled {
            return Decision::new(*s, Action::Stay);
        }
        if id == 1 {
            return Decision::new(
                Cell {
                    settled: true,
                    mark: 0,
                },
                Action::Settle,
            );
        }
        let mut d = Decision::new(*s, self.port.map_or(Action::Stay, Action::Move));
        for p in view.peers().filter(|p| p.state.settled) {
            d = d.write(p.id, (self.priority)(id), id);
        }
        if self.write_self {
            d = d.write(id, 0, id);
        }
        d
    }
    fn apply(&self, s: &mut Cell, patch: &RobotId) {
        s.mark = *patch;
    }
    fn is_settled(&self, s: &Cell) -> bool {
        s.settled
    }
    fn layout(&self, _: &Cell) -> Vec<Field> {
        vec![Field::flag("settled"), Field::new("mark", 16)]
    }
    fn snapshot(&self, s: &Cell) -> StateSnapshot {
        StateSnapshot {
            settled: s.settled,
            ..StateSnapshot::default()
        }
    }
    fn round_limit(&self) -> u64 {
        3
    }
}

fn scripted(priority: fn(RobotId) -> u32) -> Scripted {
    Scripted {
        priority,
        port: None,
        write_self: false,
    }
}

fn path(n: usize) -> PortGraph {
    PortGraph::generate(GraphKind::Path { n }).unwrap()
}

#[test]
fn single_robot_settles_in_the_first_round() {
    let g = path(2);
    let result = run(&g, &[(1, 1)], Rooted::new(1, 1), CrashSchedule::none(), 7).unwrap();
    assert_eq!(result.rounds_elapsed, 1);
    assert!(result.dispersed);
    let robot = result.world.robot(1).unwrap();
    assert_eq!(robot.location, Some(1));
    assert!(robot.state.settled);
}

#[test]
fn crashed_robot_vanishes_from_later_rounds() {
    let g = PortGraph::generate(GraphKind::Ring { n: 6 }).unwrap();
    let schedule = CrashSchedule::new([(2, 5)]).unwrap();
    let mut sim = Simulation::new(&g, &rooted_at(1, 4), Rooted::new(4, 2), schedule).unwrap();
    for round in 1..=40 {
        sim.step().unwrap();
        let robot2 = sim.world().robot(2).unwrap();
        assert_eq!(robot2.location.is_none(), round >= 5, "round {round}");
    }
    let trace = &sim.world().trace;
    let crash: Vec<_> = trace
        .iter()
        .filter(|e| e.robot == 2 && e.kind == EventKind::Crash)
        .collect();
    assert_eq!(crash.len(), 1);
    assert_eq!(crash[0].round, 5);
    assert!(trace
        .iter()
        .all(|e| e.robot != 2 || e.round < 5 || e.kind == EventKind::Crash));
    assert!(trace
        .iter()
        .all(|e| e.payload.target != Some(2) || e.round < 5));
}

#[test]
fn higher_priority_write_wins() {
    // robot 1 settles at node 2 of path(4) in round 1; 2 and 3 write to it in round 2.
    let g = path(4);
    let placement = [(1, 2), (2, 2), (3, 2)];
    let mut sim = Simulation::new(
        &g,
        &placement,
        scripted(|id| 10 - id),
        CrashSchedule::none(),
    )
    .unwrap();
    sim.step().unwrap();
    sim.step().unwrap();
    assert_eq!(sim.world().robot(1).unwrap().state.mark, 2);
}

#[test]
fn equal_priority_write_goes_to_the_higher_id() {
    let g = path(4);
    let placement = [(1, 3), (2, 3), (3, 3), (4, 3)];
    let mut sim = Simulation::new(&g, &placement, scripted(|_| 7), CrashSchedule::none()).unwrap();
    sim.step().unwrap();
    sim.step().unwrap();
    assert_eq!(sim.world().robot(1).unwrap().state.mark, 4);
}

#[test]
fn writes_to_self_or_unsettled_robots_are_rejected() {
    let g = path(4);
    let protocol = Scripted {
        write_self: true,
        ..scripted(|_| 1)
    };
    let mut sim = Simulation::new(&g, &[(1, 1), (2, 1)], protocol, CrashSchedule::none()).unwrap();
    assert_eq!(
        sim.step(),
        Err(EngineError::WriteToNonCoLocated {
            writer: 2,
            target: 2
        })
    );
}

#[test]
fn out_of_range_ports_are_rejected() {
    let g = path(4);
    let protocol = Scripted {
        port: Some(2),
        ..scripted(|_| 1)
    };
    let mut sim = Simulation::new(&g, &[(1, 2), (2, 1)], protocol, CrashSchedule::none()).unwrap();
    assert_eq!(
        sim.step(),
        Err(EngineError::InvalidMovePort {
            robot: 2,
            port: 2,
            degree: 1
        })
    );
}

#[test]
fn invalid_inputs_are_rejected() {
    let g = path(3);
    let p = || Rooted::new(2, 2);
    assert!(matches!(
        Simulation::new(&g, &[(1, 4), (2, 1)], p(), CrashSchedule::none()),
        Err(EngineError::InvalidPlacement(_))
    ));
    assert!(matches!(
        Simulation::new(&g, &[(1, 1), (1, 1)], p(), CrashSchedule::none()),
        Err(EngineError::InvalidPlacement(_))
    ));
    assert!(matches!(
        Simulation::new(
            &g,
            &[(1, 1), (2, 1)],
            p(),
            CrashSchedule::new([(3, 1)]).unwrap()
        ),
        Err(EngineError::InvalidSchedule(_))
    ));
    assert!(CrashSchedule::new([(1, 2), (1, 3)]).is_err());
    assert!(matches!(
        run(&g, &[(1, 1)], p(), CrashSchedule::none(), 0),
        Err(EngineError::ZeroRoundBudget)
    ));
}

#[test]
fn rooted_ring3_terminates_within_budget() {
    let g = PortGraph::generate(GraphKind::Ring { n: 3 }).unwrap();
    let result = run(
        &g,
        &rooted_at(1, 3),
        Rooted::new(3, 2),
        CrashSchedule::none(),
        u64::MAX,
    )
    .unwrap();
    assert!(result.dispersed);
    assert!(result.rounds_elapsed <= 63);
}

#[test]
fn everyone_crashing_is_vacuous_dispersion() {
    let g = PortGraph::generate(GraphKind::Ring { n: 5 }).unwrap();
    let schedule = CrashSchedule::new((1..=4).map(|id| (id, 1))).unwrap();
    let result = run(&g, &rooted_at(1, 4), Rooted::new(4, 2), schedule, 112).unwrap();
    assert!(result.dispersed);
    assert_eq!(result.summary.alive_count, 0);
    assert_eq!(result.world.alive().count(), 0);
}

#[test]
fn reruns_hash_identically() {
    let g = PortGraph::generate(GraphKind::RandomConnected {
        n: 9,
        m: 14,
        seed: 4,
    })
    .unwrap();
    let go = || {
        let schedule = CrashSchedule::new([(3, 9), (5, 30)]).unwrap();
        run(
            &g,
            &rooted_at(2, 7),
            Rooted::new(7, g.max_degree()),
            schedule,
            u64::MAX,
        )
        .unwrap()
    };
    let (a, b) = (go(), go());
    assert_eq!(a.trace_hash(), b.trace_hash());
    assert_eq!(a.trace(), b.trace());
}

#[test]
fn dispersion_predicate() {
    let g = path(2);
    let one = run(&g, &[(1, 1)], Rooted::new(1, 1), CrashSchedule::none(), 7).unwrap();
    assert!(is_dispersed(&one.protocol, &one.world));

    let sim = Simulation::new(
        &g,
        &[(1, 1), (2, 1)],
        Rooted::new(2, 1),
        CrashSchedule::none(),
    )
    .unwrap();
    assert!(!sim.is_dispersed());
}

#[test]
fn random_graph_run_occupies_distinct_nodes() {
    let g = PortGraph::generate(GraphKind::RandomConnected {
        n: 10,
        m: 15,
        seed: 7,
    })
    .unwrap();
    let result = run(
        &g,
        &rooted_at(1, 10),
        Rooted::new(10, g.max_degree()),
        CrashSchedule::none(),
        u64::MAX,
    )
    .unwrap();
    assert!(result.dispersed);
    let nodes: Vec<_> = result.world.alive().map(|r| r.location.unwrap()).collect();
    assert_eq!(nodes.len(), 10);
    assert_eq!(result.settled_nodes().len(), 10);
}

#[test]
fn settled_robot_memory_example() {
    let p = Rooted::new(8, 3);
    let mut state = p.init(1);
    state.settled = true;
    let fields = p.layout(&state);
    let bits: Vec<_> = fields.iter().map(|f| (f.name, f.bits())).collect();
    assert_eq!(
        bits,
        [
            ("id", 4),
            ("parent", 3),
            ("cdr", 3),
            ("cdr_used", 1),
            ("backtrack", 1),
            ("settled", 1),
            ("mode", 2),
            ("clock", 5),
            ("aux", 4),
        ]
    );
    let total = dispersim::engine::memory_bits(&fields);
    assert_eq!(total, 24);
    assert!(total <= memory_envelope(8, 3));
    assert_eq!(Field::flag("b").bits(), 1);
}

#[test]
fn summary_is_recomputable_from_jsonl() {
    let g = PortGraph::generate(GraphKind::Star { n: 6 }).unwrap();
    let placement = rooted_at(1, 5);
    let schedule = CrashSchedule::new([(2, 3), (4, 17)]).unwrap();
    let result = run(&g, &placement, Rooted::new(5, 5), schedule, u64::MAX).unwrap();
    let mut buf = Vec::new();
    write_jsonl(&mut buf, result.trace()).unwrap();
    let events = read_jsonl(buf.as_slice()).unwrap();
    assert_eq!(events, result.trace());
    assert_eq!(initial_placement(&events), placement);
    let replayed = summarize(&events, &placement);
    assert_eq!(replayed, result.summary);
    assert_eq!(
        serde_json::to_string(&replayed).unwrap(),
        serde_json::to_string(&result.summary).unwrap()
    );
}

#[test]
fn events_within_a_round_are_ordered() {
    let g = PortGraph::generate(GraphKind::Complete { n: 5 }).unwrap();
    let schedule = CrashSchedule::new([(1, 12), (3, 7)]).unwrap();
    let result = run(&g, &rooted_at(1, 5), Rooted::new(5, 4), schedule, u64::MAX).unwrap();
    for w in result.trace().windows(2) {
        let key = |e: &dispersim::trace::TraceEvent| (e.round, e.kind.order(), e.robot);
        assert!(key(&w[0]) <= key(&w[1]));
    }
}
