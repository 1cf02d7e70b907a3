mod common;

use std::collections::BTreeMap;

use dispersim::dfs::Pointers;
use dispersim::engine::{
    run, Action, CrashSchedule, LocalView, Peer, Protocol, RobotId, SimResult,
};
use dispersim::graph::{GraphKind, PortGraph};
use dispersim::oracle::{loop_monitor, one_mover_monitor, reference_first_k};
use dispersim::rooted::{Mode, Rooted, RootedState};
use dispersim::trace::EventKind;

use common::{corpus, rooted_at};

fn rooted_run(g: &PortGraph, root: usize, k: u32, schedule: CrashSchedule) -> SimResult<Rooted> {
    run(
        g,
        &rooted_at(root, k),
        Rooted::new(k, g.max_degree()),
        schedule,
        u64::MAX,
    )
    .unwrap()
}

fn releases(result: &SimResult<Rooted>) -> BTreeMap<RobotId, Vec<u64>> {
    let mut out: BTreeMap<RobotId, Vec<u64>> = BTreeMap::new();
    for e in result
        .trace()
        .iter()
        .filter(|e| e.kind == EventKind::Release)
    {
        out.entry(e.robot).or_default().push(e.round);
    }
    out
}

fn settled_host(id: RobotId, parent: u32, cdr: u32, cdr_used: bool) -> Peer<RootedState> {
    Peer {
        id,
        state: RootedState {
            settled: true,
            ptr: Pointers {
                parent: Some(parent),
                cdr: Some(cdr),
                cdr_used,
                b: false,
            },
            mode: Mode::AtRoot,
            clock: 0,
            aux: 0,
        },
    }
}

fn explorer(mode: Mode, aux: RobotId) -> RootedState {
    RootedState {
        settled: false,
        ptr: Pointers::default(),
        mode,
        clock: 20,
        aux,
    }
}

#[test]
fn lone_robot_settles_as_root() {
    let g = PortGraph::generate(GraphKind::Path { n: 3 }).unwrap();
    let result = rooted_run(&g, 1, 1, CrashSchedule::none());
    assert_eq!(result.rounds_elapsed, 1);
    let root = result.world.robot(1).unwrap().state;
    assert!(root.settled);
    assert_eq!(root.ptr.parent, None);
    assert_eq!(root.ptr.cdr, Some(1));
}

#[test]
fn second_robot_takes_port_one_on_ring3() {
    let g = PortGraph::generate(GraphKind::Ring { n: 3 }).unwrap();
    let result = rooted_run(&g, 1, 3, CrashSchedule::none());
    assert!(result.dispersed);
    let first_move = result
        .trace()
        .iter()
        .find(|e| e.robot == 2 && e.kind == EventKind::Move)
        .unwrap();
    assert_eq!(first_move.payload.port, Some(1));
    assert_eq!(first_move.payload.to, Some(2));
    assert_eq!(result.world.robot(2).unwrap().location, Some(2));
    // robot 2 leaves at the first boundary, after robot 1 settles
    assert_eq!(releases(&result)[&2], vec![2]);
}

#[test]
fn ring_runs_never_cross_a_closing_edge() {
    // every node of a ring is occupied before its closing edge is reached
    for n in 3..=9 {
        let g = PortGraph::generate(GraphKind::Ring { n }).unwrap();
        for k in 1..=n as u32 {
            let result = rooted_run(&g, 1, k, CrashSchedule::none());
            assert!(result.dispersed);
            assert!(result.trace().iter().all(|e| e.kind != EventKind::Bounce));
            loop_monitor(result.trace()).unwrap();
        }
    }
}

#[test]
fn closing_edges_bounce_without_loops() {
    let g = PortGraph::generate(GraphKind::Complete { n: 4 }).unwrap();
    let result = rooted_run(&g, 1, 4, CrashSchedule::none());
    let bounce = result
        .trace()
        .iter()
        .find(|e| e.kind == EventKind::Bounce)
        .unwrap();
    // the bounced explorer leaves through the port it came in by, unchanged
    let action = result
        .trace()
        .iter()
        .find(|e| e.round == bounce.round && e.robot == bounce.robot && e.kind == EventKind::Move)
        .unwrap();
    assert_eq!(action.payload.port, action.payload.entry_port);
    assert!(result.dispersed);
    loop_monitor(result.trace()).unwrap();
    one_mover_monitor(result.trace()).unwrap();
}

#[test]
fn return_through_last_child_marks_subtree_done() {
    let p = Rooted::new(5, 3);
    let host = [settled_host(2, 1, 2, true)];
    let view = LocalView {
        degree: 2,
        entry_port: 2,
        co_located: &host,
    };
    let d = p.transition(4, &explorer(Mode::Backtrack, 2), &view);
    assert_eq!(d.action, Action::Move(1));
    assert_eq!(d.writes.len(), 1);
    assert_eq!(d.writes[0].target, 2);
    assert!(d.writes[0].patch.b);
}

#[test]
fn return_through_child_advances_to_next_port() {
    let p = Rooted::new(5, 3);
    let host = [settled_host(2, 1, 2, true)];
    let view = LocalView {
        degree: 3,
        entry_port: 2,
        co_located: &host,
    };
    let d = p.transition(4, &explorer(Mode::Backtrack, 2), &view);
    assert_eq!(d.action, Action::Move(3));
    assert_eq!(d.state.mode, Mode::Forward);
    let patch = d.writes[0].patch;
    assert_eq!((patch.cdr, patch.cdr_used, patch.b), (Some(3), true, false));
}

#[test]
fn descent_through_parent_follows_cdr() {
    let p = Rooted::new(5, 3);
    let host = [settled_host(2, 1, 3, false)];
    let view = LocalView {
        degree: 3,
        entry_port: 1,
        co_located: &host,
    };
    let d = p.transition(4, &explorer(Mode::Forward, 1), &view);
    assert_eq!(d.action, Action::Move(3));
    assert!(d.writes[0].patch.cdr_used);
}

#[test]
fn finished_subtree_is_skipped() {
    let p = Rooted::new(5, 3);
    let mut host = settled_host(2, 1, 3, true);
    host.state.ptr.b = true;
    let hosts = [host];
    let view = LocalView {
        degree: 3,
        entry_port: 1,
        co_located: &hosts,
    };
    let d = p.transition(4, &explorer(Mode::Forward, 1), &view);
    assert_eq!(d.action, Action::Move(1));
    assert_eq!(d.state.mode, Mode::Backtrack);
    assert!(d.writes.is_empty());
}

#[test]
fn unknown_arrival_at_older_robot_bounces_unchanged() {
    let p = Rooted::new(5, 3);
    let host = [settled_host(2, 1, 2, true)];
    let view = LocalView {
        degree: 3,
        entry_port: 3,
        co_located: &host,
    };
    let d = p.transition(4, &explorer(Mode::Forward, 3), &view);
    assert_eq!(d.action, Action::Move(3));
    assert!(d.writes.is_empty());
    assert_eq!(d.notes.len(), 1);
    assert_eq!(d.notes[0].kind, EventKind::Bounce);
}

#[test]
fn unknown_arrival_at_newer_robot_repairs_it() {
    let p = Rooted::new(5, 3);
    let host = [settled_host(4, 1, 2, true)];
    let view = LocalView {
        degree: 3,
        entry_port: 3,
        co_located: &host,
    };
    let d = p.transition(5, &explorer(Mode::Forward, 3), &view);
    assert_eq!(d.notes[0].kind, EventKind::Repair);
    let patch = d.writes[0].patch;
    assert_eq!(patch.parent, Some(3));
    assert_eq!(patch.cdr, Some(1));
    assert!(patch.cdr_used);
    assert_eq!(d.action, Action::Move(1));
}

#[test]
fn neighbour_settles_quickly_on_ring4() {
    let g = PortGraph::generate(GraphKind::Ring { n: 4 }).unwrap();
    let result = rooted_run(&g, 1, 2, CrashSchedule::none());
    let released = releases(&result)[&2][0];
    let settle = result
        .trace()
        .iter()
        .find(|e| e.robot == 2 && e.kind == EventKind::Settle)
        .unwrap();
    assert_eq!(settle.payload.node, Some(2));
    assert!(settle.round - released < 2);
}

#[test]
fn explorers_home_by_epoch_end_and_go_again() {
    // explorer of rank i leaving in round r is back in time to leave again at r + 3i
    let mut repeats = 0;
    for (_, g) in corpus() {
        let n = g.node_count();
        for root in [1, n] {
            let result = rooted_run(&g, root, n as u32, CrashSchedule::none());
            assert!(result.dispersed);
            for (id, rounds) in releases(&result) {
                for w in rounds.windows(2) {
                    repeats += 1;
                    assert_eq!(w[1], w[0] + 3 * u64::from(id));
                }
            }
            assert!(result.trace().iter().all(|e| e.kind != EventKind::Overrun));
        }
    }
    assert!(repeats > 0);
}

#[test]
fn repeated_release_reaches_new_ground() {
    let g = PortGraph::generate(GraphKind::RandomConnected {
        n: 8,
        m: 20,
        seed: 5,
    })
    .unwrap();
    let result = rooted_run(&g, 8, 8, CrashSchedule::none());
    let rounds = &releases(&result)[&8];
    assert!(rounds.len() >= 2);
    // the second trip crosses edges the first one never reached
    let edges = |from: u64, to: u64| -> std::collections::BTreeSet<(usize, u32)> {
        result
            .trace()
            .iter()
            .filter(|e| e.robot == 8 && e.kind == EventKind::Move && (from..to).contains(&e.round))
            .map(|e| (e.payload.node.unwrap(), e.payload.port.unwrap()))
            .collect()
    };
    let first = edges(rounds[0], rounds[1]);
    let second = edges(rounds[1], u64::MAX);
    assert!(!second.is_subset(&first));
    let settle = result
        .trace()
        .iter()
        .find(|e| e.robot == 8 && e.kind == EventKind::Settle)
        .unwrap();
    assert!(settle.round > rounds[1]);
    assert!(result.dispersed);
}

#[test]
fn long_path_explorers_settle_at_the_frontier() {
    let g = PortGraph::generate(GraphKind::Path { n: 20 }).unwrap();
    let result = rooted_run(&g, 1, 6, CrashSchedule::none());
    assert!(result.dispersed);
    for id in 2..=6 {
        assert_eq!(result.world.robot(id).unwrap().location, Some(id as usize));
    }
    assert!(releases(&result).values().all(|r| r.len() == 1));
}

#[test]
fn settling_late_never_retreats() {
    let g = PortGraph::generate(GraphKind::Star { n: 7 }).unwrap();
    let result = rooted_run(&g, 2, 7, CrashSchedule::none());
    for e in result
        .trace()
        .iter()
        .filter(|e| e.kind == EventKind::Settle)
    {
        let before = result
            .trace()
            .iter()
            .filter(|x| x.robot == e.robot && x.round < e.round && x.kind == EventKind::Move);
        for m in before {
            let mode = &m.payload.state.as_ref().unwrap().mode;
            assert_ne!(
                mode, "retreat",
                "robot {} retreated before settling",
                e.robot
            );
        }
    }
}

#[test]
fn fault_free_runs_match_reference_and_never_repair() {
    for (name, g) in corpus() {
        let n = g.node_count();
        for k in [1, n.div_ceil(2), n] {
            let result = rooted_run(&g, 1, k as u32, CrashSchedule::none());
            assert!(result.dispersed, "{name} k={k}");
            assert!(result.rounds_elapsed <= 7 * (k * k) as u64, "{name} k={k}");
            assert_eq!(
                result.settled_nodes(),
                reference_first_k(&g, 1, k),
                "{name} k={k}"
            );
            assert!(
                result.trace().iter().all(|e| e.kind != EventKind::Repair),
                "{name} k={k}"
            );
            one_mover_monitor(result.trace()).unwrap();
        }
    }
}

#[test]
fn random_graph_matches_reference() {
    let g = PortGraph::generate(GraphKind::RandomConnected {
        n: 12,
        m: 18,
        seed: 5,
    })
    .unwrap();
    let result = rooted_run(&g, 1, 7, CrashSchedule::none());
    assert_eq!(result.settled_nodes(), reference_first_k(&g, 1, 7));
}

#[test]
fn settled_crash_costs_at_most_k_extra_rounds() {
    for (name, g) in corpus().into_iter().filter(|(_, g)| g.node_count() <= 8) {
        let n = g.node_count();
        for k in 2..=n.min(6) as u32 {
            let base = rooted_run(&g, 1, k, CrashSchedule::none());
            for victim in 1..=k {
                let Some(settled) = base
                    .trace()
                    .iter()
                    .find(|e| e.robot == victim && e.kind == EventKind::Settle)
                else {
                    continue;
                };
                for r in settled.round + 1..=base.rounds_elapsed {
                    let crashed = rooted_run(&g, 1, k, CrashSchedule::new([(victim, r)]).unwrap());
                    assert!(crashed.dispersed);
                    assert!(
                        crashed.rounds_elapsed <= base.rounds_elapsed + u64::from(k),
                        "{name} k={k} victim {victim} at {r}"
                    );
                }
            }
        }
    }
}

#[test]
fn mover_crash_leaves_no_explorer_out() {
    let g = PortGraph::generate(GraphKind::Path { n: 8 }).unwrap();
    let base = rooted_run(&g, 1, 5, CrashSchedule::none());
    let depart = releases(&base)[&4][0];
    let result = rooted_run(&g, 1, 5, CrashSchedule::new([(4, depart + 2)]).unwrap());
    assert!(result.dispersed);
    one_mover_monitor(result.trace()).unwrap();
    let movers_in = |round: u64| {
        result
            .trace()
            .iter()
            .filter(|e| e.round == round && e.kind.is_action())
            .filter(|e| {
                let s = e.payload.state.as_ref().unwrap();
                !s.settled && s.mode != "at_root"
            })
            .count()
    };
    assert_eq!(movers_in(depart + 2), 0);
}
