//! Dispersion from a single root with sequential, time-budgeted explorers.
//!
//! All robots start on one node. The smallest id settles there at once and
//! becomes the root. The rest wait at the root and are released one at a
//! time: robot `i` gets an epoch of `3i` rounds, spends at most `2i` of them
//! extending a port-ordered DFS over the settled robots' pointers, and uses
//! the remainder to walk parent pointers home. An explorer that finds an
//! empty node settles there. When an epoch ends the same robot is sent again
//! if it came home, otherwise the smallest waiting robot goes next.
//!
//! Robot ids double as ranks, so a run must use ids `1..=k`.
//!
//! Crashed settled robots leave holes. An explorer that reaches a hole
//! settles in it. Parents settle before their children, so ids grow along
//! every root path except where a hole was filled. An explorer remembers the
//! largest id it has passed since release. Reaching an unfinished robot with
//! an even larger id through a port other than its parent means that robot
//! filled a hole after the explorer's path was laid, with a parent pointer
//! that may point the wrong way. The explorer re-hangs it under the edge it
//! arrived through.

use crate::dfs::{initial_cdr, next_port, Pointers};
use crate::engine::{Action, Decision, Field, LocalView, Note, Protocol, RobotId};
use crate::graph::Port;
use crate::trace::{EventKind, StateSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Waiting at the root for release.
    AtRoot,
    /// Descending or probing a new edge.
    Forward,
    /// Returning to the node whose `cdr` it left through.
    Backtrack,
    /// Walking parent pointers home after the exploration budget ran out.
    Retreat,
}

impl Mode {
    pub fn is_mover(self) -> bool {
        !matches!(self, Mode::AtRoot)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::AtRoot => "at_root",
            Mode::Forward => "forward",
            Mode::Backtrack => "backtrack",
            Mode::Retreat => "retreat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RootedState {
    pub settled: bool,
    pub ptr: Pointers,
    pub mode: Mode,
    /// Rounds left in the current epoch.
    pub clock: u32,
    /// Waiters: id of the robot whose epoch is running.
    /// Explorers: largest id among the settled robots passed since release.
    pub aux: RobotId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rooted {
    k: u32,
    max_degree: usize,
}

impl Rooted {
    /// `k` robots with ids `1..=k`; `max_degree` only sizes the memory meter.
    pub fn new(k: u32, max_degree: usize) -> Self {
        Rooted { k, max_degree }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// `7k²`.
    pub fn round_budget(k: u32) -> u64 {
        7 * u64::from(k) * u64::from(k)
    }

    fn epoch_len(id: RobotId) -> u32 {
        3 * id
    }
}

type Out = Decision<RootedState, Pointers>;

impl Protocol for Rooted {
    type State = RootedState;
    type Patch = Pointers;

    fn name(&self) -> &'static str {
        "rooted"
    }

    fn init(&self, _id: RobotId) -> RootedState {
        RootedState {
            settled: false,
            ptr: Pointers::default(),
            mode: Mode::AtRoot,
            clock: 0,
            aux: 0,
        }
    }

    fn transition(&self, id: RobotId, s: &RootedState, view: &LocalView<'_, RootedState>) -> Out {
        if s.settled {
            return Decision::new(*s, Action::Stay);
        }
        match view.peers().find(|p| p.state.settled) {
            None => on_empty(id, s, view),
            Some(host) => {
                let host = Host {
                    id: host.id,
                    ptr: host.state.ptr,
                };
                if s.mode == Mode::AtRoot {
                    waiter(id, s, &host, view)
                } else {
                    explorer(id, s, &host, view)
                }
            }
        }
    }

    fn apply(&self, state: &mut RootedState, patch: &Pointers) {
        state.ptr = *patch;
    }

    fn is_settled(&self, state: &RootedState) -> bool {
        state.settled
    }

    fn layout(&self, _state: &RootedState) -> Vec<Field> {
        let ids = u64::from(self.k) + 1;
        let ports = self.max_degree as u64 + 2;
        vec![
            Field::new("id", ids),
            Field::new("parent", ports),
            Field::new("cdr", ports),
            Field::flag("cdr_used"),
            Field::flag("backtrack"),
            Field::flag("settled"),
            Field::new("mode", 4),
            Field::new("clock", 3 * u64::from(self.k) + 1),
            Field::new("aux", ids),
        ]
    }

    fn snapshot(&self, s: &RootedState) -> StateSnapshot {
        StateSnapshot {
            mode: if s.settled {
                "settled"
            } else {
                s.mode.as_str()
            }
            .to_string(),
            settled: s.settled,
            parent: s.ptr.parent,
            cdr: s.ptr.cdr,
            cdr_used: s.ptr.cdr_used,
            backtrack: s.ptr.b,
            clock: (!s.settled).then_some(u64::from(s.clock)),
            ..StateSnapshot::default()
        }
    }

    fn round_limit(&self) -> u64 {
        Self::round_budget(self.k)
    }
}

struct Host {
    id: RobotId,
    ptr: Pointers,
}

impl Host {
    fn is_root(&self) -> bool {
        self.ptr.parent.is_none()
    }
}

fn moving(s: &RootedState, mode: Mode, clock: u32, aux: RobotId, port: Port) -> Out {
    Decision::new(
        RootedState {
            mode,
            clock,
            aux,
            ..*s
        },
        Action::Move(port),
    )
}

fn on_empty(id: RobotId, s: &RootedState, view: &LocalView<'_, RootedState>) -> Out {
    let waiters_here = s.mode == Mode::AtRoot
        || view
            .peers()
            .any(|p| !p.state.settled && p.state.mode == Mode::AtRoot);
    let settler = view
        .peers()
        .filter(|p| !p.state.settled)
        .map(|p| p.id)
        .chain([id])
        .min()
        .unwrap_or(id);
    if settler == id {
        let parent = if waiters_here || view.entry_port == 0 {
            None
        } else {
            Some(view.entry_port)
        };
        let state = RootedState {
            settled: true,
            ptr: Pointers::fresh(view.degree, parent),
            mode: Mode::AtRoot,
            clock: 0,
            aux: 0,
        };
        return Decision::new(state, Action::Settle);
    }
    let clock = s.clock.saturating_sub(1);
    let state = if waiters_here {
        let aux = if s.mode == Mode::AtRoot { s.aux } else { id };
        RootedState {
            mode: Mode::AtRoot,
            clock,
            aux,
            ..*s
        }
    } else {
        RootedState {
            mode: Mode::Retreat,
            clock,
            ..*s
        }
    };
    Decision::new(state, Action::Stay)
}

fn waiter(id: RobotId, s: &RootedState, host: &Host, view: &LocalView<'_, RootedState>) -> Out {
    if s.clock > 0 {
        let state = RootedState {
            clock: s.clock - 1,
            ..*s
        };
        return Decision::new(state, Action::Stay);
    }
    boundary(id, s.aux, s, host, view)
}

/// Epoch boundary at the root. Every unsettled robot present takes part and
/// all of them reach the same verdict on who departs.
fn boundary(
    id: RobotId,
    active: RobotId,
    s: &RootedState,
    host: &Host,
    view: &LocalView<'_, RootedState>,
) -> Out {
    let present: Vec<RobotId> = view
        .peers()
        .filter(|p| !p.state.settled)
        .map(|p| p.id)
        .chain([id])
        .collect();
    let departing = if present.contains(&active) {
        active
    } else {
        *present.iter().min().expect("self is present")
    };
    if departing != id {
        let state = RootedState {
            mode: Mode::AtRoot,
            clock: Rooted::epoch_len(departing) - 1,
            aux: departing,
            ..*s
        };
        return Decision::new(state, Action::Stay);
    }
    let mut root = host.ptr;
    if root.b {
        root.b = false;
        root.cdr = initial_cdr(view.degree, None);
    }
    let Some(port) = root.cdr else {
        return Decision::new(*s, Action::Stay);
    };
    root.cdr_used = true;
    moving(s, Mode::Forward, Rooted::epoch_len(id) - 1, host.id, port)
        .write(host.id, 0, root)
        .note(Note::new(EventKind::Release))
}

/// An explorer standing on the root with nothing left to do there.
fn home(id: RobotId, s: &RootedState, host: &Host, view: &LocalView<'_, RootedState>) -> Out {
    if s.clock == 0 {
        return boundary(id, id, s, host, view);
    }
    let state = RootedState {
        mode: Mode::AtRoot,
        clock: s.clock - 1,
        aux: id,
        ..*s
    };
    Decision::new(state, Action::Stay)
}

fn explorer(id: RobotId, s: &RootedState, host: &Host, view: &LocalView<'_, RootedState>) -> Out {
    let over = s.clock <= id;
    let clock = s.clock.saturating_sub(1);
    let entry = view.entry_port;

    if host.is_root() && (over || s.mode == Mode::Retreat || entry == 0) {
        return home(id, s, host, view);
    }
    let retreat = |s: &RootedState| -> Out {
        let parent = host.ptr.parent.expect("non-root host has a parent");
        let d = moving(s, Mode::Retreat, clock, s.aux, parent);
        if s.clock == 0 {
            d.note(Note::new(EventKind::Overrun))
        } else {
            d
        }
    };
    if s.mode == Mode::Retreat || entry == 0 {
        return retreat(s);
    }

    let ptr = host.ptr;
    if s.mode == Mode::Backtrack && ptr.cdr == Some(entry) && ptr.cdr != ptr.parent {
        return advance(id, s, host, view, over, clock);
    }

    if s.mode == Mode::Backtrack && ptr.parent != Some(entry) {
        // Back from a subtree the host does not know about: it replaced a
        // crashed robot after this explorer went past. Resume its own DFS.
        if !host.is_root() {
            return descend(s, host, ptr, Vec::new(), over, clock);
        }
        return match ptr.cdr {
            Some(cdr) if !ptr.b => {
                let next = Pointers {
                    cdr_used: true,
                    ..ptr
                };
                let d = moving(s, Mode::Forward, clock, s.aux.max(host.id), cdr);
                if next != ptr {
                    d.write(host.id, 0, next)
                } else {
                    d
                }
            }
            _ => home(id, s, host, view),
        };
    }
    if host.is_root() {
        return moving(s, Mode::Backtrack, clock, s.aux, entry)
            .note(Note::on(EventKind::Bounce, host.id));
    }
    if ptr.parent == Some(entry) {
        return descend(s, host, ptr, Vec::new(), over, clock);
    }
    if host.id > s.aux && !ptr.b {
        let repaired = Pointers::fresh(view.degree, Some(entry));
        let notes = vec![Note::on(EventKind::Repair, host.id)];
        return descend(s, host, repaired, notes, over, clock);
    }
    moving(s, Mode::Backtrack, clock, s.aux, entry).note(Note::on(EventKind::Bounce, host.id))
}

/// Arrival at `host` through its parent edge, `ptr` being its pointers after
/// any repair this round.
fn descend(
    s: &RootedState,
    host: &Host,
    ptr: Pointers,
    notes: Vec<Note>,
    over: bool,
    clock: u32,
) -> Out {
    let parent = ptr.parent.expect("non-root host has a parent");
    let (mode, port, aux, next) = if ptr.b {
        (Mode::Backtrack, parent, s.aux, ptr)
    } else if over {
        (Mode::Retreat, parent, s.aux, ptr)
    } else if ptr.is_leaf() {
        (Mode::Backtrack, parent, s.aux, Pointers { b: true, ..ptr })
    } else {
        let cdr = ptr.cdr.expect("fresh pointers carry a cdr");
        let next = Pointers {
            cdr_used: true,
            ..ptr
        };
        (Mode::Forward, cdr, s.aux.max(host.id), next)
    };
    let mut d = moving(s, mode, clock, aux, port);
    d.notes = notes;
    if next != host.ptr {
        d = d.write(host.id, 0, next);
    }
    d
}

/// Return through `host.cdr`: move on to the next port of `host`.
fn advance(
    id: RobotId,
    s: &RootedState,
    host: &Host,
    view: &LocalView<'_, RootedState>,
    over: bool,
    clock: u32,
) -> Out {
    let ptr = host.ptr;
    let cdr = ptr.cdr.expect("advance requires a cdr");
    let next = next_port(view.degree, cdr, ptr.parent);
    if let (Some(q), false) = (next, over) {
        let updated = Pointers {
            cdr: Some(q),
            cdr_used: true,
            ..ptr
        };
        return moving(s, Mode::Forward, clock, s.aux.max(host.id), q).write(host.id, 0, updated);
    }
    let updated = match next {
        Some(q) => Pointers {
            cdr: Some(q),
            cdr_used: false,
            ..ptr
        },
        None => Pointers { b: true, ..ptr },
    };
    match ptr.parent {
        None => {
            let root = Host {
                id: host.id,
                ptr: updated,
            };
            let d = home(id, s, &root, view);
            if d.writes.is_empty() {
                d.write(host.id, 0, updated)
            } else {
                d
            }
        }
        Some(parent) => {
            let mode = if over { Mode::Retreat } else { Mode::Backtrack };
            moving(s, mode, clock, s.aux, parent).write(host.id, 0, updated)
        }
    }
}
