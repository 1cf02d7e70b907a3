//! Dispersion from several starting clusters, run in fixed-length phases.
//!
//! Every robot counts the same phase counter down. When it reaches zero all
//! pointers are cleared, including those of settled robots, and the unsettled
//! robots sharing a node form a fresh cluster named after their highest id.
//! Each cluster then runs a port-ordered DFS as a single unit, leaving its
//! lowest-id robot on every empty node it reaches.
//!
//! Priority is the cluster id. A cluster meeting a settled robot of higher
//! priority waits out the phase. A settled robot of lower or no priority is
//! taken over and becomes part of the meeting cluster's DFS tree. When
//! clusters share a node, the highest one carries on and the others merge
//! under the largest id among themselves and wait for the next phase.
//!
//! On a node of degree at least `k` the cluster sweeps the neighbourhood port
//! by port, stepping out and straight back, before continuing the DFS.

use crate::dfs::{initial_cdr, next_port, Pointers};
use crate::engine::{Action, Decision, Field, LocalView, Note, Peer, Protocol, RobotId};
use crate::graph::Port;
use crate::trace::{EventKind, StateSnapshot};

/// What the robots are told about the instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Knowledge {
    pub k: u32,
    pub f: u32,
    pub l: u32,
    pub m: usize,
    pub max_degree: usize,
}

impl Knowledge {
    /// `min(m, kΔ, k²)`, at least 1.
    pub fn phase_len(&self) -> u64 {
        let k = u64::from(self.k);
        (self.m as u64)
            .min(k * self.max_degree as u64)
            .min(k * k)
            .max(1)
    }

    /// `l + f + 1`.
    pub fn num_phases(&self) -> u64 {
        u64::from(self.l) + u64::from(self.f) + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heading {
    Forward,
    Backtrack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArbState {
    pub settled: bool,
    pub ptr: Pointers,
    pub cid: Option<RobotId>,
    pub priority: Option<RobotId>,
    pub waiting: bool,
    /// Settled: this node's neighbourhood is being swept.
    /// Unsettled: the cluster stepped out of a sweeping node and must return.
    pub sweep: bool,
    pub heading: Heading,
    pub counter: u64,
    pub phase: u64,
}

/// The fields a cluster may overwrite on a settled robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Claim {
    pub cid: Option<RobotId>,
    pub priority: Option<RobotId>,
    pub ptr: Pointers,
    pub sweep: bool,
}

impl Claim {
    fn of(s: &ArbState) -> Self {
        Claim {
            cid: s.cid,
            priority: s.priority,
            ptr: s.ptr,
            sweep: s.sweep,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Arbitrary {
    k: u32,
    max_degree: usize,
    phase_len: u64,
    num_phases: u64,
}

impl Arbitrary {
    pub fn new(knowledge: Knowledge) -> Self {
        Arbitrary {
            k: knowledge.k,
            max_degree: knowledge.max_degree,
            phase_len: knowledge.phase_len(),
            num_phases: knowledge.num_phases(),
        }
    }

    /// Explicit phase length and count. `max_degree` only sizes the memory
    /// meter.
    pub fn with_phases(k: u32, max_degree: usize, phase_len: u64, num_phases: u64) -> Self {
        Arbitrary {
            k,
            max_degree,
            phase_len: phase_len.max(1),
            num_phases,
        }
    }

    /// Only `k` is known: `k²`-round phases, `k + 1` of them.
    pub fn k_only(k: u32, max_degree: usize) -> Self {
        let k64 = u64::from(k);
        Self::with_phases(k, max_degree, k64 * k64, k64 + 1)
    }

    pub fn phase_len(&self) -> u64 {
        self.phase_len
    }

    pub fn num_phases(&self) -> u64 {
        self.num_phases
    }

    /// State after the end-of-phase reset. Unsettled robots need the ids of
    /// the unsettled robots sharing their node.
    fn reset(&self, s: &ArbState, cluster_id: RobotId) -> ArbState {
        let cid = (!s.settled).then_some(cluster_id);
        ArbState {
            settled: s.settled,
            ptr: Pointers::default(),
            cid,
            priority: cid,
            waiting: false,
            sweep: false,
            heading: Heading::Forward,
            counter: self.phase_len,
            phase: s.phase + 1,
        }
    }

    fn normalize(&self, s: &ArbState, cluster_id: RobotId) -> ArbState {
        if s.counter == 0 {
            self.reset(s, cluster_id)
        } else {
            *s
        }
    }
}

type Out = Decision<ArbState, Claim>;

impl Protocol for Arbitrary {
    type State = ArbState;
    type Patch = Claim;

    fn name(&self) -> &'static str {
        "arbitrary"
    }

    fn init(&self, _id: RobotId) -> ArbState {
        ArbState {
            settled: false,
            ptr: Pointers::default(),
            cid: None,
            priority: None,
            waiting: false,
            sweep: false,
            heading: Heading::Forward,
            counter: 0,
            phase: 0,
        }
    }

    fn transition(&self, id: RobotId, s: &ArbState, view: &LocalView<'_, ArbState>) -> Out {
        let fresh = s.counter == 0;
        let cluster_id = view
            .peers()
            .filter(|p| !p.state.settled)
            .map(|p| p.id)
            .chain([id])
            .max()
            .unwrap_or(id);
        let me = self.normalize(s, cluster_id);
        let peers: Vec<Peer<ArbState>> = view
            .peers()
            .map(|p| Peer {
                id: p.id,
                state: self.normalize(&p.state, cluster_id),
            })
            .collect();

        let mut d = if me.settled || me.waiting {
            Decision::new(me, Action::Stay)
        } else {
            let entry = if fresh { 0 } else { view.entry_port };
            Cluster {
                k: self.k,
                id,
                me,
                peers: &peers,
                degree: view.degree,
                entry,
            }
            .decide()
        };
        d.state.counter = me.counter - 1;
        if fresh {
            d.notes.insert(0, Note::new(EventKind::Reset));
        }
        d
    }

    fn apply(&self, state: &mut ArbState, claim: &Claim) {
        state.cid = claim.cid;
        state.priority = claim.priority;
        state.ptr = claim.ptr;
        state.sweep = claim.sweep;
    }

    fn is_settled(&self, state: &ArbState) -> bool {
        state.settled
    }

    fn layout(&self, _state: &ArbState) -> Vec<Field> {
        let ids = u64::from(self.k) + 1;
        let ports = self.max_degree as u64 + 2;
        vec![
            Field::new("id", ids),
            Field::new("cid", ids),
            Field::new("priority", ids),
            Field::new("parent", ports),
            Field::new("cdr", ports),
            Field::flag("cdr_used"),
            Field::flag("backtrack"),
            Field::flag("waiting"),
            Field::flag("settled"),
            Field::flag("sweep"),
            Field::flag("heading"),
            Field::new("counter", self.phase_len + 1),
            Field::new("phase", self.num_phases + 1),
        ]
    }

    fn snapshot(&self, s: &ArbState) -> StateSnapshot {
        let mode = match (s.settled, s.heading) {
            (true, _) => "settled",
            (false, Heading::Forward) => "forward",
            (false, Heading::Backtrack) => "backtrack",
        };
        StateSnapshot {
            mode: mode.to_string(),
            settled: s.settled,
            parent: s.ptr.parent,
            cdr: s.ptr.cdr,
            cdr_used: s.ptr.cdr_used,
            backtrack: s.ptr.b,
            cid: s.cid,
            priority: s.priority,
            counter: Some(s.counter),
            phase: Some(s.phase),
            waiting: s.waiting,
            ..StateSnapshot::default()
        }
    }

    fn round_limit(&self) -> u64 {
        self.num_phases * self.phase_len
    }
}

/// One unsettled, non-waiting robot deciding for its cluster. Every member
/// of a cluster reaches the same verdict.
struct Cluster<'a> {
    k: u32,
    id: RobotId,
    me: ArbState,
    peers: &'a [Peer<ArbState>],
    degree: usize,
    /// 0 at a phase start or after standing still.
    entry: Port,
}

impl Cluster<'_> {
    fn decide(&self) -> Out {
        let unsettled = || self.peers.iter().filter(|p| !p.state.settled);
        let top = unsettled()
            .filter_map(|p| p.state.cid)
            .chain(self.me.cid)
            .max();
        if self.me.cid < top {
            let merged = unsettled()
                .filter_map(|p| p.state.cid)
                .chain(self.me.cid)
                .filter(|&c| Some(c) < top)
                .max();
            let state = ArbState {
                cid: merged,
                priority: merged,
                waiting: true,
                ..self.me
            };
            let mut d = Decision::new(state, Action::Stay);
            if let Some(t) = top {
                d = d.note(Note::on(EventKind::Merge, t));
            }
            return d;
        }
        let members: Vec<RobotId> = unsettled()
            .filter(|p| p.state.cid == self.me.cid)
            .map(|p| p.id)
            .chain([self.id])
            .collect();
        match self.peers.iter().find(|p| p.state.settled) {
            None => self.settle_here(&members),
            Some(host) if host.state.cid == self.me.cid => self.own_host(host),
            Some(host) if host.state.priority > self.me.priority => self.wait(),
            Some(host) => self.take_over(host),
        }
    }

    fn parent_here(&self) -> Option<Port> {
        (self.entry > 0).then_some(self.entry)
    }

    fn sweeping_here(&self) -> bool {
        self.degree >= self.k as usize
    }

    fn wait(&self) -> Out {
        Decision::new(
            ArbState {
                waiting: true,
                ..self.me
            },
            Action::Stay,
        )
    }

    fn go(&self, heading: Heading, sweep: bool, port: Port) -> Out {
        Decision::new(
            ArbState {
                heading,
                sweep,
                ..self.me
            },
            Action::Move(port),
        )
    }

    /// Leave a node whose pointers are `ptr` after reaching it from its
    /// parent side, as the DFS prescribes.
    fn onward(&self, ptr: Pointers, sweep: bool) -> (Pointers, Out) {
        match (ptr.b, ptr.is_leaf(), ptr.cdr, ptr.parent) {
            (true, _, _, Some(parent)) => (ptr, self.go(Heading::Backtrack, false, parent)),
            (false, true, _, Some(parent)) => (
                Pointers { b: true, ..ptr },
                self.go(Heading::Backtrack, false, parent),
            ),
            (false, false, Some(cdr), _) => (
                Pointers {
                    cdr_used: true,
                    ..ptr
                },
                self.go(Heading::Forward, sweep, cdr),
            ),
            _ => (ptr, self.wait()),
        }
    }

    fn settle_here(&self, members: &[RobotId]) -> Out {
        let settler = *members.iter().min().expect("self is a member");
        let returning = self.me.sweep && self.entry > 0;
        let fresh = Pointers::fresh(self.degree, self.parent_here());
        let sweep = !returning && self.sweeping_here() && members.len() > 1;
        let (ptr, onward) = if members.len() == 1 {
            (fresh, self.wait())
        } else if returning {
            (fresh, self.go(Heading::Backtrack, false, self.entry))
        } else {
            self.onward(fresh, sweep)
        };
        if settler != self.id {
            return onward;
        }
        let state = ArbState {
            settled: true,
            ptr,
            priority: self.me.cid,
            waiting: false,
            sweep,
            heading: Heading::Forward,
            ..self.me
        };
        Decision::new(state, Action::Settle)
    }

    fn take_over(&self, host: &Peer<ArbState>) -> Out {
        let fresh = Pointers::fresh(self.degree, self.parent_here());
        let returning = self.me.sweep && self.entry > 0;
        let sweep = !returning && self.sweeping_here();
        let (ptr, d) = if returning {
            (fresh, self.go(Heading::Backtrack, false, self.entry))
        } else {
            self.onward(fresh, sweep)
        };
        let claim = Claim {
            cid: self.me.cid,
            priority: self.me.priority,
            ptr,
            sweep,
        };
        self.claim(d, host, claim)
    }

    fn claim(&self, d: Out, host: &Peer<ArbState>, claim: Claim) -> Out {
        if claim == Claim::of(&host.state) {
            d
        } else {
            d.write(host.id, self.me.priority.unwrap_or(0), claim)
        }
    }

    /// DFS step on a settled robot of this cluster.
    fn own_host(&self, host: &Peer<ArbState>) -> Out {
        let here = Claim::of(&host.state);
        let ptr = here.ptr;
        let entry = self.entry;
        if self.me.sweep && entry > 0 {
            return self.go(Heading::Backtrack, false, entry);
        }
        let backtracking = self.me.heading == Heading::Backtrack;
        if backtracking && entry > 0 && ptr.cdr == Some(entry) && ptr.cdr != ptr.parent {
            return self.advance(host, here);
        }
        if ptr.parent == Some(entry) || entry == 0 || backtracking {
            let (ptr, d) = match (ptr.b, ptr.parent) {
                (true, None) => (ptr, self.wait()),
                _ => self.onward(ptr, here.sweep),
            };
            return self.claim(d, host, Claim { ptr, ..here });
        }
        self.go(Heading::Backtrack, false, entry)
    }

    /// Back through `host.cdr`: try the next port, or finish this node.
    fn advance(&self, host: &Peer<ArbState>, here: Claim) -> Out {
        let ptr = here.ptr;
        let cdr = ptr.cdr.expect("advance requires a cdr");
        let (claim, d) = match next_port(self.degree, cdr, ptr.parent) {
            Some(q) => (
                Claim {
                    ptr: Pointers {
                        cdr: Some(q),
                        cdr_used: true,
                        ..ptr
                    },
                    ..here
                },
                self.go(Heading::Forward, here.sweep, q),
            ),
            None if here.sweep => {
                // Sweep finished: walk the neighbourhood again as plain DFS.
                let restart = Pointers {
                    cdr: initial_cdr(self.degree, ptr.parent),
                    cdr_used: true,
                    ..ptr
                };
                let d = match restart.cdr {
                    Some(c) if Some(c) != ptr.parent => self.go(Heading::Forward, false, c),
                    _ => self.wait(),
                };
                (
                    Claim {
                        ptr: restart,
                        sweep: false,
                        ..here
                    },
                    d,
                )
            }
            None => {
                let done = Pointers { b: true, ..ptr };
                let d = match ptr.parent {
                    Some(parent) => self.go(Heading::Backtrack, false, parent),
                    None => self.wait(),
                };
                (Claim { ptr: done, ..here }, d)
            }
        };
        self.claim(d, host, claim)
    }
}
