//! Pointer state kept by settled robots and the port arithmetic both
//! protocols share.

use serde::{Deserialize, Serialize};

use crate::graph::Port;

/// The DFS pointers a visitor can read and overwrite on a settled robot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pointers {
    /// Port through which the robot entered the node it settled on.
    pub parent: Option<Port>,
    /// Child port whose subtree is pending or being explored.
    pub cdr: Option<Port>,
    /// An explorer already left through `cdr`.
    pub cdr_used: bool,
    /// Every child subtree is explored.
    pub b: bool,
}

impl Pointers {
    /// Fresh pointers for a robot settling after entering through `parent`.
    pub fn fresh(degree: usize, parent: Option<Port>) -> Self {
        Pointers {
            parent,
            cdr: initial_cdr(degree, parent),
            cdr_used: false,
            b: false,
        }
    }

    /// `cdr` names the parent edge: a leaf with nothing to explore below it.
    pub fn is_leaf(&self) -> bool {
        self.parent.is_some() && self.cdr == self.parent
    }
}

/// Smallest port other than `parent`; the parent port itself on a degree-1
/// node; `None` on an isolated node.
pub fn initial_cdr(degree: usize, parent: Option<Port>) -> Option<Port> {
    (1..=degree as Port)
        .find(|&p| Some(p) != parent)
        .or(if degree > 0 { parent } else { None })
}

/// Smallest port strictly above `after` that is not `parent`.
pub fn next_port(degree: usize, after: Port, parent: Option<Port>) -> Option<Port> {
    (after + 1..=degree as Port).find(|&p| Some(p) != parent)
}
