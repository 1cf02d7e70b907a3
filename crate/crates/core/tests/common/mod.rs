#![allow(dead_code)]

use dispersim::engine::RobotId;
use dispersim::graph::{GraphKind, Node, PortGraph};

/// Rings, paths, two cliques, stars and 50 random connected graphs.
pub fn corpus() -> Vec<(String, PortGraph)> {
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
        .map(|kind| (format!("{kind:?}"), PortGraph::generate(kind).unwrap()))
        .collect()
}

pub fn rooted_at(root: Node, k: u32) -> Vec<(RobotId, Node)> {
    (1..=k).map(|id| (id, root)).collect()
}
