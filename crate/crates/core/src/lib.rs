//! Deterministic simulation of mobile robots dispersing over anonymous
//! port-labelled graphs while some of them crash.
//!
//! * [`graph`] builds and validates port-labelled graphs.
//! * [`engine`] runs synchronous rounds and records traces.
//! * [`rooted`] and [`arbitrary`] are the two dispersion protocols.
//! * [`oracle`] checks results against reference answers and bounds.
//!
//! The [`guide`] walks through each of these with runnable examples.
//!
//! ```
//! use dispersim::engine::{run, CrashSchedule};
//! use dispersim::graph::{GraphKind, PortGraph};
//! use dispersim::rooted::Rooted;
//!
//! let g = PortGraph::generate(GraphKind::Star { n: 5 }).unwrap();
//! let placement: Vec<_> = (1..=5).map(|id| (id, 1)).collect();
//! let crash = CrashSchedule::new([(3, 10)]).unwrap();
//! let result = run(&g, &placement, Rooted::new(5, 4), crash, 175).unwrap();
//! assert!(result.dispersed);
//! assert_eq!(result.summary.alive_count, 4);
//! ```

pub mod arbitrary;
pub mod dfs;
pub mod engine;
pub mod graph;
pub mod oracle;
pub mod rooted;
pub mod trace;

/// Concept chapters, shared with the mdbook in `book/`.
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    pub mod graphs {}
    #[doc = include_str!("../../../book/src/engine.md")]
    pub mod engine {}
    #[doc = include_str!("../../../book/src/rooted.md")]
    pub mod rooted {}
    #[doc = include_str!("../../../book/src/arbitrary.md")]
    pub mod arbitrary {}
    #[doc = include_str!("../../../book/src/verification.md")]
    pub mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
