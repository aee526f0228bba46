//! Unsplittable flow on a path (UFP) via maze pairs.
//!
//! The crate provides:
//! - the problem model with exact rational arithmetic, preprocessing, and
//!   a brute-force optimum oracle ([`model`]);
//! - m-tasks, maze pairs, and the k-thinness / weak-feasibility
//!   predicates ([`maze`]);
//! - the segment-cover construction that turns a feasible solution into a
//!   thin maze pair with bounded weight loss ([`construct`]);
//! - the dynamic program computing the maximum-weight weakly feasible
//!   k-thin maze pair ([`dp`]);
//! - brute-force oracles and the property-check suite ([`oracle`]);
//! - instance generators, rendering, and a benchmark harness
//!   ([`gen`], [`render`], [`bench`]).

pub mod bench;
pub mod construct;
pub mod dp;
pub mod gen;
pub mod maze;
pub mod model;
pub mod oracle;
pub mod rational;
pub mod render;
mod scaled;

pub use maze::{MazePair, MTask, MTaskKind, MTaskSet};
pub use model::{Instance, Task, TaskId};
pub use rational::Rat;
