//! Relativistic summoning tasks in Minkowski spacetime.
//!
//! A task fixes a start point where an unknown state is handed over, input
//! points where integer calls arrive, and return points one of which must
//! produce the state, as a function of the calls. This crate decides whether
//! a task can be solved with a copyable classical token, synthesizes quantum
//! protocols (secret sharing plus teleportation chains) for the unconstrained
//! ones, and simulates those protocols exactly while auditing that no
//! classical datum is used outside its light cone.
//!
//! ```
//! use summoning::{classically_possible, scenarios};
//!
//! let task = scenarios::g1();
//! assert!(classically_possible(&task).unwrap().possible);
//! ```

pub mod broadcast;
pub mod classical_sim;
pub mod cli;
pub mod feasibility;
pub mod index;
pub mod protocol;
pub mod qss;
pub mod qudit_sim;
pub mod routing;
pub mod scenarios;
pub mod spacetime;
pub mod task;
pub mod trace;

pub use feasibility::{classically_possible, determinize, FeasibilityVerdict};
pub use protocol::{run, run_exhaustive, synthesize, ProtocolPlan, SynthesisOptions};
pub use spacetime::{causally_precedes, CausalOrder, SpacetimePoint};
pub use task::{Assignment, SummoningTask, TaskDocument};
