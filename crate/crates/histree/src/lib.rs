//! History trees for anonymous dynamic networks.
//!
//! An anonymous network is one whose agents have no identifiers: every agent
//! runs the same deterministic algorithm, and in each synchronous round the
//! communication topology may change arbitrarily (subject to connectivity).
//! A *history tree* captures everything such agents can ever learn. Its
//! level `t` has one node per class of agents that are still
//! indistinguishable after `t` rounds; black edges refine classes from one
//! round to the next, and red multi-edges record how many messages one class
//! received from another.
//!
//! Each agent maintains a *view*: the finite fragment of the history tree it
//! has personally observed, with a distinguished bottom node marking its own
//! class. Views support two fundamental operations, [`View::update`]
//! (merge incoming views and grow one level) and [`View::chop`] (forget the
//! oldest level), plus the counting machinery ([`counting`]) that extracts
//! exact input frequencies from a stabilized view.
//!
//! On top of the core structure sit:
//!
//! - [`agent`]: four single-agent algorithms (a non-terminating baseline,
//!   a known-`n` stabilizing counter, a self-stabilizing variant, and a
//!   finite-state variant that freezes its own view growth),
//! - [`netsim`]: a deterministic round-synchronous network simulator with
//!   dynamic topologies, fault injection, and an independent
//!   partition-refinement oracle,
//! - [`verify`]: named experiment suites that check the structural lemmas
//!   and stabilization bounds end to end.

pub mod agent;
pub mod counting;
pub mod label;
pub mod netsim;
pub mod verify;
pub mod view;

pub use label::InputLabel;
pub use view::{Mult, NodeId, View, ViewError, ViewKind};
