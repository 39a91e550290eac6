//! Multi-agent S5 Kripke structures.
//!
//! A model consists of a finite state set, a valuation of primitive
//! propositions, and one partition of the states per agent. An agent knows a
//! formula at a state when the formula holds throughout the agent's block
//! containing that state. On top of this the crate provides:
//!
//! - a parser, printer, and evaluator for the modal language
//!   ([`formula`], [`semantics`]),
//! - the iterated partition refinement that groups states with the same
//!   epistemic theory, with several interchangeable engines ([`refinement`]),
//! - quotient (minimized) models, depth-bounded state signatures, and
//!   distinguishing-formula synthesis ([`refinement`]),
//! - cells (common-knowledge components), fanout reports, good subsets, and
//!   the exclusion-free check ([`epistemic`]),
//! - generators for example and benchmark models ([`scenarios`]).

pub mod epistemic;
mod error;
pub mod formula;
pub mod model;
pub mod refinement;
pub mod scenarios;
pub mod semantics;

pub use error::{Error, Result};
pub use formula::Formula;
pub use model::{KripkeModel, StateSet, Violation};
pub use refinement::{Partition, QuotientModel, RefinementTrace};
