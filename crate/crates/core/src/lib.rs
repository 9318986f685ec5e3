//! Dynamic risk measures on finite scenario lattices.
//!
//! The crate covers capacities and reference measures on a scenario tree,
//! conditional convex risk measures in dual form with minimal penalties,
//! time-consistent dynamics generated by one-step data, pasting and
//! rectangular families, G-expectation pricing under volatility bands, and
//! the damped Skorokhod metrics on step paths.

pub mod dynamics;
pub mod error;
pub mod fixtures;
pub mod gexp;
pub mod lattice;
mod lp;
pub mod measures;
pub mod risk;
pub mod skorokhod;
pub mod stability;

pub use error::{Error, Result};
pub use lattice::{NodeRef, RandomVariable, ScenarioLattice, StoppingTime};
pub use measures::{Measure, MeasureFamily};
pub use risk::{ConditionalRisk, DualRep, ExtendedReal};
