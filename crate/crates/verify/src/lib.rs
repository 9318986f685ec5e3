//! Verification support for `dynrisk`: seeded random fixtures, independent
//! oracles and the acceptance criteria.
//!
//! Each criterion in [`criteria`] returns a [`CriterionResult`] listing the
//! metrics it checked and the tolerance pinned for each one.

pub mod criteria;
pub mod oracles;
pub mod random;

pub use criteria::{run_all, Bound, CriterionResult, Metric};
