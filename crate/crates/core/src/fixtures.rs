//! Built-in fixtures.
//!
//! `FIX-A` is the two-period binary tree on times `(0, 1, 2)` with `±1`
//! increments. Nodes are numbered up-first: time 1 holds `[u, d]`, time 2
//! holds `[uu, ud, du, dd]`. `Q1` moves up with probability 0.5 everywhere,
//! `Q2` with probability 0.6.

use crate::dynamics::{OneStepEntry, OneStepStructure};
use crate::lattice::ScenarioLattice;
use crate::measures::{Measure, MeasureFamily};
use crate::risk::ExtendedReal;

pub const FIX_A: &str = "FIX-A";

pub fn fix_a_lattice() -> ScenarioLattice {
    ScenarioLattice::uniform(vec![0.0, 1.0, 2.0], &[vec![1.0], vec![-1.0]]).expect("valid fixture")
}

/// Measure moving up with probability `p` at every node of a binary lattice.
pub fn binary_measure(lattice: &ScenarioLattice, p: f64) -> Measure {
    Measure::from_fn(lattice, |_, n| {
        assert_eq!(n, 2, "binary lattice expected");
        vec![p, 1.0 - p]
    })
    .expect("valid kernel")
}

pub fn fix_a_q1() -> Measure {
    binary_measure(&fix_a_lattice(), 0.5)
}

pub fn fix_a_q2() -> Measure {
    binary_measure(&fix_a_lattice(), 0.6)
}

/// `{Q1, Q2}` with exponent `p`.
pub fn fix_a_family(p: f64) -> MeasureFamily {
    MeasureFamily::new(vec![fix_a_q1(), fix_a_q2()], p).expect("valid family")
}

/// Every node offers the 0.5 and 0.6 kernels, with the given penalties.
pub fn fix_a_structure(penalty_half: f64, penalty_six: f64) -> OneStepStructure {
    let l = fix_a_lattice();
    OneStepStructure::from_fn(&l, |_| {
        vec![
            OneStepEntry::new(vec![0.5, 0.5], ExtendedReal::Finite(penalty_half)),
            OneStepEntry::new(vec![0.6, 0.4], ExtendedReal::Finite(penalty_six)),
        ]
    })
    .expect("valid structure")
}

/// Looks up a built-in lattice by name.
pub fn lattice_by_name(name: &str) -> Option<ScenarioLattice> {
    match name {
        FIX_A => Some(fix_a_lattice()),
        _ => None,
    }
}
