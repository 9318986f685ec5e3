#![allow(dead_code)]

use dynrisk::risk::{Component, PenaltyVariable};
use dynrisk::{DualRep, ExtendedReal, Measure, RandomVariable, ScenarioLattice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Tree with 1 to `max_periods` periods, up to `max_branching` children per
/// node and at most `max_leaves` leaves.
pub fn lattice(rng: &mut ChaCha8Rng, max_periods: usize, max_branching: usize, max_leaves: usize) -> ScenarioLattice {
    loop {
        let periods = rng.gen_range(1..=max_periods);
        let times = (0..=periods).map(|t| t as f64).collect();
        let l = ScenarioLattice::from_branching(times, 1, 10_000, |_, _| {
            let k = rng.gen_range(1..=max_branching);
            (0..k).map(|j| vec![j as f64 - 1.0 + rng.gen_range(-0.2..0.2)]).collect()
        })
        .unwrap();
        if l.len_at(l.terminal()) <= max_leaves {
            return l;
        }
    }
}

/// Random kernels; with `allow_zero` some weights vanish.
pub fn measure(rng: &mut ChaCha8Rng, lattice: &ScenarioLattice, allow_zero: bool) -> Measure {
    Measure::from_fn(lattice, |_, n| loop {
        let w: Vec<f64> = (0..n)
            .map(|_| if allow_zero && rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.05..1.0) })
            .collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            break w.iter().map(|v| v / total).collect();
        }
    })
    .unwrap()
}

pub fn variable(rng: &mut ChaCha8Rng, lattice: &ScenarioLattice, t: usize) -> RandomVariable {
    RandomVariable::from_fn(lattice, t, |_, _| rng.gen_range(-3.0..3.0)).unwrap()
}

/// `k` components with penalties in `[0, 1)` (all zero when `sublinear`).
pub fn dual_rep(rng: &mut ChaCha8Rng, lattice: &ScenarioLattice, s: usize, t: usize, k: usize, sublinear: bool) -> DualRep {
    let components = (0..k)
        .map(|_| Component {
            measure: measure(rng, lattice, false),
            penalty: PenaltyVariable {
                time: s,
                values: (0..lattice.len_at(s))
                    .map(|_| ExtendedReal::Finite(if sublinear { 0.0 } else { rng.gen_range(0.0..1.0) }))
                    .collect(),
            },
        })
        .collect();
    DualRep::from_components(lattice, s, t, components).unwrap()
}
