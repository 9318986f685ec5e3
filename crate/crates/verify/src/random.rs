//! Seeded random fixtures.

use dynrisk::dynamics::{OneStepEntry, OneStepStructure};
use dynrisk::risk::{Component, PenaltyVariable};
use dynrisk::skorokhod::{Domain, Jump, StepPath};
use dynrisk::stability::RectangularFamily;
use dynrisk::{DualRep, ExtendedReal, Measure, NodeRef, RandomVariable, ScenarioLattice};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub type FixtureRng = ChaCha8Rng;

pub fn rng(seed: u64) -> FixtureRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape limits for [`lattice`].
#[derive(Debug, Clone, Copy)]
pub struct LatticeShape {
    pub min_periods: usize,
    pub max_periods: usize,
    pub max_branching: usize,
    pub max_leaves: usize,
}

/// Random one-dimensional tree with distinct increments at every node.
pub fn lattice(rng: &mut FixtureRng, shape: LatticeShape) -> ScenarioLattice {
    loop {
        let periods = rng.gen_range(shape.min_periods..=shape.max_periods);
        let times: Vec<f64> = (0..=periods).map(|t| t as f64).collect();
        let built = ScenarioLattice::from_branching(times, 1, 10_000, |_, _| {
            let k = rng.gen_range(1..=shape.max_branching);
            let mut incs: Vec<f64> = (0..k).map(|j| j as f64 - (k as f64 - 1.0) / 2.0).collect();
            incs.shuffle(rng);
            incs.into_iter().map(|v| vec![v + rng.gen_range(-0.25..0.25)]).collect()
        })
        .expect("valid random lattice");
        let leaves = built.len_at(built.terminal());
        if leaves <= shape.max_leaves && leaves > 1 {
            return built;
        }
    }
}

/// Probability vector of length `n`. With `floor > 0` every weight is at
/// least `floor / n` before normalization; with `floor == 0` some weights
/// may vanish.
pub fn kernel(rng: &mut FixtureRng, n: usize, floor: f64) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if floor == 0.0 && n > 1 && rng.gen_bool(0.25) {
                    0.0
                } else {
                    floor + rng.gen_range(0.0..1.0)
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return w.iter().map(|v| v / total).collect();
        }
    }
}

pub fn measure(rng: &mut FixtureRng, lattice: &ScenarioLattice, floor: f64) -> Measure {
    Measure::from_fn(lattice, |_, n| kernel(rng, n, floor)).expect("valid kernels")
}

/// Values uniform in `[-scale, scale]`.
pub fn variable(rng: &mut FixtureRng, lattice: &ScenarioLattice, t: usize, scale: f64) -> RandomVariable {
    RandomVariable::from_fn(lattice, t, |_, _| rng.gen_range(-scale..=scale)).expect("valid time")
}

/// Dual representation with `k` random measures and finite penalties in
/// `[0, 1)`; each penalty is zero with probability 0.3.
pub fn dual_rep(rng: &mut FixtureRng, lattice: &ScenarioLattice, s: usize, t: usize, k: usize) -> DualRep {
    let components = (0..k)
        .map(|_| {
            let m = measure(rng, lattice, 0.0);
            let values = (0..lattice.len_at(s))
                .map(|_| {
                    if rng.gen_bool(0.3) {
                        ExtendedReal::Finite(0.0)
                    } else {
                        ExtendedReal::Finite(rng.gen_range(0.0..1.0))
                    }
                })
                .collect();
            Component {
                measure: m,
                penalty: PenaltyVariable { time: s, values },
            }
        })
        .collect();
    DualRep::from_components(lattice, s, t, components).expect("finite penalties everywhere")
}

/// One-step structure with up to `max_entries` strictly positive kernels per
/// node. When `zero` is given its kernel comes first with penalty 0 and the
/// others carry positive penalties.
pub fn structure(
    rng: &mut FixtureRng,
    lattice: &ScenarioLattice,
    max_entries: usize,
    zero: Option<&Measure>,
) -> OneStepStructure {
    OneStepStructure::from_fn(lattice, |n: NodeRef| {
        let ch = lattice.children(n).len();
        let count = rng.gen_range(1..=max_entries);
        let mut out = Vec::with_capacity(count + 1);
        if let Some(p) = zero {
            out.push(OneStepEntry::new(p.kernel(n).to_vec(), ExtendedReal::Finite(0.0)));
        }
        for j in 0..count {
            let pen = if zero.is_none() && j == 0 {
                rng.gen_range(0.0..0.2)
            } else {
                rng.gen_range(0.01..0.5)
            };
            out.push(OneStepEntry::new(kernel(rng, ch, 0.05), ExtendedReal::Finite(pen)));
        }
        out
    })
    .expect("valid structure")
}

/// Rectangular family with up to `max_kernels` kernels per node.
pub fn rectangular(rng: &mut FixtureRng, lattice: &ScenarioLattice, max_kernels: usize) -> RectangularFamily {
    RectangularFamily::from_fn(lattice, |_, ch| {
        let count = rng.gen_range(1..=max_kernels);
        (0..count).map(|_| kernel(rng, ch, 0.0)).collect()
    })
    .expect("valid family")
}

/// One-dimensional step path with up to `max_jumps` jumps inside the domain.
pub fn step_path(rng: &mut FixtureRng, domain: Domain, max_jumps: usize) -> StepPath {
    let end = match domain {
        Domain::Ray => 6.0,
        Domain::HalfOpen { t } => t,
    };
    let n = rng.gen_range(0..=max_jumps);
    let mut times: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..end * 0.99)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let jumps = times
        .into_iter()
        .map(|time| Jump {
            time,
            value: vec![rng.gen_range(-2.0..2.0)],
        })
        .collect();
    StepPath::new(domain, 1, jumps).expect("valid path")
}
