mod common;

use dynrisk::dynamics::{build_dynamic, check_recursion_dynamic, OneStepEntry, OneStepStructure};
use dynrisk::stability::{enumerate_selections, is_stable, rectangular_hull, robust_evaluate, RectangularFamily};
use dynrisk::{ExtendedReal, RandomVariable, StoppingTime};
use proptest::prelude::*;
use rand::Rng;

fn structure(rng: &mut rand_chacha::ChaCha8Rng, l: &dynrisk::ScenarioLattice, zero_min: bool) -> OneStepStructure {
    OneStepStructure::from_fn(l, |n| {
        let ch = l.children(n).len();
        let k = rng.gen_range(1..=3);
        (0..k)
            .map(|j| {
                let raw: Vec<f64> = (0..ch).map(|_| rng.gen_range(0.05..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let pen = if zero_min && j == 0 { 0.0 } else { rng.gen_range(0.0..0.5) };
                OneStepEntry::new(raw.iter().map(|v| v / total).collect(), ExtendedReal::Finite(pen))
            })
            .collect()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generated_dynamics_are_time_consistent(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let l = common::lattice(&mut rng, 3, 3, 27);
        let d = build_dynamic(&l, structure(&mut rng, &l, false)).unwrap();
        let xs: Vec<RandomVariable> = (0..10).map(|_| common::variable(&mut rng, &l, l.terminal())).collect();
        prop_assert!(check_recursion_dynamic(&d, &xs).unwrap().max_violation <= 1e-9);
    }

    #[test]
    fn normalization_propagates(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let l = common::lattice(&mut rng, 3, 3, 27);
        let d = build_dynamic(&l, structure(&mut rng, &l, true)).unwrap();
        prop_assert!(d.is_normalized());
        let zero = RandomVariable::constant(&l, l.terminal(), 0.0).unwrap();
        for s in 0..=l.terminal() {
            prop_assert!(d.evaluate(s, l.terminal(), &zero).unwrap().values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn bid_below_ask(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let l = common::lattice(&mut rng, 3, 3, 27);
        let rf = RectangularFamily::from_fn(&l, |_, ch| {
            (0..rng.gen_range(1..=3))
                .map(|_| {
                    let raw: Vec<f64> = (0..ch).map(|_| rng.gen_range(0.0..1.0) + 1e-3).collect();
                    let total: f64 = raw.iter().sum();
                    raw.iter().map(|v| v / total).collect()
                })
                .collect()
        })
        .unwrap();
        let x = common::variable(&mut rng, &l, l.terminal());
        for s in 0..=l.terminal() {
            let ask = robust_evaluate(&l, &rf, &x.neg(), s).unwrap();
            let bid = robust_evaluate(&l, &rf, &x, s).unwrap().neg();
            prop_assert!(bid.values().iter().zip(ask.values()).all(|(b, a)| b <= a));
        }
    }

    #[test]
    fn hull_selections_are_stable(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let l = common::lattice(&mut rng, 2, 2, 4);
        let fam: Vec<_> = (0..rng.gen_range(1..=3)).map(|_| common::measure(&mut rng, &l, false)).collect();
        let hull = rectangular_hull(&l, &fam).unwrap();
        let sel = enumerate_selections(&l, &hull, 4096).unwrap();
        let taus = StoppingTime::enumerate(&l, 4096).unwrap();
        prop_assert!(is_stable(&l, &sel, &taus).unwrap().stable);
    }
}
