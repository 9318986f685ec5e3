mod common;

use dynrisk::lattice::{coordinate_process, lift};
use dynrisk::measures::{capacity, charged_nodes, mixture, reference_measure, regular_conditional_expectation};
use dynrisk::{MeasureFamily, RandomVariable, StoppingTime};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lift_is_linear_monotone_and_composes(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let l = common::lattice(&mut rng, 3, 3, 27);
        let big_t = l.terminal();
        let s = rng.gen_range(0..=big_t);
        let r = rng.gen_range(s..=big_t);
        let x = common::variable(&mut rng, &l, s);
        let y = common::variable(&mut rng, &l, s);
        let a = rng.gen_range(-2.0..2.0);
        let combo = x.scale(a).add(&y).unwrap();
        let lhs = lift(&l, &combo, big_t).unwrap();
        let rhs = lift(&l, &x, big_t).unwrap().scale(a).add(&lift(&l, &y, big_t).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
        let twice = lift(&l, &lift(&l, &x, r).unwrap(), big_t).unwrap();
        prop_assert_eq!(twice, lift(&l, &x, big_t).unwrap());
        let bigger = x.map(|v| v + 1.0);
        let (lx, lb) = (lift(&l, &x, big_t).unwrap(), lift(&l, &bigger, big_t).unwrap());
        prop_assert!(lx.values().iter().zip(lb.values()).all(|(a, b)| a <= b));
    }

    #[test]
    fn coordinate_process_is_adapted(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let l = common::lattice(&mut rng, 3, 3, 27);
        for s in 0..=l.terminal() {
            let b = coordinate_process(&l, s).unwrap().remove(0);
            let at_s = RandomVariable::from_fn(&l, s, |n, _| b.get(n.index)).unwrap();
            prop_assert_eq!(&b, &at_s);
            for n in l.nodes_at(s) {
                prop_assert_eq!(b.get(n.index), l.position(n)[0]);
            }
        }
    }

    #[test]
    fn stop_set_probabilities_sum_to_one(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let l = common::lattice(&mut rng, 2, 3, 9);
        let q = common::measure(&mut rng, &l, true);
        let probs = q.node_probabilities(&l);
        for tau in StoppingTime::enumerate(&l, 4096).unwrap() {
            let total: f64 = tau.nodes().iter().map(|n| probs[n.time][n.index]).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn tower_property(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let l = common::lattice(&mut rng, 3, 3, 27);
        let big_t = l.terminal();
        let q = common::measure(&mut rng, &l, true);
        let x = common::variable(&mut rng, &l, big_t);
        let s = rng.gen_range(0..=big_t);
        let r = rng.gen_range(0..=s);
        let direct = regular_conditional_expectation(&l, &x, &q, r).unwrap();
        let inner = regular_conditional_expectation(&l, &x, &q, s).unwrap();
        let nested = regular_conditional_expectation(&l, &inner, &q, r).unwrap();
        for (a, b) in direct.values().iter().zip(nested.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn capacity_is_a_seminorm(seed in any::<u64>(), p in prop::sample::select(vec![1.0, 1.5, 2.0, 4.0])) {
        let mut rng = common::rng(seed);
        let l = common::lattice(&mut rng, 3, 3, 27);
        let big_t = l.terminal();
        let k = rng.gen_range(1..=4);
        let fam = MeasureFamily::new((0..k).map(|_| common::measure(&mut rng, &l, true)).collect(), p).unwrap();
        let x = common::variable(&mut rng, &l, big_t);
        let y = common::variable(&mut rng, &l, big_t);
        let lam = rng.gen_range(-4.0..4.0);
        let c = |v: &RandomVariable| capacity(&l, v, &fam).unwrap();
        prop_assert!((c(&x.scale(lam)) - lam.abs() * c(&x)).abs() <= 1e-12 * c(&x).max(1.0));
        prop_assert!(c(&x.add(&y).unwrap()) <= c(&x) + c(&y) + 1e-12);
        let charged = charged_nodes(&l, &reference_measure(&l, &fam).unwrap().measure, big_t);
        let off = RandomVariable::from_fn(&l, big_t, |n, _| if charged[n.index] { 0.0 } else { 5.0 }).unwrap();
        prop_assert_eq!(c(&off), 0.0);
    }

    #[test]
    fn convex_combinations_are_dominated_at_p_one(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let l = common::lattice(&mut rng, 3, 3, 27);
        let big_t = l.terminal();
        let k = rng.gen_range(1..=4);
        let members: Vec<_> = (0..k).map(|_| common::measure(&mut rng, &l, true)).collect();
        let fam = MeasureFamily::new(members.clone(), 1.0).unwrap();
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let mix = mixture(&l, &members, &w).unwrap();
        let x = common::variable(&mut rng, &l, big_t);
        let e = regular_conditional_expectation(&l, &x.abs(), &mix, 0).unwrap().get(0);
        prop_assert!(e <= capacity(&l, &x, &fam).unwrap() + 1e-12);
    }
}
