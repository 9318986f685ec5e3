mod common;

use dynrisk::gexp::{linear_price, robust_lattice_price, robust_lattice_price_lower, GridSpec, VolatilityBand};
use dynrisk::skorokhod::{
    alpha_inv, alpha_map, concat_paths, dhat_distance, dm_distance, project_path, split_path, transform_path, Domain,
    PiecewiseLinearPath, StepPath,
};
use proptest::prelude::*;
use rand::Rng;

fn grid() -> GridSpec {
    GridSpec {
        dt: 0.01,
        h: GridSpec::cfl_step(0.01, 0.3, 1.25),
        levels: 50,
        maturity: 0.5,
    }
}

#[test]
fn convex_and_concave_payoffs_use_band_endpoints() {
    let band = VolatilityBand::constant(0.15, 0.3).unwrap();
    let g = grid();
    let variance = |s: f64| move |_: usize, _: i64| s * s * 0.01;
    let convex = |x: f64| (x - 0.05).max(0.0) + 0.5 * x * x;
    let ask = robust_lattice_price(&convex, &band, &g).unwrap();
    let high = linear_price(&convex, &variance(0.3), &g).unwrap();
    assert!((ask.value() - high.value()).abs() <= 1e-12);
    let concave = |x: f64| -x.abs();
    let ask = robust_lattice_price(&concave, &band, &g).unwrap();
    let low = linear_price(&concave, &variance(0.15), &g).unwrap();
    assert!((ask.value() - low.value()).abs() <= 1e-12);
    let bid = robust_lattice_price_lower(&concave, &band, &g).unwrap();
    let high = linear_price(&concave, &variance(0.3), &g).unwrap();
    assert!((bid.value() - high.value()).abs() <= 1e-12);
}

#[test]
fn nonnegative_factor_at_a_node() {
    // On the exact tree, scaling the payoff by f >= 0 scales every value.
    let band = VolatilityBand::constant(0.1, 0.2).unwrap();
    let g = grid();
    let payoff = |x: f64| (x - 0.02).max(0.0) - 0.3 * x;
    let base = robust_lattice_price(&payoff, &band, &g).unwrap();
    let scaled = robust_lattice_price(&|x| 2.5 * payoff(x), &band, &g).unwrap();
    for (a, b) in scaled.rows.iter().zip(&base.rows) {
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - 2.5 * v).abs() <= 1e-12);
        }
    }
}

/// A path whose time-changed jumps are all at least 0.6 apart and whose
/// counterparts differ by a shift below 0.05, so every optimum aligns jumps.
fn aligned_family(rng: &mut rand_chacha::ChaCha8Rng) -> Vec<StepPath> {
    let n = rng.gen_range(1..=3);
    let base: Vec<(f64, f64)> = (0..n).map(|k| (0.5 + 0.8 * k as f64, rng.gen_range(0.5..2.0) * if k % 2 == 0 { 1.0 } else { -1.0 })).collect();
    (0..3)
        .map(|_| {
            let shift = rng.gen_range(-0.05..0.05);
            let jumps: Vec<(f64, f64)> = base.iter().map(|&(t, v)| (t + shift, v)).collect();
            StepPath::scalar(Domain::Ray, &jumps).unwrap()
        })
        .collect()
}

fn dyadic_path(rng: &mut rand_chacha::ChaCha8Rng) -> PiecewiseLinearPath {
    let mut pts = vec![(0.0, 0.0)];
    let mut u = 0.0;
    for _ in 0..rng.gen_range(1..8) {
        u += (1u32 << rng.gen_range(0..4)) as f64 / 4.0;
        pts.push((u, rng.gen_range(-64..64) as f64 / 16.0));
    }
    PiecewiseLinearPath::new(pts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn alpha_maps_are_inverse(t in 0.1f64..10.0, frac in 0.0f64..(1.0 - 1e-6)) {
        let u = frac * t;
        let v = alpha_map(u, t).unwrap();
        prop_assert!((alpha_inv(v, t).unwrap() - u).abs() <= 1e-12 * t.max(1.0));
    }

    #[test]
    fn transform_round_trip(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let t = rng.gen_range(0.5..3.0);
        let n = rng.gen_range(0..6);
        let mut times: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..t * 0.99)).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let jumps: Vec<(f64, f64)> = times.iter().map(|&u| (u, rng.gen_range(-1.0..1.0))).collect();
        let x = StepPath::scalar(Domain::HalfOpen { t }, &jumps).unwrap();
        let back = dynrisk::skorokhod::inverse_transform_path(&transform_path(&x, t).unwrap(), t).unwrap();
        for (a, b) in x.jumps().iter().zip(back.jumps()) {
            prop_assert!((a.time - b.time).abs() <= 1e-12);
            prop_assert_eq!(&a.value, &b.value);
        }
    }

    #[test]
    fn triangle_inequality_on_aligned_paths(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let ps = aligned_family(&mut rng);
        for m in 1..=4 {
            let d = |a: usize, b: usize| dm_distance(&ps[a], &ps[b], m).unwrap().value;
            prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
            prop_assert!(d(0, 1) == d(1, 0));
        }
    }

    #[test]
    fn split_and_concat_are_inverse(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let x = dyadic_path(&mut rng);
        let t = rng.gen_range(1..12) as f64 / 4.0;
        let (a, b) = split_path(&x, t).unwrap();
        prop_assert_eq!(b.value_at(t), 0.0);
        let joined = concat_paths(&a, &b).unwrap();
        prop_assert!(joined.same_path(&x));
        let (a2, b2) = split_path(&joined, t).unwrap();
        prop_assert!(a2.same_path(&a) && b2.same_path(&b));
    }

    #[test]
    fn sup_norm_survives_projection(seed in any::<u64>()) {
        // For f(x) = |x(u)| at a fixed u < t, f agrees on a path and on its
        // projection, so sampled sup-norms coincide.
        let mut rng = common::rng(seed);
        let t = 1.0;
        let u = rng.gen_range(0.0..t);
        let paths: Vec<StepPath> = (0..20)
            .map(|_| {
                let a = rng.gen_range(0.01..2.0);
                StepPath::indicator(Domain::Ray, a, rng.gen_range(-2.0..2.0)).unwrap()
            })
            .collect();
        let f = |p: &StepPath| p.value_at(u)[0].abs();
        let full = paths.iter().map(f).fold(0.0, f64::max);
        let projected = paths.iter().map(|p| f(&project_path(p, t).unwrap())).fold(0.0, f64::max);
        prop_assert_eq!(full, projected);
    }

    #[test]
    fn dhat_identity(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(0..5);
        let mut times: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let jumps: Vec<(f64, f64)> = times.iter().map(|&u| (u, rng.gen_range(-1.0..1.0))).collect();
        let x = StepPath::scalar(Domain::HalfOpen { t: 1.0 }, &jumps).unwrap();
        prop_assert_eq!(dhat_distance(&x, &x, 1.0, 12).unwrap().value, 0.0);
    }
}
