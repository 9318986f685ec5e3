//! The acceptance criteria, each run from a seed and reported as a list of
//! metrics checked against pinned tolerances.

use std::time::{Duration, Instant};

use dynrisk::dynamics::{
    acceptance_decompose, acceptance_sum_check, build_dynamic, check_cocycle, check_recursion, check_recursion_dynamic,
    expand_dual, supermartingale_check, DynamicRM, DEFAULT_SELECTION_CAP,
};
use dynrisk::fixtures::{binary_measure, fix_a_lattice, fix_a_q1, fix_a_q2};
use dynrisk::gexp::{bid_ask, bsb_solve, linear_price, robust_lattice_price, GridSpec, Surface, VolatilityBand};
use dynrisk::lattice::lift;
use dynrisk::measures::{capacity, charged_nodes, dual_witness, mixture, reference_measure};
use dynrisk::risk::minimal_penalty;
use dynrisk::skorokhod::{dhat_distance, dm_distance, j1_distance, Domain, StepPath};
use dynrisk::stability::{enumerate_selections, is_stable, paste, rectangular_hull, robust_evaluate};
use dynrisk::{DualRep, ExtendedReal, Measure, MeasureFamily, RandomVariable, ScenarioLattice, StoppingTime};
use rand::Rng;
use serde::Serialize;

use crate::oracles;
use crate::random::{self, FixtureRng, LatticeShape};

pub mod tolerance {
    /// Minimal penalty against the primal oracle, per node.
    pub const PENALTY: f64 = 1e-6;
    /// Recursion defect of a generated dynamic risk measure.
    pub const RECURSION: f64 = 1e-9;
    /// Cocycle residual, mediated by linear programs.
    pub const COCYCLE: f64 = 1e-6;
    /// A perturbation counts as detected above this violation.
    pub const DETECTION: f64 = 1e-3;
    /// Smallest perturbation magnitude.
    pub const PERTURBATION: f64 = 0.01;
    /// Reconstruction `X = Z + Y` in floating point.
    pub const RECONSTRUCTION: f64 = 1e-12;
    /// Robust recursion against enumeration, and homogeneity.
    pub const ROBUST: f64 = 1e-12;
    pub const GEXP_SQUARE: f64 = 2e-3;
    pub const GEXP_SQUARE_LOWER: f64 = 1e-3;
    pub const GEXP_CALL: f64 = 1e-3;
    pub const GEXP_CROSS: f64 = 1e-3;
    pub const GEXP_INVARIANTS: f64 = 1e-9;
    pub const DOMINATION: f64 = 1e-9;
    pub const SUPERMARTINGALE: f64 = 1e-9;
    pub const CAPACITY: f64 = 1e-9;
    pub const SKOROKHOD: f64 = 1e-6;
    /// Undamped J1 distance of the projected sequence stays at least this.
    pub const J1_FLOOR: f64 = 0.5;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub metrics: Vec<Metric>,
    pub notes: Vec<String>,
    pub time_limit_secs: f64,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let failed: Vec<&str> = self.metrics.iter().filter(|m| !m.passed).map(|m| m.name.as_str()).collect();
        format!(
            "{} criterion {}: {} ({:.2} s of {} s){}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.time_limit_secs,
            if failed.is_empty() {
                String::new()
            } else {
                format!(" failing: {}", failed.join(", "))
            }
        )
    }

    /// Largest ratio `value / tolerance` over upper-bound metrics.
    pub fn worst(&self) -> Option<&Metric> {
        self.metrics
            .iter()
            .filter(|m| m.bound == Bound::AtMost)
            .max_by(|a, b| a.value.total_cmp(&b.value))
    }
}

struct Recorder {
    metrics: Vec<Metric>,
    notes: Vec<String>,
}

impl Recorder {
    fn new() -> Self {
        Self {
            metrics: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, value: f64, bound: Bound, tolerance: f64) {
        let passed = match bound {
            Bound::AtMost => value <= tolerance,
            Bound::AtLeast => value >= tolerance,
            Bound::Above => value > tolerance,
        };
        self.metrics.push(Metric {
            name: name.to_string(),
            value,
            bound,
            tolerance,
            passed,
        });
    }

    fn at_most(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value, Bound::AtMost, tolerance);
    }

    fn at_least(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value, Bound::AtLeast, tolerance);
    }

    fn above(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value, Bound::Above, tolerance);
    }

    /// A count of failed checks, required to be zero.
    fn failures(&mut self, name: &str, count: usize) {
        self.at_most(name, count as f64, 0.0);
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn finish(self, id: u8, name: &'static str, limit: f64, start: Instant) -> CriterionResult {
        let elapsed = start.elapsed();
        let passed = !self.metrics.is_empty()
            && self.metrics.iter().all(|m| m.passed)
            && elapsed.as_secs_f64() < limit;
        CriterionResult {
            id,
            name,
            passed,
            metrics: self.metrics,
            notes: self.notes,
            time_limit_secs: limit,
            elapsed,
        }
    }
}

/// Tracks a running maximum and counts errors met along the way.
#[derive(Default)]
struct Worst {
    value: f64,
    errors: usize,
}

impl Worst {
    fn see(&mut self, v: f64) {
        if v.is_nan() {
            self.errors += 1;
        } else {
            self.value = self.value.max(v);
        }
    }
}

fn sub_seed(seed: u64, id: u64) -> FixtureRng {
    random::rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(id))
}

/// Copy of `m` whose kernels before time `s` are those of `reference`.
fn restricted(lattice: &ScenarioLattice, m: &Measure, reference: &Measure, s: usize) -> Measure {
    Measure::from_fn(lattice, |n, _| {
        if n.time < s {
            reference.kernel(n).to_vec()
        } else {
            m.kernel(n).to_vec()
        }
    })
    .expect("valid kernels")
}

pub fn minimal_penalty_conjugacy(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut rec = Recorder::new();
    let mut rng = sub_seed(seed, 1);
    let shape = LatticeShape {
        min_periods: 1,
        max_periods: 3,
        max_branching: 3,
        max_leaves: 8,
    };
    let mut gap = Worst::default();
    let (mut infinite_mismatch, mut zero_failures, mut nodes_checked, mut infinite_seen) = (0, 0, 0usize, 0usize);
    for _ in 0..50 {
        let l = random::lattice(&mut rng, shape);
        let big_t = l.terminal();
        let s = rng.gen_range(0..big_t);
        let t = rng.gen_range(s + 1..=big_t);
        let k = rng.gen_range(1..=4);
        let rep = random::dual_rep(&mut rng, &l, s, t, k);
        let members: Vec<Measure> = rep.components().iter().map(|c| c.measure.clone()).collect();
        let mut queries = members.clone();
        for _ in 0..2 {
            let w = random::kernel(&mut rng, k, 0.05);
            let mix = mixture(&l, &members, &w).expect("valid mixture");
            queries.push(restricted(&l, &mix, rep.reference(), s));
        }
        let free = random::measure(&mut rng, &l, 0.0);
        queries.push(restricted(&l, &free, rep.reference(), s));
        for (qi, q) in queries.iter().enumerate() {
            let pen = match minimal_penalty(&l, &rep, q) {
                Ok(p) => p,
                Err(e) => {
                    gap.errors += 1;
                    rec.note(format!("minimal_penalty failed: {e}"));
                    continue;
                }
            };
            for n in l.nodes_at(s) {
                nodes_checked += 1;
                let lp = pen.values[n.index];
                match (lp, oracles::brute_force_conjugate(&l, &rep, q, n)) {
                    (ExtendedReal::Finite(a), Some(b)) => gap.see((a - b).abs()),
                    (ExtendedReal::PlusInfinity, None) => infinite_seen += 1,
                    (a, b) => {
                        infinite_mismatch += 1;
                        rec.note(format!("node {n}: linear program {a}, oracle {b:?}"));
                    }
                }
                if qi < k && rep.components()[qi].penalty.values[n.index] == ExtendedReal::Finite(0.0) && lp != ExtendedReal::Finite(0.0) {
                    zero_failures += 1;
                }
            }
        }
    }
    rec.at_most("max |LP - oracle| per node", gap.value, tolerance::PENALTY);
    rec.failures("solver errors", gap.errors);
    rec.failures("finite/infinite disagreements", infinite_mismatch);
    rec.failures("zero-penalty members not exactly 0", zero_failures);
    rec.note(format!("{nodes_checked} node queries, {infinite_seen} infinite on both sides"));

    let fa = fix_a_lattice();
    let rep = DualRep::sublinear(&fa, 0, 2, vec![fix_a_q1(), fix_a_q2()]).expect("valid representation");
    let iid = minimal_penalty(&fa, &rep, &binary_measure(&fa, 0.9));
    let infinite = matches!(&iid, Ok(p) if p.values[0] == ExtendedReal::PlusInfinity);
    rec.failures("i.i.d. 0.9 query not +inf", usize::from(!infinite));
    rec.finish(1, "minimal penalty conjugacy", 30.0, start)
}

fn selection_count(d: &DynamicRM) -> u128 {
    let l = d.lattice();
    (0..l.terminal())
        .flat_map(|t| l.nodes_at(t))
        .map(|n| d.structure().entries(n).len() as u128)
        .product()
}

fn random_dynamic(rng: &mut FixtureRng) -> DynamicRM {
    let shape = LatticeShape {
        min_periods: 2,
        max_periods: 3,
        max_branching: 3,
        max_leaves: 9,
    };
    loop {
        let l = random::lattice(rng, shape);
        let st = random::structure(rng, &l, 3, None);
        let d = build_dynamic(&l, st).expect("valid dynamic");
        if selection_count(&d) <= 128 {
            return d;
        }
    }
}

/// Triples `r < s < t` of a lattice's time indices.
fn strict_triples(big_t: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for r in 0..=big_t {
        for s in r + 1..=big_t {
            for t in s + 1..=big_t {
                out.push((r, s, t));
            }
        }
    }
    out
}

pub fn time_consistency_equivalence(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut rec = Recorder::new();
    let mut rng = sub_seed(seed, 2);
    let rms: Vec<DynamicRM> = (0..20).map(|_| random_dynamic(&mut rng)).collect();

    let mut recursion = Worst::default();
    let mut cocycle = Worst::default();
    let mut indeterminate = 0;
    for d in &rms {
        let l = d.lattice();
        let xs: Vec<RandomVariable> = (0..100).map(|_| random::variable(&mut rng, l, l.terminal(), 2.0)).collect();
        match check_recursion_dynamic(d, &xs) {
            Ok(r) => recursion.see(r.max_violation),
            Err(_) => recursion.errors += 1,
        }
        for (r, s, t) in strict_triples(l.terminal()) {
            let reps = (
                expand_dual(d, r, t, DEFAULT_SELECTION_CAP),
                expand_dual(d, r, s, DEFAULT_SELECTION_CAP),
                expand_dual(d, s, t, DEFAULT_SELECTION_CAP),
            );
            let (Ok(rt), Ok(rs), Ok(st)) = reps else {
                cocycle.errors += 1;
                continue;
            };
            for c in rt.components() {
                match check_cocycle(l, &rt, &rs, &st, &c.measure) {
                    Ok(rep) => {
                        cocycle.see(rep.max_abs);
                        indeterminate += rep.indeterminate.len();
                    }
                    Err(_) => cocycle.errors += 1,
                }
            }
        }
    }
    rec.at_most("recursion violation over 100 X", recursion.value, tolerance::RECURSION);
    rec.at_most("cocycle residual over all selections", cocycle.value, tolerance::COCYCLE);
    rec.failures("errors in unperturbed checks", recursion.errors + cocycle.errors + indeterminate);

    // Same-sign perturbations of every component penalty at one node of the
    // direct representation rho_{r,t}.
    let mut weakest_recursion = f64::INFINITY;
    let mut weakest_cocycle = f64::INFINITY;
    let mut perturb_errors = 0;
    for d in &rms {
        let l = d.lattice();
        let triples = strict_triples(l.terminal());
        let (r, s, t) = triples[rng.gen_range(0..triples.len())];
        let (Ok(rt), Ok(rs), Ok(st)) = (
            expand_dual(d, r, t, DEFAULT_SELECTION_CAP),
            expand_dual(d, r, s, DEFAULT_SELECTION_CAP),
            expand_dual(d, s, t, DEFAULT_SELECTION_CAP),
        ) else {
            perturb_errors += 1;
            continue;
        };
        let node = rng.gen_range(0..l.len_at(r));
        let deltas: Vec<f64> = (0..rt.components().len())
            .map(|_| rng.gen_range(tolerance::PERTURBATION..=0.1))
            .collect();
        let floor = rt
            .components()
            .iter()
            .filter_map(|c| c.penalty.values[node].finite())
            .fold(f64::INFINITY, f64::min);
        let sign = if floor >= 0.1 && rng.gen_bool(0.5) { -1.0 } else { 1.0 };
        let bumped = rt.map_penalties(|k, i, a| {
            if i == node {
                a.plus(ExtendedReal::Finite(sign * deltas[k]))
            } else {
                a
            }
        });
        let xs: Vec<RandomVariable> = (0..100).map(|_| random::variable(&mut rng, l, t, 2.0)).collect();
        let (Ok(e_rs), Ok(e_st)) = (d.evaluator(r, s), d.evaluator(s, t)) else {
            perturb_errors += 1;
            continue;
        };
        match check_recursion(l, &bumped, &e_rs, &e_st, &xs) {
            Ok(rep) => weakest_recursion = weakest_recursion.min(rep.max_violation),
            Err(_) => perturb_errors += 1,
        }
        let mut best: f64 = 0.0;
        for c in rt.components() {
            match check_cocycle(l, &bumped, &rs, &st, &c.measure) {
                Ok(rep) => best = best.max(rep.max_abs),
                Err(_) => perturb_errors += 1,
            }
        }
        weakest_cocycle = weakest_cocycle.min(best);
    }
    rec.above("weakest recursion detection over 20 perturbations", weakest_recursion, tolerance::DETECTION);
    rec.above("weakest cocycle detection over 20 perturbations", weakest_cocycle, tolerance::DETECTION);
    rec.failures("errors in perturbed checks", perturb_errors);

    let mut recon = Worst::default();
    let mut membership_failures = 0;
    for i in 0..50 {
        let d = &rms[i % rms.len()];
        let l = d.lattice();
        let big_t = l.terminal();
        let s = rng.gen_range(0..=big_t);
        let Ok(full) = expand_dual(d, 0, big_t, DEFAULT_SELECTION_CAP) else {
            recon.errors += 1;
            continue;
        };
        let q = full.components()[rng.gen_range(0..full.components().len())].measure.clone();
        let x = random::variable(&mut rng, l, big_t, 2.0);
        let shift = d.evaluate(0, big_t, &x).expect("valid variable");
        let extra = rng.gen_range(0.0..0.5);
        let lifted = lift(l, &shift.map(|v| v + extra), big_t).expect("valid lift");
        let accepted = x.add(&lifted).expect("same shape");
        match acceptance_decompose(d, &accepted, 0, s, big_t, &q) {
            Ok(dec) => {
                recon.see(dec.reconstruction_error);
                if !(dec.y_accepted && dec.z_accepted) {
                    membership_failures += 1;
                }
                match acceptance_sum_check(d, &dec.z, &dec.y, 0, &q) {
                    Ok(sc) if sc.inputs_accepted && sc.sum_accepted => {}
                    _ => membership_failures += 1,
                }
            }
            Err(_) => recon.errors += 1,
        }
    }
    rec.at_most("decomposition reconstruction error", recon.value, tolerance::RECONSTRUCTION);
    rec.failures("decomposition membership failures", membership_failures + recon.errors);
    rec.finish(2, "time-consistency equivalence", 60.0, start)
}

pub fn robust_dp_oracle(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut rec = Recorder::new();
    let mut rng = sub_seed(seed, 3);
    let shape = LatticeShape {
        min_periods: 1,
        max_periods: 3,
        max_branching: 3,
        max_leaves: 12,
    };
    let fa = fix_a_lattice();
    let mut fixtures = vec![(
        fa.clone(),
        rectangular_hull(&fa, &[fix_a_q1(), fix_a_q2()]).expect("valid hull"),
    )];
    while fixtures.len() < 31 {
        let l = random::lattice(&mut rng, shape);
        let rf = random::rectangular(&mut rng, &l, 3);
        if rf.selection_count() <= 256 {
            fixtures.push((l, rf));
        }
    }
    let mut oracle = Worst::default();
    let mut factor = Worst::default();
    let mut homog = Worst::default();
    for (l, rf) in &fixtures {
        let sels = enumerate_selections(l, rf, 256).expect("within cap");
        let big_t = l.terminal();
        for _ in 0..20 {
            let x = random::variable(&mut rng, l, big_t, 2.0);
            let mut by_time = Vec::with_capacity(big_t + 1);
            for s in 0..=big_t {
                let v = robust_evaluate(l, rf, &x, s).expect("valid evaluation");
                let o = oracles::max_over_measures(l, &sels, &x, s);
                for (a, b) in v.values().iter().zip(&o) {
                    oracle.see((a - b).abs());
                }
                let f = RandomVariable::from_fn(l, s, |_, _| rng.gen_range(0.0..3.0)).expect("valid time");
                let fx = lift(l, &f, big_t).expect("valid lift").mul(&x).expect("same shape");
                let vf = robust_evaluate(l, rf, &fx, s).expect("valid evaluation");
                for i in 0..vf.len() {
                    let want = f.get(i) * v.get(i);
                    homog.see((vf.get(i) - want).abs() / want.abs().max(1.0));
                }
                by_time.push(v);
            }
            for r in 0..=big_t {
                for s in r..=big_t {
                    let outer = robust_evaluate(l, rf, &by_time[s].neg(), r).expect("valid evaluation");
                    factor.see(outer.sub(&by_time[r]).expect("same shape").max_abs());
                }
            }
        }
    }
    rec.at_most("robust recursion vs max over selections", oracle.value, tolerance::ROBUST);
    rec.at_most("factorization rho_r = rho_r(-rho_s)", factor.value, 0.0);
    rec.at_most("homogeneity in nonnegative B_s weights (relative)", homog.value, tolerance::ROBUST);
    rec.failures("errors", oracle.errors + factor.errors + homog.errors);
    rec.note(format!("{} rectangular fixtures", fixtures.len()));
    rec.finish(3, "robust dynamic programming oracle", 10.0, start)
}

pub fn stability(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut rec = Recorder::new();
    let mut rng = sub_seed(seed, 4);
    let fa = fix_a_lattice();
    let tau = StoppingTime::deterministic(&fa, 1).expect("valid time");
    let exact = match paste(&fa, &fix_a_q1(), &fix_a_q2(), &tau) {
        Ok(m) => {
            m.kernel(dynrisk::NodeRef::ROOT) == [0.6, 0.4]
                && fa.nodes_at(1).all(|n| m.kernel(n) == [0.5, 0.5])
        }
        Err(_) => false,
    };
    rec.failures("pasted kernels differ from (0.6 | 0.5, 0.5)", usize::from(!exact));
    let taus = StoppingTime::enumerate(&fa, 1024).expect("few stopping times");
    let pair_stable = is_stable(&fa, &[fix_a_q1(), fix_a_q2()], &taus).map(|c| c.stable);
    rec.failures("{Q1, Q2} reported stable", usize::from(pair_stable != Ok(false)));

    let shape = LatticeShape {
        min_periods: 2,
        max_periods: 2,
        max_branching: 3,
        max_leaves: 9,
    };
    let mut fixtures = vec![(fa.clone(), vec![fix_a_q1(), fix_a_q2()])];
    for _ in 0..10 {
        let l = random::lattice(&mut rng, shape);
        let k = rng.gen_range(2..=3);
        let fam: Vec<Measure> = (0..k).map(|_| random::measure(&mut rng, &l, 0.05)).collect();
        fixtures.push((l, fam));
    }
    let mut unstable_hulls = 0;
    let mut checked = 0;
    for (l, fam) in &fixtures {
        let result = rectangular_hull(l, fam)
            .and_then(|h| enumerate_selections(l, &h, 4096))
            .and_then(|sel| {
                let taus = StoppingTime::enumerate(l, 4096)?;
                checked += taus.len();
                is_stable(l, &sel, &taus)
            });
        if !matches!(result, Ok(c) if c.stable) {
            unstable_hulls += 1;
        }
    }
    rec.failures("enumerated hulls not stable", unstable_hulls);
    rec.note(format!("{} two-period fixtures, {checked} stopping times", fixtures.len()));
    rec.finish(4, "stability", 10.0, start)
}

fn band() -> VolatilityBand {
    VolatilityBand::constant(0.1, 0.2).expect("valid band")
}

/// Exact recombining tree: `levels ≥ steps`.
fn tree_grid(dt: f64) -> GridSpec {
    let steps = (1.0 / dt).round() as usize;
    GridSpec {
        dt,
        h: GridSpec::cfl_step(dt, 0.2, 1.25),
        levels: steps,
        maturity: 1.0,
    }
}

fn pde_grid(dt: f64) -> GridSpec {
    GridSpec::with_radius(dt, GridSpec::cfl_step(dt, 0.2, 1.5), 2.0, 1.0)
}

fn surface_gap(a: &Surface, b: &Surface, f: impl Fn(f64, f64) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        for (x, y) in ra.values.iter().zip(&rb.values) {
            worst = worst.max(f(*x, *y));
        }
    }
    worst
}

fn piecewise_linear(knots: &[(f64, f64)], x: f64) -> f64 {
    if x <= knots[0].0 {
        return knots[0].1;
    }
    for w in knots.windows(2) {
        if x <= w[1].0 {
            return w[0].1 + (x - w[0].0) * (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        }
    }
    knots[knots.len() - 1].1
}

fn random_payoff(rng: &mut FixtureRng) -> Vec<(f64, f64)> {
    let n = rng.gen_range(2..=6);
    let mut xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.into_iter().map(|x| (x, rng.gen_range(-1.0..1.0))).collect()
}

/// Deterministic uniform in `[0, 1)` from a key.
fn hash_unit(mut z: u64) -> f64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

pub fn gexp_quantitative(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut rec = Recorder::new();
    let band = band();
    let (tree, pde) = (tree_grid(1e-3), pde_grid(1e-3));
    let call_value = oracles::normal_call_at_the_money(0.2, 1.0);
    let square = |x: f64| x * x;
    let call = |x: f64| x.max(0.0);
    let mut slowest: f64 = 0.0;
    let payoffs: [(&str, &dyn Fn(f64) -> f64); 2] = [("B_T^2", &square), ("(B_T)^+", &call)];
    let mut asks = Vec::new();
    for (label, f) in payoffs {
        let t0 = Instant::now();
        let lattice = bid_ask(f, &band, &tree);
        let neg = |x: f64| -f(x);
        let upper = bsb_solve(f, &band, &pde);
        let lower = bsb_solve(&neg, &band, &pde).map(|s| s.negated());
        slowest = slowest.max(t0.elapsed().as_secs_f64());
        let (Ok(lat), Ok(up), Ok(lo)) = (lattice, upper, lower) else {
            rec.failures(&format!("{label}: pricing errors"), 1);
            continue;
        };
        if label == "B_T^2" {
            rec.at_most("lattice |E^(B_T^2) - 0.04|", (lat.ask.value() - 0.04).abs(), tolerance::GEXP_SQUARE);
            rec.at_most("PDE |E^(B_T^2) - 0.04|", (up.value() - 0.04).abs(), tolerance::GEXP_SQUARE);
            rec.at_most("lattice |-E^(-B_T^2) - 0.01|", (lat.bid.value() - 0.01).abs(), tolerance::GEXP_SQUARE_LOWER);
            rec.at_most("PDE |-E^(-B_T^2) - 0.01|", (lo.value() - 0.01).abs(), tolerance::GEXP_SQUARE_LOWER);
            rec.at_most("|PDE - lattice| on -E^(-B_T^2)", (lo.value() - lat.bid.value()).abs(), tolerance::GEXP_CROSS);
        } else {
            rec.at_most("lattice |E^((B_T)^+) - sigma_high/sqrt(2 pi)|", (lat.ask.value() - call_value).abs(), tolerance::GEXP_CALL);
            rec.at_most("PDE |E^((B_T)^+) - sigma_high/sqrt(2 pi)|", (up.value() - call_value).abs(), tolerance::GEXP_CALL);
        }
        rec.at_most(&format!("|PDE - lattice| on E^({label})"), (up.value() - lat.ask.value()).abs(), tolerance::GEXP_CROSS);
        asks.push((label, f, lat));
    }
    rec.at_most("slowest payoff runtime (s)", slowest, 30.0);

    // Invariants on a coarser exact tree.
    let mut rng = sub_seed(seed, 5);
    let coarse = tree_grid(1e-2);
    let steps = 100;
    let mut sub = Worst::default();
    let mut mono = Worst::default();
    let mut homog = Worst::default();
    let mut constant = Worst::default();
    let mut consistency = Worst::default();
    for _ in 0..100 {
        let (kx, ky) = (random_payoff(&mut rng), random_payoff(&mut rng));
        let fx = |x: f64| piecewise_linear(&kx, x);
        let fy = |x: f64| piecewise_linear(&ky, x);
        let lam = rng.gen_range(0.0..3.0);
        let c = rng.gen_range(-1.0..1.0);
        let price = |f: &dyn Fn(f64) -> f64| robust_lattice_price(f, &band, &coarse).expect("within CFL");
        let (ex, ey) = (price(&fx), price(&fy));
        let exy = price(&|x| fx(x) + fy(x));
        let mono_payoff = price(&|x| fx(x) + fy(x).abs());
        let scaled = price(&|x| lam * fx(x));
        let shifted = price(&|x| fx(x) + c);
        for (k, row) in exy.rows.iter().enumerate() {
            for (i, v) in row.values.iter().enumerate() {
                sub.see(v - ex.rows[k].values[i] - ey.rows[k].values[i]);
            }
        }
        mono.see(surface_gap(&ex, &mono_payoff, |a, b| a - b));
        homog.see(surface_gap(&scaled, &ex, |a, b| (a - lam * b).abs()));
        constant.see(surface_gap(&shifted, &ex, |a, b| (a - b - c).abs()));
        let s = rng.gen_range(1..steps);
        let row = ex.rows[s].clone();
        let mid = GridSpec {
            maturity: s as f64 * coarse.dt,
            ..coarse
        };
        let from_row = move |x: f64| {
            let level = (x / coarse.h).round() as i64;
            row.values[(level - row.first_level) as usize]
        };
        match robust_lattice_price(&from_row, &band, &mid) {
            Ok(two_stage) => consistency.see((two_stage.value() - ex.value()).abs()),
            Err(_) => consistency.errors += 1,
        }
    }
    rec.at_most("sublinearity excess", sub.value, tolerance::GEXP_INVARIANTS);
    rec.at_most("monotonicity excess", mono.value, tolerance::GEXP_INVARIANTS);
    rec.at_most("positive homogeneity", homog.value, tolerance::GEXP_INVARIANTS);
    rec.at_most("constant preservation", constant.value, tolerance::GEXP_INVARIANTS);
    rec.at_most("time consistency E_0 = E_0(E_s)", consistency.value, tolerance::GEXP_INVARIANTS);
    rec.failures("invariant errors", sub.errors + mono.errors + homog.errors + constant.errors + consistency.errors);

    // Domination by random in-band martingale measures on the fine tree.
    let (lo2, hi2) = (0.1f64 * 0.1 * tree.dt, 0.2f64 * 0.2 * tree.dt);
    let mut domination = Worst::default();
    for m in 0..20u64 {
        let key = seed.wrapping_mul(1_000_003).wrapping_add(m << 40);
        let variance = move |k: usize, j: i64| {
            let u = hash_unit(key ^ ((k as u64) << 20) ^ (j as u64 & 0xFFFFF));
            lo2 + u * (hi2 - lo2)
        };
        for (_, f, lat) in &asks {
            match linear_price(*f, &variance, &tree) {
                Ok(q) => {
                    domination.see(surface_gap(&lat.bid, &q, |b, e| b - e));
                    domination.see(surface_gap(&q, &lat.ask, |e, a| e - a));
                }
                Err(_) => domination.errors += 1,
            }
        }
    }
    rec.at_most("bid <= E_Q <= ask excess over 20 measures", domination.value, tolerance::DOMINATION);
    rec.failures("domination errors", domination.errors);
    rec.finish(5, "G-expectation quantitative", 90.0, start)
}

pub fn supermartingale(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut rec = Recorder::new();
    let mut rng = sub_seed(seed, 6);
    let shape = LatticeShape {
        min_periods: 2,
        max_periods: 3,
        max_branching: 3,
        max_leaves: 27,
    };
    let mut worst = Worst {
        value: f64::NEG_INFINITY,
        errors: 0,
    };
    let mut not_normalized = 0;
    for _ in 0..20 {
        let l = random::lattice(&mut rng, shape);
        let p = random::measure(&mut rng, &l, 0.05);
        let st = random::structure(&mut rng, &l, 3, Some(&p));
        let d = build_dynamic(&l, st).expect("valid dynamic");
        if !d.is_normalized() {
            not_normalized += 1;
        }
        let grid: Vec<usize> = (0..=l.terminal()).collect();
        for _ in 0..50 {
            let x = random::variable(&mut rng, &l, l.terminal(), 2.0);
            match supermartingale_check(&d, &x, &p, &grid) {
                Ok(v) => worst.see(v),
                Err(_) => worst.errors += 1,
            }
        }
    }
    rec.at_most("max E_P(rho_s'(X) | B_s) - rho_s(X)", worst.value, tolerance::SUPERMARTINGALE);
    rec.failures("errors or non-normalized structures", worst.errors + not_normalized);
    rec.finish(6, "supermartingale property", 30.0, start)
}

pub fn capacity_and_witness(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut rec = Recorder::new();
    let mut rng = sub_seed(seed, 7);
    let shape = LatticeShape {
        min_periods: 1,
        max_periods: 3,
        max_branching: 3,
        max_leaves: 27,
    };
    let mut axioms = Worst::default();
    let mut oracle = Worst::default();
    let mut witness = Worst::default();
    let mut class_failures = 0;
    for round in 0..10 {
        let l = random::lattice(&mut rng, shape);
        let big_t = l.terminal();
        let k = rng.gen_range(1..=4);
        let members: Vec<Measure> = (0..k).map(|_| random::measure(&mut rng, &l, 0.0)).collect();
        let p = [1.0, 1.5, 2.0, 3.0][round % 4];
        let fam = MeasureFamily::new(members.clone(), p).expect("valid family");
        let fam2 = MeasureFamily::new(members.clone(), 2.0).expect("valid family");
        let charged = reference_measure(&l, &fam)
            .map(|r| charged_nodes(&l, &r.measure, big_t))
            .expect("valid reference");
        for _ in 0..10 {
            let x = random::variable(&mut rng, &l, big_t, 2.0);
            let y = random::variable(&mut rng, &l, big_t, 2.0);
            let lam = rng.gen_range(-3.0..3.0);
            let c = |v: &RandomVariable| capacity(&l, v, &fam).expect("valid capacity");
            let (cx, cy) = (c(&x), c(&y));
            axioms.see((c(&x.scale(lam)) - lam.abs() * cx).abs() / cx.max(1.0));
            axioms.see(c(&x.add(&y).expect("same shape")) - cx - cy);
            oracle.see((cx - oracles::capacity(&l, &members, &x, p)).abs());

            // p = 2: the closed-form witness |X| / c(X) attains c(X).
            let c2 = capacity(&l, &x, &fam2).expect("valid capacity");
            if c2 > 0.0 {
                let g0 = x.map(|v| v.abs() / c2);
                let prod = x.abs().mul(&g0).expect("same shape");
                let attained = members
                    .iter()
                    .map(|q| oracles::conditional_mean(&l, q, &prod, dynrisk::NodeRef::ROOT))
                    .fold(f64::NEG_INFINITY, f64::max);
                witness.see((c2 - attained).abs());
                match dual_witness(&l, &x, &fam2) {
                    Ok(w) => witness.see((c2 - w.value).abs()),
                    Err(_) => witness.errors += 1,
                }
            }

            // Changing X only off the charged nodes keeps c(X − Y) = 0.
            let touch_charged = rng.gen_bool(0.5);
            let mut z = x.values().to_vec();
            let mut changed_charged = false;
            for (i, v) in z.iter_mut().enumerate() {
                if charged[i] == touch_charged && rng.gen_bool(0.7) {
                    *v += rng.gen_range(0.5..1.5);
                    changed_charged |= charged[i];
                }
            }
            let z = RandomVariable::new(&l, big_t, z).expect("same shape");
            let zero = c(&x.sub(&z).expect("same shape")) == 0.0;
            if zero == changed_charged {
                class_failures += 1;
            }
        }
    }
    rec.at_most("norm axiom excess (homogeneity, triangle)", axioms.value, tolerance::CAPACITY);
    rec.at_most("|capacity - independent capacity|", oracle.value, tolerance::CAPACITY);
    rec.at_most("|c(X) - sup_n E_n(|X| g0)| at p = 2", witness.value, tolerance::CAPACITY);
    rec.failures("c(X - Y) = 0 not equivalent to X = Y on charged nodes", class_failures);
    rec.failures("errors", axioms.errors + oracle.errors + witness.errors);
    rec.finish(7, "capacity and dual witness", 30.0, start)
}

pub fn skorokhod(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut rec = Recorder::new();
    let mut rng = sub_seed(seed, 8);
    let ind = |a: f64| StepPath::indicator(Domain::Ray, a, 1.0).expect("valid path");
    let (x, y) = (ind(0.3), ind(0.4));
    match dm_distance(&x, &y, 2) {
        Ok(r) => {
            let grid = oracles::dm_grid_search(&x, &y, 2, 0.01, 1e-4);
            rec.at_most("|d_2 - 0.1|", (r.value - 0.1).abs(), tolerance::SKOROKHOD);
            rec.at_most("|d_2 - grid-search oracle|", (r.value - grid.value).abs(), tolerance::SKOROKHOD);
        }
        Err(_) => rec.failures("d_2 error", 1),
    }

    let t = 1.0;
    let domain = Domain::HalfOpen { t };
    let zero = StepPath::zero(domain, 1).expect("valid path");
    let mut envelope_excess = f64::NEG_INFINITY;
    let mut j1_min = f64::INFINITY;
    for n in 4..=20 {
        let xn = StepPath::indicator(domain, t - 1.0 / n as f64, 1.0).expect("valid path");
        match (dhat_distance(&xn, &zero, t, 40), j1_distance(&xn, &zero, t)) {
            (Ok(d), Ok(j)) => {
                envelope_excess = envelope_excess.max(d.value + d.tail_bound - 0.5f64.powi(n - 2));
                j1_min = j1_min.min(j.value);
            }
            _ => envelope_excess = f64::INFINITY,
        }
    }
    rec.at_most("max_n d^(x_n, 0) + tail - 2^-(n-2)", envelope_excess, 0.0);
    rec.at_least("min_n undamped J1(x_n, 0)", j1_min, tolerance::J1_FLOOR);

    let mut identity = 0;
    let mut symmetry = 0;
    for _ in 0..50 {
        let a = random::step_path(&mut rng, domain, 5);
        let b = random::step_path(&mut rng, domain, 5);
        let d = |p: &StepPath, q: &StepPath| dhat_distance(p, q, t, 20).map(|r| r.value);
        if d(&a, &a) != Ok(0.0) || d(&b, &b) != Ok(0.0) {
            identity += 1;
        }
        match (d(&a, &b), d(&b, &a)) {
            (Ok(u), Ok(v)) if u == v => {}
            _ => symmetry += 1,
        }
    }
    rec.failures("d^(x, x) != 0", identity);
    rec.failures("d^(x, y) != d^(y, x)", symmetry);
    rec.finish(8, "Skorokhod distances", 10.0, start)
}

pub type Criterion = fn(u64) -> CriterionResult;

pub const ALL: [Criterion; 8] = [
    minimal_penalty_conjugacy,
    time_consistency_equivalence,
    robust_dp_oracle,
    stability,
    gexp_quantitative,
    supermartingale,
    capacity_and_witness,
    skorokhod,
];

pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    ALL.iter().map(|c| c(seed)).collect()
}
