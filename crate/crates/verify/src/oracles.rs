//! Independent reference computations.
//!
//! Nothing here calls the library routine it is meant to check. Conditional
//! laws are recomputed from kernels, conjugates are found by direct search of
//! the primal supremum, robust values by enumeration, and Skorokhod distances
//! by grid search over time-change knots with dense sampling.

use dynrisk::skorokhod::StepPath;
use dynrisk::{DualRep, Measure, NodeRef, RandomVariable, ScenarioLattice};

/// Conditional law of the time-`t` descendants of `n`, in index order.
pub fn leaf_law(lattice: &ScenarioLattice, q: &Measure, n: NodeRef, t: usize) -> Vec<(usize, f64)> {
    let mut front = vec![(n.index, 1.0)];
    for u in n.time..t {
        let mut next = Vec::new();
        for (i, p) in front {
            let node = NodeRef::new(u, i);
            for (&c, &w) in lattice.children(node).iter().zip(q.kernel(node)) {
                next.push((c, p * w));
            }
        }
        front = next;
    }
    front.sort_by_key(|&(i, _)| i);
    front
}

/// `E_Q(X | n)` for `X` at time `t`, using the kernel version everywhere.
pub fn conditional_mean(lattice: &ScenarioLattice, q: &Measure, x: &RandomVariable, n: NodeRef) -> f64 {
    leaf_law(lattice, q, n, x.time()).iter().map(|&(i, p)| p * x.get(i)).sum()
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// `max_{|y| ≤ M} min_k (c_k · y + a_k)` by enumerating every vertex of the
/// epigraph polytope: `|A|` tight affine pieces, `|A| − 1` free coordinates,
/// the rest at `±M`.
fn box_max_min_affine(c: &[Vec<f64>], a: &[f64], bound: f64) -> f64 {
    let dim = c[0].len();
    let eval = |y: &[f64]| {
        c.iter()
            .zip(a)
            .map(|(ck, ak)| ck.iter().zip(y).map(|(u, v)| u * v).sum::<f64>() + ak)
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = f64::NEG_INFINITY;
    for size in 1..=c.len().min(dim + 1) {
        for tight in combinations(c.len(), size) {
            for free in combinations(dim, size - 1) {
                let fixed: Vec<usize> = (0..dim).filter(|i| !free.contains(i)).collect();
                for signs in 0u32..(1 << fixed.len()) {
                    let mut y = vec![0.0; dim];
                    for (bit, &i) in fixed.iter().enumerate() {
                        y[i] = if signs >> bit & 1 == 1 { bound } else { -bound };
                    }
                    // Unknowns: y on `free`, then z. Rows: c_k·y − z = −a_k.
                    let rows: Vec<Vec<f64>> = tight
                        .iter()
                        .map(|&k| free.iter().map(|&i| c[k][i]).chain(std::iter::once(-1.0)).collect())
                        .collect();
                    let rhs: Vec<f64> = tight
                        .iter()
                        .map(|&k| -a[k] - fixed.iter().map(|&i| c[k][i] * y[i]).sum::<f64>())
                        .collect();
                    let Some(sol) = solve_dense(rows, rhs) else { continue };
                    if free.iter().zip(&sol).any(|(_, v)| v.abs() > bound * (1.0 + 1e-12)) {
                        continue;
                    }
                    for (&i, &v) in free.iter().zip(&sol) {
                        y[i] = v;
                    }
                    best = best.max(eval(&y));
                }
            }
        }
    }
    best
}

/// Largest box half-width tried before declaring the supremum unbounded.
pub const CONJUGATE_MAX_BOX: f64 = (1u64 << 24) as f64;

/// `sup_X (E_Q(−X | n) − ρ(X)(n))` over time-`t` variables, by exact search
/// on boxes `[−M, M]` with `M` doubling until the value stops moving.
/// `None` stands for `+∞`.
pub fn brute_force_conjugate(lattice: &ScenarioLattice, rep: &DualRep, q: &Measure, n: NodeRef) -> Option<f64> {
    let t = rep.t();
    let target = leaf_law(lattice, q, n, t);
    let comps: Vec<(Vec<(usize, f64)>, f64)> = rep
        .components()
        .iter()
        .filter_map(|c| c.penalty.values[n.index].finite().map(|a| (leaf_law(lattice, &c.measure, n, t), a)))
        .collect();
    // With Y = −X restricted to the subtree: E_Q(Y) − max_k (E_k(Y) − a_k)
    // = min_k ((q − e_k) · Y + a_k). Leaves nobody charges carry no weight.
    let live: Vec<usize> = (0..target.len())
        .filter(|&l| target[l].1 != 0.0 || comps.iter().any(|(e, _)| e[l].1 != 0.0))
        .collect();
    let c: Vec<Vec<f64>> = comps
        .iter()
        .map(|(e, _)| live.iter().map(|&l| target[l].1 - e[l].1).collect())
        .collect();
    let a: Vec<f64> = comps.iter().map(|(_, a)| *a).collect();
    let mut bound = 1.0;
    let mut prev = box_max_min_affine(&c, &a, bound);
    while bound < CONJUGATE_MAX_BOX {
        bound *= 2.0;
        let next = box_max_min_affine(&c, &a, bound);
        if next - prev <= 1e-10 * prev.abs().max(1.0) {
            return Some(next);
        }
        prev = next;
    }
    None
}

/// `max_Q E_Q(−X | B_s)` over an explicit list of measures.
pub fn max_over_measures(lattice: &ScenarioLattice, measures: &[Measure], x: &RandomVariable, s: usize) -> Vec<f64> {
    let neg = x.neg();
    lattice
        .nodes_at(s)
        .map(|n| {
            measures
                .iter()
                .map(|q| conditional_mean(lattice, q, &neg, n))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// `max_n (E_{Q_n} |X|^p)^{1/p}`.
pub fn capacity(lattice: &ScenarioLattice, members: &[Measure], x: &RandomVariable, p: f64) -> f64 {
    let powered = x.map(|v| v.abs().powf(p));
    members
        .iter()
        .map(|q| conditional_mean(lattice, q, &powered, NodeRef::ROOT).powf(1.0 / p))
        .fold(0.0, f64::max)
}

/// Result of [`dm_grid_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSearch {
    pub value: f64,
    /// Best interior knot `(u, λ(u))`, `None` for the identity.
    pub knot: Option<(f64, f64)>,
}

fn damping(m: f64, u: f64) -> f64 {
    if u <= m - 1.0 {
        1.0
    } else if u <= m {
        m - u
    } else {
        0.0
    }
}

fn scalar_at(x: &StepPath, u: f64) -> f64 {
    x.jumps().iter().take_while(|j| j.time <= u).last().map_or(0.0, |j| j.value[0])
}

/// `d_m` of one-dimensional paths over time changes with at most one
/// interior knot on a grid of spacing `knot_step`, each candidate scored by
/// sampling the deviation at spacing `sample_step`.
pub fn dm_grid_search(x: &StepPath, y: &StepPath, m: u32, knot_step: f64, sample_step: f64) -> GridSearch {
    let mf = m as f64;
    let samples = (mf / sample_step).round() as usize;
    let score = |lam: &dyn Fn(f64) -> f64, shift: f64| {
        let mut worst = shift;
        for k in 0..=samples {
            let u = k as f64 * sample_step;
            let v = lam(u);
            let d = (damping(mf, v) * scalar_at(x, v) - damping(mf, u) * scalar_at(y, u)).abs();
            worst = worst.max(d);
        }
        worst
    };
    let mut best = GridSearch {
        value: score(&|u| u, 0.0),
        knot: None,
    };
    let knots = (mf / knot_step).round() as usize;
    for i in 1..knots {
        for j in 1..knots {
            let (u0, v0) = (i as f64 * knot_step, j as f64 * knot_step);
            let shift = (u0 - v0).abs();
            if shift >= best.value {
                continue;
            }
            let lam = move |u: f64| {
                if u <= u0 {
                    u * v0 / u0
                } else {
                    v0 + (u - u0) * (mf - v0) / (mf - u0)
                }
            };
            let value = score(&lam, shift);
            if value < best.value {
                best = GridSearch {
                    value,
                    knot: Some((u0, v0)),
                };
            }
        }
    }
    best
}

/// `E(B_T^+)` under constant volatility `σ`: `σ √T / √(2π)`.
pub fn normal_call_at_the_money(sigma: f64, maturity: f64) -> f64 {
    sigma * maturity.sqrt() / (2.0 * std::f64::consts::PI).sqrt()
}
