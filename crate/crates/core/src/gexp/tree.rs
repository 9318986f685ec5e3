//! Band constraints on general scenario lattices: quadratic variation,
//! membership of a measure in the band, and the non-recombining tree
//! carrying the endpoint kernels.

use serde::Serialize;

use super::{GridSpec, VolatilityBand};
use crate::error::{Error, Result};
use crate::lattice::{NodeRef, RandomVariable, ScenarioLattice};
use crate::measures::Measure;
use crate::stability::{robust_evaluate, RectangularFamily};

const BAND_TOLERANCE: f64 = 1e-12;

/// `⟨B_i⟩_t = Σ (ΔB_i)²` along the ancestry, one variable per coordinate.
pub fn quadratic_variation(lattice: &ScenarioLattice, t: usize) -> Result<Vec<RandomVariable>> {
    lattice.check_time(t)?;
    let d = lattice.dimension();
    let mut qv: Vec<Vec<f64>> = vec![vec![0.0; d]];
    for u in 1..=t {
        qv = lattice
            .nodes_at(u)
            .map(|n| {
                let p = lattice.parent(n).expect("non-root");
                let inc = lattice.increment(n);
                (0..d).map(|i| qv[p.index][i] + inc[i] * inc[i]).collect()
            })
            .collect();
    }
    Ok((0..d)
        .map(|i| RandomVariable::from_parts(t, qv.iter().map(|q| q[i]).collect()))
        .collect())
}

/// `max |B_t² − 2 Σ_u B_u ΔB_{u+1} − ⟨B⟩_t|` over time-`t` nodes and coordinates.
pub fn integration_by_parts_residual(lattice: &ScenarioLattice, t: usize) -> Result<f64> {
    let qv = quadratic_variation(lattice, t)?;
    let mut worst: f64 = 0.0;
    for n in lattice.nodes_at(t) {
        let path = lattice.path_to(n);
        for (i, q) in qv.iter().enumerate() {
            let stoch: f64 = path
                .windows(2)
                .map(|w| lattice.position(w[0])[i] * lattice.increment(w[1])[i])
                .sum();
            let b = lattice.position(n)[i];
            worst = worst.max((b * b - 2.0 * stoch - q.get(n.index)).abs());
        }
    }
    Ok(worst)
}

fn step_length(lattice: &ScenarioLattice, t: usize) -> f64 {
    lattice.times()[t + 1] - lattice.times()[t]
}

fn require_one_dimensional(lattice: &ScenarioLattice) -> Result<()> {
    if lattice.dimension() != 1 {
        return Err(Error::InvalidArgument("band constraints are implemented for one dimension".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandCheck {
    pub member: bool,
    pub violation: Option<NodeRef>,
    pub reason: Option<String>,
}

/// Whether every kernel of `Q` has zero mean and conditional variance in
/// `[σ_low² Δt, σ_high² Δt]`.
pub fn band_membership(lattice: &ScenarioLattice, q: &Measure, band: &VolatilityBand) -> Result<BandCheck> {
    require_one_dimensional(lattice)?;
    q.check_on(lattice)?;
    band.validate()?;
    for t in 0..lattice.terminal() {
        let dt = step_length(lattice, t);
        let (sl, sh) = band.at(t);
        for n in lattice.nodes_at(t) {
            let ch = lattice.children(n);
            let w = q.kernel(n);
            let incs: Vec<f64> = ch.iter().map(|&c| lattice.increment(NodeRef::new(t + 1, c))[0]).collect();
            let mean: f64 = w.iter().zip(&incs).map(|(p, a)| p * a).sum();
            let var: f64 = w.iter().zip(&incs).map(|(p, a)| p * a * a).sum();
            let reason = if mean.abs() > BAND_TOLERANCE {
                Some(format!("kernel mean {mean} is not zero"))
            } else if var < sl * sl * dt - BAND_TOLERANCE || var > sh * sh * dt + BAND_TOLERANCE {
                Some(format!(
                    "conditional variance {var} outside [{}, {}]",
                    sl * sl * dt,
                    sh * sh * dt
                ))
            } else {
                None
            };
            if reason.is_some() {
                return Ok(BandCheck {
                    member: false,
                    violation: Some(n),
                    reason,
                });
            }
        }
    }
    Ok(BandCheck {
        member: true,
        violation: None,
        reason: None,
    })
}

/// Zero-mean kernel over children `(+a, 0, −a)` with variance `v`.
fn endpoint_kernel(lattice: &ScenarioLattice, n: NodeRef, v: f64) -> Result<Vec<f64>> {
    let ch = lattice.children(n);
    let incs: Vec<f64> = ch.iter().map(|&c| lattice.increment(NodeRef::new(n.time + 1, c))[0]).collect();
    let a = incs.iter().cloned().fold(0.0, f64::max);
    let symmetric = incs.len() == 3
        && a > 0.0
        && incs.iter().filter(|&&x| x == a).count() == 1
        && incs.iter().filter(|&&x| x == 0.0).count() == 1
        && incs.iter().filter(|&&x| x == -a).count() == 1;
    if !symmetric {
        return Err(Error::InvalidArgument(format!("node {n} is not a symmetric trinomial branching")));
    }
    if v > a * a * (1.0 + 1e-12) {
        let sigma2 = v / step_length(lattice, n.time);
        return Err(Error::Cfl {
            dt: step_length(lattice, n.time),
            max_dt: a * a / sigma2,
        });
    }
    let p = v / (2.0 * a * a);
    Ok(incs.iter().map(|&x| if x == 0.0 { 1.0 - 2.0 * p } else { p }).collect())
}

/// The two band-endpoint kernels at every node of a trinomial lattice.
pub fn band_family(lattice: &ScenarioLattice, band: &VolatilityBand) -> Result<RectangularFamily> {
    require_one_dimensional(lattice)?;
    band.validate()?;
    let mut err = None;
    let rf = RectangularFamily::from_fn(lattice, |n, _| {
        let dt = step_length(lattice, n.time);
        let (sl, sh) = band.at(n.time);
        let mut out = Vec::with_capacity(2);
        for v in [sl * sl * dt, sh * sh * dt] {
            match endpoint_kernel(lattice, n, v) {
                Ok(k) => out.push(k),
                Err(e) => {
                    err.get_or_insert(e);
                    out.push(vec![1.0 / 3.0; 3]);
                }
            }
        }
        out
    });
    match err {
        Some(e) => Err(e),
        None => rf,
    }
}

/// Oracle: conditional G-expectation by robust recursion on the full
/// non-recombining trinomial tree with the endpoint kernels.
pub fn full_tree_gexp(
    phi: &dyn Fn(&[f64]) -> f64,
    dates: &[usize],
    band: &VolatilityBand,
    grid: &GridSpec,
    s: usize,
    observed: &[f64],
    current: f64,
) -> Result<f64> {
    let n = grid.check_cfl(band)?;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * grid.dt).collect();
    let lattice = ScenarioLattice::trinomial(times, grid.h)?;
    lattice.check_time(s)?;
    let rf = band_family(&lattice, band)?;
    let payoff = RandomVariable::from_fn(&lattice, n, |node, _| {
        let xs: Vec<f64> = dates.iter().map(|&d| lattice.position(lattice.ancestor(node, d))[0]).collect();
        phi(&xs)
    })?;
    let values = robust_evaluate(&lattice, &rf, &payoff.neg(), s)?;
    let tol = 1e-9 * grid.h;
    let seen: Vec<usize> = dates.iter().copied().filter(|&d| d <= s).collect();
    for node in lattice.nodes_at(s) {
        let here = (lattice.position(node)[0] - current).abs() <= tol;
        let history = seen
            .iter()
            .zip(observed)
            .all(|(&d, &x)| (lattice.position(lattice.ancestor(node, d))[0] - x).abs() <= tol);
        if here && history {
            return Ok(values.get(node.index));
        }
    }
    Err(Error::Grid(format!("no path reaches value {current} at step {s} with the given history")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fix_a_lattice;

    #[test]
    fn quadratic_variation_examples() {
        let l = fix_a_lattice();
        let qv = quadratic_variation(&l, 2).unwrap();
        assert!(qv[0].values().iter().all(|&v| v == 2.0));
        let h = 0.5;
        let tri = ScenarioLattice::trinomial(vec![0.0, 1.0, 2.0], h).unwrap();
        let q = quadratic_variation(&tri, 2).unwrap().remove(0);
        let max = q.values().iter().cloned().fold(0.0, f64::max);
        let min_nonzero_drop = q.values().iter().map(|v| max - v).filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
        assert_eq!(max, 2.0 * h * h);
        assert_eq!(min_nonzero_drop, h * h);
        assert_eq!(integration_by_parts_residual(&tri, 2).unwrap(), 0.0);
    }

    #[test]
    fn membership_examples() {
        let dt = 0.01;
        let h = 0.03;
        let tri = ScenarioLattice::trinomial(vec![0.0, dt, 2.0 * dt], h).unwrap();
        let band = VolatilityBand::constant(0.1, 0.2).unwrap();
        let mid = 0.15f64 * 0.15 * dt;
        let p = mid / (2.0 * h * h);
        let q = Measure::from_fn(&tri, |_, _| vec![p, 1.0 - 2.0 * p, p]).unwrap();
        assert!(band_membership(&tri, &q, &band).unwrap().member);
        let skew = Measure::from_fn(&tri, |_, _| vec![p + 0.05, 1.0 - 2.0 * p, p - 0.05]).unwrap();
        assert!(!band_membership(&tri, &skew, &band).unwrap().member);
        let high = 0.25f64 * 0.25 * dt / (2.0 * h * h);
        let hot = Measure::from_fn(&tri, |_, _| vec![high, 1.0 - 2.0 * high, high]).unwrap();
        let check = band_membership(&tri, &hot, &band).unwrap();
        assert!(!check.member);
        assert_eq!(check.violation, Some(NodeRef::ROOT));
    }

    #[test]
    fn band_family_has_endpoint_kernels() {
        let tri = ScenarioLattice::trinomial(vec![0.0, 0.01], 0.03).unwrap();
        let band = VolatilityBand::constant(0.1, 0.2).unwrap();
        let rf = band_family(&tri, &band).unwrap();
        let ks = rf.kernels(NodeRef::ROOT);
        assert_eq!(ks.len(), 2);
        assert!((ks[1][0] - 0.04 * 0.01 / (2.0 * 0.0009)).abs() < 1e-15);
        let narrow = ScenarioLattice::trinomial(vec![0.0, 0.01], 0.01).unwrap();
        assert!(matches!(band_family(&narrow, &band), Err(Error::Cfl { .. })));
    }
}
