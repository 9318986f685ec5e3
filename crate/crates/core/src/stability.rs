//! Pasting of measures at stopping times, stability of measure sets, the
//! rectangular (node-wise kernel) hull and robust backward recursion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{NodeRef, RandomVariable, ScenarioLattice, StoppingTime};
use crate::measures::{charged_nodes, normalize_weights, Measure, PROBABILITY_TOLERANCE};
use crate::risk::lift_to_horizon;

/// Density process of `Q` with respect to `P` frozen at `τ`: `Q`'s kernels at
/// nodes not yet stopped, `P`'s kernels from the stopping node on.
pub fn paste(lattice: &ScenarioLattice, p: &Measure, q: &Measure, tau: &StoppingTime) -> Result<Measure> {
    p.check_on(lattice)?;
    q.check_on(lattice)?;
    let pp = p.node_probabilities(lattice);
    let qp = q.node_probabilities(lattice);
    for t in 0..lattice.num_times() {
        if let Some(i) = (0..qp[t].len()).find(|&i| qp[t][i] > 0.0 && pp[t][i] <= 0.0) {
            return Err(Error::NotAbsolutelyContinuous(NodeRef::new(t, i)));
        }
    }
    let reached = tau.reached(lattice);
    Measure::from_fn(lattice, |n, _| {
        if reached[n.time][n.index] {
            p.kernel(n).to_vec()
        } else {
            q.kernel(n).to_vec()
        }
    })
}

fn absolutely_continuous(lattice: &ScenarioLattice, q: &Measure, p: &Measure) -> bool {
    let pp = p.node_probabilities(lattice);
    let qp = q.node_probabilities(lattice);
    qp.iter()
        .zip(&pp)
        .all(|(a, b)| a.iter().zip(b).all(|(&x, &y)| x <= 0.0 || y > 0.0))
}

/// Same path law: equal kernels at every node the first measure charges.
pub fn same_law(lattice: &ScenarioLattice, a: &Measure, b: &Measure) -> bool {
    (0..lattice.terminal()).all(|t| {
        let charged = charged_nodes(lattice, a, t);
        lattice.nodes_at(t).all(|n| {
            !charged[n.index]
                || a.kernel(n)
                    .iter()
                    .zip(b.kernel(n))
                    .all(|(x, y)| (x - y).abs() <= PROBABILITY_TOLERANCE)
        })
    })
}

/// A pasting that falls outside the family.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingPaste {
    pub p_index: usize,
    pub q_index: usize,
    pub tau_index: usize,
    pub pasted: Measure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCheck {
    pub stable: bool,
    pub missing: Option<MissingPaste>,
}

/// Whether `paste(P, Q, τ)` belongs to the family for every ordered pair with
/// `Q ≪ P` and every given stopping time.
pub fn is_stable(lattice: &ScenarioLattice, family: &[Measure], taus: &[StoppingTime]) -> Result<StabilityCheck> {
    for (a, p) in family.iter().enumerate() {
        for (b, q) in family.iter().enumerate() {
            if a == b || !absolutely_continuous(lattice, q, p) {
                continue;
            }
            for (k, tau) in taus.iter().enumerate() {
                let r = paste(lattice, p, q, tau)?;
                if !family.iter().any(|m| same_law(lattice, &r, m)) {
                    return Ok(StabilityCheck {
                        stable: false,
                        missing: Some(MissingPaste {
                            p_index: a,
                            q_index: b,
                            tau_index: k,
                            pasted: r,
                        }),
                    });
                }
            }
        }
    }
    Ok(StabilityCheck {
        stable: true,
        missing: None,
    })
}

/// Finite set of one-step kernels at every non-terminal node.
#[derive(Debug, Clone, PartialEq)]
pub struct RectangularFamily {
    kernels: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeKernels {
    pub node: NodeRef,
    pub kernels: Vec<Vec<f64>>,
}

/// Wire format: `{"node_kernels":[{"node":[t,i],"kernels":[[…],…]},…]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangularSpec {
    pub node_kernels: Vec<NodeKernels>,
}

fn push_unique(set: &mut Vec<Vec<f64>>, k: &[f64]) {
    let dup = set
        .iter()
        .any(|e| e.iter().zip(k).all(|(a, b)| (a - b).abs() <= PROBABILITY_TOLERANCE));
    if !dup {
        set.push(k.to_vec());
    }
}

impl RectangularFamily {
    /// `f(node, children)` lists the kernels offered at a node.
    pub fn from_fn<F>(lattice: &ScenarioLattice, mut f: F) -> Result<Self>
    where
        F: FnMut(NodeRef, usize) -> Vec<Vec<f64>>,
    {
        let mut kernels = Vec::with_capacity(lattice.terminal());
        for t in 0..lattice.terminal() {
            let mut row = Vec::with_capacity(lattice.len_at(t));
            for n in lattice.nodes_at(t) {
                let k = lattice.children(n).len();
                let mut set = Vec::new();
                for w in f(n, k) {
                    push_unique(&mut set, &normalize_weights(n, &w, k)?);
                }
                if set.is_empty() {
                    return Err(Error::InvalidKernel {
                        node: n,
                        reason: "empty kernel set".into(),
                    });
                }
                row.push(set);
            }
            kernels.push(row);
        }
        Ok(Self { kernels })
    }

    pub fn from_spec(lattice: &ScenarioLattice, spec: &RectangularSpec) -> Result<Self> {
        let mut slots: Vec<Vec<Option<Vec<Vec<f64>>>>> =
            (0..lattice.terminal()).map(|t| vec![None; lattice.len_at(t)]).collect();
        for nk in &spec.node_kernels {
            let n = nk.node;
            if n.time >= lattice.terminal() || !lattice.contains(n) {
                return Err(Error::InvalidKernel {
                    node: n,
                    reason: "not a non-terminal node of the lattice".into(),
                });
            }
            if slots[n.time][n.index].replace(nk.kernels.clone()).is_some() {
                return Err(Error::InvalidKernel {
                    node: n,
                    reason: "kernel set given twice".into(),
                });
            }
        }
        Self::from_fn(lattice, |n, _| slots[n.time][n.index].take().unwrap_or_default())
    }

    pub fn to_spec(&self) -> RectangularSpec {
        let node_kernels = self
            .kernels
            .iter()
            .enumerate()
            .flat_map(|(t, row)| {
                row.iter().enumerate().map(move |(i, ks)| NodeKernels {
                    node: NodeRef::new(t, i),
                    kernels: ks.clone(),
                })
            })
            .collect();
        RectangularSpec { node_kernels }
    }

    pub fn kernels(&self, n: NodeRef) -> &[Vec<f64>] {
        &self.kernels[n.time][n.index]
    }

    fn check_on(&self, lattice: &ScenarioLattice) -> Result<()> {
        let ok = self.kernels.len() == lattice.terminal()
            && self.kernels.iter().enumerate().all(|(t, row)| {
                row.len() == lattice.len_at(t)
                    && row.iter().enumerate().all(|(i, ks)| {
                        let k = lattice.children(NodeRef::new(t, i)).len();
                        ks.iter().all(|w| w.len() == k)
                    })
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("rectangular family is defined on a different lattice".into()))
        }
    }

    /// Number of node-wise selections (saturating).
    pub fn selection_count(&self) -> u128 {
        self.kernels
            .iter()
            .flatten()
            .try_fold(1u128, |acc, ks| acc.checked_mul(ks.len() as u128))
            .unwrap_or(u128::MAX)
    }
}

/// Kernels of the members at the nodes they charge. A node no member charges
/// offers every member's kernel.
pub fn rectangular_hull(lattice: &ScenarioLattice, family: &[Measure]) -> Result<RectangularFamily> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("rectangular hull of an empty family".into()));
    }
    for m in family {
        m.check_on(lattice)?;
    }
    let probs: Vec<Vec<Vec<f64>>> = family.iter().map(|m| m.node_probabilities(lattice)).collect();
    RectangularFamily::from_fn(lattice, |n, _| {
        let mut set = Vec::new();
        for (m, p) in family.iter().zip(&probs) {
            if p[n.time][n.index] > 0.0 {
                push_unique(&mut set, m.kernel(n));
            }
        }
        if set.is_empty() {
            for m in family {
                push_unique(&mut set, m.kernel(n));
            }
        }
        set
    })
}

/// Every node-wise kernel choice as a measure, first node most significant.
pub fn enumerate_selections(lattice: &ScenarioLattice, rf: &RectangularFamily, cap: usize) -> Result<Vec<Measure>> {
    rf.check_on(lattice)?;
    let count = rf.selection_count();
    if count > cap as u128 {
        return Err(Error::SelectionCap { count, cap });
    }
    let nodes: Vec<NodeRef> = (0..lattice.terminal()).flat_map(|t| lattice.nodes_at(t)).collect();
    let mut out = Vec::with_capacity(count as usize);
    for mut k in 0..count as usize {
        let mut choice = vec![0; nodes.len()];
        for (slot, &n) in choice.iter_mut().zip(&nodes).rev() {
            let len = rf.kernels(n).len();
            *slot = k % len;
            k /= len;
        }
        let mut kernels: Vec<Vec<Vec<f64>>> = (0..lattice.terminal()).map(|t| vec![Vec::new(); lattice.len_at(t)]).collect();
        for (&n, &j) in nodes.iter().zip(&choice) {
            kernels[n.time][n.index] = rf.kernels(n)[j].clone();
        }
        out.push(Measure::from_raw(kernels));
    }
    Ok(out)
}

/// `V_t = −X`, `V_u(n) = max_k Σ kernel_k · V_{u+1}`; returns `V_s`.
pub fn robust_evaluate(
    lattice: &ScenarioLattice,
    rf: &RectangularFamily,
    x: &RandomVariable,
    s: usize,
) -> Result<RandomVariable> {
    rf.check_on(lattice)?;
    lattice.check_time(s)?;
    let x = lift_to_horizon(lattice, x, x.time().max(s))?;
    let mut v = x.neg().into_values();
    for u in (s..x.time()).rev() {
        v = lattice
            .nodes_at(u)
            .map(|n| {
                let ch = lattice.children(n);
                rf.kernels(n)
                    .iter()
                    .map(|k| ch.iter().zip(k).map(|(&c, &w)| w * v[c]).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }
    Ok(RandomVariable::from_parts(s, v))
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::fixtures::*;
    use crate::lattice::coordinate_process;
    use crate::measures::regular_conditional_expectation;

    fn b2() -> RandomVariable {
        coordinate_process(&fix_a_lattice(), 2).unwrap().remove(0)
    }

    #[test]
    fn paste_examples() {
        let l = fix_a_lattice();
        let tau = StoppingTime::deterministic(&l, 1).unwrap();
        let r = paste(&l, &fix_a_q1(), &fix_a_q2(), &tau).unwrap();
        assert_eq!(r.kernel(NodeRef::ROOT), &[0.6, 0.4]);
        assert_eq!(r.kernel(NodeRef::new(1, 0)), &[0.5, 0.5]);
        assert_eq!(r.kernel(NodeRef::new(1, 1)), &[0.5, 0.5]);
        let q = fix_a_q2();
        for tau in StoppingTime::enumerate(&l, 100).unwrap() {
            assert_eq!(paste(&l, &q, &q, &tau).unwrap(), q);
        }
        let root = StoppingTime::deterministic(&l, 0).unwrap();
        assert_eq!(paste(&l, &fix_a_q1(), &fix_a_q2(), &root).unwrap(), fix_a_q1());
    }

    #[test]
    fn paste_requires_absolute_continuity() {
        let l = fix_a_lattice();
        let up = crate::measures::Measure::from_fn(&l, |_, _| vec![1.0, 0.0]).unwrap();
        let tau = StoppingTime::deterministic(&l, 1).unwrap();
        assert_eq!(
            paste(&l, &up, &fix_a_q1(), &tau).unwrap_err(),
            Error::NotAbsolutelyContinuous(NodeRef::new(1, 1))
        );
    }

    #[test]
    fn stability_examples() {
        let l = fix_a_lattice();
        let taus = StoppingTime::enumerate(&l, 100).unwrap();
        assert!(is_stable(&l, &[fix_a_q1()], &taus).unwrap().stable);
        let fam = [fix_a_q1(), fix_a_q2()];
        let check = is_stable(&l, &fam, &[StoppingTime::deterministic(&l, 1).unwrap()]).unwrap();
        assert!(!check.stable);
        assert_eq!(check.missing.unwrap().pasted.kernel(NodeRef::ROOT), &[0.6, 0.4]);
        let hull = rectangular_hull(&l, &fam).unwrap();
        let all = enumerate_selections(&l, &hull, 256).unwrap();
        assert!(is_stable(&l, &all, &taus).unwrap().stable);
    }

    #[test]
    fn hull_examples() {
        let l = fix_a_lattice();
        let hull = rectangular_hull(&l, &[fix_a_q1(), fix_a_q2()]).unwrap();
        for t in 0..2 {
            for n in l.nodes_at(t) {
                assert_eq!(hull.kernels(n).len(), 2);
            }
        }
        assert_eq!(hull.selection_count(), 8);
        let single = rectangular_hull(&l, &[fix_a_q2()]).unwrap();
        assert_eq!(single.selection_count(), 1);
        let up_at_root =
            crate::measures::Measure::from_fn(&l, |n, _| if n == NodeRef::ROOT { vec![1.0, 0.0] } else { vec![0.6, 0.4] })
                .unwrap();
        let h = rectangular_hull(&l, &[fix_a_q1(), up_at_root]).unwrap();
        assert_eq!(h.kernels(NodeRef::new(1, 1)), &[vec![0.5, 0.5]]);
        assert_eq!(h.kernels(NodeRef::new(1, 0)).len(), 2);
    }

    #[test]
    fn enumerate_examples() {
        let l = fix_a_lattice();
        let hull = rectangular_hull(&l, &[fix_a_q1(), fix_a_q2()]).unwrap();
        assert_eq!(enumerate_selections(&l, &hull, 8).unwrap().len(), 8);
        let single = rectangular_hull(&l, &[fix_a_q1()]).unwrap();
        assert_eq!(enumerate_selections(&l, &single, 1).unwrap(), vec![fix_a_q1()]);
        assert_eq!(
            enumerate_selections(&l, &hull, 4).unwrap_err(),
            Error::SelectionCap { count: 8, cap: 4 }
        );
    }

    #[test]
    fn robust_examples() {
        let l = fix_a_lattice();
        let hull = rectangular_hull(&l, &[fix_a_q1(), fix_a_q2()]).unwrap();
        assert_abs_diff_eq!(robust_evaluate(&l, &hull, &b2(), 0).unwrap().get(0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(robust_evaluate(&l, &hull, &b2().neg(), 0).unwrap().get(0), 0.4, epsilon = 1e-15);
        assert_eq!(robust_evaluate(&l, &hull, &b2(), 2).unwrap(), b2().neg());
        let x = b2().map(|v| v * v - v / 2.0);
        let best = enumerate_selections(&l, &hull, 8)
            .unwrap()
            .iter()
            .map(|q| regular_conditional_expectation(&l, &x.neg(), q, 0).unwrap().get(0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(robust_evaluate(&l, &hull, &x, 0).unwrap().get(0), best, epsilon = 1e-12);
    }

    #[test]
    fn hull_json_round_trip() {
        let l = fix_a_lattice();
        let hull = rectangular_hull(&l, &[fix_a_q1(), fix_a_q2()]).unwrap();
        let s = serde_json::to_string(&hull.to_spec()).unwrap();
        assert_eq!(RectangularFamily::from_spec(&l, &serde_json::from_str(&s).unwrap()).unwrap(), hull);
    }
}
