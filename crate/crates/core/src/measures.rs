//! Probability measures on a lattice, conditional expectations, the capacity
//! `c(X) = max_n (E_{Q_n}|X|^p)^{1/p}`, the mixture reference measure and the
//! dual-norm witness of the capacity.
//!
//! A [`Measure`] is a one-step kernel at every non-terminal node, including
//! nodes it does not charge. Kernels at null nodes give a canonical regular
//! version of every conditional expectation; [`conditional_expectation`]
//! flags those nodes and reports 0 there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{NodeRef, RandomVariable, ScenarioLattice};

/// Kernel weights must sum to one within this tolerance when loaded; they
/// are then renormalized exactly.
pub const KERNEL_LOAD_TOLERANCE: f64 = 1e-6;

/// Probabilities and kernel weights closer than this are treated as equal.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// One-step conditional law at a node (wire format).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub node: NodeRef,
    pub weights: Vec<f64>,
}

/// Wire format: `{"kernels":[{"node":[t,i],"weights":[…]},…]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub kernels: Vec<Kernel>,
}

/// A probability measure on the lattice paths, given by its kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    kernels: Vec<Vec<Vec<f64>>>,
}

pub(crate) fn normalize_weights(node: NodeRef, weights: &[f64], n_children: usize) -> Result<Vec<f64>> {
    if weights.len() != n_children {
        return Err(Error::InvalidKernel {
            node,
            reason: format!("{} weights for {} children", weights.len(), n_children),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidKernel {
            node,
            reason: "weights must be finite and non-negative".into(),
        });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > KERNEL_LOAD_TOLERANCE {
        return Err(Error::InvalidKernel {
            node,
            reason: format!("weights sum to {sum}"),
        });
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

impl Measure {
    /// `kernels[t][i]` are the child weights of node `(t, i)` for `t < T`.
    pub fn new(lattice: &ScenarioLattice, kernels: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if kernels.len() != lattice.terminal() {
            return Err(Error::Shape(format!(
                "{} kernel slices for {} non-terminal times",
                kernels.len(),
                lattice.terminal()
            )));
        }
        let mut out = Vec::with_capacity(kernels.len());
        for (t, slice) in kernels.iter().enumerate() {
            if slice.len() != lattice.len_at(t) {
                return Err(Error::Shape(format!(
                    "{} kernels for {} nodes at time {t}",
                    slice.len(),
                    lattice.len_at(t)
                )));
            }
            let row = slice
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let n = NodeRef::new(t, i);
                    normalize_weights(n, w, lattice.children(n).len())
                })
                .collect::<Result<Vec<_>>>()?;
            out.push(row);
        }
        Ok(Self { kernels: out })
    }

    /// `f(node, number_of_children)` supplies the kernel at each node.
    pub fn from_fn<F>(lattice: &ScenarioLattice, mut f: F) -> Result<Self>
    where
        F: FnMut(NodeRef, usize) -> Vec<f64>,
    {
        let kernels = (0..lattice.terminal())
            .map(|t| {
                lattice
                    .nodes_at(t)
                    .map(|n| f(n, lattice.children(n).len()))
                    .collect()
            })
            .collect();
        Self::new(lattice, kernels)
    }

    /// Builds from a list of kernels covering every non-terminal node once.
    pub fn from_kernels(lattice: &ScenarioLattice, kernels: &[Kernel]) -> Result<Self> {
        let mut slots: Vec<Vec<Option<Vec<f64>>>> =
            (0..lattice.terminal()).map(|t| vec![None; lattice.len_at(t)]).collect();
        for k in kernels {
            if k.node.time >= lattice.terminal() || !lattice.contains(k.node) {
                return Err(Error::InvalidKernel {
                    node: k.node,
                    reason: "not a non-terminal node of the lattice".into(),
                });
            }
            let slot = &mut slots[k.node.time][k.node.index];
            if slot.is_some() {
                return Err(Error::InvalidKernel {
                    node: k.node,
                    reason: "kernel given twice".into(),
                });
            }
            *slot = Some(k.weights.clone());
        }
        let mut nested = Vec::with_capacity(slots.len());
        for (t, row) in slots.into_iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (i, w) in row.into_iter().enumerate() {
                out.push(w.ok_or_else(|| Error::InvalidKernel {
                    node: NodeRef::new(t, i),
                    reason: "missing kernel".into(),
                })?);
            }
            nested.push(out);
        }
        Self::new(lattice, nested)
    }

    pub fn from_spec(lattice: &ScenarioLattice, spec: &MeasureSpec) -> Result<Self> {
        Self::from_kernels(lattice, &spec.kernels)
    }

    pub fn to_spec(&self) -> MeasureSpec {
        let kernels = self
            .kernels
            .iter()
            .enumerate()
            .flat_map(|(t, row)| {
                row.iter().enumerate().map(move |(i, w)| Kernel {
                    node: NodeRef::new(t, i),
                    weights: w.clone(),
                })
            })
            .collect();
        MeasureSpec { kernels }
    }

    /// Derives kernels from node probabilities given at the terminal time.
    /// At nodes the law does not charge, kernels are copied from `fallback`
    /// (uniform when none is given).
    pub fn from_terminal_law(
        lattice: &ScenarioLattice,
        terminal: &[f64],
        fallback: Option<&Measure>,
    ) -> Result<Self> {
        let big_t = lattice.terminal();
        if terminal.len() != lattice.len_at(big_t) {
            return Err(Error::Shape("terminal law length".into()));
        }
        let mut probs = vec![terminal.to_vec()];
        for t in (0..big_t).rev() {
            let next = probs.last().expect("non-empty");
            let row: Vec<f64> = lattice
                .nodes_at(t)
                .map(|n| lattice.children(n).iter().map(|&c| next[c]).sum())
                .collect();
            probs.push(row);
        }
        probs.reverse();
        Self::from_fn(lattice, |n, k| {
            let mass = probs[n.time][n.index];
            if mass > 0.0 {
                lattice
                    .children(n)
                    .iter()
                    .map(|&c| probs[n.time + 1][c] / mass)
                    .collect()
            } else if let Some(f) = fallback {
                f.kernel(n).to_vec()
            } else {
                vec![1.0 / k as f64; k]
            }
        })
    }

    pub fn kernel(&self, n: NodeRef) -> &[f64] {
        &self.kernels[n.time][n.index]
    }

    pub(crate) fn kernels(&self) -> &[Vec<Vec<f64>>] {
        &self.kernels
    }

    pub(crate) fn from_raw(kernels: Vec<Vec<Vec<f64>>>) -> Self {
        Self { kernels }
    }

    /// Whether the kernel table matches the lattice shape.
    pub fn check_on(&self, lattice: &ScenarioLattice) -> Result<()> {
        let ok = self.kernels.len() == lattice.terminal()
            && self.kernels.iter().enumerate().all(|(t, row)| {
                row.len() == lattice.len_at(t)
                    && row
                        .iter()
                        .enumerate()
                        .all(|(i, w)| w.len() == lattice.children(NodeRef::new(t, i)).len())
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("measure is defined on a different lattice".into()))
        }
    }

    /// Probabilities of every node, per time slice.
    pub fn node_probabilities(&self, lattice: &ScenarioLattice) -> Vec<Vec<f64>> {
        let mut out = vec![vec![1.0]];
        for t in 0..lattice.terminal() {
            let mut next = vec![0.0; lattice.len_at(t + 1)];
            for (i, &p) in out[t].iter().enumerate() {
                let n = NodeRef::new(t, i);
                for (&c, &w) in lattice.children(n).iter().zip(self.kernel(n)) {
                    next[c] = p * w;
                }
            }
            out.push(next);
        }
        out
    }

    /// Conditional probabilities of the time-`t` descendants of `n`, paired
    /// with their indices.
    pub fn conditional_law(&self, lattice: &ScenarioLattice, n: NodeRef, t: usize) -> Vec<(usize, f64)> {
        let mut cur = vec![(n.index, 1.0)];
        for u in n.time..t {
            cur = cur
                .iter()
                .flat_map(|&(i, p)| {
                    let m = NodeRef::new(u, i);
                    lattice
                        .children(m)
                        .iter()
                        .zip(self.kernel(m))
                        .map(move |(&c, &w)| (c, p * w))
                })
                .collect();
        }
        cur
    }
}

/// Kernel-based conditional expectation at every time-`s` node, charged or
/// not.
pub fn regular_conditional_expectation(
    lattice: &ScenarioLattice,
    x: &RandomVariable,
    q: &Measure,
    s: usize,
) -> Result<RandomVariable> {
    x.check_on(lattice)?;
    q.check_on(lattice)?;
    lattice.check_time(s)?;
    let t = x.time();
    if s > t {
        return Err(Error::TimeOrder { earlier: t, later: s });
    }
    let mut v = x.values().to_vec();
    for u in (s..t).rev() {
        v = lattice
            .nodes_at(u)
            .map(|n| {
                lattice
                    .children(n)
                    .iter()
                    .zip(q.kernel(n))
                    .map(|(&c, &w)| w * v[c])
                    .sum()
            })
            .collect();
    }
    Ok(RandomVariable::from_parts(s, v))
}

/// `E_Q(X)` for `X` measurable at any time.
pub fn expectation(lattice: &ScenarioLattice, x: &RandomVariable, q: &Measure) -> Result<f64> {
    Ok(regular_conditional_expectation(lattice, x, q, 0)?.get(0))
}

/// `E_Q(X | B_s)` with the nodes of zero `Q`-probability flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalExpectation {
    pub value: RandomVariable,
    pub null_nodes: Vec<bool>,
}

/// `E_Q(X | B_s)`, defined on `Q`-charged time-`s` nodes; 0 with a flag at
/// null nodes.
pub fn conditional_expectation(
    lattice: &ScenarioLattice,
    x: &RandomVariable,
    q: &Measure,
    s: usize,
) -> Result<ConditionalExpectation> {
    let reg = regular_conditional_expectation(lattice, x, q, s)?;
    let probs = &q.node_probabilities(lattice)[s];
    let null_nodes: Vec<bool> = probs.iter().map(|&p| p <= 0.0).collect();
    let values = reg
        .values()
        .iter()
        .zip(&null_nodes)
        .map(|(&v, &null)| if null { 0.0 } else { v })
        .collect();
    Ok(ConditionalExpectation {
        value: RandomVariable::from_parts(s, values),
        null_nodes,
    })
}

/// Finite ordered family `Q_0, …, Q_{N-1}` with capacity exponent `p >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFamily {
    members: Vec<Measure>,
    p: f64,
}

/// Wire format of a family file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub members: Vec<MeasureSpec>,
    #[serde(default = "default_exponent")]
    pub p: f64,
}

fn default_exponent() -> f64 {
    1.0
}

impl MeasureFamily {
    pub fn new(members: Vec<Measure>, p: f64) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("a measure family needs at least one member".into()));
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidArgument(format!("capacity exponent must be >= 1, got {p}")));
        }
        Ok(Self { members, p })
    }

    pub fn from_spec(lattice: &ScenarioLattice, spec: &FamilySpec) -> Result<Self> {
        let members = spec
            .members
            .iter()
            .map(|m| Measure::from_spec(lattice, m))
            .collect::<Result<Vec<_>>>()?;
        Self::new(members, spec.p)
    }

    pub fn to_spec(&self) -> FamilySpec {
        FamilySpec {
            members: self.members.iter().map(Measure::to_spec).collect(),
            p: self.p,
        }
    }

    pub fn members(&self) -> &[Measure] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    /// Conjugate exponent `q = p / (p - 1)`; `None` stands for `q = ∞` at `p = 1`.
    pub fn conjugate_exponent(&self) -> Option<f64> {
        if self.p == 1.0 {
            None
        } else {
            Some(self.p / (self.p - 1.0))
        }
    }

    fn check_on(&self, lattice: &ScenarioLattice) -> Result<()> {
        self.members.iter().try_for_each(|m| m.check_on(lattice))
    }
}

fn moment(lattice: &ScenarioLattice, q: &Measure, x: &RandomVariable, f: impl Fn(f64) -> f64) -> f64 {
    let probs = q.node_probabilities(lattice);
    probs[x.time()]
        .iter()
        .zip(x.values())
        .map(|(&p, &v)| if p > 0.0 { p * f(v) } else { 0.0 })
        .sum()
}

/// `c(X) = max_n (E_{Q_n}|X|^p)^{1/p}`.
pub fn capacity(lattice: &ScenarioLattice, x: &RandomVariable, family: &MeasureFamily) -> Result<f64> {
    x.check_on(lattice)?;
    family.check_on(lattice)?;
    let p = family.p;
    Ok(family
        .members
        .iter()
        .map(|q| moment(lattice, q, x, |v| v.abs().powf(p)).powf(1.0 / p))
        .fold(0.0, f64::max))
}

/// Mixture `P = Σ w_n Q_n` with `w_n ∝ 2^{-(n+1)}` renormalized over the
/// finite family.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMeasure {
    pub measure: Measure,
    pub weights: Vec<f64>,
}

pub fn mixture_weights(n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|k| 0.5f64.powi(k as i32 + 1)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Mixes path laws with the given weights. At nodes no member charges, the
/// kernel is the weighted average of the members' kernels.
pub fn mixture(lattice: &ScenarioLattice, members: &[Measure], weights: &[f64]) -> Result<Measure> {
    if members.is_empty() || members.len() != weights.len() {
        return Err(Error::InvalidArgument("mixture needs one weight per member".into()));
    }
    for m in members {
        m.check_on(lattice)?;
    }
    let probs: Vec<Vec<Vec<f64>>> = members.iter().map(|m| m.node_probabilities(lattice)).collect();
    let kernels = (0..lattice.terminal())
        .map(|t| {
            lattice
                .nodes_at(t)
                .map(|n| {
                    let k = lattice.children(n).len();
                    let mass: f64 = (0..members.len()).map(|j| weights[j] * probs[j][t][n.index]).sum();
                    let mut w = vec![0.0; k];
                    for (j, m) in members.iter().enumerate() {
                        let coeff = if mass > 0.0 {
                            weights[j] * probs[j][t][n.index] / mass
                        } else {
                            weights[j]
                        };
                        for (slot, wk) in w.iter_mut().zip(m.kernel(n)) {
                            *slot += coeff * wk;
                        }
                    }
                    w
                })
                .collect()
        })
        .collect();
    Measure::new(lattice, kernels)
}

pub fn reference_measure(lattice: &ScenarioLattice, family: &MeasureFamily) -> Result<ReferenceMeasure> {
    let weights = mixture_weights(family.len());
    let measure = mixture(lattice, &family.members, &weights)?;
    Ok(ReferenceMeasure { measure, weights })
}

/// The witness `g_0 = |X|^{p/q} / c(X)^{p-1}` attaining the capacity as
/// `max_n E_{Q_n}(|X| g_0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualWitness {
    pub g0: RandomVariable,
    /// `max_n E_{Q_n}(|X| g_0)`.
    pub value: f64,
    /// `max_n E_{Q_n}(g_0^q)`; `max g_0` when `q = ∞`.
    pub conjugate_norm: f64,
    /// Set for `p = 1`, where `g_0 ≡ 1`.
    pub degenerate: bool,
}

pub fn dual_witness(lattice: &ScenarioLattice, x: &RandomVariable, family: &MeasureFamily) -> Result<DualWitness> {
    let c = capacity(lattice, x, family)?;
    if c == 0.0 {
        return Err(Error::NullElement);
    }
    let p = family.p;
    let (g0, degenerate) = match family.conjugate_exponent() {
        None => (x.map(|_| 1.0), true),
        Some(q) => (x.map(|v| v.abs().powf(p / q) / c.powf(p - 1.0)), false),
    };
    let prod = x.abs().mul(&g0)?;
    let value = family
        .members
        .iter()
        .map(|q| moment(lattice, q, &prod, |v| v))
        .fold(f64::NEG_INFINITY, f64::max);
    let conjugate_norm = match family.conjugate_exponent() {
        None => g0.max_abs(),
        Some(q) => family
            .members
            .iter()
            .map(|m| moment(lattice, m, &g0, |v| v.powf(q)))
            .fold(f64::NEG_INFINITY, f64::max),
    };
    Ok(DualWitness {
        g0,
        value,
        conjugate_norm,
        degenerate,
    })
}

/// Relation between the restrictions of two measures to `B_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Restriction {
    Equal,
    AbsolutelyContinuous,
    Neither,
}

impl Restriction {
    pub fn label(self) -> &'static str {
        match self {
            Restriction::Equal => "equal",
            Restriction::AbsolutelyContinuous => "absolutely continuous",
            Restriction::Neither => "neither",
        }
    }
}

/// Compares node probabilities of `Q` and `P` up to time `s`.
pub fn check_restriction(lattice: &ScenarioLattice, q: &Measure, p: &Measure, s: usize) -> Result<Restriction> {
    q.check_on(lattice)?;
    p.check_on(lattice)?;
    lattice.check_time(s)?;
    let qp = q.node_probabilities(lattice);
    let pp = p.node_probabilities(lattice);
    let slices = 0..=s;
    let equal = slices
        .clone()
        .all(|t| qp[t].iter().zip(&pp[t]).all(|(a, b)| (a - b).abs() <= PROBABILITY_TOLERANCE));
    if equal {
        return Ok(Restriction::Equal);
    }
    let ac = slices
        .into_iter()
        .all(|t| qp[t].iter().zip(&pp[t]).all(|(&a, &b)| a <= 0.0 || b > 0.0));
    Ok(if ac {
        Restriction::AbsolutelyContinuous
    } else {
        Restriction::Neither
    })
}

/// Time-`t` nodes of positive probability.
pub fn charged_nodes(lattice: &ScenarioLattice, q: &Measure, t: usize) -> Vec<bool> {
    q.node_probabilities(lattice)[t].iter().map(|&p| p > 0.0).collect()
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::fixtures::*;
    use crate::lattice::coordinate_process;

    fn b2() -> (ScenarioLattice, RandomVariable) {
        let l = fix_a_lattice();
        let b = coordinate_process(&l, 2).unwrap().remove(0);
        (l, b)
    }

    #[test]
    fn conditional_expectation_examples() {
        let (l, b) = b2();
        let e = conditional_expectation(&l, &b, &fix_a_q1(), 1).unwrap();
        assert_eq!(e.value.values(), &[1.0, -1.0]);
        // Enumerating the four paths under Q2: 0.36*2 + 0.16*(-2) = 0.4.
        let e0 = conditional_expectation(&l, &b, &fix_a_q2(), 0).unwrap();
        assert_abs_diff_eq!(e0.value.get(0), 0.4, epsilon = 1e-15);
        let k = RandomVariable::constant(&l, 2, 3.5).unwrap();
        let ek = conditional_expectation(&l, &k, &fix_a_q2(), 1).unwrap();
        assert!(ek.value.values().iter().all(|&v| (v - 3.5).abs() < 1e-15));
    }

    #[test]
    fn null_nodes_are_flagged() {
        let l = fix_a_lattice();
        let up_only = Measure::from_fn(&l, |_, _| vec![1.0, 0.0]).unwrap();
        let (_, b) = b2();
        let e = conditional_expectation(&l, &b, &up_only, 1).unwrap();
        assert_eq!(e.null_nodes, vec![false, true]);
        assert_eq!(e.value.values(), &[2.0, 0.0]);
    }

    #[test]
    fn mismatched_lattice_rejected() {
        let l3 = ScenarioLattice::trinomial(vec![0.0, 1.0, 2.0], 1.0).unwrap();
        let x = RandomVariable::constant(&l3, 2, 1.0).unwrap();
        assert!(conditional_expectation(&l3, &x, &fix_a_q1(), 0).is_err());
    }

    #[test]
    fn capacity_examples() {
        let (l, b) = b2();
        // E_{Q1}|B2| = 0.5*2 = 1.0, E_{Q2}|B2| = 0.36*2 + 0.16*2 = 1.04.
        assert_abs_diff_eq!(capacity(&l, &b, &fix_a_family(1.0)).unwrap(), 1.04, epsilon = 1e-14);
        let zero = RandomVariable::constant(&l, 2, 0.0).unwrap();
        assert_eq!(capacity(&l, &zero, &fix_a_family(1.0)).unwrap(), 0.0);
        let single = MeasureFamily::new(vec![fix_a_q2()], 2.0).unwrap();
        // (0.36*4 + 0.16*4)^{1/2}
        assert_abs_diff_eq!(capacity(&l, &b, &single).unwrap(), 2.08f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn reference_measure_examples() {
        let l = fix_a_lattice();
        let r = reference_measure(&l, &fix_a_family(1.0)).unwrap();
        assert_abs_diff_eq!(r.weights[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.measure.kernel(NodeRef::ROOT)[0], 1.6 / 3.0, epsilon = 1e-15);
        let one = reference_measure(&l, &MeasureFamily::new(vec![fix_a_q2()], 1.0).unwrap()).unwrap();
        assert_eq!(one.weights, vec![1.0]);
        assert_eq!(one.measure, fix_a_q2());
        let w3 = mixture_weights(3);
        for (a, b) in w3.iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn mixture_of_path_laws() {
        let l = fix_a_lattice();
        let r = reference_measure(&l, &fix_a_family(1.0)).unwrap();
        let pr = r.measure.node_probabilities(&l);
        let p1 = fix_a_q1().node_probabilities(&l);
        let p2 = fix_a_q2().node_probabilities(&l);
        for i in 0..4 {
            assert_abs_diff_eq!(pr[2][i], (2.0 * p1[2][i] + p2[2][i]) / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn dual_witness_examples() {
        let (l, b) = b2();
        let fam = fix_a_family(2.0);
        let w = dual_witness(&l, &b, &fam).unwrap();
        let c = capacity(&l, &b, &fam).unwrap();
        assert!((w.value - c).abs() <= 1e-9);
        assert!(w.conjugate_norm <= 1.0 + 1e-9);
        assert!(!w.degenerate);

        let w1 = dual_witness(&l, &b, &fix_a_family(1.0)).unwrap();
        assert!(w1.degenerate);
        assert!(w1.g0.values().iter().all(|&g| g == 1.0));
        assert_abs_diff_eq!(w1.value, 1.04, epsilon = 1e-14);

        let zero = RandomVariable::constant(&l, 2, 0.0).unwrap();
        assert_eq!(dual_witness(&l, &zero, &fam), Err(Error::NullElement));
    }

    #[test]
    fn restriction_examples() {
        let l = fix_a_lattice();
        let p = reference_measure(&l, &fix_a_family(1.0)).unwrap().measure;
        assert_eq!(check_restriction(&l, &p, &p, 2).unwrap(), Restriction::Equal);
        assert_eq!(
            check_restriction(&l, &fix_a_q2(), &p, 1).unwrap(),
            Restriction::AbsolutelyContinuous
        );
        assert_eq!(check_restriction(&l, &fix_a_q2(), &p, 0).unwrap(), Restriction::Equal);
        let up = Measure::from_fn(&l, |_, _| vec![1.0, 0.0]).unwrap();
        let down = Measure::from_fn(&l, |_, _| vec![0.0, 1.0]).unwrap();
        assert_eq!(check_restriction(&l, &down, &up, 1).unwrap(), Restriction::Neither);
    }

    #[test]
    fn kernels_are_renormalized_on_load() {
        let l = fix_a_lattice();
        let m = Measure::from_fn(&l, |_, _| vec![0.3333333, 0.6666666]).unwrap();
        let s: f64 = m.kernel(NodeRef::ROOT).iter().sum();
        assert!((s - 1.0).abs() <= 1e-15);
        assert!(Measure::from_fn(&l, |_, _| vec![0.5, 0.4]).is_err());
        assert!(Measure::from_fn(&l, |_, _| vec![1.2, -0.2]).is_err());
    }

    #[test]
    fn measure_json_round_trip() {
        let l = fix_a_lattice();
        let q = fix_a_q2();
        let json = serde_json::to_string(&q.to_spec()).unwrap();
        let back = Measure::from_spec(&l, &serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, q);
    }
}
