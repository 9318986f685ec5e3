//! Time-consistent dynamic risk measures generated by one-step data, and
//! executable checks of the equivalence between the recursion
//! `ρ_{r,t} = ρ_{r,s}(−ρ_{s,t})`, additivity of acceptance sets and the
//! penalty cocycle, plus the supermartingale property.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{lift, NodeRef, RandomVariable, ScenarioLattice};
use crate::measures::{charged_nodes, normalize_weights, regular_conditional_expectation, Measure};
use crate::risk::{
    conjugate_penalty, lift_to_horizon, Component, ConditionalRisk, DualRep, ExtendedReal, PenaltyVariable,
    ACCEPTANCE_TOLERANCE,
};

/// Default cap on the number of node-wise selections in [`expand_dual`].
pub const DEFAULT_SELECTION_CAP: usize = 4096;

/// One candidate one-step law with its penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepEntry {
    pub weights: Vec<f64>,
    pub penalty: ExtendedReal,
}

impl OneStepEntry {
    pub fn new(weights: Vec<f64>, penalty: ExtendedReal) -> Self {
        Self { weights, penalty }
    }
}

/// Candidate one-step laws at every non-terminal node.
#[derive(Debug, Clone, PartialEq)]
pub struct OneStepStructure {
    entries: Vec<Vec<Vec<OneStepEntry>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEntries {
    pub node: NodeRef,
    pub entries: Vec<OneStepEntry>,
}

/// Wire format: `{"nodes":[{"node":[t,i],"entries":[{"weights":[…],"penalty":…},…]},…]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepSpec {
    pub nodes: Vec<NodeEntries>,
}

impl OneStepStructure {
    pub fn from_fn<F>(lattice: &ScenarioLattice, mut f: F) -> Result<Self>
    where
        F: FnMut(NodeRef) -> Vec<OneStepEntry>,
    {
        let mut entries = Vec::with_capacity(lattice.terminal());
        for t in 0..lattice.terminal() {
            let row = lattice
                .nodes_at(t)
                .map(|n| Self::check_node(lattice, n, f(n)))
                .collect::<Result<Vec<_>>>()?;
            entries.push(row);
        }
        Ok(Self { entries })
    }

    fn check_node(lattice: &ScenarioLattice, n: NodeRef, list: Vec<OneStepEntry>) -> Result<Vec<OneStepEntry>> {
        let k = lattice.children(n).len();
        let mut out = Vec::with_capacity(list.len());
        for e in list {
            if let ExtendedReal::Finite(a) = e.penalty {
                if !(a.is_finite() && a >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "one-step penalty at {n} must be >= 0 or inf, got {a}"
                    )));
                }
            }
            out.push(OneStepEntry {
                weights: normalize_weights(n, &e.weights, k)?,
                penalty: e.penalty,
            });
        }
        if !out.iter().any(|e| e.penalty.is_finite()) {
            return Err(Error::NoFinitePenalty(n));
        }
        Ok(out)
    }

    pub fn from_spec(lattice: &ScenarioLattice, spec: &OneStepSpec) -> Result<Self> {
        let mut slots: Vec<Vec<Option<Vec<OneStepEntry>>>> =
            (0..lattice.terminal()).map(|t| vec![None; lattice.len_at(t)]).collect();
        for ne in &spec.nodes {
            let n = ne.node;
            if n.time >= lattice.terminal() || !lattice.contains(n) {
                return Err(Error::InvalidKernel {
                    node: n,
                    reason: "not a non-terminal node of the lattice".into(),
                });
            }
            if slots[n.time][n.index].replace(ne.entries.clone()).is_some() {
                return Err(Error::InvalidKernel {
                    node: n,
                    reason: "entries given twice".into(),
                });
            }
        }
        Self::from_fn(lattice, |n| slots[n.time][n.index].take().unwrap_or_default())
    }

    pub fn to_spec(&self) -> OneStepSpec {
        let nodes = self
            .entries
            .iter()
            .enumerate()
            .flat_map(|(t, row)| {
                row.iter().enumerate().map(move |(i, e)| NodeEntries {
                    node: NodeRef::new(t, i),
                    entries: e.clone(),
                })
            })
            .collect();
        OneStepSpec { nodes }
    }

    pub fn entries(&self, n: NodeRef) -> &[OneStepEntry] {
        &self.entries[n.time][n.index]
    }

    fn check_on(&self, lattice: &ScenarioLattice) -> Result<()> {
        let ok = self.entries.len() == lattice.terminal()
            && self.entries.iter().enumerate().all(|(t, row)| {
                row.len() == lattice.len_at(t)
                    && row.iter().enumerate().all(|(i, es)| {
                        let k = lattice.children(NodeRef::new(t, i)).len();
                        es.iter().all(|e| e.weights.len() == k)
                    })
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("one-step structure is defined on a different lattice".into()))
        }
    }

    fn min_penalty(&self, n: NodeRef) -> f64 {
        self.entries(n)
            .iter()
            .filter_map(|e| e.penalty.finite())
            .fold(f64::INFINITY, f64::min)
    }

    /// True when the smallest penalty at every node is zero.
    pub fn is_normalized(&self) -> bool {
        self.entries
            .iter()
            .enumerate()
            .all(|(t, row)| (0..row.len()).all(|i| self.min_penalty(NodeRef::new(t, i)) == 0.0))
    }

    /// Copy with every penalty replaced by `f(node, entry index, penalty)`.
    pub fn map_penalties(&self, mut f: impl FnMut(NodeRef, usize, ExtendedReal) -> ExtendedReal) -> Self {
        let mut out = self.clone();
        for (t, row) in out.entries.iter_mut().enumerate() {
            for (i, es) in row.iter_mut().enumerate() {
                for (j, e) in es.iter_mut().enumerate() {
                    e.penalty = f(NodeRef::new(t, i), j, e.penalty);
                }
            }
        }
        out
    }
}

/// Dynamic risk measure `(ρ_{s,t})_{s ≤ t}` obtained by backward composition
/// of the one-step maps `ρ_{u,u+1}(X)(n) = max_j (Σ w_j (−X) − a_j(n))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicRM {
    lattice: ScenarioLattice,
    structure: OneStepStructure,
}

pub fn build_dynamic(lattice: &ScenarioLattice, structure: OneStepStructure) -> Result<DynamicRM> {
    structure.check_on(lattice)?;
    for t in 0..lattice.terminal() {
        for n in lattice.nodes_at(t) {
            if !structure.entries(n).iter().any(|e| e.penalty.is_finite()) {
                return Err(Error::NoFinitePenalty(n));
            }
        }
    }
    Ok(DynamicRM {
        lattice: lattice.clone(),
        structure,
    })
}

/// One backward step: `W_u(n) = max_j (Σ w_j W_{u+1} − a_j)`, lowest index on ties.
fn backward_step(lattice: &ScenarioLattice, structure: &OneStepStructure, u: usize, next: &[f64]) -> (Vec<f64>, Vec<usize>) {
    lattice
        .nodes_at(u)
        .map(|n| {
            let ch = lattice.children(n);
            let mut best = f64::NEG_INFINITY;
            let mut arg = usize::MAX;
            for (j, e) in structure.entries(n).iter().enumerate() {
                if let ExtendedReal::Finite(a) = e.penalty {
                    let v: f64 = ch.iter().zip(&e.weights).map(|(&c, &w)| w * next[c]).sum::<f64>() - a;
                    if v > best {
                        best = v;
                        arg = j;
                    }
                }
            }
            (best, arg)
        })
        .unzip()
}

impl DynamicRM {
    pub fn lattice(&self) -> &ScenarioLattice {
        &self.lattice
    }

    pub fn structure(&self) -> &OneStepStructure {
        &self.structure
    }

    pub fn is_normalized(&self) -> bool {
        self.structure.is_normalized()
    }

    fn check_pair(&self, s: usize, t: usize) -> Result<()> {
        self.lattice.check_time(t)?;
        if s > t {
            return Err(Error::TimeOrder { earlier: t, later: s });
        }
        Ok(())
    }

    /// `ρ_{s,t}(X)`.
    pub fn evaluate(&self, s: usize, t: usize, x: &RandomVariable) -> Result<RandomVariable> {
        Ok(self.evaluate_all(s, t, x)?.remove(0))
    }

    /// `[ρ_{s,t}(X), ρ_{s+1,t}(X), …, ρ_{t,t}(X) = −X]`.
    pub fn evaluate_all(&self, s: usize, t: usize, x: &RandomVariable) -> Result<Vec<RandomVariable>> {
        self.check_pair(s, t)?;
        let x = lift_to_horizon(&self.lattice, x, t)?;
        let mut out = vec![x.neg()];
        for u in (s..t).rev() {
            let (v, _) = backward_step(&self.lattice, &self.structure, u, out.last().expect("non-empty").values());
            out.push(RandomVariable::from_parts(u, v));
        }
        out.reverse();
        Ok(out)
    }

    pub fn evaluator(&self, s: usize, t: usize) -> Result<DynEvaluator<'_>> {
        self.check_pair(s, t)?;
        Ok(DynEvaluator { dynamic: self, s, t })
    }
}

/// The map `ρ_{s,t}` of a [`DynamicRM`].
#[derive(Debug, Clone, Copy)]
pub struct DynEvaluator<'a> {
    dynamic: &'a DynamicRM,
    s: usize,
    t: usize,
}

impl ConditionalRisk for DynEvaluator<'_> {
    fn horizon(&self) -> (usize, usize) {
        (self.s, self.t)
    }

    fn evaluate(&self, lattice: &ScenarioLattice, x: &RandomVariable) -> Result<RandomVariable> {
        if lattice.shape() != self.dynamic.lattice.shape() {
            return Err(Error::Shape("evaluator used on a different lattice".into()));
        }
        self.dynamic.evaluate(self.s, self.t, x)
    }
}

impl<T: ConditionalRisk + ?Sized> ConditionalRisk for &T {
    fn horizon(&self) -> (usize, usize) {
        (**self).horizon()
    }

    fn evaluate(&self, lattice: &ScenarioLattice, x: &RandomVariable) -> Result<RandomVariable> {
        (**self).evaluate(lattice, x)
    }
}

/// `ρ_{s,s}(X) = −X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityRisk {
    pub s: usize,
}

impl ConditionalRisk for IdentityRisk {
    fn horizon(&self) -> (usize, usize) {
        (self.s, self.s)
    }

    fn evaluate(&self, lattice: &ScenarioLattice, x: &RandomVariable) -> Result<RandomVariable> {
        Ok(lift_to_horizon(lattice, x, self.s)?.neg())
    }
}

/// `X ↦ outer(−inner(X))`.
#[derive(Debug, Clone)]
pub struct Composition<A, B> {
    outer: A,
    inner: B,
}

pub fn compose<A: ConditionalRisk, B: ConditionalRisk>(outer: A, inner: B) -> Result<Composition<A, B>> {
    let (r, s) = outer.horizon();
    let (s2, t) = inner.horizon();
    if s != s2 || r > s || s2 > t {
        return Err(Error::InvalidArgument(format!(
            "cannot compose horizons ({r}, {s}) and ({s2}, {t})"
        )));
    }
    Ok(Composition { outer, inner })
}

impl<A: ConditionalRisk, B: ConditionalRisk> ConditionalRisk for Composition<A, B> {
    fn horizon(&self) -> (usize, usize) {
        (self.outer.horizon().0, self.inner.horizon().1)
    }

    fn evaluate(&self, lattice: &ScenarioLattice, x: &RandomVariable) -> Result<RandomVariable> {
        let inner = self.inner.evaluate(lattice, x)?;
        self.outer.evaluate(lattice, &inner.neg())
    }
}

/// Node-wise selections of finite-penalty entries over times `r..t`.
struct Selections {
    nodes: Vec<NodeRef>,
    choices: Vec<Vec<usize>>,
}

impl Selections {
    fn new(dynamic: &DynamicRM, r: usize, t: usize) -> Self {
        let nodes: Vec<NodeRef> = (r..t).flat_map(|u| dynamic.lattice.nodes_at(u)).collect();
        let choices = nodes
            .iter()
            .map(|&n| {
                dynamic
                    .structure
                    .entries(n)
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.penalty.is_finite())
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        Self { nodes, choices }
    }

    fn count(&self) -> u128 {
        self.choices
            .iter()
            .try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
            .unwrap_or(u128::MAX)
    }

    /// Mixed-radix digits of selection `k`, first node most significant.
    fn digits(&self, mut k: usize) -> Vec<usize> {
        let mut out = vec![0; self.nodes.len()];
        for (slot, c) in out.iter_mut().zip(&self.choices).rev() {
            *slot = c[k % c.len()];
            k /= c.len();
        }
        out
    }
}

/// Lowest-index minimal-penalty entry at every node.
fn base_choice(structure: &OneStepStructure, n: NodeRef) -> usize {
    let m = structure.min_penalty(n);
    structure
        .entries(n)
        .iter()
        .position(|e| e.penalty == ExtendedReal::Finite(m))
        .expect("finite entry exists")
}

/// Dual representation of `ρ_{r,t}` over all node-wise selections. Entries
/// with infinite penalty are never selected.
pub fn expand_dual(dynamic: &DynamicRM, r: usize, t: usize, cap: usize) -> Result<DualRep> {
    dynamic.check_pair(r, t)?;
    let l = &dynamic.lattice;
    let sel = Selections::new(dynamic, r, t);
    let count = sel.count();
    if count > cap as u128 {
        return Err(Error::SelectionCap { count, cap });
    }
    let base: Vec<Vec<Vec<f64>>> = (0..l.terminal())
        .map(|u| {
            l.nodes_at(u)
                .map(|n| dynamic.structure.entries(n)[base_choice(&dynamic.structure, n)].weights.clone())
                .collect()
        })
        .collect();
    let mut components = Vec::with_capacity(count as usize);
    for k in 0..count as usize {
        let digits = sel.digits(k);
        let mut kernels = base.clone();
        let mut pen: Vec<Vec<f64>> = (r..t).map(|u| vec![0.0; l.len_at(u)]).collect();
        for (&n, &j) in sel.nodes.iter().zip(&digits) {
            let e = &dynamic.structure.entries(n)[j];
            kernels[n.time][n.index] = e.weights.clone();
            pen[n.time - r][n.index] = e.penalty.finite().expect("finite entry");
        }
        // Expected accumulated penalty, backward from t.
        let mut acc = vec![0.0; l.len_at(t)];
        for u in (r..t).rev() {
            acc = l
                .nodes_at(u)
                .map(|n| {
                    pen[u - r][n.index]
                        + l.children(n)
                            .iter()
                            .zip(&kernels[u][n.index])
                            .map(|(&c, &w)| w * acc[c])
                            .sum::<f64>()
                })
                .collect();
        }
        components.push(Component {
            measure: Measure::from_raw(kernels),
            penalty: PenaltyVariable::from_finite(&RandomVariable::from_parts(r, acc)),
        });
    }
    DualRep::new(l, r, t, components, Measure::from_raw(base))
}

/// Node-wise infinite-aware value of a cocycle residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Residual {
    Finite(f64),
    /// One side infinite, the other finite.
    Unbounded { positive: bool },
    /// `∞ − ∞`.
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CocycleReport {
    pub time: usize,
    pub residual: Vec<Residual>,
    /// Largest finite `|residual|`; `+∞` if any node is unbounded.
    pub max_abs: f64,
    pub indeterminate: Vec<NodeRef>,
}

fn first_non_ac(lattice: &ScenarioLattice, q: &Measure, p: &Measure, s: usize) -> Option<NodeRef> {
    let qp = q.node_probabilities(lattice);
    let pp = p.node_probabilities(lattice);
    (0..=s).find_map(|t| {
        (0..qp[t].len())
            .find(|&i| qp[t][i] > 0.0 && pp[t][i] <= 0.0)
            .map(|i| NodeRef::new(t, i))
    })
}

/// `α_{r,t}(Q) − α_{r,s}(Q) − E_Q(α_{s,t}(Q) | B_r)` with conjugate
/// penalties of the three representations. `Q` only needs to be absolutely
/// continuous with respect to each reference up to the representation's
/// initial time.
pub fn check_cocycle(
    lattice: &ScenarioLattice,
    rep_rt: &DualRep,
    rep_rs: &DualRep,
    rep_st: &DualRep,
    q: &Measure,
) -> Result<CocycleReport> {
    let (r, s, t) = (rep_rt.s(), rep_st.s(), rep_rt.t());
    if rep_rs.s() != r || rep_rs.t() != s || rep_st.t() != t || r > s || s > t {
        return Err(Error::InvalidArgument(format!(
            "horizons ({}, {}), ({}, {}), ({}, {}) do not form a triple r <= s <= t",
            rep_rt.s(),
            rep_rt.t(),
            rep_rs.s(),
            rep_rs.t(),
            rep_st.s(),
            rep_st.t()
        )));
    }
    q.check_on(lattice)?;
    for rep in [rep_rt, rep_rs, rep_st] {
        if let Some(n) = first_non_ac(lattice, q, rep.reference(), rep.s()) {
            return Err(Error::NotAbsolutelyContinuous(n));
        }
    }
    let a_rt = conjugate_penalty(lattice, rep_rt, q)?;
    let a_rs = conjugate_penalty(lattice, rep_rs, q)?;
    let a_st = conjugate_penalty(lattice, rep_st, q)?;
    let mut residual = Vec::with_capacity(lattice.len_at(r));
    let mut indeterminate = Vec::new();
    let mut max_abs: f64 = 0.0;
    for n in lattice.nodes_at(r) {
        let mut cond = ExtendedReal::Finite(0.0);
        for (m, p) in q.conditional_law(lattice, n, s) {
            if p > 0.0 {
                cond = cond.plus(match a_st.get(m) {
                    ExtendedReal::Finite(a) => ExtendedReal::Finite(p * a),
                    inf => inf,
                });
            }
        }
        let rhs = a_rs.get(n.index).plus(cond);
        let res = match (a_rt.get(n.index), rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => Residual::Finite(a - b),
            (ExtendedReal::PlusInfinity, ExtendedReal::Finite(_)) => Residual::Unbounded { positive: true },
            (ExtendedReal::Finite(_), ExtendedReal::PlusInfinity) => Residual::Unbounded { positive: false },
            _ => Residual::Indeterminate,
        };
        match res {
            Residual::Finite(v) => max_abs = max_abs.max(v.abs()),
            Residual::Unbounded { .. } => max_abs = f64::INFINITY,
            Residual::Indeterminate => indeterminate.push(n),
        }
        residual.push(res);
    }
    Ok(CocycleReport {
        time: r,
        residual,
        max_abs,
        indeterminate,
    })
}

/// Largest recursion defect over a test set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionReport {
    pub max_violation: f64,
    pub witness_node: Option<NodeRef>,
    /// Index of the witness in the test set.
    pub witness_index: Option<usize>,
    pub witness_x: Option<Vec<f64>>,
    /// `(r, s, t)` of the witness.
    pub witness_times: Option<(usize, usize, usize)>,
}

impl RecursionReport {
    fn empty() -> Self {
        Self {
            max_violation: 0.0,
            witness_node: None,
            witness_index: None,
            witness_x: None,
            witness_times: None,
        }
    }

    fn merge(&mut self, other: RecursionReport) {
        if other.max_violation > self.max_violation || self.witness_node.is_none() && other.witness_node.is_some() {
            *self = other;
        }
    }
}

/// `max |ρ_{r,t}(X) − ρ_{r,s}(−ρ_{s,t}(X))|` over `xs`.
pub fn check_recursion<A, B, C>(
    lattice: &ScenarioLattice,
    rho_rt: &A,
    rho_rs: &B,
    rho_st: &C,
    xs: &[RandomVariable],
) -> Result<RecursionReport>
where
    A: ConditionalRisk + ?Sized,
    B: ConditionalRisk + ?Sized,
    C: ConditionalRisk + ?Sized,
{
    let composed = compose(rho_rs, rho_st)?;
    if composed.horizon() != rho_rt.horizon() {
        return Err(Error::InvalidArgument("direct and composed horizons differ".into()));
    }
    let (r, t) = rho_rt.horizon();
    let s = rho_st.horizon().0;
    let mut report = RecursionReport::empty();
    for (k, x) in xs.iter().enumerate() {
        let direct = rho_rt.evaluate(lattice, x)?;
        let via = composed.evaluate(lattice, x)?;
        for i in 0..direct.len() {
            let v = (direct.get(i) - via.get(i)).abs();
            if v > report.max_violation || report.witness_node.is_none() {
                report = RecursionReport {
                    max_violation: v,
                    witness_node: Some(NodeRef::new(r, i)),
                    witness_index: Some(k),
                    witness_x: Some(x.values().to_vec()),
                    witness_times: Some((r, s, t)),
                };
            }
        }
    }
    Ok(report)
}

/// [`check_recursion`] for every triple `r < s < t` of a dynamic risk
/// measure; test variables live at the terminal time.
pub fn check_recursion_dynamic(dynamic: &DynamicRM, xs: &[RandomVariable]) -> Result<RecursionReport> {
    let l = &dynamic.lattice;
    let big_t = l.terminal();
    let mut report = RecursionReport::empty();
    for r in 0..=big_t {
        for s in r..=big_t {
            for t in s..=big_t {
                let xt: Vec<RandomVariable> = xs
                    .iter()
                    .filter(|x| x.time() <= t)
                    .cloned()
                    .collect();
                let part = check_recursion(
                    l,
                    &dynamic.evaluator(r, t)?,
                    &dynamic.evaluator(r, s)?,
                    &dynamic.evaluator(s, t)?,
                    &xt,
                )?;
                report.merge(part);
            }
        }
    }
    Ok(report)
}

/// `X = Z + Y` with `Z ∈ A_{r,s}(Q)` and `Y ∈ A_{s,t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// `Z = −ρ_{s,t}(X)` at time `s`.
    pub z: RandomVariable,
    /// `Y = X + ρ_{s,t}(X)` at time `t`.
    pub y: RandomVariable,
    pub y_accepted: bool,
    pub z_accepted: bool,
    /// `max |X − (Z + Y)|`.
    pub reconstruction_error: f64,
}

fn accepted_on(values: &RandomVariable, relevant: Option<&[bool]>) -> Option<usize> {
    (0..values.len()).find(|&i| relevant.map_or(true, |r| r[i]) && values.get(i) > ACCEPTANCE_TOLERANCE)
}

pub fn acceptance_decompose(
    dynamic: &DynamicRM,
    x: &RandomVariable,
    r: usize,
    s: usize,
    t: usize,
    q: &Measure,
) -> Result<Decomposition> {
    let l = &dynamic.lattice;
    dynamic.check_pair(r, s)?;
    dynamic.check_pair(s, t)?;
    q.check_on(l)?;
    let x = lift_to_horizon(l, x, t)?;
    let charged_r = charged_nodes(l, q, r);
    let rho_rt = dynamic.evaluate(r, t, &x)?;
    if let Some(i) = accepted_on(&rho_rt, Some(&charged_r)) {
        return Err(Error::NotAccepted(NodeRef::new(r, i)));
    }
    let rho_st = dynamic.evaluate(s, t, &x)?;
    let z = rho_st.neg();
    let y = x.add(&lift(l, &rho_st, t)?)?;
    let y_accepted = accepted_on(&dynamic.evaluate(s, t, &y)?, None).is_none();
    let z_accepted = accepted_on(&dynamic.evaluate(r, s, &z)?, Some(&charged_r)).is_none();
    let rebuilt = lift(l, &z, t)?.add(&y)?;
    let reconstruction_error = x.sub(&rebuilt)?.max_abs();
    Ok(Decomposition {
        z,
        y,
        y_accepted,
        z_accepted,
        reconstruction_error,
    })
}

/// Forward direction of acceptance-set additivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SumCheck {
    pub inputs_accepted: bool,
    pub sum_accepted: bool,
}

/// For `Z` at time `s` and `Y` at time `t`: whether `Z ∈ A_{r,s}(Q)`,
/// `Y ∈ A_{s,t}` and `Z + Y ∈ A_{r,t}(Q)`.
pub fn acceptance_sum_check(
    dynamic: &DynamicRM,
    z: &RandomVariable,
    y: &RandomVariable,
    r: usize,
    q: &Measure,
) -> Result<SumCheck> {
    let l = &dynamic.lattice;
    let (s, t) = (z.time(), y.time());
    dynamic.check_pair(r, s)?;
    dynamic.check_pair(s, t)?;
    q.check_on(l)?;
    let charged_r = charged_nodes(l, q, r);
    let z_ok = accepted_on(&dynamic.evaluate(r, s, z)?, Some(&charged_r)).is_none();
    let y_ok = accepted_on(&dynamic.evaluate(s, t, y)?, None).is_none();
    let sum = lift(l, z, t)?.add(y)?;
    let sum_ok = accepted_on(&dynamic.evaluate(r, t, &sum)?, Some(&charged_r)).is_none();
    Ok(SumCheck {
        inputs_accepted: z_ok && y_ok,
        sum_accepted: sum_ok,
    })
}

/// `max_{s < s'} [E_P(ρ_{s',T}(X) | B_s) − ρ_{s,T}(X)]` over the grid, at
/// every node. Requires a normalized dynamic risk measure whose one-step
/// structure offers `P`'s kernel with zero penalty at every node.
pub fn supermartingale_check(dynamic: &DynamicRM, x: &RandomVariable, p: &Measure, grid: &[usize]) -> Result<f64> {
    let l = &dynamic.lattice;
    p.check_on(l)?;
    for u in 0..l.terminal() {
        for n in l.nodes_at(u) {
            let entries = dynamic.structure.entries(n);
            if dynamic.structure.min_penalty(n) != 0.0 {
                return Err(Error::Precondition {
                    node: n,
                    reason: "smallest one-step penalty is not zero".into(),
                });
            }
            let k = p.kernel(n);
            let found = entries.iter().any(|e| {
                e.penalty == ExtendedReal::Finite(0.0)
                    && e.weights.iter().zip(k).all(|(a, b)| (a - b).abs() <= 1e-12)
            });
            if !found {
                return Err(Error::Precondition {
                    node: n,
                    reason: "reference kernel is not a zero-penalty entry".into(),
                });
            }
        }
    }
    let big_t = l.terminal();
    let mut grid: Vec<usize> = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if let Some(&g) = grid.last() {
        l.check_time(g)?;
    }
    let values = dynamic.evaluate_all(0, big_t, x)?;
    let mut worst = f64::NEG_INFINITY;
    for (a, &s) in grid.iter().enumerate() {
        for &s2 in &grid[a + 1..] {
            let e = regular_conditional_expectation(l, &values[s2], p, s)?;
            for i in 0..e.len() {
                worst = worst.max(e.get(i) - values[s].get(i));
            }
        }
    }
    Ok(if worst == f64::NEG_INFINITY { 0.0 } else { worst })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::fixtures::*;
    use crate::lattice::coordinate_process;
    use crate::risk::rm_evaluate;

    fn b(l: &ScenarioLattice, t: usize) -> RandomVariable {
        coordinate_process(l, t).unwrap().remove(0)
    }

    fn sublinear() -> DynamicRM {
        build_dynamic(&fix_a_lattice(), fix_a_structure(0.0, 0.0)).unwrap()
    }

    #[test]
    fn compose_examples() {
        let d = sublinear();
        let l = d.lattice().clone();
        let c = compose(d.evaluator(0, 1).unwrap(), d.evaluator(1, 2).unwrap()).unwrap();
        assert_eq!(c.horizon(), (0, 2));
        let inner = d.evaluate(1, 2, &b(&l, 2)).unwrap();
        assert_eq!(inner.neg().values(), b(&l, 1).values());
        assert_abs_diff_eq!(c.evaluate(&l, &b(&l, 2)).unwrap().get(0), 0.0, epsilon = 1e-15);

        let with_id = compose(d.evaluator(0, 1).unwrap(), IdentityRisk { s: 1 }).unwrap();
        let y = b(&l, 1);
        assert_eq!(
            with_id.evaluate(&l, &y).unwrap(),
            d.evaluate(0, 1, &y).unwrap()
        );
        let k = RandomVariable::constant(&l, 2, 3.0).unwrap();
        assert_abs_diff_eq!(c.evaluate(&l, &k).unwrap().get(0), -3.0, epsilon = 1e-15);
        assert!(compose(d.evaluator(0, 1).unwrap(), d.evaluator(0, 2).unwrap()).is_err());
    }

    #[test]
    fn build_examples() {
        let d = sublinear();
        let l = d.lattice().clone();
        assert_abs_diff_eq!(d.evaluate(0, 2, &b(&l, 2)).unwrap().get(0), 0.0, epsilon = 1e-15);

        let single = OneStepStructure::from_fn(&l, |_| {
            vec![OneStepEntry::new(vec![0.6, 0.4], ExtendedReal::Finite(0.0))]
        })
        .unwrap();
        let d1 = build_dynamic(&l, single).unwrap();
        let x = b(&l, 2).map(|v| v * v + v);
        let e = regular_conditional_expectation(&l, &x.neg(), &fix_a_q2(), 0).unwrap();
        assert_abs_diff_eq!(d1.evaluate(0, 2, &x).unwrap().get(0), e.get(0), epsilon = 1e-14);

        // rho_{1,2}(B2) = (-1, 1); at the root the 0.6 kernel gives -0.2 - 0.1.
        let pen = build_dynamic(&l, fix_a_structure(0.0, 0.1)).unwrap();
        let w = pen.evaluate_all(0, 2, &b(&l, 2)).unwrap();
        assert_eq!(w[1].values(), &[-1.0, 1.0]);
        assert_abs_diff_eq!(w[0].get(0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn build_rejects_all_infinite_node() {
        let l = fix_a_lattice();
        let err = OneStepStructure::from_fn(&l, |n| {
            let a = if n == NodeRef::ROOT { ExtendedReal::PlusInfinity } else { ExtendedReal::Finite(0.0) };
            vec![OneStepEntry::new(vec![0.5, 0.5], a)]
        })
        .unwrap_err();
        assert_eq!(err, Error::NoFinitePenalty(NodeRef::ROOT));
    }

    #[test]
    fn expand_dual_examples() {
        let d = sublinear();
        let l = d.lattice().clone();
        let rep = expand_dual(&d, 0, 2, DEFAULT_SELECTION_CAP).unwrap();
        assert_eq!(rep.components().len(), 8);
        assert!(rep.components().iter().all(|c| c.penalty.values[0] == ExtendedReal::Finite(0.0)));
        for x in [b(&l, 2), b(&l, 2).neg(), b(&l, 2).map(|v| v * v)] {
            let a = rm_evaluate(&l, &rep, &x).unwrap().value.get(0);
            assert_abs_diff_eq!(a, d.evaluate(0, 2, &x).unwrap().get(0), epsilon = 1e-9);
        }

        let single = OneStepStructure::from_fn(&l, |_| {
            vec![OneStepEntry::new(vec![0.5, 0.5], ExtendedReal::Finite(0.0))]
        })
        .unwrap();
        let rep1 = expand_dual(&build_dynamic(&l, single).unwrap(), 0, 2, 10).unwrap();
        assert_eq!(rep1.components().len(), 1);

        let root_only = fix_a_structure(0.0, 0.0).map_penalties(|n, j, a| {
            if n == NodeRef::ROOT && j == 1 {
                ExtendedReal::Finite(0.1)
            } else {
                a
            }
        });
        let rep2 = expand_dual(&build_dynamic(&l, root_only).unwrap(), 0, 2, 10).unwrap();
        assert_eq!(rep2.components().len(), 8);
        let mut pens: Vec<f64> = rep2.components().iter().map(|c| c.penalty.values[0].finite().unwrap()).collect();
        pens.dedup();
        assert!(pens.iter().all(|&p| p == 0.0 || (p - 0.1).abs() < 1e-15));

        assert_eq!(
            expand_dual(&d, 0, 2, 4).unwrap_err(),
            Error::SelectionCap { count: 8, cap: 4 }
        );
    }

    #[test]
    fn cocycle_examples() {
        let d = build_dynamic(&fix_a_lattice(), fix_a_structure(0.0, 0.05)).unwrap();
        let l = d.lattice().clone();
        let rt = expand_dual(&d, 0, 2, 64).unwrap();
        let rs = expand_dual(&d, 0, 1, 64).unwrap();
        let st = expand_dual(&d, 1, 2, 64).unwrap();
        for c in rt.components() {
            let rep = check_cocycle(&l, &rt, &rs, &st, &c.measure).unwrap();
            assert!(rep.max_abs <= 1e-9, "{rep:?}");
        }
        let ss = expand_dual(&d, 1, 1, 64).unwrap();
        let rep = check_cocycle(&l, &rs, &rs, &ss, &rt.components()[3].measure).unwrap();
        assert!(rep.max_abs <= 1e-12);

        // Shifting every penalty of the long representation raises its
        // conjugate penalty by the same amount.
        let bumped = rt.map_penalties(|_, _, a| a.plus(ExtendedReal::Finite(0.05)));
        let rep = check_cocycle(&l, &bumped, &rs, &st, &rt.components()[5].measure).unwrap();
        match rep.residual[0] {
            Residual::Finite(v) => assert_abs_diff_eq!(v, 0.05, epsilon = 1e-7),
            other => panic!("unexpected residual {other:?}"),
        }
    }

    #[test]
    fn recursion_examples() {
        let d = sublinear();
        let l = d.lattice().clone();
        let xs: Vec<RandomVariable> = (0..10)
            .map(|k| RandomVariable::from_fn(&l, 2, |n, _| ((k * 7 + n.index * 3) % 5) as f64 - 2.0).unwrap())
            .collect();
        assert!(check_recursion_dynamic(&d, &xs).unwrap().max_violation <= 1e-12);

        // A direct root map with kernel 0.9 is not the composition of the
        // 0.5/0.6 one-step maps.
        let direct = DualRep::sublinear(&l, 0, 2, vec![binary_measure(&l, 0.9)]).unwrap();
        let rep = check_recursion(&l, &direct, &d.evaluator(0, 1).unwrap(), &d.evaluator(1, 2).unwrap(), &xs).unwrap();
        assert!(rep.max_violation > 0.01);
        assert!(rep.witness_node.is_some());

        let lifted = vec![lift(&l, &b(&l, 0).map(|_| 2.0), 2).unwrap()];
        let rep0 = check_recursion(&l, &d.evaluator(0, 2).unwrap(), &d.evaluator(0, 1).unwrap(), &d.evaluator(1, 2).unwrap(), &lifted).unwrap();
        assert_eq!(rep0.max_violation, 0.0);
    }

    #[test]
    fn decompose_examples() {
        let d = sublinear();
        let l = d.lattice().clone();
        let x = RandomVariable::new(&l, 2, vec![3.0, 1.0, 2.0, 0.5]).unwrap();
        assert!(d.evaluate(0, 2, &x).unwrap().get(0) <= 0.0);
        let dec = acceptance_decompose(&d, &x, 0, 1, 2, &fix_a_q1()).unwrap();
        assert!(dec.y_accepted && dec.z_accepted);
        assert!(dec.reconstruction_error <= 1e-12);

        // Already acceptable with zero risk at time 1.
        let y0 = RandomVariable::new(&l, 2, vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let dec0 = acceptance_decompose(&d, &y0, 0, 1, 2, &fix_a_q1()).unwrap();
        assert!(dec0.z.values().iter().all(|&v| v == 0.0));
        assert_eq!(dec0.y, y0);

        let bad = b(&l, 2).map(|v| v - 1.0);
        assert!(matches!(
            acceptance_decompose(&d, &bad, 0, 1, 2, &fix_a_q1()),
            Err(Error::NotAccepted(_))
        ));

        let z = RandomVariable::new(&l, 1, vec![1.0, 0.5]).unwrap();
        let sc = acceptance_sum_check(&d, &z, &y0, 0, &fix_a_q2()).unwrap();
        assert!(sc.inputs_accepted && sc.sum_accepted);
    }

    #[test]
    fn supermartingale_examples() {
        let d = sublinear();
        let l = d.lattice().clone();
        let v = supermartingale_check(&d, &b(&l, 2), &fix_a_q1(), &[0, 1, 2]).unwrap();
        assert!(v <= 1e-9);
        let single = OneStepStructure::from_fn(&l, |_| {
            vec![OneStepEntry::new(vec![0.6, 0.4], ExtendedReal::Finite(0.0))]
        })
        .unwrap();
        let d1 = build_dynamic(&l, single).unwrap();
        let v1 = supermartingale_check(&d1, &b(&l, 2).map(|x| x * x), &fix_a_q2(), &[0, 1, 2]).unwrap();
        assert!(v1.abs() <= 1e-12);
        let k = RandomVariable::constant(&l, 2, 4.0).unwrap();
        assert!(supermartingale_check(&d, &k, &fix_a_q2(), &[0, 1, 2]).unwrap().abs() <= 1e-15);
        let pen = build_dynamic(&l, fix_a_structure(0.1, 0.0)).unwrap();
        assert!(matches!(
            supermartingale_check(&pen, &k, &fix_a_q1(), &[0, 2]),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn normalization_propagates() {
        let d = build_dynamic(&fix_a_lattice(), fix_a_structure(0.0, 0.3)).unwrap();
        assert!(d.is_normalized());
        let zero = RandomVariable::constant(d.lattice(), 2, 0.0).unwrap();
        for s in 0..=2 {
            assert!(d.evaluate(s, 2, &zero).unwrap().values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn structure_json_round_trip() {
        let l = fix_a_lattice();
        let s = fix_a_structure(0.0, 0.1).map_penalties(|n, j, a| {
            if n.time == 1 && j == 1 {
                ExtendedReal::PlusInfinity
            } else {
                a
            }
        });
        let json = serde_json::to_string(&s.to_spec()).unwrap();
        let back = OneStepStructure::from_spec(&l, &serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
