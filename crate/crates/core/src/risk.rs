//! Conditional convex risk measures in dual form.
//!
//! A [`DualRep`] represents `ρ_{s,t}(X)(n) = max_k (E_{Q_k}(−X | n) − α_k(n))`
//! over a finite list of measures and penalties. Minimal penalties are the
//! convex conjugate of that max-of-affine map, computed node by node as a
//! small linear program over mixtures of the component conditional laws.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{lift, NodeRef, RandomVariable, ScenarioLattice};
use crate::lp::min_mixture_cost;
use crate::measures::{
    charged_nodes, check_restriction, mixture, mixture_weights, regular_conditional_expectation, Measure,
    MeasureSpec, Restriction,
};

/// Numerical slack of acceptance tests: `ρ(X) ≤ ACCEPTANCE_TOLERANCE`.
pub const ACCEPTANCE_TOLERANCE: f64 = 1e-12;

/// A real number or `+∞`. Penalties are the only quantities allowed to be
/// infinite; the sentinel is explicit and never arises from overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PlusInfinity,
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PlusInfinity => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// Sum with `+∞` absorbing.
    pub fn plus(self, other: ExtendedReal) -> ExtendedReal {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::PlusInfinity,
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(v: f64) -> Self {
        ExtendedReal::Finite(v)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PlusInfinity => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => s.serialize_f64(*v),
            ExtendedReal::PlusInfinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = ExtendedReal;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a finite number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<ExtendedReal, E> {
                if v.is_finite() {
                    Ok(ExtendedReal::Finite(v))
                } else {
                    Err(E::custom("non-finite number; write \"inf\" for an infinite penalty"))
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ExtendedReal, E> {
                Ok(ExtendedReal::Finite(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ExtendedReal, E> {
                Ok(ExtendedReal::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ExtendedReal, E> {
                match v {
                    "inf" | "+inf" => Ok(ExtendedReal::PlusInfinity),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// A time-`s` random variable with values in `ℝ ∪ {+∞}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyVariable {
    pub time: usize,
    pub values: Vec<ExtendedReal>,
}

impl PenaltyVariable {
    pub fn zero(lattice: &ScenarioLattice, time: usize) -> Result<Self> {
        lattice.check_time(time)?;
        Ok(Self {
            time,
            values: vec![ExtendedReal::Finite(0.0); lattice.len_at(time)],
        })
    }

    pub fn from_finite(x: &RandomVariable) -> Self {
        Self {
            time: x.time(),
            values: x.values().iter().map(|&v| ExtendedReal::Finite(v)).collect(),
        }
    }

    pub fn get(&self, i: usize) -> ExtendedReal {
        self.values[i]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_on(&self, lattice: &ScenarioLattice) -> Result<()> {
        lattice.check_time(self.time)?;
        if self.values.len() != lattice.len_at(self.time) {
            return Err(Error::Shape(format!(
                "penalty has {} values for {} nodes at time {}",
                self.values.len(),
                lattice.len_at(self.time),
                self.time
            )));
        }
        if self.values.iter().any(|v| matches!(v, ExtendedReal::Finite(x) if !x.is_finite())) {
            return Err(Error::InvalidArgument("penalty values must be finite or +inf".into()));
        }
        Ok(())
    }
}

/// One `(Q_k, α_k)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub measure: Measure,
    pub penalty: PenaltyVariable,
}

/// A conditional risk map `ρ_{s,t}` from time-`t` to time-`s` variables.
pub trait ConditionalRisk {
    /// `(s, t)`.
    fn horizon(&self) -> (usize, usize);

    /// Evaluates at a variable measurable at time `t` or earlier (earlier
    /// variables are lifted first).
    fn evaluate(&self, lattice: &ScenarioLattice, x: &RandomVariable) -> Result<RandomVariable>;
}

pub(crate) fn lift_to_horizon(lattice: &ScenarioLattice, x: &RandomVariable, t: usize) -> Result<RandomVariable> {
    x.check_on(lattice)?;
    if x.time() > t {
        return Err(Error::TimeOrder {
            earlier: t,
            later: x.time(),
        });
    }
    lift(lattice, x, t)
}

/// Finite dual representation of `ρ_{s,t}`.
///
/// `reference` plays the role of the canonical measure `P`. Every component
/// is stored with the reference kernels at times before `s`, so that its
/// restriction to the time-`s` sigma-algebra equals the reference; the
/// kernels before `s` never enter conditional values at time `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualRep {
    s: usize,
    t: usize,
    components: Vec<Component>,
    reference: Measure,
}

/// Wire format: `{"s":…,"t":…,"components":[{"measure":…,"penalty":[…|"inf"]},…]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualRepSpec {
    pub s: usize,
    pub t: usize,
    pub components: Vec<ComponentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<MeasureSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub measure: MeasureSpec,
    pub penalty: Vec<ExtendedReal>,
}

fn align_before(q: &Measure, reference: &Measure, s: usize) -> Measure {
    let mut kernels = q.kernels().to_vec();
    kernels[..s].clone_from_slice(&reference.kernels()[..s]);
    Measure::from_raw(kernels)
}

impl DualRep {
    pub fn new(
        lattice: &ScenarioLattice,
        s: usize,
        t: usize,
        components: Vec<Component>,
        reference: Measure,
    ) -> Result<Self> {
        lattice.check_time(t)?;
        if s > t {
            return Err(Error::TimeOrder { earlier: t, later: s });
        }
        if components.is_empty() {
            return Err(Error::InvalidArgument("a dual representation needs a component".into()));
        }
        reference.check_on(lattice)?;
        let mut aligned = Vec::with_capacity(components.len());
        for c in components {
            c.measure.check_on(lattice)?;
            c.penalty.check_on(lattice)?;
            if c.penalty.time != s {
                return Err(Error::Shape(format!(
                    "penalty at time {} for a representation at time {s}",
                    c.penalty.time
                )));
            }
            aligned.push(Component {
                measure: align_before(&c.measure, &reference, s),
                penalty: c.penalty,
            });
        }
        for i in 0..lattice.len_at(s) {
            if aligned.iter().all(|c| !c.penalty.get(i).is_finite()) {
                return Err(Error::NoFinitePenalty(NodeRef::new(s, i)));
            }
        }
        Ok(Self {
            s,
            t,
            components: aligned,
            reference,
        })
    }

    /// Uses the dyadic mixture of the component measures as reference.
    pub fn from_components(lattice: &ScenarioLattice, s: usize, t: usize, components: Vec<Component>) -> Result<Self> {
        let measures: Vec<Measure> = components.iter().map(|c| c.measure.clone()).collect();
        let weights = mixture_weights(measures.len());
        let reference = mixture(lattice, &measures, &weights)?;
        Self::new(lattice, s, t, components, reference)
    }

    /// Zero-penalty representation over the given measures.
    pub fn sublinear(lattice: &ScenarioLattice, s: usize, t: usize, measures: Vec<Measure>) -> Result<Self> {
        let zero = PenaltyVariable::zero(lattice, s)?;
        let comps = measures
            .into_iter()
            .map(|measure| Component {
                measure,
                penalty: zero.clone(),
            })
            .collect();
        Self::from_components(lattice, s, t, comps)
    }

    pub fn from_spec(lattice: &ScenarioLattice, spec: &DualRepSpec) -> Result<Self> {
        let comps = spec
            .components
            .iter()
            .map(|c| {
                Ok(Component {
                    measure: Measure::from_spec(lattice, &c.measure)?,
                    penalty: PenaltyVariable {
                        time: spec.s,
                        values: c.penalty.clone(),
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        match &spec.reference {
            Some(r) => Self::new(lattice, spec.s, spec.t, comps, Measure::from_spec(lattice, r)?),
            None => Self::from_components(lattice, spec.s, spec.t, comps),
        }
    }

    pub fn to_spec(&self) -> DualRepSpec {
        DualRepSpec {
            s: self.s,
            t: self.t,
            components: self
                .components
                .iter()
                .map(|c| ComponentSpec {
                    measure: c.measure.to_spec(),
                    penalty: c.penalty.values.clone(),
                })
                .collect(),
            reference: Some(self.reference.to_spec()),
        }
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn reference(&self) -> &Measure {
        &self.reference
    }

    /// Copy with every penalty replaced by `f(component, node, penalty)`.
    pub fn map_penalties(&self, mut f: impl FnMut(usize, usize, ExtendedReal) -> ExtendedReal) -> Self {
        let mut out = self.clone();
        for (k, c) in out.components.iter_mut().enumerate() {
            for (i, v) in c.penalty.values.iter_mut().enumerate() {
                *v = f(k, i, *v);
            }
        }
        out
    }

    /// True when `ρ(0) = 0`, i.e. the smallest penalty at every node is 0.
    pub fn is_normalized(&self) -> bool {
        (0..self.components[0].penalty.values.len()).all(|i| {
            self.components
                .iter()
                .filter_map(|c| c.penalty.get(i).finite())
                .fold(f64::INFINITY, f64::min)
                == 0.0
        })
    }
}

/// `ρ(X)` with the lowest attaining component index per node.
#[derive(Debug, Clone, PartialEq)]
pub struct RmValue {
    pub value: RandomVariable,
    pub argmax: Vec<usize>,
}

pub fn rm_evaluate(lattice: &ScenarioLattice, rep: &DualRep, x: &RandomVariable) -> Result<RmValue> {
    let x = lift_to_horizon(lattice, x, rep.t)?;
    let neg = x.neg();
    let n = lattice.len_at(rep.s);
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut arg = vec![usize::MAX; n];
    for (k, c) in rep.components.iter().enumerate() {
        let e = regular_conditional_expectation(lattice, &neg, &c.measure, rep.s)?;
        for i in 0..n {
            if let ExtendedReal::Finite(a) = c.penalty.get(i) {
                let v = e.get(i) - a;
                if v > best[i] {
                    best[i] = v;
                    arg[i] = k;
                }
            }
        }
    }
    if let Some(i) = arg.iter().position(|&k| k == usize::MAX) {
        return Err(Error::NoFinitePenalty(NodeRef::new(rep.s, i)));
    }
    Ok(RmValue {
        value: RandomVariable::from_parts(rep.s, best),
        argmax: arg,
    })
}

impl ConditionalRisk for DualRep {
    fn horizon(&self) -> (usize, usize) {
        (self.s, self.t)
    }

    fn evaluate(&self, lattice: &ScenarioLattice, x: &RandomVariable) -> Result<RandomVariable> {
        Ok(rm_evaluate(lattice, self, x)?.value)
    }
}

/// Conditional laws of the time-`t` descendants of `n`, in descendant order.
fn subtree_law(lattice: &ScenarioLattice, q: &Measure, n: NodeRef, t: usize) -> Vec<f64> {
    q.conditional_law(lattice, n, t).into_iter().map(|(_, p)| p).collect()
}

/// The conjugate penalty `min { Σ λ_k α_k(n) : Σ λ_k q_k(n,·) = q(n,·) }`
/// at every time-`s` node, without any requirement on the restriction of
/// `Q` to the time-`s` sigma-algebra. Components with infinite penalty at a
/// node are left out there.
pub fn conjugate_penalty(lattice: &ScenarioLattice, rep: &DualRep, q: &Measure) -> Result<PenaltyVariable> {
    q.check_on(lattice)?;
    let values = lattice
        .nodes_at(rep.s)
        .map(|n| {
            let target = subtree_law(lattice, q, n, rep.t);
            let (points, costs): (Vec<_>, Vec<_>) = rep
                .components
                .iter()
                .filter_map(|c| {
                    c.penalty
                        .get(n.index)
                        .finite()
                        .map(|a| (subtree_law(lattice, &c.measure, n, rep.t), a))
                })
                .unzip();
            Ok(match min_mixture_cost(&points, &costs, &target)? {
                Some(v) => ExtendedReal::Finite(v),
                None => ExtendedReal::PlusInfinity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PenaltyVariable { time: rep.s, values })
}

/// Minimal penalty `α^m_{s,t}(Q)`; `Q` must agree with the reference measure
/// up to time `s`.
pub fn minimal_penalty(lattice: &ScenarioLattice, rep: &DualRep, q: &Measure) -> Result<PenaltyVariable> {
    let r = check_restriction(lattice, q, &rep.reference, rep.s)?;
    if r != Restriction::Equal {
        return Err(Error::Restriction {
            time: rep.s,
            expected: Restriction::Equal.label(),
            found: r.label(),
        });
    }
    conjugate_penalty(lattice, rep, q)
}

/// Glues `X_i` on the cylinders of the time-`s` nodes listed in `A_i`.
pub fn partition_combine(
    lattice: &ScenarioLattice,
    s: usize,
    pieces: &[(RandomVariable, Vec<usize>)],
) -> Result<RandomVariable> {
    lattice.check_time(s)?;
    let first = pieces
        .first()
        .ok_or_else(|| Error::InvalidArgument("partition_combine needs at least one piece".into()))?;
    let t = first.0.time();
    if t < s {
        return Err(Error::TimeOrder { earlier: s, later: t });
    }
    let mut owner = vec![usize::MAX; lattice.len_at(s)];
    for (k, (x, set)) in pieces.iter().enumerate() {
        x.check_on(lattice)?;
        if x.time() != t {
            return Err(Error::Shape("all pieces must live at the same time".into()));
        }
        for &i in set {
            if i >= owner.len() {
                return Err(Error::InvalidArgument(format!("node index {i} out of range at time {s}")));
            }
            if owner[i] != usize::MAX {
                return Err(Error::InvalidArgument(format!("node {} appears in two pieces", NodeRef::new(s, i))));
            }
            owner[i] = k;
        }
    }
    if let Some(i) = owner.iter().position(|&k| k == usize::MAX) {
        return Err(Error::InvalidArgument(format!(
            "node {} is not covered by the partition",
            NodeRef::new(s, i)
        )));
    }
    let anc = lattice.ancestor_map(s, t);
    let values = anc
        .iter()
        .enumerate()
        .map(|(j, &a)| pieces[owner[a]].0.get(j))
        .collect();
    Ok(RandomVariable::from_parts(t, values))
}

/// Node-wise acceptance `ρ(X) ≤ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceReport {
    /// Value of `ρ(X)` per time-`s` node.
    pub risk: Vec<f64>,
    /// Whether each node is relevant (charged by `P`, or by `Q` if given).
    pub relevant: Vec<bool>,
    pub accepted_nodes: Vec<bool>,
    pub accepted: bool,
}

pub fn acceptance_check(
    lattice: &ScenarioLattice,
    rep: &DualRep,
    x: &RandomVariable,
    q: Option<&Measure>,
) -> Result<AcceptanceReport> {
    let risk = rm_evaluate(lattice, rep, x)?.value.into_values();
    let relevant = match q {
        Some(q) => {
            q.check_on(lattice)?;
            charged_nodes(lattice, q, rep.s)
        }
        None => charged_nodes(lattice, &rep.reference, rep.s),
    };
    let accepted_nodes: Vec<bool> = risk
        .iter()
        .zip(&relevant)
        .map(|(&r, &rel)| !rel || r <= ACCEPTANCE_TOLERANCE)
        .collect();
    let accepted = accepted_nodes.iter().all(|&a| a);
    Ok(AcceptanceReport {
        risk,
        relevant,
        accepted_nodes,
        accepted,
    })
}

/// `max_n [ρ(fX + (1−f)Y) − (fρ(X) + (1−f)ρ(Y))](n)` for a time-`s` weight
/// `0 ≤ f ≤ 1`.
pub fn strong_convexity_check(
    lattice: &ScenarioLattice,
    rep: &DualRep,
    x: &RandomVariable,
    y: &RandomVariable,
    f: &RandomVariable,
) -> Result<f64> {
    f.check_on(lattice)?;
    if f.time() != rep.s {
        return Err(Error::Shape(format!("weight must live at time {}", rep.s)));
    }
    if f.values().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidArgument("weight must take values in [0, 1]".into()));
    }
    let x = lift_to_horizon(lattice, x, rep.t)?;
    let y = lift_to_horizon(lattice, y, rep.t)?;
    let fl = lift(lattice, f, rep.t)?;
    let mixed = fl.mul(&x)?.add(&fl.map(|v| 1.0 - v).mul(&y)?)?;
    let lhs = rm_evaluate(lattice, rep, &mixed)?.value;
    let rx = rm_evaluate(lattice, rep, &x)?.value;
    let ry = rm_evaluate(lattice, rep, &y)?.value;
    Ok((0..lhs.len())
        .map(|i| {
            let w = f.get(i);
            lhs.get(i) - (w * rx.get(i) + (1.0 - w) * ry.get(i))
        })
        .fold(f64::NEG_INFINITY, f64::max))
}
