//! Finite scenario trees.
//!
//! A [`ScenarioLattice`] discretizes the path space: each node at time index
//! `t` is one cylinder of the time-`t` sigma-algebra, and the value of the
//! coordinate process at a node is the sum of the increments along its
//! ancestry, so every path starts at the origin. Random variables measurable
//! at time `t` are plain vectors indexed by the time-`t` nodes.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the total number of nodes a lattice may hold.
pub const DEFAULT_MAX_NODES: usize = 2_000_000;

/// Reference to a node: time index and position within that time slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct NodeRef {
    pub time: usize,
    pub index: usize,
}

impl NodeRef {
    pub const ROOT: NodeRef = NodeRef { time: 0, index: 0 };

    pub fn new(time: usize, index: usize) -> Self {
        Self { time, index }
    }
}

impl From<(usize, usize)> for NodeRef {
    fn from((time, index): (usize, usize)) -> Self {
        Self { time, index }
    }
}

impl From<NodeRef> for (usize, usize) {
    fn from(n: NodeRef) -> Self {
        (n.time, n.index)
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.time, self.index)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    parent: Option<usize>,
    increment: Vec<f64>,
    position: Vec<f64>,
    children: Vec<usize>,
}

/// One entry of the JSON node table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
    #[serde(default)]
    pub increment: Vec<f64>,
}

/// Wire format: `{"times":[…], "dimension":d, "nodes":[[{"parent":i,"increment":[…]},…],…]}`.
///
/// `nodes` either lists every time slice (the root slice holding a single
/// entry without parent) or only the slices after the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub times: Vec<f64>,
    pub dimension: usize,
    pub nodes: Vec<Vec<NodeSpec>>,
}

/// A finite scenario tree with a unique root at time index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioLattice {
    times: Vec<f64>,
    dimension: usize,
    levels: Vec<Vec<Node>>,
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidLattice(format!(
            "need at least two time points, got {}",
            times.len()
        )));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidLattice("non-finite time point".into()));
    }
    if times[0] != 0.0 {
        return Err(Error::InvalidLattice(format!("first time point must be 0, got {}", times[0])));
    }
    for w in times.windows(2) {
        if w[1] == w[0] {
            return Err(Error::InvalidLattice(format!("duplicate time point {}", w[0])));
        }
        if w[1] < w[0] {
            return Err(Error::InvalidLattice(format!(
                "time points not increasing: {} after {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

impl ScenarioLattice {
    /// Builds a tree by asking `branching` for the child increments of every
    /// non-terminal node. Children are numbered in parent order, then in the
    /// order the increments are returned.
    pub fn from_branching<F>(times: Vec<f64>, dimension: usize, max_nodes: usize, mut branching: F) -> Result<Self>
    where
        F: FnMut(NodeRef, &[f64]) -> Vec<Vec<f64>>,
    {
        check_times(&times)?;
        if dimension == 0 {
            return Err(Error::InvalidLattice("dimension must be at least 1".into()));
        }
        let root = Node {
            parent: None,
            increment: vec![0.0; dimension],
            position: vec![0.0; dimension],
            children: Vec::new(),
        };
        let mut levels = vec![vec![root]];
        let mut total = 1usize;
        for t in 0..times.len() - 1 {
            let mut next = Vec::new();
            for i in 0..levels[t].len() {
                let pos = levels[t][i].position.clone();
                let incs = branching(NodeRef::new(t, i), &pos);
                if incs.is_empty() {
                    return Err(Error::InvalidLattice(format!(
                        "empty branching at node {}",
                        NodeRef::new(t, i)
                    )));
                }
                for inc in incs {
                    if inc.len() != dimension {
                        return Err(Error::InvalidLattice(format!(
                            "increment of length {} at node {}, expected {dimension}",
                            inc.len(),
                            NodeRef::new(t, i)
                        )));
                    }
                    if inc.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidLattice("non-finite increment".into()));
                    }
                    total += 1;
                    if total > max_nodes {
                        return Err(Error::NodeLimit { count: total, limit: max_nodes });
                    }
                    let position = pos.iter().zip(&inc).map(|(p, d)| p + d).collect();
                    levels[t][i].children.push(next.len());
                    next.push(Node {
                        parent: Some(i),
                        increment: inc,
                        position,
                        children: Vec::new(),
                    });
                }
            }
            levels.push(next);
        }
        Ok(Self { times, dimension, levels })
    }

    /// Every non-terminal node branches with the same increments.
    pub fn uniform(times: Vec<f64>, increments: &[Vec<f64>]) -> Result<Self> {
        let dimension = increments.first().map(Vec::len).unwrap_or(1);
        Self::from_branching(times, dimension, DEFAULT_MAX_NODES, |_, _| increments.to_vec())
    }

    /// One-dimensional recombining-in-value trinomial tree with moves `{+h, 0, -h}`.
    pub fn trinomial(times: Vec<f64>, h: f64) -> Result<Self> {
        Self::uniform(times, &[vec![h], vec![0.0], vec![-h]])
    }

    /// Builds from the JSON node table.
    pub fn from_spec(spec: &LatticeSpec) -> Result<Self> {
        Self::from_spec_with_limit(spec, DEFAULT_MAX_NODES)
    }

    pub fn from_spec_with_limit(spec: &LatticeSpec, max_nodes: usize) -> Result<Self> {
        check_times(&spec.times)?;
        let d = spec.dimension;
        if d == 0 {
            return Err(Error::InvalidLattice("dimension must be at least 1".into()));
        }
        let n_times = spec.times.len();
        let slices: &[Vec<NodeSpec>] = if spec.nodes.len() == n_times {
            if spec.nodes[0].len() != 1 || spec.nodes[0][0].parent.is_some() {
                return Err(Error::InvalidLattice("time slice 0 must hold exactly one root without parent".into()));
            }
            &spec.nodes[1..]
        } else if spec.nodes.len() + 1 == n_times {
            &spec.nodes[..]
        } else {
            return Err(Error::InvalidLattice(format!(
                "{} node slices for {} time points",
                spec.nodes.len(),
                n_times
            )));
        };
        let total: usize = 1 + slices.iter().map(Vec::len).sum::<usize>();
        if total > max_nodes {
            return Err(Error::NodeLimit { count: total, limit: max_nodes });
        }
        let mut levels = vec![vec![Node {
            parent: None,
            increment: vec![0.0; d],
            position: vec![0.0; d],
            children: Vec::new(),
        }]];
        for (k, slice) in slices.iter().enumerate() {
            let t = k + 1;
            let mut next = Vec::with_capacity(slice.len());
            for (i, ns) in slice.iter().enumerate() {
                let parent = ns.parent.ok_or_else(|| {
                    Error::InvalidLattice(format!("node {} has no parent", NodeRef::new(t, i)))
                })?;
                if parent >= levels[t - 1].len() {
                    return Err(Error::InvalidLattice(format!(
                        "node {} refers to missing parent {parent}",
                        NodeRef::new(t, i)
                    )));
                }
                if ns.increment.len() != d || ns.increment.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidLattice(format!(
                        "node {} has an invalid increment",
                        NodeRef::new(t, i)
                    )));
                }
                let position = levels[t - 1][parent]
                    .position
                    .iter()
                    .zip(&ns.increment)
                    .map(|(p, dlt)| p + dlt)
                    .collect();
                levels[t - 1][parent].children.push(i);
                next.push(Node {
                    parent: Some(parent),
                    increment: ns.increment.clone(),
                    position,
                    children: Vec::new(),
                });
            }
            levels.push(next);
        }
        for t in 0..n_times - 1 {
            if let Some(i) = levels[t].iter().position(|n| n.children.is_empty()) {
                return Err(Error::InvalidLattice(format!(
                    "empty branching at node {}",
                    NodeRef::new(t, i)
                )));
            }
        }
        Ok(Self {
            times: spec.times.clone(),
            dimension: d,
            levels,
        })
    }

    pub fn to_spec(&self) -> LatticeSpec {
        let nodes = self
            .levels
            .iter()
            .map(|lvl| {
                lvl.iter()
                    .map(|n| NodeSpec {
                        parent: n.parent,
                        increment: n.increment.clone(),
                    })
                    .collect()
            })
            .collect();
        LatticeSpec {
            times: self.times.clone(),
            dimension: self.dimension,
            nodes,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of time points.
    pub fn num_times(&self) -> usize {
        self.times.len()
    }

    /// Index of the terminal time.
    pub fn terminal(&self) -> usize {
        self.times.len() - 1
    }

    pub fn len_at(&self, t: usize) -> usize {
        self.levels.get(t).map_or(0, Vec::len)
    }

    pub fn total_nodes(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Node counts per time slice; two lattices with equal shapes accept the
    /// same measures.
    pub fn shape(&self) -> Vec<Vec<usize>> {
        self.levels
            .iter()
            .map(|l| l.iter().map(|n| n.children.len()).collect())
            .collect()
    }

    pub fn check_time(&self, t: usize) -> Result<()> {
        if t < self.times.len() {
            Ok(())
        } else {
            Err(Error::TimeIndex {
                index: t,
                len: self.times.len(),
            })
        }
    }

    pub fn contains(&self, n: NodeRef) -> bool {
        n.time < self.levels.len() && n.index < self.levels[n.time].len()
    }

    fn node(&self, n: NodeRef) -> &Node {
        &self.levels[n.time][n.index]
    }

    pub fn children(&self, n: NodeRef) -> &[usize] {
        &self.node(n).children
    }

    pub fn parent(&self, n: NodeRef) -> Option<NodeRef> {
        self.node(n).parent.map(|p| NodeRef::new(n.time - 1, p))
    }

    pub fn increment(&self, n: NodeRef) -> &[f64] {
        &self.node(n).increment
    }

    /// Value of the coordinate process at the node.
    pub fn position(&self, n: NodeRef) -> &[f64] {
        &self.node(n).position
    }

    /// Ancestor of `n` at time index `s <= n.time`.
    pub fn ancestor(&self, n: NodeRef, s: usize) -> NodeRef {
        debug_assert!(s <= n.time);
        let mut cur = n;
        while cur.time > s {
            cur = self.parent(cur).expect("non-root node has a parent");
        }
        cur
    }

    /// For every node at time `t`, the index of its ancestor at time `s`.
    pub fn ancestor_map(&self, s: usize, t: usize) -> Vec<usize> {
        let mut map: Vec<usize> = (0..self.len_at(t)).collect();
        for u in (s + 1..=t).rev() {
            for m in map.iter_mut() {
                *m = self.levels[u][*m].parent.expect("non-root node has a parent");
            }
        }
        map
    }

    /// Descendants of `n` at time `t >= n.time`, in slice order.
    pub fn descendants(&self, n: NodeRef, t: usize) -> Vec<usize> {
        let mut cur = vec![n.index];
        for u in n.time..t {
            cur = cur
                .iter()
                .flat_map(|&i| self.levels[u][i].children.iter().copied())
                .collect();
        }
        cur
    }

    /// Nodes from the root to `n`, root first.
    pub fn path_to(&self, n: NodeRef) -> Vec<NodeRef> {
        let mut path = vec![n];
        let mut cur = n;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    pub fn nodes_at(&self, t: usize) -> impl Iterator<Item = NodeRef> + '_ {
        (0..self.len_at(t)).map(move |i| NodeRef::new(t, i))
    }
}

/// A real-valued variable measurable at time index `time`: one value per
/// time-`time` node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomVariable {
    time: usize,
    values: Vec<f64>,
}

impl RandomVariable {
    pub fn new(lattice: &ScenarioLattice, time: usize, values: Vec<f64>) -> Result<Self> {
        lattice.check_time(time)?;
        if values.len() != lattice.len_at(time) {
            return Err(Error::Shape(format!(
                "{} values for {} nodes at time {time}",
                values.len(),
                lattice.len_at(time)
            )));
        }
        Ok(Self { time, values })
    }

    /// Unchecked constructor for values already known to match the lattice.
    pub(crate) fn from_parts(time: usize, values: Vec<f64>) -> Self {
        Self { time, values }
    }

    pub fn constant(lattice: &ScenarioLattice, time: usize, c: f64) -> Result<Self> {
        lattice.check_time(time)?;
        Ok(Self {
            time,
            values: vec![c; lattice.len_at(time)],
        })
    }

    pub fn from_fn<F>(lattice: &ScenarioLattice, time: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(NodeRef, &[f64]) -> f64,
    {
        lattice.check_time(time)?;
        let values = lattice.nodes_at(time).map(|n| f(n, lattice.position(n))).collect();
        Ok(Self { time, values })
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn check_on(&self, lattice: &ScenarioLattice) -> Result<()> {
        lattice.check_time(self.time)?;
        if self.values.len() != lattice.len_at(self.time) {
            return Err(Error::Shape(format!(
                "variable holds {} values, lattice has {} nodes at time {}",
                self.values.len(),
                lattice.len_at(self.time),
                self.time
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            time: self.time,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.time != other.time || self.values.len() != other.values.len() {
            return Err(Error::Shape(format!(
                "variables at times {} and {} cannot be combined",
                self.time, other.time
            )));
        }
        Ok(Self {
            time: self.time,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn neg(&self) -> Self {
        self.map(|v| -v)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Each time-`t` node inherits the value of its time-`s` ancestor.
pub fn lift(lattice: &ScenarioLattice, x: &RandomVariable, t: usize) -> Result<RandomVariable> {
    x.check_on(lattice)?;
    lattice.check_time(t)?;
    let s = x.time();
    if t < s {
        return Err(Error::TimeOrder { earlier: s, later: t });
    }
    if t == s {
        return Ok(x.clone());
    }
    let map = lattice.ancestor_map(s, t);
    Ok(RandomVariable::from_parts(t, map.iter().map(|&a| x.values[a]).collect()))
}

/// Coordinate process `B_s`, one variable per coordinate.
pub fn coordinate_process(lattice: &ScenarioLattice, s: usize) -> Result<Vec<RandomVariable>> {
    lattice.check_time(s)?;
    Ok((0..lattice.dimension())
        .map(|k| {
            RandomVariable::from_parts(s, lattice.nodes_at(s).map(|n| lattice.position(n)[k]).collect())
        })
        .collect())
}

/// Why a node set fails to be a stopping time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum StopViolation {
    UnknownNode(NodeRef),
    /// Root-to-leaf path that meets no stopped node.
    Uncovered(Vec<NodeRef>),
    /// Root-to-leaf path that meets more than one stopped node.
    Repeated(Vec<NodeRef>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StoppingTimeCheck {
    pub valid: bool,
    pub violation: Option<StopViolation>,
}

/// True iff every root-to-leaf path contains exactly one node of `stop`;
/// otherwise reports the first violating path in leaf order.
pub fn validate_stopping_time(lattice: &ScenarioLattice, stop: &[NodeRef]) -> StoppingTimeCheck {
    if let Some(&n) = stop.iter().find(|n| !lattice.contains(**n)) {
        return StoppingTimeCheck {
            valid: false,
            violation: Some(StopViolation::UnknownNode(n)),
        };
    }
    let set: BTreeSet<NodeRef> = stop.iter().copied().collect();
    let big_t = lattice.terminal();
    // Number of stopped nodes on the path to each node, propagated forward.
    let mut hits = vec![usize::from(set.contains(&NodeRef::ROOT))];
    for t in 1..=big_t {
        hits = lattice
            .nodes_at(t)
            .map(|n| {
                let p = lattice.parent(n).expect("non-root").index;
                hits[p] + usize::from(set.contains(&n))
            })
            .collect();
        // Hits never decrease along a path, so an early repeat is final.
        if let Some(i) = hits.iter().position(|&h| h > 1) {
            let leaf = lattice.descendants(NodeRef::new(t, i), big_t)[0];
            return StoppingTimeCheck {
                valid: false,
                violation: Some(StopViolation::Repeated(lattice.path_to(NodeRef::new(big_t, leaf)))),
            };
        }
    }
    match hits.iter().position(|&h| h != 1) {
        None => StoppingTimeCheck {
            valid: true,
            violation: None,
        },
        Some(i) => {
            let path = lattice.path_to(NodeRef::new(big_t, i));
            let violation = if hits[i] == 0 {
                StopViolation::Uncovered(path)
            } else {
                StopViolation::Repeated(path)
            };
            StoppingTimeCheck {
                valid: false,
                violation: Some(violation),
            }
        }
    }
}

/// A stopping time on the lattice: an antichain of nodes meeting every path
/// exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StoppingTime {
    nodes: BTreeSet<NodeRef>,
}

impl StoppingTime {
    pub fn new(lattice: &ScenarioLattice, nodes: impl IntoIterator<Item = NodeRef>) -> Result<Self> {
        let nodes: Vec<NodeRef> = nodes.into_iter().collect();
        let check = validate_stopping_time(lattice, &nodes);
        if !check.valid {
            return Err(Error::NotStoppingTime(format!("{:?}", check.violation)));
        }
        Ok(Self {
            nodes: nodes.into_iter().collect(),
        })
    }

    /// The deterministic time `tau = s`.
    pub fn deterministic(lattice: &ScenarioLattice, s: usize) -> Result<Self> {
        lattice.check_time(s)?;
        Ok(Self {
            nodes: lattice.nodes_at(s).collect(),
        })
    }

    pub fn nodes(&self) -> &BTreeSet<NodeRef> {
        &self.nodes
    }

    pub fn contains(&self, n: NodeRef) -> bool {
        self.nodes.contains(&n)
    }

    /// For every node, whether the path through it has already reached the
    /// stop set (the node itself or an ancestor is stopped).
    pub fn reached(&self, lattice: &ScenarioLattice) -> Vec<Vec<bool>> {
        let mut out: Vec<Vec<bool>> = Vec::with_capacity(lattice.num_times());
        out.push(vec![self.contains(NodeRef::ROOT)]);
        for t in 1..lattice.num_times() {
            let row = lattice
                .nodes_at(t)
                .map(|n| {
                    let p = lattice.parent(n).expect("non-root").index;
                    out[t - 1][p] || self.contains(n)
                })
                .collect();
            out.push(row);
        }
        out
    }

    /// Enumerates every stopping time of the lattice. Errors when more than
    /// `cap` exist.
    pub fn enumerate(lattice: &ScenarioLattice, cap: usize) -> Result<Vec<StoppingTime>> {
        fn count(lattice: &ScenarioLattice, n: NodeRef) -> u128 {
            if n.time == lattice.terminal() {
                return 1;
            }
            let prod = lattice.children(n).iter().fold(1u128, |acc, &c| {
                acc.saturating_mul(count(lattice, NodeRef::new(n.time + 1, c)))
            });
            prod.saturating_add(1)
        }
        fn build(lattice: &ScenarioLattice, n: NodeRef) -> Vec<Vec<NodeRef>> {
            let mut out = vec![vec![n]];
            if n.time == lattice.terminal() {
                return out;
            }
            let mut combos: Vec<Vec<NodeRef>> = vec![Vec::new()];
            for &c in lattice.children(n) {
                let sub = build(lattice, NodeRef::new(n.time + 1, c));
                combos = combos
                    .iter()
                    .flat_map(|prefix| {
                        sub.iter().map(move |s| {
                            let mut v = prefix.clone();
                            v.extend_from_slice(s);
                            v
                        })
                    })
                    .collect();
            }
            out.extend(combos);
            out
        }
        let total = count(lattice, NodeRef::ROOT);
        if total > cap as u128 {
            return Err(Error::SelectionCap { count: total, cap });
        }
        Ok(build(lattice, NodeRef::ROOT)
            .into_iter()
            .map(|nodes| StoppingTime {
                nodes: nodes.into_iter().collect(),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fix_a_counts() {
        let l = fixtures::fix_a_lattice();
        assert_eq!((l.len_at(0), l.len_at(1), l.len_at(2)), (1, 2, 4));
    }

    #[test]
    fn single_time_point_rejected() {
        assert!(ScenarioLattice::uniform(vec![0.0], &[vec![1.0]]).is_err());
        assert!(matches!(
            ScenarioLattice::uniform(vec![0.0, 1.0, 1.0], &[vec![1.0]]),
            Err(Error::InvalidLattice(_))
        ));
    }

    #[test]
    fn empty_branching_rejected() {
        let r = ScenarioLattice::from_branching(vec![0.0, 1.0], 1, 100, |_, _| Vec::new());
        assert!(matches!(r, Err(Error::InvalidLattice(_))));
    }

    #[test]
    fn trinomial_three_steps() {
        let l = ScenarioLattice::trinomial(vec![0.0, 1.0, 2.0, 3.0], 0.1).unwrap();
        assert_eq!(l.total_nodes(), 1 + 3 + 9 + 27);
    }

    #[test]
    fn node_limit_guard() {
        let r = ScenarioLattice::from_branching(vec![0.0, 1.0, 2.0, 3.0], 1, 20, |_, _| {
            vec![vec![1.0], vec![0.0], vec![-1.0]]
        });
        assert!(matches!(r, Err(Error::NodeLimit { .. })));
    }

    #[test]
    fn lift_examples() {
        let l = fixtures::fix_a_lattice();
        let x = RandomVariable::new(&l, 1, vec![1.0, -1.0]).unwrap();
        assert_eq!(lift(&l, &x, 2).unwrap().values(), &[1.0, 1.0, -1.0, -1.0]);
        assert_eq!(lift(&l, &x, 1).unwrap(), x);
        let c = RandomVariable::constant(&l, 0, 5.0).unwrap();
        assert_eq!(lift(&l, &c, 2).unwrap().values(), &[5.0; 4]);
        let x2 = RandomVariable::constant(&l, 2, 0.0).unwrap();
        assert!(matches!(lift(&l, &x2, 1), Err(Error::TimeOrder { .. })));
    }

    #[test]
    fn coordinate_examples() {
        let l = fixtures::fix_a_lattice();
        assert_eq!(coordinate_process(&l, 0).unwrap()[0].values(), &[0.0]);
        assert_eq!(coordinate_process(&l, 1).unwrap()[0].values(), &[1.0, -1.0]);
        assert_eq!(coordinate_process(&l, 2).unwrap()[0].values(), &[2.0, 0.0, 0.0, -2.0]);
        assert!(coordinate_process(&l, 3).is_err());
    }

    #[test]
    fn stopping_time_examples() {
        let l = fixtures::fix_a_lattice();
        let n = NodeRef::new;
        assert!(validate_stopping_time(&l, &[n(1, 0), n(1, 1)]).valid);
        assert!(validate_stopping_time(&l, &[n(1, 0), n(2, 2), n(2, 3)]).valid);
        let bad = validate_stopping_time(&l, &[n(1, 0), n(2, 0), n(2, 2), n(2, 3)]);
        assert!(!bad.valid);
        assert_eq!(
            bad.violation,
            Some(StopViolation::Repeated(vec![n(0, 0), n(1, 0), n(2, 0)]))
        );
        let uncovered = validate_stopping_time(&l, &[n(1, 0)]);
        assert!(matches!(uncovered.violation, Some(StopViolation::Uncovered(_))));
        assert!(!validate_stopping_time(&l, &[n(5, 0)]).valid);
    }

    #[test]
    fn enumerate_stopping_times_fix_a() {
        let l = fixtures::fix_a_lattice();
        let all = StoppingTime::enumerate(&l, 100).unwrap();
        // root, {u,d}, {u,du,dd}, {uu,ud,d}, {uu,ud,du,dd}
        assert_eq!(all.len(), 5);
        for tau in &all {
            let nodes: Vec<_> = tau.nodes().iter().copied().collect();
            assert!(validate_stopping_time(&l, &nodes).valid);
        }
        assert!(StoppingTime::enumerate(&l, 4).is_err());
    }

    #[test]
    fn json_round_trip() {
        let l = fixtures::fix_a_lattice();
        let json = serde_json::to_string(&l.to_spec()).unwrap();
        let spec: LatticeSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(ScenarioLattice::from_spec(&spec).unwrap(), l);
        // Root slice may be omitted.
        let short = LatticeSpec {
            nodes: spec.nodes[1..].to_vec(),
            ..spec
        };
        assert_eq!(ScenarioLattice::from_spec(&short).unwrap(), l);
    }

    #[test]
    fn lift_composes_and_is_linear() {
        let l = ScenarioLattice::trinomial(vec![0.0, 1.0, 2.0, 3.0], 1.0).unwrap();
        let x = RandomVariable::from_fn(&l, 1, |n, _| n.index as f64 * 1.5 - 1.0).unwrap();
        let y = RandomVariable::from_fn(&l, 1, |n, _| (n.index as f64).powi(2)).unwrap();
        let direct = lift(&l, &x, 3).unwrap();
        let stepped = lift(&l, &lift(&l, &x, 2).unwrap(), 3).unwrap();
        assert_eq!(direct, stepped);
        let lin = lift(&l, &x.scale(2.0).add(&y).unwrap(), 3).unwrap();
        let sum = lift(&l, &x, 3).unwrap().scale(2.0).add(&lift(&l, &y, 3).unwrap()).unwrap();
        assert_eq!(lin, sum);
        let b2 = &coordinate_process(&l, 2).unwrap()[0];
        let b2_again = RandomVariable::from_fn(&l, 2, |n, _| l.position(n)[0]).unwrap();
        assert_eq!(b2, &b2_again);
    }
}
