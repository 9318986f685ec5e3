//! Skorokhod-type distances between step paths.
//!
//! For a path on `[0, t)` the time change `α_t(u) = u / (t − u)` maps the
//! domain onto `[0, ∞)`; `d̂(x, y) = Σ_m 2^{-m} min(1, d_m(x∘α_t^{-1}, y∘α_t^{-1}))`
//! then compares paths on every compact of `[0, t)`. Each `d_m` is the J1
//! distance on `[0, m]` between the damped paths `g_m x` and `g_m y`, where
//! `g_m = 1` on `[0, m−1]`, decreases linearly to 0 on `[m−1, m]` and
//! vanishes beyond:
//!
//! `d_m(x, y) = inf_λ max(sup |λ − id|, sup_u |g_m(λu) x(λu) − g_m(u) y(u)|)`.
//!
//! The infimum is taken over piecewise-linear `λ` whose knots match jumps of
//! `y` to jumps of `x`; a bottleneck shortest path over monotone matchings
//! finds the best such `λ`, and the deviation on each linear piece is
//! evaluated exactly from one-sided limits at its breakpoints. The result is
//! the exact distance whenever an optimal time change aligns jumps, and an
//! upper bound otherwise.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `α_t(u) = u / (t − u)` for `0 ≤ u < t`.
pub fn alpha_map(u: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && (0.0..t).contains(&u)) {
        return Err(Error::InvalidArgument(format!("alpha_t needs 0 <= u < t, got u = {u}, t = {t}")));
    }
    Ok(u / (t - u))
}

/// `α_t^{-1}(v) = v t / (1 + v)` for `v ≥ 0`.
pub fn alpha_inv(v: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && v >= 0.0 && v.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha_t inverse needs v >= 0, got v = {v}, t = {t}")));
    }
    Ok(v * t / (1.0 + v))
}

/// Domain of a step path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// `[0, ∞)`.
    Ray,
    /// `[0, t)`.
    HalfOpen { t: f64 },
}

impl Domain {
    fn contains(self, u: f64) -> bool {
        match self {
            Domain::Ray => u >= 0.0 && u.is_finite(),
            Domain::HalfOpen { t } => (0.0..t).contains(&u),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    /// Path value from this time on.
    pub value: Vec<f64>,
}

/// Right-continuous step path with `x(0) = 0` and finitely many jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathSpec", into = "PathSpec")]
pub struct StepPath {
    domain: Domain,
    dimension: usize,
    jumps: Vec<Jump>,
}

/// Wire format: `{"domain":{"kind":"half_open","t":…}|"ray", "jumps":[{"time":…,"value":[…]},…]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub domain: DomainSpec,
    #[serde(default)]
    pub jumps: Vec<Jump>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainSpec {
    Name(String),
    Tagged { kind: String, t: f64 },
}

impl TryFrom<PathSpec> for StepPath {
    type Error = Error;

    fn try_from(spec: PathSpec) -> Result<Self> {
        let domain = match spec.domain {
            DomainSpec::Name(n) if n == "ray" => Domain::Ray,
            DomainSpec::Tagged { kind, t } if kind == "half_open" => Domain::HalfOpen { t },
            other => return Err(Error::InvalidArgument(format!("unknown path domain {other:?}"))),
        };
        let dimension = spec
            .dimension
            .or_else(|| spec.jumps.first().map(|j| j.value.len()))
            .unwrap_or(1);
        StepPath::new(domain, dimension, spec.jumps)
    }
}

impl From<StepPath> for PathSpec {
    fn from(p: StepPath) -> Self {
        PathSpec {
            domain: match p.domain {
                Domain::Ray => DomainSpec::Name("ray".into()),
                Domain::HalfOpen { t } => DomainSpec::Tagged {
                    kind: "half_open".into(),
                    t,
                },
            },
            dimension: if p.jumps.is_empty() { Some(p.dimension) } else { None },
            jumps: p.jumps,
        }
    }
}

fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl StepPath {
    pub fn new(domain: Domain, dimension: usize, jumps: Vec<Jump>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("path dimension must be >= 1".into()));
        }
        if let Domain::HalfOpen { t } = domain {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("domain end must be positive, got {t}")));
            }
        }
        for (k, j) in jumps.iter().enumerate() {
            if !(j.time > 0.0 && domain.contains(j.time)) {
                return Err(Error::InvalidArgument(format!(
                    "jump time {} must lie in the domain and after 0",
                    j.time
                )));
            }
            if k > 0 && !(jumps[k - 1].time < j.time) {
                return Err(Error::InvalidArgument("jump times must be strictly increasing".into()));
            }
            if j.value.len() != dimension || j.value.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("jump value at {} has the wrong shape", j.time)));
            }
        }
        Ok(Self {
            domain,
            dimension,
            jumps,
        })
    }

    pub fn zero(domain: Domain, dimension: usize) -> Result<Self> {
        Self::new(domain, dimension, Vec::new())
    }

    /// One-dimensional `height · 1_{[start, ·)}`.
    pub fn indicator(domain: Domain, start: f64, height: f64) -> Result<Self> {
        Self::new(
            domain,
            1,
            vec![Jump {
                time: start,
                value: vec![height],
            }],
        )
    }

    /// One-dimensional path from `(time, value)` pairs.
    pub fn scalar(domain: Domain, jumps: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            domain,
            1,
            jumps
                .iter()
                .map(|&(time, v)| Jump { time, value: vec![v] })
                .collect(),
        )
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    fn zero_value(&self) -> Vec<f64> {
        vec![0.0; self.dimension]
    }

    /// `x(u)`.
    pub fn value_at(&self, u: f64) -> Vec<f64> {
        let k = self.jumps.partition_point(|j| j.time <= u);
        if k == 0 {
            self.zero_value()
        } else {
            self.jumps[k - 1].value.clone()
        }
    }

    /// `x(u−)`.
    pub fn left_limit(&self, u: f64) -> Vec<f64> {
        let k = self.jumps.partition_point(|j| j.time < u);
        if k == 0 {
            self.zero_value()
        } else {
            self.jumps[k - 1].value.clone()
        }
    }

    fn order_key(&self) -> Vec<f64> {
        self.jumps
            .iter()
            .flat_map(|j| std::iter::once(j.time).chain(j.value.iter().copied()))
            .collect()
    }
}

fn canonical_order(x: &StepPath, y: &StepPath) -> Ordering {
    let (a, b) = (x.order_key(), y.order_key());
    for (p, q) in a.iter().zip(&b) {
        match p.total_cmp(q) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// `[0, t)` path to the `[0, ∞)` path `x ∘ α_t^{-1}`.
pub fn transform_path(x: &StepPath, t: f64) -> Result<StepPath> {
    match x.domain {
        Domain::HalfOpen { t: end } if end == t => {}
        _ => return Err(Error::InvalidArgument(format!("path must live on [0, {t})"))),
    }
    let jumps = x
        .jumps
        .iter()
        .map(|j| {
            Ok(Jump {
                time: alpha_map(j.time, t)?,
                value: j.value.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    StepPath::new(Domain::Ray, x.dimension, jumps)
}

/// Inverse of [`transform_path`].
pub fn inverse_transform_path(x: &StepPath, t: f64) -> Result<StepPath> {
    if x.domain != Domain::Ray {
        return Err(Error::InvalidArgument("path must live on [0, inf)".into()));
    }
    let jumps = x
        .jumps
        .iter()
        .map(|j| {
            Ok(Jump {
                time: alpha_inv(j.time, t)?,
                value: j.value.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    StepPath::new(Domain::HalfOpen { t }, x.dimension, jumps)
}

/// Restriction of a `[0, ∞)` path to `[0, t)`.
pub fn project_path(x: &StepPath, t: f64) -> Result<StepPath> {
    if x.domain != Domain::Ray {
        return Err(Error::InvalidArgument("projection expects a path on [0, inf)".into()));
    }
    let jumps = x.jumps.iter().filter(|j| j.time < t).cloned().collect();
    StepPath::new(Domain::HalfOpen { t }, x.dimension, jumps)
}

/// Strictly increasing piecewise-linear bijection through its knots `(u, λ(u))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeChange {
    pub knots: Vec<(f64, f64)>,
}

impl TimeChange {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 || knots.windows(2).any(|w| !(w[0].0 < w[1].0 && w[0].1 < w[1].1)) {
            return Err(Error::InvalidArgument("time change knots must be strictly increasing".into()));
        }
        Ok(Self { knots })
    }

    pub fn identity(end: f64) -> Self {
        Self {
            knots: vec![(0.0, 0.0), (end, end)],
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let k = self
            .knots
            .partition_point(|p| p.0 <= u)
            .clamp(1, self.knots.len() - 1);
        let (a, b) = (self.knots[k - 1], self.knots[k]);
        a.1 + (u - a.0) * (b.1 - a.1) / (b.0 - a.0)
    }

    pub fn inverse(&self) -> Self {
        Self {
            knots: self.knots.iter().map(|&(u, v)| (v, u)).collect(),
        }
    }

    /// `sup |λ(u) − u|`, attained at a knot.
    pub fn sup_deviation(&self) -> f64 {
        self.knots.iter().map(|&(u, v)| (u - v).abs()).fold(0.0, f64::max)
    }

    pub fn is_identity(&self) -> bool {
        self.sup_deviation() == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Weight {
    /// `g_m` on `[0, m]`.
    Damped(f64),
    /// Constant 1.
    Flat,
}

impl Weight {
    fn at(self, u: f64) -> f64 {
        match self {
            Weight::Flat => 1.0,
            Weight::Damped(m) => {
                if u <= m - 1.0 {
                    1.0
                } else if u <= m {
                    m - u
                } else {
                    0.0
                }
            }
        }
    }

    fn kink(self) -> Option<f64> {
        match self {
            Weight::Damped(m) => Some(m - 1.0),
            Weight::Flat => None,
        }
    }
}

/// `g_m(u)`.
pub fn damping(m: u32, u: f64) -> f64 {
    Weight::Damped(m as f64).at(u)
}

/// Weighted path value at `v`, right-continuous or as a left limit.
fn weighted(path: &StepPath, w: Weight, v: f64, left: bool) -> Vec<f64> {
    let g = w.at(v);
    let raw = if left { path.left_limit(v) } else { path.value_at(v) };
    raw.into_iter().map(|a| g * a).collect()
}

struct Problem<'a> {
    x: &'a StepPath,
    y: &'a StepPath,
    weight: Weight,
    horizon: f64,
}

impl Problem<'_> {
    /// `sup |X(λu) − Y(u)|` over `u ∈ [u0, u1]` for `λ` linear from
    /// `(u0, v0)` to `(u1, v1)`, with one-sided limits at `u1` and, when
    /// `closed_end` is false, the value at `u1` left out.
    fn segment_sup(&self, (u0, v0): (f64, f64), (u1, v1): (f64, f64), closed_end: bool) -> f64 {
        let r = (v1 - v0) / (u1 - u0);
        let lam = |u: f64| v0 + (u - u0) * r;
        let lam_inv = |v: f64| u0 + (v - v0) / r;
        let mut pts: Vec<(f64, f64)> = vec![(u0, v0), (u1, v1)];
        for j in &self.y.jumps {
            if j.time > u0 && j.time < u1 {
                pts.push((j.time, lam(j.time)));
            }
        }
        for j in &self.x.jumps {
            if j.time > v0 && j.time < v1 {
                pts.push((lam_inv(j.time), j.time));
            }
        }
        if let Some(k) = self.weight.kink() {
            if k > u0 && k < u1 {
                pts.push((k, lam(k)));
            }
            if k > v0 && k < v1 {
                pts.push((lam_inv(k), k));
            }
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut worst: f64 = 0.0;
        for w in pts.windows(2) {
            let (p, q) = (w[0], w[1]);
            if q.0 <= p.0 {
                continue;
            }
            let start = norm(
                &weighted(self.x, self.weight, p.1, false),
                &weighted(self.y, self.weight, p.0, false),
            );
            let end = norm(
                &weighted(self.x, self.weight, q.1, true),
                &weighted(self.y, self.weight, q.0, true),
            );
            worst = worst.max(start).max(end);
        }
        if closed_end {
            worst = worst.max(norm(
                &weighted(self.x, self.weight, v1, false),
                &weighted(self.y, self.weight, u1, false),
            ));
        }
        worst
    }

    fn jump_times(path: &StepPath, horizon: f64) -> Vec<f64> {
        path.jumps.iter().map(|j| j.time).filter(|&t| t < horizon).collect()
    }

    /// Bottleneck shortest path over monotone jump matchings.
    fn solve(&self) -> (f64, TimeChange) {
        let xs = Self::jump_times(self.x, self.horizon);
        let ys = Self::jump_times(self.y, self.horizon);
        // Knots (u, v) = (y jump, x jump), bracketed by the endpoints.
        let mut nodes: Vec<((usize, usize), (f64, f64))> = vec![((0, 0), (0.0, 0.0))];
        for (i, &a) in xs.iter().enumerate() {
            for (j, &b) in ys.iter().enumerate() {
                nodes.push(((i + 1, j + 1), (b, a)));
            }
        }
        nodes.push(((xs.len() + 1, ys.len() + 1), (self.horizon, self.horizon)));
        let n = nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![usize::MAX; n];
        dist[0] = 0.0;
        for k in 1..n {
            let ((i, j), knot) = nodes[k];
            let own = (knot.0 - knot.1).abs();
            for p in 0..k {
                let ((pi, pj), pknot) = nodes[p];
                if pi >= i || pj >= j || dist[p] >= dist[k] {
                    continue;
                }
                let cost = dist[p].max(own).max(self.segment_sup(pknot, knot, false));
                if cost < dist[k] {
                    dist[k] = cost;
                    pred[k] = p;
                }
            }
        }
        let mut knots = Vec::new();
        let mut k = n - 1;
        while k != usize::MAX {
            knots.push(nodes[k].1);
            k = pred[k];
        }
        knots.reverse();
        (dist[n - 1], TimeChange { knots })
    }
}

/// Distance with its witness time change `λ`, mapping the second path's
/// clock to the first's.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceResult {
    pub value: f64,
    pub lambda: TimeChange,
}

fn symmetric_solve(x: &StepPath, y: &StepPath, weight: Weight, horizon: f64) -> Result<DistanceResult> {
    if x.dimension != y.dimension {
        return Err(Error::Shape("paths have different dimensions".into()));
    }
    let swap = canonical_order(x, y) == Ordering::Greater;
    let (a, b) = if swap { (y, x) } else { (x, y) };
    let (value, lambda) = Problem {
        x: a,
        y: b,
        weight,
        horizon,
    }
    .solve();
    Ok(DistanceResult {
        value,
        lambda: if swap { lambda.inverse() } else { lambda },
    })
}

/// `d_m(x, y)` for paths on `[0, ∞)`.
pub fn dm_distance(x: &StepPath, y: &StepPath, m: u32) -> Result<DistanceResult> {
    if m < 1 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    if x.domain != Domain::Ray || y.domain != Domain::Ray {
        return Err(Error::InvalidArgument("d_m compares paths on [0, inf)".into()));
    }
    let mf = m as f64;
    symmetric_solve(x, y, Weight::Damped(mf), mf)
}

/// Undamped J1 distance on `[0, horizon]`, each path extended to the
/// horizon by its left limit there.
pub fn j1_distance(x: &StepPath, y: &StepPath, horizon: f64) -> Result<DistanceResult> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    symmetric_solve(x, y, Weight::Flat, horizon)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DhatResult {
    pub value: f64,
    /// Bound `2^{-M}` on the omitted terms.
    pub tail_bound: f64,
    /// `d_m` for `m = 1..=M`.
    pub terms: Vec<f64>,
}

/// `d̂(x, y) = Σ_{m=1}^{M} 2^{-m} min(1, d_m(x∘α_t^{-1}, y∘α_t^{-1}))`.
pub fn dhat_distance(x: &StepPath, y: &StepPath, t: f64, max_m: u32) -> Result<DhatResult> {
    if max_m < 1 {
        return Err(Error::InvalidArgument("truncation level must be >= 1".into()));
    }
    let (tx, ty) = (transform_path(x, t)?, transform_path(y, t)?);
    let mut value = 0.0;
    let mut terms = Vec::with_capacity(max_m as usize);
    for m in 1..=max_m {
        let d = dm_distance(&tx, &ty, m)?.value;
        value += 0.5f64.powi(m as i32) * d.min(1.0);
        terms.push(d);
    }
    Ok(DhatResult {
        value,
        tail_bound: 0.5f64.powi(max_m as i32),
        terms,
    })
}

/// Per-sequence-element report of the convergence criterion on `[0, t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessRow {
    pub n: usize,
    /// `sup |γ_n − id|`.
    pub gamma_deviation: f64,
    /// `sup_{[0, t(1 − 1/(1+m))]} |x_n∘γ_n − x|` for `m = 1..=m_max`.
    pub deviations: Vec<f64>,
}

/// For each `x_n`, the best matching time change `γ_n` of `[0, t)` and the
/// uniform deviations of `x_n∘γ_n` from `x` on the compacts
/// `[0, t(1 − 1/(1+m))]`.
pub fn convergence_witness(xs: &[StepPath], x: &StepPath, t: f64, m_max: u32) -> Result<Vec<WitnessRow>> {
    for p in xs.iter().chain(std::iter::once(x)) {
        if p.domain != (Domain::HalfOpen { t }) {
            return Err(Error::InvalidArgument(format!("paths must live on [0, {t})")));
        }
    }
    xs.iter()
        .enumerate()
        .map(|(k, xn)| {
            let best = j1_distance(xn, x, t)?;
            let gamma = best.lambda;
            let problem = Problem {
                x: xn,
                y: x,
                weight: Weight::Flat,
                horizon: t,
            };
            let deviations = (1..=m_max)
                .map(|m| {
                    let end = t * (1.0 - 1.0 / (1.0 + m as f64));
                    let mut worst: f64 = 0.0;
                    for w in gamma.knots.windows(2) {
                        let (a, b) = (w[0], w[1]);
                        if a.0 >= end {
                            break;
                        }
                        if b.0 <= end {
                            worst = worst.max(problem.segment_sup(a, b, b.0 == end));
                        } else {
                            let cut = (end, gamma.eval(end));
                            worst = worst.max(problem.segment_sup(a, cut, true));
                        }
                    }
                    worst
                })
                .collect();
            Ok(WitnessRow {
                n: k + 1,
                gamma_deviation: gamma.sup_deviation(),
                deviations,
            })
        })
        .collect()
}

/// Continuous piecewise-linear path through `(time, value)` breakpoints,
/// constant after the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearPath {
    pub points: Vec<(f64, f64)>,
}

impl PiecewiseLinearPath {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty()
            || points.windows(2).any(|w| !(w[0].0 < w[1].0))
            || points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite()))
        {
            return Err(Error::InvalidArgument("breakpoints must be finite with increasing times".into()));
        }
        Ok(Self { points })
    }

    pub fn start(&self) -> f64 {
        self.points[0].0
    }

    /// Value at `u ≥ start`.
    pub fn value_at(&self, u: f64) -> f64 {
        let k = self.points.partition_point(|p| p.0 <= u);
        if k == 0 {
            return self.points[0].1;
        }
        if k == self.points.len() {
            return self.points[k - 1].1;
        }
        let (a, b) = (self.points[k - 1], self.points[k]);
        if u == a.0 {
            return a.1;
        }
        a.1 + (u - a.0) * (b.1 - a.1) / (b.0 - a.0)
    }

    /// Whether both paths take the same values at every breakpoint of
    /// either (hence everywhere, both being linear in between).
    pub fn same_path(&self, other: &Self) -> bool {
        self.start() == other.start()
            && self
                .points
                .iter()
                .chain(&other.points)
                .all(|&(u, _)| self.value_at(u) == other.value_at(u))
    }
}

/// `x ↦ (x|_{[0,t]}, x|_{[t,∞)} − x(t))` for a path started at `(0, 0)`.
pub fn split_path(x: &PiecewiseLinearPath, t: f64) -> Result<(PiecewiseLinearPath, PiecewiseLinearPath)> {
    if x.points[0] != (0.0, 0.0) {
        return Err(Error::InvalidArgument("path must start at the origin".into()));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument("split time must be positive".into()));
    }
    let xt = x.value_at(t);
    let mut head: Vec<(f64, f64)> = x.points.iter().copied().filter(|p| p.0 < t).collect();
    head.push((t, xt));
    let mut tail = vec![(t, 0.0)];
    tail.extend(x.points.iter().filter(|p| p.0 > t).map(|&(u, v)| (u, v - xt)));
    Ok((PiecewiseLinearPath::new(head)?, PiecewiseLinearPath::new(tail)?))
}

/// Inverse of [`split_path`]: `u ↦ x₁(u)` on `[0, t]`, `x₁(t) + x₂(u)` after.
pub fn concat_paths(head: &PiecewiseLinearPath, tail: &PiecewiseLinearPath) -> Result<PiecewiseLinearPath> {
    let t = tail.start();
    if head.points.last().map(|p| p.0) != Some(t) || tail.points[0].1 != 0.0 {
        return Err(Error::InvalidArgument("head must end where the tail starts, and the tail must start at 0".into()));
    }
    let xt = head.value_at(t);
    let mut pts = head.points.clone();
    pts.extend(tail.points.iter().skip(1).map(|&(u, v)| (u, xt + v)));
    PiecewiseLinearPath::new(pts)
}
