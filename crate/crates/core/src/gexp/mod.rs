//! Uncertain-volatility pricing and G-expectations in one dimension.
//!
//! The martingale measures allowed by a [`VolatilityBand`] are represented on
//! a trinomial grid `{+h, 0, −h}` by zero-mean kernels with conditional
//! variance `v ∈ [σ_low² Δt, σ_high² Δt]`. Since the one-step value is linear
//! in `v`, the robust step is attained at a band endpoint and reduces to
//! `V₀ + Δt·G(D²V)` with the generator `G(a) = ½(σ_high² a⁺ − σ_low² a⁻)`.
//!
//! Two independent routes are provided: an exact recombining-tree recursion
//! that maximizes over the two endpoint kernels ([`robust_lattice_price`]),
//! and an explicit finite-difference solver of `∂_t u + G(∂_xx u) = 0` on a
//! truncated domain ([`bsb_solve`]). Time-varying bands are piecewise
//! constant per step.

mod lattice;
mod pde;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lattice::{
    bid_ask, conditional_gexp, linear_price, robust_lattice_price, robust_lattice_price_lower, BidAsk,
    FULL_TREE_MAX_STEPS, MAX_AUGMENTED_DATES,
};
pub use pde::bsb_solve;
pub use tree::{
    band_family, band_membership, full_tree_gexp, integration_by_parts_residual, quadratic_variation, BandCheck,
};

/// `G(a) = ½(σ_high² a⁺ − σ_low² a⁻)`.
pub fn g_function(a: f64, sigma_low: f64, sigma_high: f64) -> f64 {
    0.5 * (sigma_high * sigma_high * a.max(0.0) - sigma_low * sigma_low * (-a).max(0.0))
}

/// A constant or one value per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Schedule {
    Constant(f64),
    PerStep(Vec<f64>),
}

impl Schedule {
    fn at(&self, k: usize) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::PerStep(v) => v[k.min(v.len() - 1)],
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            Schedule::Constant(v) => vec![*v],
            Schedule::PerStep(v) => v.clone(),
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            Schedule::Constant(_) => None,
            Schedule::PerStep(v) => Some(v.len()),
        }
    }
}

/// Volatility bounds `0 ≤ σ_low ≤ σ_high`, sampled per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilityBand {
    pub sigma_low: Schedule,
    pub sigma_high: Schedule,
}

impl VolatilityBand {
    pub fn constant(sigma_low: f64, sigma_high: f64) -> Result<Self> {
        let b = Self {
            sigma_low: Schedule::Constant(sigma_low),
            sigma_high: Schedule::Constant(sigma_high),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn per_step(sigma_low: Vec<f64>, sigma_high: Vec<f64>) -> Result<Self> {
        let b = Self {
            sigma_low: Schedule::PerStep(sigma_low),
            sigma_high: Schedule::PerStep(sigma_high),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let lo = self.sigma_low.values();
        let hi = self.sigma_high.values();
        if lo.is_empty() || hi.is_empty() {
            return Err(Error::InvalidArgument("volatility schedules must not be empty".into()));
        }
        if let (Some(a), Some(b)) = (self.sigma_low.len(), self.sigma_high.len()) {
            if a != b {
                return Err(Error::InvalidArgument("volatility schedules differ in length".into()));
            }
        }
        let n = lo.len().max(hi.len());
        for k in 0..n {
            let (l, h) = (self.sigma_low.at(k), self.sigma_high.at(k));
            if !(l.is_finite() && h.is_finite() && 0.0 <= l && l <= h) {
                return Err(Error::InvalidArgument(format!(
                    "volatility band needs 0 <= sigma_low <= sigma_high, got ({l}, {h}) at step {k}"
                )));
            }
        }
        Ok(())
    }

    /// `(σ_low, σ_high)` during step `k`.
    pub fn at(&self, k: usize) -> (f64, f64) {
        (self.sigma_low.at(k), self.sigma_high.at(k))
    }

    pub fn max_high(&self) -> f64 {
        self.sigma_high.values().into_iter().fold(0.0, f64::max)
    }

    pub fn g(&self, k: usize, a: f64) -> f64 {
        let (l, h) = self.at(k);
        g_function(a, l, h)
    }

    fn check_steps(&self, steps: usize) -> Result<()> {
        for s in [&self.sigma_low, &self.sigma_high] {
            if let Some(n) = s.len() {
                if n < steps {
                    return Err(Error::Grid(format!("volatility schedule has {n} values for {steps} steps")));
                }
            }
        }
        Ok(())
    }
}

/// Time step, space step, half-width in space levels and maturity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dt: f64,
    pub h: f64,
    /// Levels `−levels..=levels`. The tree engine is exact (no boundary)
    /// when `levels ≥ steps`.
    pub levels: usize,
    pub maturity: f64,
}

impl GridSpec {
    /// Grid with `levels` large enough to cover `radius` in space units.
    pub fn with_radius(dt: f64, h: f64, radius: f64, maturity: f64) -> Self {
        Self {
            dt,
            h,
            levels: (radius / h).ceil() as usize,
            maturity,
        }
    }

    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.h > 0.0 && self.maturity > 0.0)
            || !(self.dt.is_finite() && self.h.is_finite() && self.maturity.is_finite())
        {
            return Err(Error::Grid("dt, h and maturity must be positive and finite".into()));
        }
        let n = (self.maturity / self.dt).round();
        if (n * self.dt - self.maturity).abs() > 1e-9 * self.maturity.max(1.0) || n < 1.0 {
            return Err(Error::Grid(format!(
                "maturity {} is not a whole number of steps of {}",
                self.maturity, self.dt
            )));
        }
        Ok(n as usize)
    }

    /// Explicit-scheme bound `Δt σ_high² ≤ h²`.
    pub fn check_cfl(&self, band: &VolatilityBand) -> Result<usize> {
        let steps = self.steps()?;
        band.validate()?;
        band.check_steps(steps)?;
        let s = band.max_high();
        if s > 0.0 {
            let max_dt = self.h * self.h / (s * s);
            if self.dt > max_dt * (1.0 + 1e-12) {
                return Err(Error::Cfl { dt: self.dt, max_dt });
            }
        }
        Ok(steps)
    }

    /// `h = κ σ_high √Δt` with `κ ≥ 1`.
    pub fn cfl_step(dt: f64, sigma_high: f64, kappa: f64) -> f64 {
        kappa * sigma_high * dt.sqrt()
    }
}

/// One time slice of a value surface on levels `first_level..first_level + len`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceRow {
    pub time: f64,
    pub first_level: i64,
    pub values: Vec<f64>,
}

/// Values `u(t_k, j h)` per time step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Surface {
    pub h: f64,
    pub rows: Vec<SurfaceRow>,
}

impl Surface {
    /// Value at step `k` and level `j`, if on the grid.
    pub fn at(&self, k: usize, j: i64) -> Option<f64> {
        let row = self.rows.get(k)?;
        let idx = j - row.first_level;
        if idx < 0 {
            return None;
        }
        row.values.get(idx as usize).copied()
    }

    /// `u(0, 0)`.
    pub fn value(&self) -> f64 {
        self.at(0, 0).expect("origin is on every grid")
    }

    pub fn x(&self, j: i64) -> f64 {
        j as f64 * self.h
    }

    pub fn negated(&self) -> Surface {
        Surface {
            h: self.h,
            rows: self
                .rows
                .iter()
                .map(|r| SurfaceRow {
                    time: r.time,
                    first_level: r.first_level,
                    values: r.values.iter().map(|v| -v).collect(),
                })
                .collect(),
        }
    }
}

/// Terminal payoffs available from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerminalPayoff {
    /// `scale · x²`.
    Square {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `scale · (x − strike)⁺`.
    Call {
        #[serde(default)]
        strike: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `scale · (strike − x)⁺`.
    Put {
        #[serde(default)]
        strike: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `a + b x`.
    Affine { a: f64, b: f64 },
    /// Linear interpolation through the points, extended linearly.
    Sampled { x: Vec<f64>, y: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl TerminalPayoff {
    pub fn validate(&self) -> Result<()> {
        if let TerminalPayoff::Sampled { x, y } = self {
            if x.len() < 2 || x.len() != y.len() {
                return Err(Error::InvalidArgument("sampled payoff needs >= 2 points with matching x and y".into()));
            }
            if x.windows(2).any(|w| !(w[0] < w[1])) || x.iter().chain(y).any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("sampled payoff abscissae must be finite and increasing".into()));
            }
        }
        Ok(())
    }

    pub fn eval(&self, v: f64) -> f64 {
        match self {
            TerminalPayoff::Square { scale } => scale * v * v,
            TerminalPayoff::Call { strike, scale } => scale * (v - strike).max(0.0),
            TerminalPayoff::Put { strike, scale } => scale * (strike - v).max(0.0),
            TerminalPayoff::Affine { a, b } => a + b * v,
            TerminalPayoff::Sampled { x, y } => {
                let n = x.len();
                let k = match x.iter().position(|&xi| xi > v) {
                    Some(0) => 0,
                    Some(i) => i - 1,
                    None => n - 2,
                }
                .min(n - 2);
                let w = (v - x[k]) / (x[k + 1] - x[k]);
                y[k] + w * (y[k + 1] - y[k])
            }
        }
    }

    /// Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match self {
            TerminalPayoff::Square { .. } => f64::INFINITY,
            TerminalPayoff::Call { scale, .. } | TerminalPayoff::Put { scale, .. } => scale.abs(),
            TerminalPayoff::Affine { b, .. } => b.abs(),
            TerminalPayoff::Sampled { x, y } => x
                .windows(2)
                .zip(y.windows(2))
                .map(|(a, b)| ((b[1] - b[0]) / (a[1] - a[0])).abs())
                .fold(0.0, f64::max),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_examples() {
        assert_eq!(g_function(0.0, 0.1, 0.2), 0.0);
        assert!((g_function(2.0, 0.1, 0.2) - 0.04).abs() < 1e-15);
        assert!((g_function(-2.0, 0.1, 0.2) + 0.01).abs() < 1e-15);
    }

    #[test]
    fn g_monotone_and_homogeneous() {
        for &a in &[-3.0, -0.5, 0.0, 0.7, 4.0] {
            for &b in &[-1.0, 0.0, 2.5] {
                if a <= b {
                    assert!(g_function(a, 0.1, 0.2) <= g_function(b, 0.1, 0.2));
                }
            }
            let l = 3.0;
            assert!((g_function(l * a, 0.1, 0.2) - l * g_function(a, 0.1, 0.2)).abs() < 1e-15);
        }
    }

    #[test]
    fn band_validation() {
        assert!(VolatilityBand::constant(0.2, 0.1).is_err());
        assert!(VolatilityBand::constant(-0.1, 0.1).is_err());
        assert!(VolatilityBand::per_step(vec![0.1, 0.1], vec![0.2]).is_err());
        let b = VolatilityBand::per_step(vec![0.1, 0.05], vec![0.2, 0.3]).unwrap();
        assert_eq!(b.at(1), (0.05, 0.3));
        assert_eq!(b.max_high(), 0.3);
    }

    #[test]
    fn cfl_guard() {
        let band = VolatilityBand::constant(0.1, 0.2).unwrap();
        let ok = GridSpec { dt: 1e-3, h: GridSpec::cfl_step(1e-3, 0.2, 1.0), levels: 10, maturity: 1.0 };
        assert_eq!(ok.check_cfl(&band).unwrap(), 1000);
        let bad = GridSpec { dt: 1e-3, h: 0.005, levels: 10, maturity: 1.0 };
        match bad.check_cfl(&band).unwrap_err() {
            Error::Cfl { max_dt, .. } => assert!((max_dt - 0.000625).abs() < 1e-12),
            e => panic!("{e}"),
        }
        let frac = GridSpec { dt: 0.3, h: 1.0, levels: 3, maturity: 1.0 };
        assert!(matches!(frac.steps(), Err(Error::Grid(_))));
    }

    #[test]
    fn payoff_evaluation() {
        let s = TerminalPayoff::Sampled { x: vec![0.0, 1.0, 2.0], y: vec![0.0, 1.0, 0.0] };
        assert_eq!(s.eval(0.5), 0.5);
        assert_eq!(s.eval(1.5), 0.5);
        assert_eq!(s.eval(3.0), -1.0);
        assert_eq!(s.eval(-1.0), -1.0);
        assert_eq!(s.lipschitz(), 1.0);
        let c: TerminalPayoff = serde_json::from_str(r#"{"kind":"call"}"#).unwrap();
        assert_eq!(c.eval(0.3), 0.3);
        assert_eq!(c.eval(-0.3), 0.0);
    }
}
