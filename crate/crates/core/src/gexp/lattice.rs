//! Recombining trinomial recursion over the band-endpoint kernels.

use super::tree::full_tree_gexp;
use super::{GridSpec, Surface, SurfaceRow, VolatilityBand};
use crate::error::{Error, Result};

/// Longest grid on which more than [`MAX_AUGMENTED_DATES`] monitoring dates
/// are handled, by enumerating the full (non-recombining) tree.
pub const FULL_TREE_MAX_STEPS: usize = 12;

/// Monitoring dates handled by state augmentation on any grid.
pub const MAX_AUGMENTED_DATES: usize = 2;

/// Endpoint kernel `(p₊, p₀, p₋)` for variance `v` per step.
fn kernel(v: f64, h: f64) -> (f64, f64, f64) {
    let p = v / (2.0 * h * h);
    (p, 1.0 - 2.0 * p, p)
}

/// Sup (or inf) over the two endpoint kernels of the one-step expectation.
fn robust_step(up: f64, mid: f64, down: f64, lo: f64, hi: f64, h: f64, upper: bool) -> f64 {
    let eval = |v: f64| {
        let (pu, pm, pd) = kernel(v, h);
        pu * up + pm * mid + pd * down
    };
    let (a, b) = (eval(lo), eval(hi));
    if upper {
        a.max(b)
    } else {
        a.min(b)
    }
}

/// Backward recursion on levels `−r_k..=r_k` with `r_k = min(k, levels)`.
/// Rows of width `levels` keep their edge values fixed over a step, i.e.
/// the second difference there is taken as zero.
fn tree_engine(payoff: &dyn Fn(f64) -> f64, band: &VolatilityBand, grid: &GridSpec, upper: bool) -> Result<Surface> {
    let n = grid.check_cfl(band)?;
    let h = grid.h;
    let reach = |k: usize| k.min(grid.levels) as i64;
    let mut rows = vec![SurfaceRow {
        time: n as f64 * grid.dt,
        first_level: -reach(n),
        values: (-reach(n)..=reach(n)).map(|j| payoff(j as f64 * h)).collect(),
    }];
    for k in (0..n).rev() {
        let (sl, sh) = band.at(k);
        let (lo, hi) = (sl * sl * grid.dt, sh * sh * grid.dt);
        let next = rows.last().expect("non-empty");
        let r = reach(k);
        let at = |j: i64| next.values[(j - next.first_level) as usize];
        let values = (-r..=r)
            .map(|j| {
                if j - 1 < next.first_level || j + 1 > -next.first_level {
                    at(j)
                } else {
                    robust_step(at(j + 1), at(j), at(j - 1), lo, hi, h, upper)
                }
            })
            .collect();
        rows.push(SurfaceRow {
            time: k as f64 * grid.dt,
            first_level: -r,
            values,
        });
    }
    rows.reverse();
    Ok(Surface { h, rows })
}

/// Ask (upper) value surface `sup_Q E_Q(f(B_T) | B_t = x)` over the band.
pub fn robust_lattice_price(payoff: &dyn Fn(f64) -> f64, band: &VolatilityBand, grid: &GridSpec) -> Result<Surface> {
    tree_engine(payoff, band, grid, true)
}

/// Bid (lower) value surface `inf_Q E_Q(f(B_T) | B_t = x)`.
pub fn robust_lattice_price_lower(
    payoff: &dyn Fn(f64) -> f64,
    band: &VolatilityBand,
    grid: &GridSpec,
) -> Result<Surface> {
    tree_engine(payoff, band, grid, false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BidAsk {
    pub bid: Surface,
    pub ask: Surface,
}

/// Ask from the upper recursion; bid as `−ask(−X)`.
pub fn bid_ask(payoff: &dyn Fn(f64) -> f64, band: &VolatilityBand, grid: &GridSpec) -> Result<BidAsk> {
    let ask = robust_lattice_price(payoff, band, grid)?;
    let neg = |x: f64| -payoff(x);
    let bid = robust_lattice_price(&neg, band, grid)?.negated();
    Ok(BidAsk { bid, ask })
}

/// Expectation under the single martingale measure with conditional
/// variance `variance(k, j)` per step at level `j`, on the exact tree.
pub fn linear_price(
    payoff: &dyn Fn(f64) -> f64,
    variance: &dyn Fn(usize, i64) -> f64,
    grid: &GridSpec,
) -> Result<Surface> {
    let n = grid.steps()?;
    let h = grid.h;
    let mut next: Vec<f64> = (-(n as i64)..=n as i64).map(|j| payoff(j as f64 * h)).collect();
    let mut rows = vec![SurfaceRow {
        time: n as f64 * grid.dt,
        first_level: -(n as i64),
        values: next.clone(),
    }];
    for k in (0..n).rev() {
        let r = k as i64;
        let values: Vec<f64> = (-r..=r)
            .map(|j| {
                let v = variance(k, j);
                if !(0.0..=h * h).contains(&v) {
                    return Err(Error::InvalidArgument(format!(
                        "variance {v} at step {k}, level {j} is outside [0, h^2]"
                    )));
                }
                let (pu, pm, pd) = kernel(v, h);
                let i = (j + r + 1) as usize;
                Ok(pu * next[i + 1] + pm * next[i] + pd * next[i - 1])
            })
            .collect::<Result<_>>()?;
        next = values.clone();
        rows.push(SurfaceRow {
            time: k as f64 * grid.dt,
            first_level: -r,
            values,
        });
    }
    rows.reverse();
    Ok(Surface { h, rows })
}

fn level_of(x: f64, h: f64) -> Result<i64> {
    let j = (x / h).round();
    if (x / h - j).abs() > 1e-6 {
        return Err(Error::Grid(format!("value {x} is not on the space grid of step {h}")));
    }
    Ok(j as i64)
}

struct Peel<'a> {
    phi: &'a dyn Fn(&[f64]) -> f64,
    dates: &'a [usize],
    band: &'a VolatilityBand,
    dt: f64,
    h: f64,
}

impl Peel<'_> {
    /// Upper value at `(from, level)` of the payoff with dates `i..`
    /// still to be observed.
    fn value(&self, i: usize, history: &mut Vec<f64>, from: usize, level: i64) -> f64 {
        if i == self.dates.len() {
            return (self.phi)(history);
        }
        let m = self.dates[i];
        let n = (m - from) as i64;
        let mut row: Vec<f64> = (level - n..=level + n)
            .map(|j| {
                history.push(j as f64 * self.h);
                let v = self.value(i + 1, history, m, j);
                history.pop();
                v
            })
            .collect();
        for k in (from..m).rev() {
            let (sl, sh) = self.band.at(k);
            let (lo, hi) = (sl * sl * self.dt, sh * sh * self.dt);
            row = (1..row.len() - 1)
                .map(|i| robust_step(row[i + 1], row[i], row[i - 1], lo, hi, self.h, true))
                .collect();
        }
        row[0]
    }
}

/// Conditional G-expectation `Ê(φ(B_{t₁}, …, B_{t_k}) | B_s)` at step `s`,
/// given the values already observed at the dates `t_i ≤ s` and the current
/// value `B_s`. Dates are step indices. Up to [`MAX_AUGMENTED_DATES`] dates
/// are handled on any grid; more dates need a grid of at most
/// [`FULL_TREE_MAX_STEPS`] steps.
pub fn conditional_gexp(
    phi: &dyn Fn(&[f64]) -> f64,
    dates: &[usize],
    band: &VolatilityBand,
    grid: &GridSpec,
    s: usize,
    observed: &[f64],
    current: f64,
) -> Result<f64> {
    let n = grid.check_cfl(band)?;
    if dates.is_empty() || dates.windows(2).any(|w| w[0] >= w[1]) || dates[dates.len() - 1] > n {
        return Err(Error::InvalidArgument(
            "monitoring dates must be strictly increasing steps within the maturity".into(),
        ));
    }
    if s > n {
        return Err(Error::TimeIndex { index: s, len: n + 1 });
    }
    let seen = dates.iter().filter(|&&d| d <= s).count();
    if observed.len() != seen {
        return Err(Error::InvalidArgument(format!(
            "{} observed values for {seen} monitoring dates up to step {s}",
            observed.len()
        )));
    }
    let level = level_of(current, grid.h)?;
    for &x in observed {
        level_of(x, grid.h)?;
    }
    if dates.len() > MAX_AUGMENTED_DATES {
        if n > FULL_TREE_MAX_STEPS {
            return Err(Error::MonitoringCap {
                count: dates.len(),
                cap: MAX_AUGMENTED_DATES,
            });
        }
        return full_tree_gexp(phi, dates, band, grid, s, observed, current);
    }
    let peel = Peel {
        phi,
        dates,
        band,
        dt: grid.dt,
        h: grid.h,
    };
    let mut history = observed.to_vec();
    Ok(peel.value(seen, &mut history, s, level))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band() -> VolatilityBand {
        VolatilityBand::constant(0.1, 0.2).unwrap()
    }

    fn grid(dt: f64, levels: usize) -> GridSpec {
        GridSpec {
            dt,
            h: GridSpec::cfl_step(dt, 0.2, 1.25),
            levels,
            maturity: 1.0,
        }
    }

    #[test]
    fn square_payoff_hits_band_endpoints() {
        let g = grid(1e-2, 1000);
        let p = |x: f64| x * x;
        let ba = bid_ask(&p, &band(), &g).unwrap();
        assert!((ba.ask.value() - 0.04).abs() < 1e-12);
        assert!((ba.bid.value() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn affine_payoff_has_no_spread() {
        let g = grid(1e-2, 1000);
        let p = |x: f64| 0.3 + 2.0 * x;
        let ba = bid_ask(&p, &band(), &g).unwrap();
        assert!((ba.ask.value() - 0.3).abs() < 1e-12);
        assert!((ba.bid.value() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn cfl_violation_is_reported() {
        let g = GridSpec { dt: 1e-2, h: 0.01, levels: 10, maturity: 1.0 };
        let p = |x: f64| x;
        assert!(matches!(robust_lattice_price(&p, &band(), &g), Err(Error::Cfl { .. })));
    }

    #[test]
    fn linear_price_at_upper_band_matches_convex_value() {
        let g = grid(1e-2, 1000);
        let p = |x: f64| x.max(0.0);
        let robust = robust_lattice_price(&p, &band(), &g).unwrap().value();
        let v = 0.04 * g.dt;
        let lin = linear_price(&p, &|_, _| v, &g).unwrap().value();
        assert!((robust - lin).abs() < 1e-12);
    }

    #[test]
    fn conditional_single_date() {
        let g = grid(2e-2, 1000);
        let n = g.steps().unwrap();
        let phi = |x: &[f64]| x[0] * x[0];
        let v0 = conditional_gexp(&phi, &[n], &band(), &g, 0, &[], 0.0).unwrap();
        assert!((v0 - 0.04).abs() < 1e-12);
        let x = 3.0 * g.h;
        let late = conditional_gexp(&phi, &[n / 2], &band(), &g, n / 2 + 3, &[x], x).unwrap();
        assert_eq!(late, x * x);
    }

    #[test]
    fn degenerate_two_date_cylinder() {
        let g = grid(2e-2, 1000);
        let n = g.steps().unwrap();
        let one = |x: &[f64]| x[0] * x[0];
        let two = |x: &[f64]| x[0] * 0.0 + x[1] * x[1];
        let a = conditional_gexp(&one, &[n], &band(), &g, 0, &[], 0.0).unwrap();
        let b = conditional_gexp(&two, &[n / 2, n], &band(), &g, 0, &[], 0.0).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn too_many_dates_on_a_long_grid() {
        let g = grid(2e-2, 1000);
        let phi = |x: &[f64]| x.iter().sum::<f64>();
        assert_eq!(
            conditional_gexp(&phi, &[10, 20, 30], &band(), &g, 0, &[], 0.0).unwrap_err(),
            Error::MonitoringCap { count: 3, cap: 2 }
        );
    }

    #[test]
    fn truncated_rows_keep_edges() {
        let g = grid(1e-2, 30);
        let s = robust_lattice_price(&|x: f64| x, &band(), &g).unwrap();
        assert_eq!(s.rows[0].values.len(), 1);
        assert_eq!(s.rows[100].values.len(), 61);
        assert!(s.value().abs() < 1e-12);
    }
}
