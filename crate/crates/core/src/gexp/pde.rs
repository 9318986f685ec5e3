//! Explicit finite differences for `∂_t u + G(∂_xx u) = 0`, `u(T, x) = f(x)`.

use super::{GridSpec, Surface, SurfaceRow, VolatilityBand};
use crate::error::{Error, Result};

/// Backward explicit scheme `u(t − Δt, x) = u(t, x) + Δt·G(D²_h u(t, x))` on
/// levels `−levels..=levels`, with linear extrapolation at both edges (zero
/// second difference there).
pub fn bsb_solve(payoff: &dyn Fn(f64) -> f64, band: &VolatilityBand, grid: &GridSpec) -> Result<Surface> {
    let n = grid.check_cfl(band)?;
    if grid.levels < 1 {
        return Err(Error::Grid("the finite-difference grid needs at least one level".into()));
    }
    let h = grid.h;
    let l = grid.levels as i64;
    let mut u: Vec<f64> = (-l..=l).map(|j| payoff(j as f64 * h)).collect();
    let mut rows = vec![SurfaceRow {
        time: n as f64 * grid.dt,
        first_level: -l,
        values: u.clone(),
    }];
    let last = u.len() - 1;
    for k in (0..n).rev() {
        let next: Vec<f64> = (0..u.len())
            .map(|i| {
                if i == 0 || i == last {
                    u[i]
                } else {
                    let d2 = (u[i + 1] + u[i - 1] - 2.0 * u[i]) / (h * h);
                    u[i] + grid.dt * band.g(k, d2)
                }
            })
            .collect();
        u = next;
        rows.push(SurfaceRow {
            time: k as f64 * grid.dt,
            first_level: -l,
            values: u.clone(),
        });
    }
    rows.reverse();
    Ok(Surface { h, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_payoff_is_preserved() {
        let band = VolatilityBand::constant(0.1, 0.2).unwrap();
        let g = GridSpec::with_radius(1e-2, GridSpec::cfl_step(1e-2, 0.2, 1.5), 1.0, 1.0);
        let s = bsb_solve(&|x| 0.5 - x, &band, &g).unwrap();
        assert!((s.value() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stability_bound_names_the_limit() {
        let band = VolatilityBand::constant(0.1, 0.2).unwrap();
        let g = GridSpec { dt: 0.1, h: 0.01, levels: 50, maturity: 1.0 };
        let err = bsb_solve(&|x| x * x, &band, &g).unwrap_err();
        assert!(err.to_string().contains("h^2 / sigma_high^2"));
    }
}
