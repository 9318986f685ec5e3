//! Small dense linear programs behind the minimal-penalty computation.

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};

use crate::error::{Error, Result};

/// Slack allowed on each moment-matching constraint.
const MATCH_SLACK: f64 = 1e-10;

/// `min Σ λ_k a_k` over the simplex subject to `Σ λ_k p_k = target`
/// coordinate-wise. `Ok(None)` when the target is outside the convex hull of
/// the points.
pub(crate) fn min_mixture_cost(points: &[Vec<f64>], costs: &[f64], target: &[f64]) -> Result<Option<f64>> {
    debug_assert_eq!(points.len(), costs.len());
    if points.is_empty() {
        return Ok(None);
    }
    let floor = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    // A point equal to the target that already carries the cheapest cost is
    // optimal; answering directly keeps that value exact.
    for (p, &c) in points.iter().zip(costs) {
        if c == floor && p.iter().zip(target).all(|(a, b)| (a - b).abs() <= 1e-15) {
            return Ok(Some(c));
        }
    }
    let active: Vec<usize> = (0..target.len())
        .filter(|&l| target[l] != 0.0 || points.iter().any(|p| p[l] != 0.0))
        .collect();

    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let lambda: Vec<_> = costs.iter().map(|&c| problem.add_var(c, (0.0, 1.0))).collect();
    let mut total = LinearExpr::empty();
    for &v in &lambda {
        total.add(v, 1.0);
    }
    problem.add_constraint(total, ComparisonOp::Eq, 1.0);
    for &l in &active {
        let terms: Vec<_> = lambda
            .iter()
            .zip(points)
            .filter(|(_, p)| p[l] != 0.0)
            .map(|(&v, p)| (v, p[l]))
            .collect();
        problem.add_constraint(terms.as_slice(), ComparisonOp::Le, target[l] + MATCH_SLACK);
        problem.add_constraint(terms.as_slice(), ComparisonOp::Ge, target[l] - MATCH_SLACK);
    }
    match problem.solve() {
        Ok(outcome) => {
            let sol = outcome
                .into_solution()
                .map_err(|_| Error::Solver("solve interrupted".into()))?;
            Ok(Some(sol.objective().max(floor)))
        }
        Err(microlp::Error::Infeasible) => Ok(None),
        Err(e) => Err(Error::Solver(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_interior_and_exterior() {
        let pts = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let v = min_mixture_cost(&pts, &[0.0, 1.0], &[0.25, 0.75]).unwrap().unwrap();
        assert!((v - 0.75).abs() < 1e-9);
        assert_eq!(min_mixture_cost(&pts, &[0.0, 1.0], &[1.5, -0.5]).unwrap(), None);
    }

    #[test]
    fn cheapest_among_representations() {
        // The midpoint is both a member and a mixture of the outer points.
        let pts = vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0]];
        let v = min_mixture_cost(&pts, &[0.0, 3.0, 0.0], &[0.5, 0.5]).unwrap().unwrap();
        assert!(v.abs() < 1e-9);
    }

    #[test]
    fn exact_member_shortcut() {
        let pts = vec![vec![0.3, 0.7], vec![0.6, 0.4]];
        assert_eq!(min_mixture_cost(&pts, &[0.0, 0.0], &[0.6, 0.4]).unwrap(), Some(0.0));
    }
}
