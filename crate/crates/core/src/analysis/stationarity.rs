use log::warn;

use crate::error::Result;
use crate::model::{eval_all, MpccProblem, Point};
use crate::numerics::{norm, DenseMatrix, NormKind};
use crate::subqp::{solve_qp, QuadraticProgram};

pub const DEFAULT_TOL_ACTIVE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    /// `min ‖∇f - Mν‖₁` over admissible multipliers `ν`.
    pub residual: f64,
    /// Same minimum in the Euclidean norm.
    pub residual_l2: f64,
    pub f_norm: f64,
    /// Set when `‖F(p)‖ > tol_active`; the residual then says little.
    pub infeasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Sign {
    Free,
    NonNegative,
}

/// Columns of `M` in `∇f = Mν` together with the sign restriction on each
/// multiplier.
fn multiplier_columns(problem: &MpccProblem, p: &Point, jac: &DenseMatrix, tol_active: f64) -> Vec<(Vec<f64>, Sign)> {
    let dims = problem.dims();
    let n = dims.n_vars();
    let unit = |i: usize, s: f64| {
        let mut e = vec![0.0; n];
        e[i] = s;
        e
    };
    let mut cols = Vec::new();
    for r in 0..jac.rows() {
        cols.push((jac.row(r).to_vec(), Sign::Free));
    }
    for i in 0..dims.n_x {
        if p.x[i] - problem.x_lower()[i] <= tol_active {
            cols.push((unit(i, 1.0), Sign::NonNegative));
        }
        if problem.x_upper()[i] - p.x[i] <= tol_active {
            cols.push((unit(i, -1.0), Sign::NonNegative));
        }
    }
    for i in 0..dims.m {
        let y_active = p.y[i] <= tol_active;
        let w_active = p.w[i] <= tol_active;
        let sign = if y_active && w_active {
            Sign::NonNegative
        } else {
            Sign::Free
        };
        if y_active {
            cols.push((unit(dims.y_offset() + i, 1.0), sign));
        }
        if w_active {
            cols.push((unit(dims.w_offset() + i, 1.0), sign));
        }
    }
    cols
}

/// Distance of `∇f(p)` from the cone of strongly stationary multiplier
/// combinations. Equality multipliers are free, active box multipliers are
/// nonnegative, a complementarity multiplier exists only for a component
/// within `tol_active` of zero and is nonnegative when both members of the
/// pair are.
pub fn stationarity_residual(problem: &MpccProblem, p: &Point, tol_active: f64) -> Result<StationarityReport> {
    let ev = eval_all(problem, p)?;
    let f_norm = norm(&ev.f_eq, NormKind::Two);
    let infeasible = f_norm > tol_active;
    if infeasible {
        warn!("stationarity residual evaluated at an infeasible point (‖F‖ = {f_norm:e})");
    }
    let cols = multiplier_columns(problem, p, &ev.jac_f, tol_active);
    let n = ev.grad_f.len();
    let k = cols.len();
    let g = &ev.grad_f;

    // ℓ1: min Σ (s⁺ + s⁻)  s.t.  Mν + s⁺ - s⁻ = ∇f
    let nv = k + 2 * n;
    let mut a = DenseMatrix::zeros(n, nv);
    let mut lower = vec![0.0; nv];
    let upper = vec![f64::INFINITY; nv];
    for (j, (col, sign)) in cols.iter().enumerate() {
        for i in 0..n {
            a[(i, j)] = col[i];
        }
        if *sign == Sign::Free {
            lower[j] = f64::NEG_INFINITY;
        }
    }
    for i in 0..n {
        a[(i, k + i)] = 1.0;
        a[(i, k + n + i)] = -1.0;
    }
    let mut cost = vec![0.0; nv];
    cost[k..].iter_mut().for_each(|c| *c = 1.0);
    let l1 = QuadraticProgram {
        hessian: DenseMatrix::zeros(nv, nv),
        cost,
        eq_matrix: a,
        eq_rhs: g.clone(),
        lower,
        upper,
    };
    let sol = solve_qp(&l1, None)?;
    let residual = sol.primal[k..].iter().sum::<f64>().max(0.0);

    // ℓ2: min ½‖r‖²  s.t.  Mν + r = ∇f
    let nv = k + n;
    let mut a = DenseMatrix::zeros(n, nv);
    let mut hessian = DenseMatrix::zeros(nv, nv);
    let mut lower = vec![f64::NEG_INFINITY; nv];
    for (j, (col, sign)) in cols.iter().enumerate() {
        for i in 0..n {
            a[(i, j)] = col[i];
        }
        if *sign == Sign::NonNegative {
            lower[j] = 0.0;
        }
    }
    for i in 0..n {
        a[(i, k + i)] = 1.0;
        hessian[(k + i, k + i)] = 1.0;
    }
    let l2 = QuadraticProgram {
        hessian,
        cost: vec![0.0; nv],
        eq_matrix: a,
        eq_rhs: g.clone(),
        lower,
        upper: vec![f64::INFINITY; nv],
    };
    let sol = solve_qp(&l2, None)?;
    let residual_l2 = norm(&sol.primal[k..], NormKind::Two);

    Ok(StationarityReport {
        residual,
        residual_l2,
        f_norm,
        infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{counterexample_problem, Dimensions};

    fn pt(x: f64, y: f64, w: f64) -> Point {
        Point::new(vec![x], vec![y], vec![w], vec![])
    }

    #[test]
    fn solution_is_stationary() {
        let r = stationarity_residual(&counterexample_problem(), &pt(-1.0, 2.0, 0.0), DEFAULT_TOL_ACTIVE).unwrap();
        assert!(r.residual <= 1e-10 && r.residual_l2 <= 1e-10);
        assert!(!r.infeasible);
    }

    #[test]
    fn pipa_limit_is_not() {
        let r = stationarity_residual(&counterexample_problem(), &pt(-0.19596304, 1.19596304, 0.0), DEFAULT_TOL_ACTIVE)
            .unwrap();
        assert!((r.residual - 1.0).abs() <= 1e-12);
        assert!((r.residual_l2 - 0.5f64.sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn infeasible_point_flagged() {
        let r = stationarity_residual(&counterexample_problem(), &pt(0.0, 2.0, 0.0), DEFAULT_TOL_ACTIVE).unwrap();
        assert!(r.infeasible);
    }

    fn scaled_counterexample(scale: f64) -> MpccProblem {
        MpccProblem::new(
            "scaled",
            Dimensions::new(1, 1, 0),
            vec![-1.0],
            vec![1.0],
            |p: &Point| p.x[0] + p.w[0],
            |_: &Point| vec![1.0, 0.0, 1.0],
            move |p: &Point| vec![scale * (-1.0 + p.x[0] + p.y[0])],
            move |_: &Point| DenseMatrix::from_rows(&[vec![scale, scale, 0.0]]),
        )
        .unwrap()
    }

    #[test]
    fn invariant_under_row_scaling() {
        for p in [pt(-1.0, 2.0, 0.0), pt(-0.5, 1.5, 0.0), pt(-0.2, 1.2, 1e-9)] {
            let base = stationarity_residual(&counterexample_problem(), &p, DEFAULT_TOL_ACTIVE).unwrap();
            for s in [1e-3, 0.5, 7.0, 1e4] {
                let r = stationarity_residual(&scaled_counterexample(s), &p, DEFAULT_TOL_ACTIVE).unwrap();
                assert!((r.residual - base.residual).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn zero_gradient_interior_point() {
        let prob = MpccProblem::new(
            "flat",
            Dimensions::new(1, 1, 0),
            vec![-1.0],
            vec![1.0],
            |_: &Point| 3.0,
            |_: &Point| vec![0.0; 3],
            |p: &Point| vec![p.y[0] - 1.0],
            |_: &Point| DenseMatrix::from_rows(&[vec![0.0, 1.0, 0.0]]),
        )
        .unwrap();
        let r = stationarity_residual(&prob, &pt(0.0, 1.0, 1.0), DEFAULT_TOL_ACTIVE).unwrap();
        assert_eq!(r.residual, 0.0);
    }
}
