use nalgebra::DMatrix;

use crate::model::{MpccProblem, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionCheck {
    /// `min_i (y_i + w_i) > tol`.
    pub sc_holds: bool,
    /// Smallest singular value of the stacked matrix exceeds `tol`.
    pub ns_holds: bool,
    pub min_singular_value: f64,
}

/// Strict complementarity and nonsingularity of
///
/// ```txt
///     [ ∇_y F   ∇_w F   ∇_z F ]
///     [   W       Y       0   ]
/// ```
///
/// at `p`.
pub fn check_assumptions(problem: &MpccProblem, p: &Point, tol: f64) -> AssumptionCheck {
    let dims = problem.dims();
    let sc_holds = p
        .y
        .iter()
        .zip(&p.w)
        .map(|(y, w)| y + w)
        .fold(f64::INFINITY, f64::min)
        > tol;

    let n = 2 * dims.m + dims.n_z;
    let jac = problem.jacobian(p);
    let mut mat = DMatrix::<f64>::zeros(dims.n_eq() + dims.m, n);
    for i in 0..dims.n_eq() {
        for j in 0..n {
            mat[(i, j)] = jac[(i, dims.n_x + j)];
        }
    }
    for i in 0..dims.m {
        mat[(dims.n_eq() + i, i)] = p.w[i];
        mat[(dims.n_eq() + i, dims.m + i)] = p.y[i];
    }
    let min_singular_value = if n == 0 {
        f64::INFINITY
    } else {
        mat.singular_values().min()
    };
    AssumptionCheck {
        sc_holds,
        ns_holds: min_singular_value > tol,
        min_singular_value,
    }
}
