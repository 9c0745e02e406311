//! The direction-finding subproblem.
//!
//! At an interior iterate the step `d = (d_x, d_y, d_w, d_z)` solves
//!
//! ```txt
//!     min  ∇fᵀd + ½ d_xᵀ Q d_x
//!     s.t. F + ∇F d = 0
//!          Y d_w + W d_y = -Y w + σ (yᵀw / m) e
//!          x + d_x ∈ X,   |d_x,i| <= h
//! ```
//!
//! where `h` is the trust-region half-width. Under the feasibility-tied
//! radius `h = √Δ` with `Δ = c(‖F‖ + yᵀw)`.

mod active_set;

pub use active_set::{kkt_residual, solve_qp, BoundState, QpSolution, QuadraticProgram};

use crate::error::{Error, Result};
use crate::model::{Dimensions, MpccProblem, Point};
use crate::numerics::{norm, DenseMatrix, NormKind};

#[derive(Debug, Clone)]
pub struct QpSubproblem {
    pub dims: Dimensions,
    /// `Q` over the x-block.
    pub quadratic: DenseMatrix,
    pub linear_cost: Vec<f64>,
    pub eq_matrix: DenseMatrix,
    pub eq_rhs: Vec<f64>,
    pub d_lower: Vec<f64>,
    pub d_upper: Vec<f64>,
    /// Per x-component: the lower (upper) bound is the trust region rather
    /// than the box `X`.
    pub tr_lower: Vec<bool>,
    pub tr_upper: Vec<bool>,
}

impl QpSubproblem {
    /// The full QP over all `n_x + 2m + n_z` step components.
    pub fn to_program(&self) -> QuadraticProgram {
        let n = self.dims.n_vars();
        let mut hessian = DenseMatrix::zeros(n, n);
        for i in 0..self.dims.n_x {
            for j in 0..self.dims.n_x {
                hessian[(i, j)] = self.quadratic[(i, j)];
            }
        }
        QuadraticProgram {
            hessian,
            cost: self.linear_cost.clone(),
            eq_matrix: self.eq_matrix.clone(),
            eq_rhs: self.eq_rhs.clone(),
            lower: self.d_lower.clone(),
            upper: self.d_upper.clone(),
        }
    }

    pub fn kkt_residual(&self, dir: &Direction) -> f64 {
        let sol = QpSolution {
            primal: dir.flat(),
            eq_multipliers: dir.eq_multipliers.clone(),
            bound_multipliers: dir
                .bound_multipliers
                .iter()
                .zip(&dir.bound_states)
                .map(|(m, s)| if *s == BoundState::Upper { -m } else { *m })
                .collect(),
            states: dir.bound_states.clone(),
            iterations: 0,
        };
        kkt_residual(&self.to_program(), &sol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub d_x: Vec<f64>,
    pub d_y: Vec<f64>,
    pub d_w: Vec<f64>,
    pub d_z: Vec<f64>,
    /// `λ` with `∇q(d) = ∇Eᵀλ + z` for the equality rows `E`, in row order.
    pub eq_multipliers: Vec<f64>,
    /// Bound multiplier magnitudes, one per step component; zero unless the
    /// component sits at a bound.
    pub bound_multipliers: Vec<f64>,
    pub bound_states: Vec<BoundState>,
    pub tr_active: Vec<bool>,
    pub tr_multiplier: f64,
}

impl Direction {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.d_x.clone();
        v.extend_from_slice(&self.d_y);
        v.extend_from_slice(&self.d_w);
        v.extend_from_slice(&self.d_z);
        v
    }

    pub fn norm2(&self) -> f64 {
        norm(&self.flat(), NormKind::Two)
    }
}

/// `Δ = c(‖F‖ + yᵀw)`.
pub fn trust_radius(p: &Point, f_norm: f64, c: f64) -> f64 {
    c * (f_norm + p.comp())
}

/// Builds the subproblem with x-box half-width `√radius`.
pub fn build_direction_qp(
    problem: &MpccProblem,
    p: &Point,
    q: &DenseMatrix,
    sigma: f64,
    radius: f64,
) -> Result<QpSubproblem> {
    build_direction_qp_with_half_width(problem, p, q, sigma, radius.max(0.0).sqrt())
}

pub fn build_direction_qp_with_half_width(
    problem: &MpccProblem,
    p: &Point,
    q: &DenseMatrix,
    sigma: f64,
    half_width: f64,
) -> Result<QpSubproblem> {
    problem.check_point(p)?;
    p.check_interior()?;
    let dims = problem.dims();
    if q.rows() != dims.n_x || q.cols() != dims.n_x {
        return Err(Error::DimensionMismatch {
            what: "Q matrix",
            expected: dims.n_x,
            actual: if q.rows() != dims.n_x { q.rows() } else { q.cols() },
        });
    }
    let n = dims.n_vars();
    let n_eq = dims.n_eq();
    let m = dims.m;

    let f_eq = problem.equality(p);
    let jac = problem.jacobian(p);
    let mut eq_matrix = DenseMatrix::zeros(n_eq + m, n);
    let mut eq_rhs = Vec::with_capacity(n_eq + m);
    for i in 0..n_eq {
        for j in 0..n {
            eq_matrix[(i, j)] = jac[(i, j)];
        }
        eq_rhs.push(-f_eq[i]);
    }
    let mu = sigma * p.comp() / m as f64;
    for i in 0..m {
        eq_matrix[(n_eq + i, dims.y_offset() + i)] = p.w[i];
        eq_matrix[(n_eq + i, dims.w_offset() + i)] = p.y[i];
        eq_rhs.push(-p.y[i] * p.w[i] + mu);
    }

    let mut d_lower = vec![f64::NEG_INFINITY; n];
    let mut d_upper = vec![f64::INFINITY; n];
    let mut tr_lower = vec![false; dims.n_x];
    let mut tr_upper = vec![false; dims.n_x];
    for i in 0..dims.n_x {
        let box_lo = problem.x_lower()[i] - p.x[i];
        let box_hi = problem.x_upper()[i] - p.x[i];
        tr_lower[i] = -half_width >= box_lo;
        tr_upper[i] = half_width <= box_hi;
        let lo = box_lo.max(-half_width);
        let hi = box_hi.min(half_width);
        d_lower[i] = lo.min(hi);
        d_upper[i] = hi;
    }

    Ok(QpSubproblem {
        dims,
        quadratic: q.clone(),
        linear_cost: problem.gradient(p),
        eq_matrix,
        eq_rhs,
        d_lower,
        d_upper,
        tr_lower,
        tr_upper,
    })
}

pub fn solve_direction_qp(qp: &QpSubproblem) -> Result<Direction> {
    solve_direction_qp_warm(qp, None)
}

/// Solves `qp` starting from the bound states of an earlier solve.
pub fn solve_direction_qp_warm(qp: &QpSubproblem, warm: Option<&[BoundState]>) -> Result<Direction> {
    let program = qp.to_program();
    let warm = warm.filter(|w| w.len() == program.n_vars());
    let sol = solve_qp(&program, warm)?;
    Ok(direction_from_solution(qp, sol))
}

fn direction_from_solution(qp: &QpSubproblem, sol: QpSolution) -> Direction {
    let dims = qp.dims;
    let d = &sol.primal;
    let bound_multipliers: Vec<f64> = sol
        .bound_multipliers
        .iter()
        .zip(&sol.states)
        .map(|(z, s)| match s {
            BoundState::Lower => *z,
            BoundState::Upper => -z,
            BoundState::Fixed => z.abs(),
            BoundState::Free => 0.0,
        })
        .collect();
    let mut tr_active = vec![false; dims.n_x];
    let mut tr_multiplier = 0.0_f64;
    for i in 0..dims.n_x {
        tr_active[i] = match sol.states[i] {
            BoundState::Lower => qp.tr_lower[i],
            BoundState::Upper => qp.tr_upper[i],
            BoundState::Fixed => qp.tr_lower[i] || qp.tr_upper[i],
            BoundState::Free => false,
        };
        if tr_active[i] {
            tr_multiplier = tr_multiplier.max(bound_multipliers[i]);
        }
    }
    Direction {
        d_x: d[..dims.y_offset()].to_vec(),
        d_y: d[dims.y_offset()..dims.w_offset()].to_vec(),
        d_w: d[dims.w_offset()..dims.z_offset()].to_vec(),
        d_z: d[dims.z_offset()..].to_vec(),
        eq_multipliers: sol.eq_multipliers,
        bound_multipliers,
        bound_states: sol.states,
        tr_active,
        tr_multiplier,
    }
}

/// Closed-form step of the scalar counterexample with `Q = 0` while the
/// trust-region lower bound on `d_x` is the binding one:
/// `d = (-√(yw), √(yw), -(1-σ)w - (w/y)√(yw))`, `λ = (-w/y, 1/y)` and the
/// bound multiplier `1 + w/y`.
pub fn counterexample_direction(p: &Point, sigma: f64) -> Direction {
    let (y, w) = (p.y[0], p.w[0]);
    let s = (y * w).sqrt();
    let bound = 1.0 + w / y;
    Direction {
        d_x: vec![-s],
        d_y: vec![s],
        d_w: vec![-(1.0 - sigma) * w - (w / y) * s],
        d_z: vec![],
        eq_multipliers: vec![-w / y, 1.0 / y],
        bound_multipliers: vec![bound, 0.0, 0.0],
        bound_states: vec![BoundState::Lower, BoundState::Free, BoundState::Free],
        tr_active: vec![true],
        tr_multiplier: bound,
    }
}
