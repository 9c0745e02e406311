//! Primal active-set method for convex QPs with equality rows and simple
//! bounds:
//!
//! ```txt
//!     min  ½ dᵀ H d + cᵀ d
//!     s.t. A d = b
//!          lower <= d <= upper      (entries may be infinite)
//! ```
//!
//! `H` must be positive semidefinite; `H = 0` (an LP) is allowed and yields a
//! vertex. Bounds are the only inequalities, so the working set is a status
//! per variable. A variable may also be held at a non-bound value
//! ("temporary" bound); such a variable is released as soon as its reduced
//! gradient is nonzero in either direction.
//!
//! The working set always keeps the reduced KKT matrix nonsingular. When
//! releasing a bound would make it singular (a zero-curvature direction, the
//! usual case for LPs) the method steps along that direction until the next
//! bound blocks, which is a simplex pivot. A feasible start is found with a
//! phase-1 LP on artificial variables.

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, solve_linear, DenseMatrix, NormKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundState {
    Free,
    Lower,
    Upper,
    /// `lower == upper`.
    Fixed,
}

#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub hessian: DenseMatrix,
    pub cost: Vec<f64>,
    pub eq_matrix: DenseMatrix,
    pub eq_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QuadraticProgram {
    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        let checks = [
            ("Hessian rows", n, self.hessian.rows()),
            ("Hessian columns", n, self.hessian.cols()),
            ("equality matrix columns", n, self.eq_matrix.cols()),
            ("equality rhs", self.eq_matrix.rows(), self.eq_rhs.len()),
            ("lower bounds", n, self.lower.len()),
            ("upper bounds", n, self.upper.len()),
        ];
        for (what, expected, actual) in checks {
            if expected != actual {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    actual,
                });
            }
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InfeasibleSubproblem {
                residual: f64::INFINITY,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub primal: Vec<f64>,
    /// `λ` in `H d + c = Aᵀ λ + z`.
    pub eq_multipliers: Vec<f64>,
    /// `z` in `H d + c = Aᵀ λ + z`: nonnegative at active lower bounds,
    /// nonpositive at active upper bounds, zero on free variables.
    pub bound_multipliers: Vec<f64>,
    pub states: Vec<BoundState>,
    pub iterations: usize,
}

impl QpSolution {
    pub fn objective(&self, qp: &QuadraticProgram) -> f64 {
        let hd = qp.hessian.mul_vec(&self.primal);
        0.5 * dot(&self.primal, &hd) + dot(&qp.cost, &self.primal)
    }
}

/// Worst violation of stationarity, primal feasibility, dual sign and
/// complementary slackness of `sol`, each measured absolutely.
pub fn kkt_residual(qp: &QuadraticProgram, sol: &QpSolution) -> f64 {
    let d = &sol.primal;
    let mut grad = qp.hessian.mul_vec(d);
    grad.iter_mut().zip(&qp.cost).for_each(|(g, c)| *g += c);
    let at_lambda = qp.eq_matrix.tr_mul_vec(&sol.eq_multipliers);
    let mut worst = 0.0_f64;
    for i in 0..d.len() {
        worst = worst.max((grad[i] - at_lambda[i] - sol.bound_multipliers[i]).abs());
        worst = worst.max((qp.lower[i] - d[i]).max(0.0));
        worst = worst.max((d[i] - qp.upper[i]).max(0.0));
        let z = sol.bound_multipliers[i];
        let slack_lo = (d[i] - qp.lower[i]).abs();
        let slack_hi = (qp.upper[i] - d[i]).abs();
        let comp = if z > 0.0 {
            z * slack_lo
        } else {
            -z * slack_hi
        };
        worst = worst.max(comp);
    }
    let ad = qp.eq_matrix.mul_vec(d);
    for (l, r) in ad.iter().zip(&qp.eq_rhs) {
        worst = worst.max((l - r).abs());
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Free,
    Lower,
    Upper,
    Fixed,
    /// Held at its current value, which is not a bound.
    Temp,
}

impl Status {
    fn at(value: f64, lower: f64, upper: f64) -> Self {
        if lower == upper {
            Status::Fixed
        } else if value == lower {
            Status::Lower
        } else if value == upper {
            Status::Upper
        } else {
            Status::Temp
        }
    }
}

/// Solves `qp`. `warm` holds a status per variable from a previous solve;
/// variables marked `Lower`/`Upper` start at that bound.
pub fn solve_qp(qp: &QuadraticProgram, warm: Option<&[BoundState]>) -> Result<QpSolution> {
    qp.validate()?;
    let n = qp.n_vars();
    let r = qp.eq_matrix.rows();

    let mut x = vec![0.0; n];
    let mut status = vec![Status::Temp; n];
    for i in 0..n {
        let (lo, hi) = (qp.lower[i], qp.upper[i]);
        x[i] = match warm.map(|w| w[i]) {
            Some(BoundState::Lower) if lo.is_finite() => lo,
            Some(BoundState::Upper) if hi.is_finite() => hi,
            _ => 0.0_f64.clamp(lo, hi),
        };
        status[i] = Status::at(x[i], lo, hi);
    }

    let residual: Vec<f64> = qp
        .eq_matrix
        .mul_vec(&x)
        .iter()
        .zip(&qp.eq_rhs)
        .map(|(ax, b)| b - ax)
        .collect();

    let mut iterations = 0;
    if residual.iter().any(|v| *v != 0.0) {
        // Phase 1: min Σ a  s.t.  A d + diag(sign) a = b,  a >= 0.
        let signs: Vec<f64> = residual
            .iter()
            .map(|v| if *v < 0.0 { -1.0 } else { 1.0 })
            .collect();
        let mut a_ext = DenseMatrix::zeros(r, n + r);
        for i in 0..r {
            for j in 0..n {
                a_ext[(i, j)] = qp.eq_matrix[(i, j)];
            }
            a_ext[(i, n + i)] = signs[i];
        }
        let mut cost = vec![0.0; n + r];
        cost[n..].iter_mut().for_each(|c| *c = 1.0);
        let mut lower = qp.lower.clone();
        lower.extend(std::iter::repeat_n(0.0, r));
        let mut upper = qp.upper.clone();
        upper.extend(std::iter::repeat_n(f64::INFINITY, r));
        let phase1 = Problem {
            hessian: &DenseMatrix::zeros(n + r, n + r),
            cost: &cost,
            eq_matrix: &a_ext,
            eq_rhs: &qp.eq_rhs,
            lower: &lower,
            upper: &upper,
        };
        let mut x_ext = x.clone();
        x_ext.extend(residual.iter().map(|v| v.abs()));
        let mut status_ext = status.clone();
        status_ext.extend(std::iter::repeat_n(Status::Free, r));

        let out = phase1.run(&mut x_ext, &mut status_ext, 100 * (n + r))?;
        iterations += out.iterations;

        let infeasibility: f64 = x_ext[n..].iter().sum();
        let scale = 1.0
            + norm(&qp.eq_rhs, NormKind::Inf)
            + qp.eq_matrix.max_abs() * norm(&x_ext[..n], NormKind::Inf);
        if infeasibility > 1e-9 * scale {
            return Err(Error::InfeasibleSubproblem {
                residual: infeasibility,
            });
        }
        x.copy_from_slice(&x_ext[..n]);
        status.copy_from_slice(&status_ext[..n]);
    }

    let phase2 = Problem {
        hessian: &qp.hessian,
        cost: &qp.cost,
        eq_matrix: &qp.eq_matrix,
        eq_rhs: &qp.eq_rhs,
        lower: &qp.lower,
        upper: &qp.upper,
    };
    let out = phase2.run(&mut x, &mut status, 100 * n.max(1))?;
    iterations += out.iterations;

    let states = status
        .iter()
        .map(|s| match s {
            Status::Free | Status::Temp => BoundState::Free,
            Status::Lower => BoundState::Lower,
            Status::Upper => BoundState::Upper,
            Status::Fixed => BoundState::Fixed,
        })
        .collect();
    Ok(QpSolution {
        primal: x,
        eq_multipliers: out.lambda,
        bound_multipliers: out.z,
        states,
        iterations,
    })
}

struct Problem<'a> {
    hessian: &'a DenseMatrix,
    cost: &'a [f64],
    eq_matrix: &'a DenseMatrix,
    eq_rhs: &'a [f64],
    lower: &'a [f64],
    upper: &'a [f64],
}

struct RunOutcome {
    lambda: Vec<f64>,
    z: Vec<f64>,
    iterations: usize,
}

/// Step along `p` from `x`, limited by bounds of the free variables.
enum Ratio {
    Full,
    Blocked { step: f64, index: usize, state: Status },
    Unbounded,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.cost.len()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.hessian.mul_vec(x);
        g.iter_mut().zip(self.cost).for_each(|(gi, ci)| *gi += ci);
        g
    }

    /// Rows of `A` that stay linearly independent when restricted to the
    /// columns in `free`.
    fn independent_rows(&self, free: &[usize]) -> Vec<usize> {
        let mut basis: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut rows = Vec::new();
        for i in 0..self.eq_matrix.rows() {
            let mut v: Vec<f64> = free.iter().map(|&j| self.eq_matrix[(i, j)]).collect();
            let scale = norm(&v, NormKind::Inf);
            if scale == 0.0 {
                continue;
            }
            for (pc, b) in &basis {
                let f = v[*pc];
                if f != 0.0 {
                    v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= f * bi);
                }
            }
            let (pc, mag) = v
                .iter()
                .enumerate()
                .fold((0, 0.0), |best, (k, vk)| if vk.abs() > best.1 { (k, vk.abs()) } else { best });
            if mag > 1e-12 * scale {
                let piv = v[pc];
                v.iter_mut().for_each(|vi| *vi /= piv);
                basis.push((pc, v));
                rows.push(i);
            }
        }
        rows
    }

    /// Solves
    ///
    /// ```txt
    ///     H_FF p - A_RFᵀ μ = top
    ///     A_RF p           = bottom
    /// ```
    fn kkt_solve(
        &self,
        free: &[usize],
        rows: &[usize],
        top: &[f64],
        bottom: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let nf = free.len();
        let nr = rows.len();
        if nf + nr == 0 {
            return Ok((vec![], vec![]));
        }
        let mut k = DenseMatrix::zeros(nf + nr, nf + nr);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                k[(a, b)] = self.hessian[(i, j)];
            }
        }
        for (a, &row) in rows.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                let v = self.eq_matrix[(row, j)];
                k[(nf + a, b)] = v;
                k[(b, nf + a)] = -v;
            }
        }
        let mut rhs = top.to_vec();
        rhs.extend_from_slice(bottom);
        let sol = solve_linear(&k, &rhs)?;
        Ok((sol[..nf].to_vec(), sol[nf..].to_vec()))
    }

    fn ratio_test(&self, x: &[f64], p: &[f64], status: &[Status], cap: Option<f64>) -> Ratio {
        let p_scale = norm(p, NormKind::Inf);
        let mut best: Option<(f64, usize, Status)> = None;
        for i in 0..x.len() {
            if status[i] != Status::Free || p[i].abs() <= 1e-14 * p_scale {
                continue;
            }
            let candidate = if p[i] < 0.0 && self.lower[i].is_finite() {
                Some((((self.lower[i] - x[i]) / p[i]).max(0.0), Status::Lower))
            } else if p[i] > 0.0 && self.upper[i].is_finite() {
                Some((((self.upper[i] - x[i]) / p[i]).max(0.0), Status::Upper))
            } else {
                None
            };
            if let Some((step, state)) = candidate {
                // strict `<` keeps the lowest index among ties
                if best.is_none_or(|(s, _, _)| step < s) {
                    best = Some((step, i, state));
                }
            }
        }
        match (best, cap) {
            (Some((step, index, state)), Some(c)) if step < c => Ratio::Blocked { step, index, state },
            (Some((step, index, state)), None) => Ratio::Blocked { step, index, state },
            (_, Some(_)) => Ratio::Full,
            (None, None) => Ratio::Unbounded,
        }
    }

    fn block(&self, x: &mut [f64], status: &mut [Status], index: usize, state: Status) {
        x[index] = match state {
            Status::Lower => self.lower[index],
            _ => self.upper[index],
        };
        status[index] = if self.lower[index] == self.upper[index] {
            Status::Fixed
        } else {
            state
        };
    }

    fn run(&self, x: &mut [f64], status: &mut [Status], max_iter: usize) -> Result<RunOutcome> {
        let n = self.n();
        let h_scale = self.hessian.max_abs().max(1.0);
        let mut subspace_optimal = false;

        for iter in 0..max_iter {
            let free: Vec<usize> = (0..n).filter(|&i| status[i] == Status::Free).collect();
            let rows = self.independent_rows(&free);
            let g = self.gradient(x);
            let ax = self.eq_matrix.mul_vec(x);

            // Newton step on the current working set; its constraint rows also
            // absorb any drift in A x = b.
            let top: Vec<f64> = free.iter().map(|&i| -g[i]).collect();
            let bottom: Vec<f64> = rows.iter().map(|&i| self.eq_rhs[i] - ax[i]).collect();
            let (p_free, mu) = self.kkt_solve(&free, &rows, &top, &bottom)?;
            let mut p = vec![0.0; n];
            for (k, &i) in free.iter().enumerate() {
                p[i] = p_free[k];
            }

            if !subspace_optimal {
                match self.ratio_test(x, &p, status, Some(1.0)) {
                    Ratio::Full => {
                        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += pi);
                        subspace_optimal = true;
                    }
                    Ratio::Blocked { step, index, state } => {
                        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += step * pi);
                        self.block(x, status, index, state);
                    }
                    Ratio::Unbounded => unreachable!("capped ratio test"),
                }
                continue;
            }

            // At the minimizer of the working set: apply the (tiny) polishing
            // correction when it stays feasible, then price the bounds.
            if matches!(self.ratio_test(x, &p, status, Some(1.0)), Ratio::Full) {
                x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += pi);
            }
            let mut lambda = vec![0.0; self.eq_matrix.rows()];
            for (k, &row) in rows.iter().enumerate() {
                lambda[row] = mu[k];
            }
            let g = self.gradient(x);
            let at_lambda = self.eq_matrix.tr_mul_vec(&lambda);
            let z: Vec<f64> = (0..n)
                .map(|i| {
                    if status[i] == Status::Free {
                        0.0
                    } else {
                        g[i] - at_lambda[i]
                    }
                })
                .collect();
            let tol = 1e-11 * (1.0 + norm(&g, NormKind::Inf));

            let mut entering: Option<(usize, f64)> = None;
            for i in 0..n {
                let violation = match status[i] {
                    Status::Lower => -z[i],
                    Status::Upper => z[i],
                    Status::Temp => z[i].abs(),
                    Status::Free | Status::Fixed => 0.0,
                };
                if violation > tol && entering.is_none_or(|(_, v)| violation > v) {
                    entering = Some((i, violation));
                }
            }
            let Some((j, _)) = entering else {
                return Ok(RunOutcome {
                    lambda,
                    z,
                    iterations: iter + 1,
                });
            };

            let s = if z[j] < 0.0 { 1.0 } else { -1.0 };
            status[j] = Status::Free;
            subspace_optimal = false;

            let mut widened = free.clone();
            widened.push(j);
            widened.sort_unstable();
            if self.independent_rows(&widened).len() > rows.len() {
                // j cannot move without breaking a new row; the next Newton
                // solve re-prices with the enlarged row set.
                continue;
            }

            // Direction with p_j = s that keeps A p = 0 and is stationary on
            // the old working set; zero curvature means the KKT matrix of the
            // widened set is singular.
            let top: Vec<f64> = free.iter().map(|&i| -self.hessian[(i, j)] * s).collect();
            let bottom: Vec<f64> = rows.iter().map(|&r| -self.eq_matrix[(r, j)] * s).collect();
            let (p_free, _) = self.kkt_solve(&free, &rows, &top, &bottom)?;
            let mut ray = vec![0.0; n];
            for (k, &i) in free.iter().enumerate() {
                ray[i] = p_free[k];
            }
            ray[j] = s;
            let hp = self.hessian.mul_vec(&ray);
            let curvature = dot(&ray, &hp);
            let p_sq = dot(&ray, &ray);
            if curvature > 1e-12 * p_sq * h_scale {
                continue;
            }
            match self.ratio_test(x, &ray, status, None) {
                Ratio::Blocked { step, index, state } => {
                    x.iter_mut().zip(&ray).for_each(|(xi, pi)| *xi += step * pi);
                    self.block(x, status, index, state);
                }
                Ratio::Unbounded => return Err(Error::UnboundedSubproblem),
                Ratio::Full => unreachable!("uncapped ratio test"),
            }
        }
        Err(Error::IterationLimit { limit: max_iter })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(cost: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> QuadraticProgram {
        let n = cost.len();
        let eq_matrix = if a.is_empty() {
            DenseMatrix::zeros(0, n)
        } else {
            DenseMatrix::from_rows(&a)
        };
        QuadraticProgram {
            hessian: DenseMatrix::zeros(n, n),
            cost,
            eq_matrix,
            eq_rhs: b,
            lower,
            upper,
        }
    }

    #[test]
    fn zero_data_gives_zero_step() {
        let inf = f64::INFINITY;
        let qp = lp(
            vec![0.0; 3],
            vec![vec![1.0, 1.0, 0.0], vec![0.0, 0.5, 1.0]],
            vec![0.0, 0.0],
            vec![-1.0, -inf, -inf],
            vec![1.0, inf, inf],
        );
        let sol = solve_qp(&qp, None).unwrap();
        assert!(sol.primal.iter().all(|v| *v == 0.0));
        assert!(kkt_residual(&qp, &sol) <= 1e-12);
    }

    #[test]
    fn simple_lp_vertex() {
        // min -x1 - 2 x2, x1 + x2 = 1, 0 <= x <= 1  ->  (0, 1)
        let qp = lp(vec![-1.0, -2.0], vec![vec![1.0, 1.0]], vec![1.0], vec![0.0; 2], vec![1.0; 2]);
        let sol = solve_qp(&qp, None).unwrap();
        assert!((sol.primal[0]).abs() < 1e-14 && (sol.primal[1] - 1.0).abs() < 1e-14);
        assert_eq!(sol.states[0], BoundState::Lower);
        assert!(kkt_residual(&qp, &sol) <= 1e-12);
    }

    #[test]
    fn strictly_convex_qp_interior_solution() {
        // min ½|d|² - (1, 1)ᵀ d, d1 - d2 = 0, box [-5, 5]  ->  (1, 1)
        let qp = QuadraticProgram {
            hessian: DenseMatrix::identity(2),
            cost: vec![-1.0, -1.0],
            eq_matrix: DenseMatrix::from_rows(&[vec![1.0, -1.0]]),
            eq_rhs: vec![0.0],
            lower: vec![-5.0; 2],
            upper: vec![5.0; 2],
        };
        let sol = solve_qp(&qp, None).unwrap();
        assert!((sol.primal[0] - 1.0).abs() < 1e-12 && (sol.primal[1] - 1.0).abs() < 1e-12);
        assert!(kkt_residual(&qp, &sol) <= 1e-12);
    }

    #[test]
    fn infeasible_detected() {
        let qp = lp(vec![0.0; 2], vec![vec![1.0, 1.0]], vec![5.0], vec![0.0; 2], vec![1.0; 2]);
        assert!(matches!(solve_qp(&qp, None), Err(Error::InfeasibleSubproblem { .. })));
    }

    #[test]
    fn unbounded_detected() {
        let inf = f64::INFINITY;
        let qp = lp(vec![-1.0, 0.0], vec![vec![1.0, -1.0]], vec![0.0], vec![-inf; 2], vec![inf; 2]);
        assert!(matches!(solve_qp(&qp, None), Err(Error::UnboundedSubproblem)));
    }

    #[test]
    fn fixed_variable_is_respected() {
        let qp = lp(vec![1.0, 1.0], vec![vec![1.0, 1.0]], vec![1.0], vec![0.25, 0.0], vec![0.25, 1.0]);
        let sol = solve_qp(&qp, None).unwrap();
        assert_eq!(sol.primal[0], 0.25);
        assert!((sol.primal[1] - 0.75).abs() < 1e-14);
        assert_eq!(sol.states[0], BoundState::Fixed);
    }

    #[test]
    fn redundant_equality_rows() {
        let qp = lp(
            vec![1.0, 2.0],
            vec![vec![1.0, 1.0], vec![2.0, 2.0]],
            vec![1.0, 2.0],
            vec![0.0; 2],
            vec![1.0; 2],
        );
        let sol = solve_qp(&qp, None).unwrap();
        assert!((sol.primal[0] - 1.0).abs() < 1e-14 && sol.primal[1].abs() < 1e-14);
        assert!(kkt_residual(&qp, &sol) <= 1e-12);
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let qp = lp(vec![-1.0, -2.0], vec![vec![1.0, 1.0]], vec![1.0], vec![0.0; 2], vec![1.0; 2]);
        let cold = solve_qp(&qp, None).unwrap();
        let warm = solve_qp(&qp, Some(&cold.states)).unwrap();
        assert_eq!(cold.primal, warm.primal);
        assert!(warm.iterations <= cold.iterations);
    }
}
