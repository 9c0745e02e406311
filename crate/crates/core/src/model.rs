//! Problem abstraction for
//!
//! ```txt
//!     min  f(x, y, w, z)
//!     s.t. x_lower <= x <= x_upper
//!          F(x, y, w, z) = 0          (m + n_z rows)
//!          0 <= y  _|_  w >= 0        (m pairs)
//! ```
//!
//! plus the built-in instances used throughout the crate.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{dot, DenseMatrix};

pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Point) -> Vec<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&Point) -> DenseMatrix + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimensions {
    pub n_x: usize,
    pub m: usize,
    pub n_z: usize,
}

impl Dimensions {
    pub fn new(n_x: usize, m: usize, n_z: usize) -> Self {
        Self { n_x, m, n_z }
    }

    /// Length of the stacked variable vector `(x, y, w, z)`.
    pub fn n_vars(&self) -> usize {
        self.n_x + 2 * self.m + self.n_z
    }

    /// Number of rows of `F`.
    pub fn n_eq(&self) -> usize {
        self.m + self.n_z
    }

    pub fn y_offset(&self) -> usize {
        self.n_x
    }

    pub fn w_offset(&self) -> usize {
        self.n_x + self.m
    }

    pub fn z_offset(&self) -> usize {
        self.n_x + 2 * self.m
    }
}

/// An iterate `(x, y, w, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
}

impl Point {
    pub fn new(x: Vec<f64>, y: Vec<f64>, w: Vec<f64>, z: Vec<f64>) -> Self {
        Self { x, y, w, z }
    }

    pub fn dims(&self) -> Dimensions {
        Dimensions::new(self.x.len(), self.y.len(), self.z.len())
    }

    /// Stacked `(x, y, w, z)`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.x.len() + 2 * self.y.len() + self.z.len());
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.y);
        v.extend_from_slice(&self.w);
        v.extend_from_slice(&self.z);
        v
    }

    pub fn from_flat(dims: Dimensions, v: &[f64]) -> Self {
        assert_eq!(v.len(), dims.n_vars(), "flat point length");
        Self {
            x: v[..dims.y_offset()].to_vec(),
            y: v[dims.y_offset()..dims.w_offset()].to_vec(),
            w: v[dims.w_offset()..dims.z_offset()].to_vec(),
            z: v[dims.z_offset()..].to_vec(),
        }
    }

    /// `self + tau * step`, with `step` stacked like [`Point::flatten`].
    pub fn stepped(&self, tau: f64, step: &[f64]) -> Self {
        let v: Vec<f64> = self
            .flatten()
            .iter()
            .zip(step)
            .map(|(a, d)| a + tau * d)
            .collect();
        Self::from_flat(self.dims(), &v)
    }

    /// Complementarity gap `yᵀw`.
    pub fn comp(&self) -> f64 {
        dot(&self.y, &self.w)
    }

    /// Strict positivity of every `y_i` and `w_i`.
    pub fn check_interior(&self) -> Result<()> {
        for (which, v) in [("y", &self.y), ("w", &self.w)] {
            if let Some((index, &value)) = v.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                return Err(Error::InteriorityViolation {
                    which,
                    index,
                    value,
                });
            }
        }
        Ok(())
    }

    pub fn is_interior(&self) -> bool {
        self.check_interior().is_ok()
    }
}

#[derive(Clone)]
pub struct MpccProblem {
    name: String,
    dims: Dimensions,
    x_lower: Vec<f64>,
    x_upper: Vec<f64>,
    objective: ScalarFn,
    gradient: VectorFn,
    equality: VectorFn,
    jacobian: MatrixFn,
}

impl fmt::Debug for MpccProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MpccProblem")
            .field("name", &self.name)
            .field("dims", &self.dims)
            .field("x_lower", &self.x_lower)
            .field("x_upper", &self.x_upper)
            .finish_non_exhaustive()
    }
}

impl MpccProblem {
    /// `gradient` returns the stacked gradient over `(x, y, w, z)`;
    /// `jacobian` returns the `(m + n_z) x n_vars` Jacobian of `F`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dims: Dimensions,
        x_lower: Vec<f64>,
        x_upper: Vec<f64>,
        objective: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Point) -> Vec<f64> + Send + Sync + 'static,
        equality: impl Fn(&Point) -> Vec<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&Point) -> DenseMatrix + Send + Sync + 'static,
    ) -> Result<Self> {
        for (what, b) in [("x_lower", &x_lower), ("x_upper", &x_upper)] {
            if b.len() != dims.n_x {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: dims.n_x,
                    actual: b.len(),
                });
            }
        }
        if let Some(i) = (0..dims.n_x).find(|&i| !(x_lower[i] <= x_upper[i])) {
            return Err(Error::InvalidProblem(format!(
                "x_lower[{i}] = {} exceeds x_upper[{i}] = {}",
                x_lower[i], x_upper[i]
            )));
        }
        Ok(Self {
            name: name.into(),
            dims,
            x_lower,
            x_upper,
            objective: Arc::new(objective),
            gradient: Arc::new(gradient),
            equality: Arc::new(equality),
            jacobian: Arc::new(jacobian),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    pub fn x_lower(&self) -> &[f64] {
        &self.x_lower
    }

    pub fn x_upper(&self) -> &[f64] {
        &self.x_upper
    }

    pub fn objective(&self, p: &Point) -> f64 {
        (self.objective)(p)
    }

    pub fn gradient(&self, p: &Point) -> Vec<f64> {
        (self.gradient)(p)
    }

    pub fn equality(&self, p: &Point) -> Vec<f64> {
        (self.equality)(p)
    }

    pub fn jacobian(&self, p: &Point) -> DenseMatrix {
        (self.jacobian)(p)
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        let d = p.dims();
        for (what, expected, actual) in [
            ("point x", self.dims.n_x, d.n_x),
            ("point y/w", self.dims.m, d.m),
            ("point w", self.dims.m, p.w.len()),
            ("point z", self.dims.n_z, d.n_z),
        ] {
            if expected != actual {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    actual,
                });
            }
        }
        Ok(())
    }

    /// Projects `x` onto the box.
    pub fn clamp_x(&self, x: &mut [f64]) {
        for ((xi, lo), hi) in x.iter_mut().zip(&self.x_lower).zip(&self.x_upper) {
            *xi = xi.clamp(*lo, *hi);
        }
    }

    /// Maps a sample from the unit cube `[0, 1]^n_vars` to a point strictly
    /// inside the box with `y, w` in `[0.05, 2.05]` and `z` in `[-2, 2]`.
    /// Infinite box sides are replaced by a width-4 window.
    pub fn interior_point_from_unit(&self, u: &[f64]) -> Point {
        assert_eq!(u.len(), self.dims.n_vars(), "unit sample length");
        let d = self.dims;
        let mut v = vec![0.0; d.n_vars()];
        for i in 0..d.n_x {
            let (lo, hi) = match (self.x_lower[i].is_finite(), self.x_upper[i].is_finite()) {
                (true, true) => (self.x_lower[i], self.x_upper[i]),
                (true, false) => (self.x_lower[i], self.x_lower[i] + 4.0),
                (false, true) => (self.x_upper[i] - 4.0, self.x_upper[i]),
                (false, false) => (-2.0, 2.0),
            };
            let t = 0.05 + 0.9 * u[i];
            v[i] = lo + t * (hi - lo);
        }
        for i in d.y_offset()..d.z_offset() {
            v[i] = 0.05 + 2.0 * u[i];
        }
        for i in d.z_offset()..d.n_vars() {
            v[i] = -2.0 + 4.0 * u[i];
        }
        Point::from_flat(d, &v)
    }
}

/// `f`, `∇f`, `F` and `∇F` at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub f: f64,
    pub grad_f: Vec<f64>,
    pub f_eq: Vec<f64>,
    pub jac_f: DenseMatrix,
}

pub fn eval_all(problem: &MpccProblem, p: &Point) -> Result<Evaluation> {
    problem.check_point(p)?;
    let dims = problem.dims();
    let f = problem.objective(p);
    let grad_f = problem.gradient(p);
    if grad_f.len() != dims.n_vars() {
        return Err(Error::DimensionMismatch {
            what: "objective gradient",
            expected: dims.n_vars(),
            actual: grad_f.len(),
        });
    }
    let f_eq = problem.equality(p);
    if f_eq.len() != dims.n_eq() {
        return Err(Error::DimensionMismatch {
            what: "equality map rows",
            expected: dims.n_eq(),
            actual: f_eq.len(),
        });
    }
    let jac_f = problem.jacobian(p);
    if jac_f.rows() != dims.n_eq() {
        return Err(Error::DimensionMismatch {
            what: "Jacobian rows",
            expected: dims.n_eq(),
            actual: jac_f.rows(),
        });
    }
    if jac_f.cols() != dims.n_vars() {
        return Err(Error::DimensionMismatch {
            what: "Jacobian columns",
            expected: dims.n_vars(),
            actual: jac_f.cols(),
        });
    }
    Ok(Evaluation {
        f,
        grad_f,
        f_eq,
        jac_f,
    })
}

/// Compares the analytic gradient and Jacobian against central differences
/// with step `h` and returns the worst discrepancy, measured relative to
/// `max(1, |analytic|)`.
pub fn check_derivatives(problem: &MpccProblem, p: &Point, h: f64) -> Result<f64> {
    let ev = eval_all(problem, p)?;
    let dims = problem.dims();
    let base = p.flatten();
    let mut worst = 0.0_f64;
    let rel = |fd: f64, an: f64| (fd - an).abs() / an.abs().max(1.0);

    for j in 0..dims.n_vars() {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[j] += h;
        minus[j] -= h;
        let p_plus = Point::from_flat(dims, &plus);
        let p_minus = Point::from_flat(dims, &minus);

        let fd = (problem.objective(&p_plus) - problem.objective(&p_minus)) / (2.0 * h);
        worst = worst.max(rel(fd, ev.grad_f[j]));

        let f_plus = problem.equality(&p_plus);
        let f_minus = problem.equality(&p_minus);
        for i in 0..dims.n_eq() {
            let fd = (f_plus[i] - f_minus[i]) / (2.0 * h);
            worst = worst.max(rel(fd, ev.jac_f[(i, j)]));
        }
    }
    Ok(worst)
}

pub const COUNTEREXAMPLE: &str = "counterexample";
pub const QUADRATIC_LCP: &str = "quadratic-lcp";

/// Names accepted by [`builtin_problem`].
pub const BUILTIN_PROBLEMS: &[&str] = &[COUNTEREXAMPLE, QUADRATIC_LCP];

/// ```txt
///     min  x + w
///     s.t. -1 <= x <= 1
///          -1 + x + y = 0
///          0 <= y _|_ w >= 0
/// ```
///
/// Solution `(x, y, w) = (-1, 2, 0)`.
pub fn counterexample_problem() -> MpccProblem {
    MpccProblem::new(
        COUNTEREXAMPLE,
        Dimensions::new(1, 1, 0),
        vec![-1.0],
        vec![1.0],
        |p| p.x[0] + p.w[0],
        |_| vec![1.0, 0.0, 1.0],
        |p| vec![-1.0 + p.x[0] + p.y[0]],
        |_| DenseMatrix::from_rows(&[vec![1.0, 1.0, 0.0]]),
    )
    .expect("counterexample definition is consistent")
}

/// Starting point `(0, 1, 0.02)` for [`counterexample_problem`].
pub fn counterexample_start() -> Point {
    Point::new(vec![0.0], vec![1.0], vec![0.02], vec![])
}

/// A nonlinear instance with an auxiliary variable:
///
/// ```txt
///     min  (x - 1.5)^2 / 2 + (y - 0.2)^2 / 2 + z / 10
///     s.t. 0 <= x <= 2
///          w - y - x + 1 = 0
///          z - x^2 = 0
///          0 <= y _|_ w >= 0
/// ```
pub fn quadratic_lcp_problem() -> MpccProblem {
    MpccProblem::new(
        QUADRATIC_LCP,
        Dimensions::new(1, 1, 1),
        vec![0.0],
        vec![2.0],
        |p| {
            0.5 * (p.x[0] - 1.5).powi(2) + 0.5 * (p.y[0] - 0.2).powi(2) + 0.1 * p.z[0]
        },
        |p| vec![p.x[0] - 1.5, p.y[0] - 0.2, 0.0, 0.1],
        |p| {
            vec![
                p.w[0] - p.y[0] - p.x[0] + 1.0,
                p.z[0] - p.x[0] * p.x[0],
            ]
        },
        |p| {
            DenseMatrix::from_rows(&[
                vec![-1.0, -1.0, 1.0, 0.0],
                vec![-2.0 * p.x[0], 0.0, 0.0, 1.0],
            ])
        },
    )
    .expect("quadratic-lcp definition is consistent")
}

pub fn quadratic_lcp_start() -> Point {
    Point::new(vec![1.0], vec![0.5], vec![0.5], vec![1.0])
}

/// A built-in problem together with its default starting point.
pub fn builtin_problem(name: &str) -> Option<(MpccProblem, Point)> {
    match name {
        COUNTEREXAMPLE => Some((counterexample_problem(), counterexample_start())),
        QUADRATIC_LCP => Some((quadratic_lcp_problem(), quadratic_lcp_start())),
        _ => None,
    }
}
