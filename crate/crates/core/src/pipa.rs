//! Penalty interior-point algorithm.
//!
//! Each iteration solves the direction-finding subproblem, takes the
//! centrality step size (or `1 - ε` when there is no usable root), backtracks
//! on the penalty function `P_α = f + α(‖F‖² + yᵀw)` and updates the iterate.
//! The loop stops once `‖d‖ <= eps_term`.

use log::{debug, info, warn};

use crate::error::{Error, Result};
use crate::model::{eval_all, MpccProblem, Point};
use crate::numerics::{dot, norm, DenseMatrix, NormKind};
use crate::subqp::{build_direction_qp_with_half_width, solve_direction_qp_warm, trust_radius, BoundState, Direction};

#[derive(Debug, Clone, PartialEq)]
pub struct PipaConfig {
    pub c: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub rho: f64,
    /// Base penalty parameter; the effective value is `alpha^p`.
    pub alpha: f64,
    /// Fallback step `1 - eps_frac`.
    pub eps_frac: f64,
    pub eps_term: f64,
    pub backtrack: f64,
    pub max_iter: usize,
    pub p_max: u32,
    /// Constant PSD matrix over the x-block; `None` means zero.
    pub q_matrix: Option<DenseMatrix>,
}

impl Default for PipaConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            sigma: 0.1,
            gamma: 0.01,
            rho: 0.9,
            alpha: 2.0,
            eps_frac: 0.001,
            eps_term: 1e-5,
            backtrack: 0.5,
            max_iter: 100,
            p_max: 50,
            q_matrix: None,
        }
    }
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
    }
}

impl PipaConfig {
    pub fn validate(&self) -> Result<()> {
        positive("c", self.c)?;
        open_unit("sigma", self.sigma)?;
        open_unit("gamma", self.gamma)?;
        open_unit("rho", self.rho)?;
        positive("alpha", self.alpha)?;
        open_unit("eps_frac", self.eps_frac)?;
        positive("eps_term", self.eps_term)?;
        open_unit("backtrack", self.backtrack)?;
        if self.p_max == 0 {
            return Err(Error::InvalidConfig("p_max must be at least 1".into()));
        }
        Ok(())
    }

    fn q_for(&self, n_x: usize) -> Result<DenseMatrix> {
        match &self.q_matrix {
            None => Ok(DenseMatrix::zeros(n_x, n_x)),
            Some(q) if q.rows() == n_x && q.cols() == n_x => Ok(q.clone()),
            Some(q) => Err(Error::DimensionMismatch {
                what: "Q matrix",
                expected: n_x,
                actual: q.rows(),
            }),
        }
    }
}

/// One row of the iteration log. Row 1 is the starting point; row `k >= 2`
/// holds the iterate after step `k - 1` together with that step's data.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub point: Point,
    pub tau: Option<f64>,
    /// `‖d‖₂` over all blocks.
    pub d_norm: Option<f64>,
    /// Model change `∇fᵀd - α^p (1-σ)(‖F‖ + yᵀw)`.
    pub pred: Option<f64>,
    /// Signed penalty change `P(new) - P(old)`.
    pub ared: Option<f64>,
    pub comp: f64,
    pub f_norm: f64,
    pub delta: Option<f64>,
    pub p_exp: Option<u32>,
    pub tr_multiplier: Option<f64>,
    /// `false` for a step rejected by the trust-region test.
    pub accepted: bool,
}

impl TraceRecord {
    fn start(point: Point, f_norm: f64) -> Self {
        Self {
            k: 1,
            comp: point.comp(),
            point,
            tau: None,
            d_norm: None,
            pred: None,
            ared: None,
            f_norm,
            delta: None,
            p_exp: None,
            tr_multiplier: None,
            accepted: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    ConvergedSmallStep,
    MaxIterations,
    Failed(Error),
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub trace: Vec<TraceRecord>,
}

impl SolveOutcome {
    pub fn last_point(&self) -> Option<&Point> {
        self.trace.last().map(|r| &r.point)
    }

    pub fn failed(&self) -> bool {
        matches!(self.status, SolveStatus::Failed(_))
    }
}

/// `f + alpha_eff (‖F‖₂² + yᵀw)`.
pub fn penalty_value(problem: &MpccProblem, p: &Point, alpha_eff: f64) -> f64 {
    let f_eq = problem.equality(p);
    problem.objective(p) + alpha_eff * (dot(&f_eq, &f_eq) + p.comp())
}

/// Root of `g(τ) = (1-ρ)σ yᵀw/m + τ (min_i d_yi d_wi - ρ d_yᵀd_w / m)`, when
/// the slope is negative.
pub fn centrality_root(p: &Point, d: &Direction, sigma: f64, rho: f64) -> Option<f64> {
    let m = p.y.len() as f64;
    let min_prod = d
        .d_y
        .iter()
        .zip(&d.d_w)
        .map(|(a, b)| a * b)
        .fold(f64::INFINITY, f64::min);
    let slope = min_prod - rho * dot(&d.d_y, &d.d_w) / m;
    let offset = (1.0 - rho) * sigma * p.comp() / m;
    (slope < 0.0).then(|| -offset / slope)
}

/// Smallest `p >= 1` with
/// `∇fᵀd - αᵖ(1-σ)s < -αᵖ(1-σ)s < -s` where `s = ‖F‖ + yᵀw`.
pub fn penalty_exponent_update(
    grad_dot_d: f64,
    comp: f64,
    f_norm: f64,
    alpha: f64,
    sigma: f64,
    p_max: u32,
) -> Result<u32> {
    let s = f_norm + comp;
    for p in 1..=p_max {
        let weighted = alpha.powi(p as i32) * (1.0 - sigma) * s;
        if grad_dot_d - weighted < -weighted && -weighted < -s {
            return Ok(p);
        }
    }
    Err(Error::ExponentOverflow { p_max })
}

const MAX_TRIALS: usize = 50;

/// Backtracking on `P_α` from `tau0`: the largest `tau0·βʲ` with
/// `P(p + τd) - P(p) <= γ τ pred` whose trial point stays interior.
///
/// Once the predicted decrease is below the resolution of `P` itself, the
/// test reduces to "no increase beyond roundoff".
#[allow(clippy::too_many_arguments)]
pub fn armijo_search(
    problem: &MpccProblem,
    p: &Point,
    d: &Direction,
    tau0: f64,
    alpha_eff: f64,
    gamma: f64,
    backtrack: f64,
    pred: f64,
) -> Result<f64> {
    if !(pred < 0.0) {
        return Err(Error::LineSearchFailure { trials: 0 });
    }
    let step = d.flat();
    let p0 = penalty_value(problem, p, alpha_eff);
    let noise = 10.0 * f64::EPSILON * p0.abs().max(1.0);
    let below_resolution = (gamma * tau0 * pred).abs() <= noise;
    let mut tau = tau0;
    for _ in 0..MAX_TRIALS {
        let trial = p.stepped(tau, &step);
        if trial.is_interior() {
            let change = penalty_value(problem, &trial, alpha_eff) - p0;
            let target = gamma * tau * pred;
            if change <= target || (below_resolution && change <= noise) {
                return Ok(tau);
            }
        }
        tau *= backtrack;
    }
    Err(Error::LineSearchFailure { trials: MAX_TRIALS })
}

/// `‖F‖`, or zero when it is within the rounding error of evaluating `F`
/// at `p`. Without this, once `yᵀw` drops below machine precision the
/// feasibility-tied radius is set by roundoff in `F` alone.
fn above_noise(f_norm: f64, p: &Point) -> f64 {
    let scale = p.flatten().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let floor = 16.0 * f64::EPSILON * scale * (p.y.len() + p.z.len()).max(1) as f64;
    if f_norm <= floor {
        0.0
    } else {
        f_norm
    }
}

/// How the x-box half-width of the subproblem is chosen.
pub(crate) trait RadiusPolicy {
    /// Returns `(Δ, half-width)` for the current iterate.
    fn radius(&mut self, p: &Point, f_norm: f64) -> Result<(f64, f64)>;

    /// Sees the step's signed penalty change and model change; returns
    /// whether the step is taken.
    fn after_step(&mut self, ared: f64, pred: f64) -> Result<bool>;
}

/// `Δ = c(‖F‖ + yᵀw)`, half-width `√Δ`.
pub(crate) struct FeasibilityRadius {
    pub c: f64,
}

impl RadiusPolicy for FeasibilityRadius {
    fn radius(&mut self, p: &Point, f_norm: f64) -> Result<(f64, f64)> {
        let delta = trust_radius(p, f_norm, self.c);
        Ok((delta, delta.sqrt()))
    }

    fn after_step(&mut self, _ared: f64, _pred: f64) -> Result<bool> {
        Ok(true)
    }
}

pub fn pipa_solve(problem: &MpccProblem, config: &PipaConfig, start: &Point) -> SolveOutcome {
    drive(problem, config, start, FeasibilityRadius { c: config.c })
}

pub(crate) fn drive<R: RadiusPolicy>(
    problem: &MpccProblem,
    config: &PipaConfig,
    start: &Point,
    mut policy: R,
) -> SolveOutcome {
    let mut trace = Vec::new();
    let status = match iterate(problem, config, start, &mut policy, &mut trace) {
        Ok(status) => status,
        Err(e) => {
            warn!("{}: solve failed after {} rows: {e}", problem.name(), trace.len());
            SolveStatus::Failed(e)
        }
    };
    SolveOutcome { status, trace }
}

fn iterate<R: RadiusPolicy>(
    problem: &MpccProblem,
    config: &PipaConfig,
    start: &Point,
    policy: &mut R,
    trace: &mut Vec<TraceRecord>,
) -> Result<SolveStatus> {
    config.validate()?;
    problem.check_point(start)?;
    start.check_interior()?;
    if config.alpha * (1.0 - config.sigma) > 1.0 {
        info!(
            "alpha (1 - sigma) = {} > 1: the exponent update holds at p = 1 for every descent direction",
            config.alpha * (1.0 - config.sigma)
        );
    }
    let q = config.q_for(problem.dims().n_x)?;

    let mut point = start.clone();
    let mut ev = eval_all(problem, &point)?;
    let mut f_norm = norm(&ev.f_eq, NormKind::Two);
    trace.push(TraceRecord::start(point.clone(), f_norm));
    let mut warm: Option<Vec<BoundState>> = None;

    for _ in 0..config.max_iter {
        let (delta, half_width) = policy.radius(&point, above_noise(f_norm, &point))?;
        let qp = build_direction_qp_with_half_width(problem, &point, &q, config.sigma, half_width)?;
        let dir = solve_direction_qp_warm(&qp, warm.as_deref())?;
        warm = Some(dir.bound_states.clone());

        let d_norm = dir.norm2();
        if d_norm <= config.eps_term {
            debug!("‖d‖ = {d_norm:e} <= {:e}, stopping", config.eps_term);
            return Ok(SolveStatus::ConvergedSmallStep);
        }

        let comp = point.comp();
        let grad_dot_d = dot(&ev.grad_f, &dir.flat());
        let p_exp = penalty_exponent_update(grad_dot_d, comp, f_norm, config.alpha, config.sigma, config.p_max)?;
        let alpha_eff = config.alpha.powi(p_exp as i32);
        let pred = grad_dot_d - alpha_eff * (1.0 - config.sigma) * (f_norm + comp);

        let tau0 = centrality_root(&point, &dir, config.sigma, config.rho)
            .filter(|t| *t <= 1.0)
            .unwrap_or(1.0 - config.eps_frac);
        let tau = armijo_search(problem, &point, &dir, tau0, alpha_eff, config.gamma, config.backtrack, pred)?;

        let mut next = point.stepped(tau, &dir.flat());
        problem.clamp_x(&mut next.x);
        let ared = penalty_value(problem, &next, alpha_eff) - penalty_value(problem, &point, alpha_eff);
        let accepted = policy.after_step(ared, pred)?;
        if accepted {
            point = next;
            ev = eval_all(problem, &point)?;
            f_norm = norm(&ev.f_eq, NormKind::Two);
        }
        trace.push(TraceRecord {
            k: trace.len() + 1,
            point: point.clone(),
            tau: Some(tau),
            d_norm: Some(d_norm),
            pred: Some(pred),
            ared: Some(ared),
            comp: point.comp(),
            f_norm,
            delta: Some(delta),
            p_exp: Some(p_exp),
            tr_multiplier: Some(dir.tr_multiplier),
            accepted,
        });
    }
    Ok(SolveStatus::MaxIterations)
}
