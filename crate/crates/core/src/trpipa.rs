//! Trust-region variant of the penalty interior-point driver.
//!
//! The x-box half-width is the radius `Δ_k` itself and is adjusted from the
//! ratio of the signed penalty change to the model change:
//!
//! | ratio `ρ_k`        | next radius |
//! |--------------------|-------------|
//! | `ρ_k < η1`         | `γ1 Δ_k`    |
//! | `η1 <= ρ_k < η2`   | `Δ_k`       |
//! | `ρ_k >= η2`        | `γ2 Δ_k`    |
//!
//! Steps with `ρ_k <= 0` leave the iterate unchanged.

use crate::error::{Error, Result};
use crate::model::{MpccProblem, Point};
use crate::pipa::{drive, FeasibilityRadius, PipaConfig, RadiusPolicy, SolveOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadiusRule {
    /// Radius driven by `ρ_k`.
    #[default]
    Adaptive,
    /// `Δ = c(‖F‖ + yᵀw)` with half-width `√Δ`, as in the plain driver.
    FeasibilityTied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrConfig {
    pub base: PipaConfig,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub delta0: f64,
    pub delta_min: f64,
    pub rule: RadiusRule,
}

impl Default for TrConfig {
    fn default() -> Self {
        Self {
            base: PipaConfig {
                eps_term: 1e-10,
                max_iter: 500,
                ..PipaConfig::default()
            },
            gamma0: 0.5,
            gamma1: 0.5,
            gamma2: 2.0,
            eta1: 0.25,
            eta2: 0.75,
            delta0: 1.0,
            delta_min: 1e-12,
            rule: RadiusRule::Adaptive,
        }
    }
}

impl TrConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let ordered = 0.0 < self.gamma0
            && self.gamma0 <= self.gamma1
            && self.gamma1 < 1.0
            && 1.0 <= self.gamma2
            && 0.0 < self.eta1
            && self.eta1 < self.eta2
            && self.eta2 < 1.0;
        if !ordered {
            return Err(Error::InvalidConfig(
                "need 0 < gamma0 <= gamma1 < 1 <= gamma2 and 0 < eta1 < eta2 < 1".into(),
            ));
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(Error::InvalidConfig(format!("delta0 must be positive, got {}", self.delta0)));
        }
        if !(self.delta_min > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "delta_min must be positive, got {}",
                self.delta_min
            )));
        }
        Ok(())
    }
}

/// `ρ_k = ared / pred` with both taken as signed changes.
pub fn tr_ratio(ared_signed: f64, pred: f64) -> f64 {
    ared_signed / pred
}

pub fn tr_update(delta: f64, rho_k: f64, cfg: &TrConfig) -> f64 {
    if rho_k < cfg.eta1 {
        cfg.gamma1 * delta
    } else if rho_k < cfg.eta2 {
        delta
    } else {
        cfg.gamma2 * delta
    }
}

pub(crate) struct AdaptiveRadius {
    delta: f64,
    cfg: TrConfig,
}

impl AdaptiveRadius {
    pub(crate) fn new(cfg: &TrConfig) -> Self {
        Self {
            delta: cfg.delta0,
            cfg: cfg.clone(),
        }
    }
}

impl RadiusPolicy for AdaptiveRadius {
    fn radius(&mut self, _p: &Point, _f_norm: f64) -> Result<(f64, f64)> {
        if self.delta < self.cfg.delta_min {
            return Err(Error::RadiusCollapse {
                delta: self.delta,
                delta_min: self.cfg.delta_min,
            });
        }
        Ok((self.delta, self.delta))
    }

    fn after_step(&mut self, ared: f64, pred: f64) -> Result<bool> {
        let rho_k = tr_ratio(ared, pred);
        self.delta = tr_update(self.delta, rho_k, &self.cfg);
        Ok(rho_k > 0.0)
    }
}

pub fn trpipa_solve(problem: &MpccProblem, cfg: &TrConfig, start: &Point) -> SolveOutcome {
    if let Err(e) = cfg.validate() {
        return SolveOutcome {
            status: crate::pipa::SolveStatus::Failed(e),
            trace: Vec::new(),
        };
    }
    match cfg.rule {
        RadiusRule::Adaptive => drive(problem, &cfg.base, start, AdaptiveRadius::new(cfg)),
        RadiusRule::FeasibilityTied => drive(problem, &cfg.base, start, FeasibilityRadius { c: cfg.base.c }),
    }
}
