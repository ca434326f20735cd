use serde::{Deserialize, Serialize};

use crate::error::{DscofsError, Result};
use crate::model::{beta_lower_bound, Covariance, MeritParams, PenaltyBound};

/// Multiplier applied to the computed penalty bound when `beta` is left unset.
pub const BETA_MARGIN: f64 = 1.05;
/// Default ball radius as a multiple of `√m`.
pub const RHO_FACTOR: f64 = 1.5;

/// Solver hyperparameters. Unset optional fields are derived from the data
/// and the projection dimension by [`SolverConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Projection dimension.
    pub m: usize,
    /// Row budget (number of selected features).
    pub r: usize,
    /// Fraction of the `d·m` entries kept by the element budget.
    pub alpha: f64,
    /// Explicit element budget; overrides `alpha`.
    pub s: Option<usize>,
    pub mu1: f64,
    pub mu2: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub max_outer_iter: usize,
    pub outer_tol: f64,
    pub inner_max_iter: usize,
    pub inner_tol: f64,
    pub restarts: usize,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            m: 2,
            r: 2,
            alpha: 0.5,
            s: None,
            mu1: 1.0,
            mu2: 1.0,
            tau1: 1e-2,
            tau2: 1e-2,
            tau3: 1e-2,
            beta: None,
            rho: None,
            max_outer_iter: 100,
            outer_tol: 1e-3,
            inner_max_iter: 500,
            inner_tol: 1e-6,
            restarts: 10,
            rng_seed: 0,
        }
    }
}

/// A configuration with every derived quantity filled in for a concrete `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub d: usize,
    pub m: usize,
    pub r: usize,
    pub s: usize,
    pub mu1: f64,
    pub mu2: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub beta: f64,
    pub rho: f64,
    pub bound: PenaltyBound,
    pub max_outer_iter: usize,
    pub outer_tol: f64,
    pub inner_max_iter: usize,
    pub inner_tol: f64,
    pub restarts: usize,
    pub rng_seed: u64,
}

impl ResolvedConfig {
    pub fn merit_params(&self) -> MeritParams {
        MeritParams {
            mu1: self.mu1,
            mu2: self.mu2,
            tau1: self.tau1,
            beta: self.beta,
        }
    }

    pub fn beta_satisfies_bound(&self) -> bool {
        self.beta >= self.bound.beta_min
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(DscofsError::InvalidConfig(format!(
            "{name} must be finite and positive, got {v}"
        )));
    }
    Ok(())
}

impl SolverConfig {
    pub fn new(m: usize, r: usize) -> Self {
        SolverConfig {
            m,
            r,
            ..Default::default()
        }
    }

    /// Element budget for `d` features: `round(α·d·m)`, at least 1.
    pub fn element_budget(&self, d: usize) -> usize {
        match self.s {
            Some(s) => s,
            None => ((self.alpha * (d * self.m) as f64).round() as usize).max(1),
        }
    }

    pub fn rho_or_default(&self) -> f64 {
        self.rho
            .unwrap_or_else(|| RHO_FACTOR * (self.m as f64).sqrt())
    }

    /// Checks every field that does not depend on the data.
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.m == 0 || self.m > d {
            return Err(DscofsError::InvalidConfig(format!(
                "projection dimension m = {} must lie in [1, {d}]",
                self.m
            )));
        }
        if self.r == 0 || self.r > d {
            return Err(DscofsError::InvalidConfig(format!(
                "row budget r = {} must lie in [1, {d}]",
                self.r
            )));
        }
        if self.s.is_none() && !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(DscofsError::InvalidConfig(format!(
                "alpha = {} must lie in (0, 1]",
                self.alpha
            )));
        }
        let s = self.element_budget(d);
        if s == 0 || s > d * self.m {
            return Err(DscofsError::InvalidConfig(format!(
                "element budget s = {s} must lie in [1, {}]",
                d * self.m
            )));
        }
        if s < self.r {
            log::warn!("element budget s = {s} is below the row budget r = {}", self.r);
        }
        positive("mu1", self.mu1)?;
        positive("mu2", self.mu2)?;
        positive("tau1", self.tau1)?;
        positive("tau2", self.tau2)?;
        positive("tau3", self.tau3)?;
        positive("outer_tol", self.outer_tol)?;
        positive("inner_tol", self.inner_tol)?;
        if let Some(beta) = self.beta {
            positive("beta", beta)?;
        }
        let rho = self.rho_or_default();
        if !(rho.is_finite() && rho > (self.m as f64).sqrt()) {
            return Err(DscofsError::InvalidConfig(format!(
                "rho = {rho} must exceed sqrt(m) = {}",
                (self.m as f64).sqrt()
            )));
        }
        if self.restarts == 0 {
            return Err(DscofsError::InvalidConfig("restarts must be at least 1".into()));
        }
        if self.max_outer_iter == 0 || self.inner_max_iter == 0 {
            return Err(DscofsError::InvalidConfig(
                "iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Validates against the data and fills in `s`, `rho` and `beta`.
    pub fn resolve(&self, cov: &impl Covariance) -> Result<ResolvedConfig> {
        let d = cov.dim();
        self.validate(d)?;
        let rho = self.rho_or_default();
        let bound = beta_lower_bound(cov, self.mu1, self.mu2, self.tau1, rho, self.m);
        let beta = self.beta.unwrap_or(BETA_MARGIN * bound.beta_min);
        if beta < bound.beta_min {
            log::warn!(
                "beta = {beta} is below the penalty bound {}; convergence guarantees do not apply",
                bound.beta_min
            );
        }
        Ok(ResolvedConfig {
            d,
            m: self.m,
            r: self.r,
            s: self.element_budget(d),
            mu1: self.mu1,
            mu2: self.mu2,
            tau1: self.tau1,
            tau2: self.tau2,
            tau3: self.tau3,
            beta,
            rho,
            bound,
            max_outer_iter: self.max_outer_iter,
            outer_tol: self.outer_tol,
            inner_max_iter: self.inner_max_iter,
            inner_tol: self.inner_tol,
            restarts: self.restarts,
            rng_seed: self.rng_seed,
        })
    }
}
