//! Outer proximal alternating minimization over `(X, Y, Z)`.
//!
//! Each outer iteration solves the X-subproblem with the exact-penalty inner
//! solver, retracts the result onto the Stiefel manifold with the orthogonal
//! polar factor, then updates `Y` (element budget) before `Z` (row budget).
//! A retracted X that does not lower the X-subproblem objective is rejected in
//! favor of `X^k`, which keeps the sufficient-decrease inequality intact even
//! though the inner solve is inexact.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{ResolvedConfig, SolverConfig};
use crate::error::{DscofsError, Result};
use crate::model::{
    objective_f, orthogonality_residual, prox_quadratic, Anchors, AuxY, AuxZ, Covariance,
    DataMatrix, GramOperator, Mat, TransformMatrix,
};
use crate::penalty::{solve_x_subproblem, InnerOptions};
use crate::prox::{hard_threshold_elements, hard_threshold_rows, y_update, z_update};
use crate::rng::{rng_for, SolverRng};

/// Orthonormal `d × m` matrix from the QR factorization of a Gaussian draw.
pub fn random_orthonormal(d: usize, m: usize, rng: &mut impl Rng) -> Mat {
    let g = Mat::from_fn(d, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Best of `restarts` random orthonormal matrices by `−Tr(XᵀAAᵀX)`; ties keep the earliest.
pub fn init_orthogonal(
    d: usize,
    m: usize,
    cov: &impl Covariance,
    restarts: usize,
    rng: &mut impl Rng,
) -> Result<TransformMatrix> {
    if m == 0 || m > d {
        return Err(DscofsError::invalid(format!(
            "cannot draw {m} orthonormal columns in dimension {d}"
        )));
    }
    if restarts == 0 {
        return Err(DscofsError::invalid("restarts must be at least 1"));
    }
    if cov.dim() != d {
        return Err(DscofsError::shape(format!(
            "data has {} features, requested d = {d}",
            cov.dim()
        )));
    }
    let mut best: Option<(f64, Mat)> = None;
    for _ in 0..restarts {
        let x = random_orthonormal(d, m, rng);
        let value = -cov.quad(&x);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, x));
        }
    }
    TransformMatrix::new(best.expect("restarts >= 1").1)
}

/// Relative objective change test `|f_k − f_{k−1}| / (1 + |f_{k−1}|) ≤ tol`.
pub fn check_stop(f_prev: f64, f_curr: f64, tol: f64) -> bool {
    (f_curr - f_prev).abs() / (1.0 + f_prev.abs()) <= tol
}

/// Orthogonal polar factor `U Vᵀ` of `X = U Σ Vᵀ`.
pub fn polar_retract(x: &Mat) -> Mat {
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    u * v_t
}

/// Per-iteration record of the outer loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterStep {
    pub objective: f64,
    pub dx_sq: f64,
    pub dy_sq: f64,
    pub dz_sq: f64,
    pub x_accepted: bool,
    pub inner_iterations: usize,
    pub inner_converged: bool,
    /// `‖XᵀX − I‖_F` of the inner solution before retraction.
    pub pre_retraction_residual: f64,
    pub x_norm: f64,
    pub y_norm: f64,
    pub z_norm: f64,
    pub y_nnz: usize,
    pub z_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    #[serde(with = "crate::model::rows")]
    pub x_final: Mat,
    #[serde(with = "crate::model::rows")]
    pub y_final: Mat,
    #[serde(with = "crate::model::rows")]
    pub z_final: Mat,
    /// `f` at the initial point followed by one value per outer iteration.
    pub objective_trace: Vec<f64>,
    pub iterate_gap_trace: Vec<f64>,
    pub steps: Vec<OuterStep>,
    pub outer_iters: usize,
    pub converged: bool,
    pub config: ResolvedConfig,
    /// Excluded from serialized output so that reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Starting point of a solve.
#[derive(Debug, Clone)]
pub struct InitialPoint {
    pub x: Mat,
    pub y: Mat,
    pub z: Mat,
}

impl InitialPoint {
    /// `Y⁰` and `Z⁰` are the budget projections of `X⁰`.
    pub fn from_x(x: Mat, s: usize, r: usize) -> Result<Self> {
        let y = hard_threshold_elements(&x, s)?.values;
        let z = hard_threshold_rows(&x, r)?.values;
        Ok(InitialPoint { x, y, z })
    }
}

fn check_data(a: &DataMatrix) -> Result<()> {
    if !a.is_centered() {
        return Err(DscofsError::invalid(
            "the solver expects centered data; call center_columns first",
        ));
    }
    Ok(())
}

/// Draws `X⁰` for `config` with its own seed.
pub fn initial_x(a: &DataMatrix, config: &SolverConfig) -> Result<Mat> {
    config.validate(a.d())?;
    let op = GramOperator::new(a);
    let mut rng: SolverRng = rng_for(config.rng_seed, 0);
    Ok(init_orthogonal(a.d(), config.m, &op, config.restarts, &mut rng)?.values)
}

/// Runs the full solver from a seeded random orthonormal start.
pub fn run(a: &DataMatrix, config: &SolverConfig) -> Result<SolveResult> {
    check_data(a)?;
    let x0 = initial_x(a, config)?;
    run_from(a, config, x0)
}

/// Runs the full solver from a caller-supplied orthonormal `X⁰`.
pub fn run_from(a: &DataMatrix, config: &SolverConfig, x0: Mat) -> Result<SolveResult> {
    check_data(a)?;
    let start = Instant::now();
    let op = GramOperator::new(a);
    let cfg = config.resolve(&op)?;
    if x0.shape() != (cfg.d, cfg.m) {
        return Err(DscofsError::shape(format!(
            "initial X is {:?}, expected ({}, {})",
            x0.shape(),
            cfg.d,
            cfg.m
        )));
    }
    let init = InitialPoint::from_x(x0, cfg.s, cfg.r)?;
    let mut result = iterate(&op, &cfg, init)?;
    result.wall_time = start.elapsed().as_secs_f64();
    Ok(result)
}

fn iterate(op: &GramOperator, cfg: &ResolvedConfig, init: InitialPoint) -> Result<SolveResult> {
    let params = cfg.merit_params();
    let inner_opts = InnerOptions {
        rho: cfg.rho,
        tol: cfg.inner_tol,
        max_iter: cfg.inner_max_iter,
    };
    let InitialPoint {
        mut x,
        mut y,
        mut z,
    } = init;
    let mut f_prev = objective_f(&x, &y, &z, op, cfg.mu1, cfg.mu2)?;
    let mut objective_trace = vec![f_prev];
    let mut iterate_gap_trace = Vec::new();
    let mut steps = Vec::new();
    let mut converged = false;

    for k in 0..cfg.max_outer_iter {
        let anchors = Anchors {
            xk: &x,
            yk: &y,
            zk: &z,
        };
        let inner = solve_x_subproblem(op, &anchors, &params, &inner_opts).map_err(|e| match e {
            DscofsError::Numerical { reason, .. } => DscofsError::Numerical {
                iter: k,
                reason: format!("inner solve: {reason}"),
                trace: objective_trace.clone(),
            },
            other => other,
        })?;
        let retracted = polar_retract(&inner.x);
        let l_new = prox_quadratic(&retracted, &anchors, op, &params).0;
        let l_old = prox_quadratic(&x, &anchors, op, &params).0;
        let x_accepted = l_new <= l_old;
        let x_next = if x_accepted { retracted } else { x.clone() };

        let y_next = y_update(&x_next, &y, cfg.tau2, cfg.s)?.values;
        let z_next = z_update(&x_next, &z, cfg.tau3, cfg.r)?.values;
        let f_curr = objective_f(&x_next, &y_next, &z_next, op, cfg.mu1, cfg.mu2)?;
        if !f_curr.is_finite() {
            objective_trace.push(f_curr);
            return Err(DscofsError::Numerical {
                iter: k,
                reason: "non-finite objective".into(),
                trace: objective_trace,
            });
        }

        let dx_sq = (&x_next - &x).norm_squared();
        let dy_sq = (&y_next - &y).norm_squared();
        let dz_sq = (&z_next - &z).norm_squared();
        steps.push(OuterStep {
            objective: f_curr,
            dx_sq,
            dy_sq,
            dz_sq,
            x_accepted,
            inner_iterations: inner.iterations,
            inner_converged: inner.converged,
            pre_retraction_residual: inner.orthogonality_residual,
            x_norm: x_next.norm(),
            y_norm: y_next.norm(),
            z_norm: z_next.norm(),
            y_nnz: crate::model::count_nonzeros(&y_next),
            z_rows: crate::model::count_nonzero_rows(&z_next),
        });
        iterate_gap_trace.push((dx_sq + dy_sq + dz_sq).sqrt());
        objective_trace.push(f_curr);
        x = x_next;
        y = y_next;
        z = z_next;

        let stop = check_stop(f_prev, f_curr, cfg.outer_tol);
        f_prev = f_curr;
        if stop {
            converged = true;
            break;
        }
    }

    debug_assert!(orthogonality_residual(&x) <= 1e-8);
    Ok(SolveResult {
        outer_iters: steps.len(),
        x_final: x,
        y_final: AuxY::new(y, cfg.s)?.values,
        z_final: AuxZ::new(z, cfg.r)?.values,
        objective_trace,
        iterate_gap_trace,
        steps,
        converged,
        config: cfg.clone(),
        wall_time: 0.0,
    })
}

/// Checkable consequences of the convergence theory for a finished solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostics {
    /// Largest `f^{k+1} + τ1‖ΔX‖² + τ2‖ΔY‖² + τ3‖ΔZ‖² − f^k` (≤ 0 means no violation).
    pub max_decrease_violation: f64,
    pub initial_gap: f64,
    pub final_gap: f64,
    pub max_gap: f64,
    pub min_gap: f64,
    /// `2·max(τ1, τ2, τ3)` times the final gap.
    pub subgradient_bound: f64,
    pub max_pre_retraction_residual: f64,
    pub final_orthogonality_residual: f64,
    pub rejected_x_steps: usize,
    pub objective_nonincreasing: bool,
}

pub fn convergence_diagnostics(result: &SolveResult) -> ConvergenceDiagnostics {
    let cfg = &result.config;
    let max_decrease_violation = result
        .steps
        .iter()
        .zip(result.objective_trace.iter())
        .map(|(s, f_prev)| {
            s.objective + cfg.tau1 * s.dx_sq + cfg.tau2 * s.dy_sq + cfg.tau3 * s.dz_sq - f_prev
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let gaps = &result.iterate_gap_trace;
    let final_gap = gaps.last().cloned().unwrap_or(0.0);
    let tau = 2.0 * cfg.tau1.max(cfg.tau2).max(cfg.tau3);
    ConvergenceDiagnostics {
        max_decrease_violation: if result.steps.is_empty() {
            0.0
        } else {
            max_decrease_violation
        },
        initial_gap: gaps.first().cloned().unwrap_or(0.0),
        final_gap,
        max_gap: gaps.iter().cloned().fold(0.0, f64::max),
        min_gap: gaps.iter().cloned().fold(f64::INFINITY, f64::min),
        subgradient_bound: tau * final_gap,
        max_pre_retraction_residual: result
            .steps
            .iter()
            .map(|s| s.pre_retraction_residual)
            .fold(0.0, f64::max),
        final_orthogonality_residual: orthogonality_residual(&result.x_final),
        rejected_x_steps: result.steps.iter().filter(|s| !s.x_accepted).count(),
        objective_nonincreasing: result
            .objective_trace
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-10),
    }
}
