//! Exact-penalty solver for the orthogonality-constrained X-subproblem.
//!
//! The constraint `XᵀX = I` is replaced by the merit function `h = l + g`
//! minimized over the Frobenius ball of radius `ρ`. Iterates follow the
//! approximate gradient `D(X)` with Barzilai-Borwein step sizes and are
//! radially projected back into the ball. A nonmonotone acceptance test
//! against the last few merit values keeps the final merit below the initial.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{DscofsError, Result};
use crate::model::{merit_and_direction, Anchors, Covariance, Mat, MeritParams};

pub const STEP_FLOOR: f64 = 1e-10;
pub const STEP_CAP: f64 = 1e10;
/// Length of the merit window used by the nonmonotone acceptance test.
pub const MERIT_WINDOW: usize = 5;
/// Step halvings tried before the inner solve gives up on an iteration.
pub const MAX_HALVINGS: usize = 20;

/// Barzilai-Borwein variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BbKind {
    /// `⟨s,s⟩ / |⟨s,y⟩|`
    Long,
    /// `|⟨s,y⟩| / ⟨y,y⟩`
    Short,
}

impl BbKind {
    /// Odd iterations take the long step, even ones the short step.
    pub fn for_iteration(iter: usize) -> Self {
        if iter % 2 == 1 {
            BbKind::Long
        } else {
            BbKind::Short
        }
    }
}

/// BB step from the iterate difference `dx` and direction difference `dd`,
/// clamped to `[floor, cap]`. Falls back to `prev` on a zero denominator.
pub fn bb_step(dx: &Mat, dd: &Mat, kind: BbKind, prev: f64, floor: f64, cap: f64) -> f64 {
    let sy = dx.dot(dd).abs();
    let (num, den) = match kind {
        BbKind::Long => (dx.norm_squared(), sy),
        BbKind::Short => (sy, dd.norm_squared()),
    };
    if den == 0.0 || !den.is_finite() || !num.is_finite() {
        return prev;
    }
    (num / den).clamp(floor, cap)
}

/// Radial projection onto `{X : ‖X‖_F ≤ ρ}`.
pub fn project_ball(xhat: &Mat, rho: f64) -> Mat {
    let norm = xhat.norm();
    if norm > rho {
        xhat * (rho / norm)
    } else {
        xhat.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerOptions {
    pub rho: f64,
    pub tol: f64,
    pub max_iter: usize,
}

/// Iteration state of one inner solve.
#[derive(Debug, Clone)]
pub struct InnerState {
    pub x: Mat,
    pub d: Mat,
    pub x_prev: Option<Mat>,
    pub d_prev: Option<Mat>,
    pub eta: f64,
    pub iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerResult {
    #[serde(with = "crate::model::rows")]
    pub x: Mat,
    pub iterations: usize,
    pub converged: bool,
    pub merit_initial: f64,
    pub merit_final: f64,
    pub direction_norm_initial: f64,
    pub direction_norm_final: f64,
    /// Largest `‖X‖_F` over all iterates.
    pub max_iterate_norm: f64,
    pub orthogonality_residual: f64,
}

/// Approximately minimizes the merit function on the ball, starting from `X^k`.
pub fn solve_x_subproblem(
    cov: &impl Covariance,
    anchors: &Anchors<'_>,
    params: &MeritParams,
    opts: &InnerOptions,
) -> Result<InnerResult> {
    let x0 = project_ball(anchors.xk, opts.rho);
    let ev = merit_and_direction(&x0, anchors, cov, params);
    let merit_initial = ev.value;
    let direction_norm_initial = ev.d.norm();
    if !merit_initial.is_finite() || !direction_norm_initial.is_finite() {
        return Err(DscofsError::Numerical {
            iter: 0,
            reason: "non-finite merit at the starting point".into(),
            trace: vec![merit_initial],
        });
    }
    let stop_at = opts.tol * direction_norm_initial.max(1.0);

    let mut state = InnerState {
        eta: 1.0 / direction_norm_initial.max(1.0),
        x: x0,
        d: ev.d,
        x_prev: None,
        d_prev: None,
        iter: 0,
    };
    let mut merit = merit_initial;
    let mut max_norm = state.x.norm();
    let mut window: VecDeque<f64> = VecDeque::from([merit_initial]);
    let mut trace = vec![merit_initial];
    let mut converged = direction_norm_initial <= stop_at;

    while !converged && state.iter < opts.max_iter {
        let reference = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut step = state.eta;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = project_ball(&(&state.x - &state.d * step), opts.rho);
            let cand_ev = merit_and_direction(&cand, anchors, cov, params);
            if !cand_ev.value.is_finite() || cand_ev.d.iter().any(|v| !v.is_finite()) {
                trace.push(cand_ev.value);
                return Err(DscofsError::Numerical {
                    iter: state.iter,
                    reason: "non-finite merit or direction in the X-subproblem".into(),
                    trace,
                });
            }
            if cand_ev.value < reference {
                accepted = Some((cand, cand_ev));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cand_ev)) = accepted else {
            break;
        };

        state.iter += 1;
        let dx = &cand - &state.x;
        let dd = &cand_ev.d - &state.d;
        let eta = bb_step(
            &dx,
            &dd,
            BbKind::for_iteration(state.iter),
            step,
            STEP_FLOOR,
            STEP_CAP,
        );
        state.x_prev = Some(std::mem::replace(&mut state.x, cand));
        state.d_prev = Some(std::mem::replace(&mut state.d, cand_ev.d));
        state.eta = eta;
        merit = cand_ev.value;
        max_norm = max_norm.max(state.x.norm());
        trace.push(merit);
        window.push_back(merit);
        if window.len() > MERIT_WINDOW {
            window.pop_front();
        }
        converged = state.d.norm() <= stop_at;
    }

    let orthogonality_residual = crate::model::orthogonality_residual(&state.x);
    Ok(InnerResult {
        direction_norm_final: state.d.norm(),
        x: state.x,
        iterations: state.iter,
        converged,
        merit_initial,
        merit_final: merit,
        direction_norm_initial,
        max_iterate_norm: max_norm,
        orthogonality_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bb_identity_and_scaling() {
        let d = Mat::from_row_slice(2, 1, &[1.0, -2.0]);
        for kind in [BbKind::Long, BbKind::Short] {
            assert_abs_diff_eq!(bb_step(&d, &d, kind, 0.1, STEP_FLOOR, STEP_CAP), 1.0);
            assert_abs_diff_eq!(bb_step(&(&d * 2.0), &d, kind, 0.1, STEP_FLOOR, STEP_CAP), 2.0);
        }
    }

    #[test]
    fn bb_degenerate_keeps_previous() {
        let z = Mat::zeros(2, 2);
        assert_eq!(bb_step(&z, &z, BbKind::Long, 0.25, STEP_FLOOR, STEP_CAP), 0.25);
        assert_eq!(bb_step(&z, &z, BbKind::Short, 0.25, STEP_FLOOR, STEP_CAP), 0.25);
    }

    #[test]
    fn bb_clamps() {
        let dx = Mat::from_row_slice(1, 1, &[1.0]);
        let dd = Mat::from_row_slice(1, 1, &[1e-20]);
        assert_eq!(bb_step(&dx, &dd, BbKind::Long, 1.0, STEP_FLOOR, STEP_CAP), STEP_CAP);
        assert_eq!(bb_step(&dd, &dx, BbKind::Short, 1.0, STEP_FLOOR, STEP_CAP), STEP_FLOOR);
    }

    #[test]
    fn alternation_by_parity() {
        assert_eq!(BbKind::for_iteration(1), BbKind::Long);
        assert_eq!(BbKind::for_iteration(2), BbKind::Short);
    }

    #[test]
    fn ball_projection() {
        let rho = 2.0;
        let inside = Mat::from_row_slice(2, 1, &[0.6, 0.8]);
        assert_eq!(project_ball(&inside, rho), inside);
        let outside = Mat::from_row_slice(2, 1, &[2.4, 3.2]);
        let p = project_ball(&outside, rho);
        assert_abs_diff_eq!(p.norm(), rho, epsilon = 1e-15);
        assert_abs_diff_eq!(p, Mat::from_row_slice(2, 1, &[1.2, 1.6]), epsilon = 1e-15);
        assert_eq!(project_ball(&Mat::zeros(2, 2), rho), Mat::zeros(2, 2));
    }
}
