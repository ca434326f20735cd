mod common;

use common::{centered, rng};
use dscofs::model::{count_nonzero_rows, count_nonzeros, objective_f, orthogonality_residual, Covariance};
use dscofs::rng::rng_for;
use dscofs::solver::{convergence_diagnostics, init_orthogonal, random_orthonormal};
use dscofs::{run, SolverConfig};
use rand::Rng;

#[test]
fn traces_are_monotone_and_budgets_hold() {
    let mut r = rng(31);
    for seed in 0..10 {
        let d = r.random_range(4..20);
        let m = r.random_range(1..=3);
        let a = centered(d, r.random_range(5..40), &mut r);
        let mut cfg = SolverConfig::new(m, r.random_range(1..=d));
        cfg.alpha = r.random_range(0.1..0.9);
        cfg.rng_seed = seed;
        let res = run(&a, &cfg).unwrap();
        let diag = convergence_diagnostics(&res);
        assert!(diag.objective_nonincreasing);
        assert!(diag.max_decrease_violation <= 1e-8, "{}", diag.max_decrease_violation);
        assert!(diag.final_orthogonality_residual <= 1e-8);
        let s = res.config.s;
        let rho = res.config.rho;
        for step in &res.steps {
            assert!(step.y_nnz <= s && step.z_rows <= cfg.r);
            assert!(step.x_norm <= rho && step.y_norm <= rho && step.z_norm <= rho);
        }
        assert!(count_nonzeros(&res.y_final) <= s);
        assert!(count_nonzero_rows(&res.z_final) <= cfg.r);
        assert!(diag.final_gap <= diag.max_gap);
    }
}

#[test]
fn identical_inputs_give_identical_traces() {
    let a = centered(12, 30, &mut rng(32));
    let mut cfg = SolverConfig::new(3, 4);
    cfg.rng_seed = 77;
    let one = run(&a, &cfg).unwrap();
    let two = run(&a, &cfg).unwrap();
    assert_eq!(one.objective_trace, two.objective_trace);
    assert_eq!(one.z_final, two.z_final);
    cfg.rng_seed = 78;
    assert_ne!(run(&a, &cfg).unwrap().objective_trace, one.objective_trace);
}

#[test]
fn inactive_constraints_recover_full_pca() {
    let a = centered(4, 25, &mut rng(33));
    let mut cfg = SolverConfig::new(4, 4);
    cfg.s = Some(16);
    cfg.outer_tol = 1e-10;
    let res = run(&a, &cfg).unwrap();
    let x = &res.x_final;
    assert!((x - &res.y_final).amax() < 1e-6);
    assert!((x - &res.z_final).amax() < 1e-6);
    let total = a.values().norm_squared();
    let f = *res.objective_trace.last().unwrap();
    assert!((f + total).abs() <= 1e-8 * total, "{f} vs {}", -total);
}

#[test]
fn init_picks_best_of_restarts() {
    let a = centered(9, 20, &mut rng(34));
    let x = init_orthogonal(9, 3, &a, 10, &mut rng_for(5, 0)).unwrap();
    let mut r = rng_for(5, 0);
    let best = (0..10)
        .map(|_| -a.quad(&random_orthonormal(9, 3, &mut r)))
        .fold(f64::INFINITY, f64::min);
    assert_eq!(-a.quad(&x.values), best);
    assert!(orthogonality_residual(&x.values) <= 1e-12);
}

#[test]
fn long_runs_shrink_the_gap() {
    let a = centered(10, 30, &mut rng(35));
    let mut cfg = SolverConfig::new(2, 3);
    cfg.outer_tol = 1e-300;
    cfg.max_outer_iter = 300;
    let res = run(&a, &cfg).unwrap();
    let diag = convergence_diagnostics(&res);
    assert!(diag.min_gap <= 1e-2 * diag.initial_gap, "{diag:?}");
}

#[test]
fn objective_trace_starts_at_initial_point() {
    let a = centered(6, 12, &mut rng(36));
    let cfg = SolverConfig::new(2, 2);
    let res = run(&a, &cfg).unwrap();
    assert_eq!(res.objective_trace.len(), res.outer_iters + 1);
    let last = objective_f(&res.x_final, &res.y_final, &res.z_final, &a, cfg.mu1, cfg.mu2).unwrap();
    assert!((last - res.objective_trace.last().unwrap()).abs() <= 1e-9 * last.abs().max(1.0));
}

#[test]
fn planted_high_variance_pair_is_selected() {
    let mut r = rng(37);
    for seed in 0..5 {
        let mut raw = common::gaussian(9, 300, &mut r);
        for j in 0..300 {
            let t = j as f64 / 300.0 * std::f64::consts::TAU;
            raw[(3, j)] = 3.0 * t.cos() + 0.1 * raw[(3, j)];
            raw[(4, j)] = 3.0 * t.sin() + 0.1 * raw[(4, j)];
        }
        let a = dscofs::center_columns(&raw).unwrap();
        let mut cfg = SolverConfig::new(2, 2);
        cfg.rng_seed = seed;
        let res = run(&a, &cfg).unwrap();
        let mut sel = dscofs::selection::rank_features(&res.z_final).selected();
        sel.sort();
        assert_eq!(sel, vec![3, 4]);
    }
}
