//! Grid search with one atomically written checkpoint per cell.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;

use dscofs::cluster::evaluate;
use dscofs::io::{load_report, save_report, write_atomic, Report};
use dscofs::selection::rank_features;
use dscofs::{run, Result, SolverConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::one_based;
use crate::config::{prepare, GridSpec};
use crate::SolveArgs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub mu1: f64,
    pub mu2: f64,
    pub alpha: f64,
    pub count: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    pub selected_1based: Vec<usize>,
    pub outer_iters: usize,
    pub converged: bool,
    pub objective_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    fingerprint: String,
    cell: GridCell,
}

#[derive(Serialize)]
struct GridReport {
    config: SolverConfig,
    grid: GridSpec,
    runs: usize,
    skipped_counts: Vec<usize>,
    cells: Vec<GridCell>,
    best_per_count: Vec<GridCell>,
    best: GridCell,
}

fn fingerprint(p: &crate::config::Prepared, runs: usize) -> String {
    let mut h = DefaultHasher::new();
    for v in p.data.values().iter() {
        v.to_bits().hash(&mut h);
    }
    if let Some(l) = &p.labels {
        l.as_slice().hash(&mut h);
    }
    serde_json::to_string(&p.solver).unwrap_or_default().hash(&mut h);
    runs.hash(&mut h);
    format!("{:016x}", h.finish())
}

fn cell_name(mu1: f64, mu2: f64, alpha: f64, count: usize) -> String {
    format!("cell_mu1={mu1:e}_mu2={mu2:e}_alpha={alpha}_count={count}.json")
}

pub fn grid(args: &SolveArgs, fresh: bool, seed: u64, out: &Path) -> Result<()> {
    let p = prepare(args, seed, true)?;
    let labels = p.labels.as_ref().expect("labels required");
    let d = p.data.d();
    let (counts, skipped): (Vec<usize>, Vec<usize>) =
        p.grid.feature_counts.iter().partition(|&&c| c <= d);
    if counts.is_empty() {
        return Err(dscofs::DscofsError::InvalidConfig(format!(
            "no feature count fits in {d} features"
        )));
    }
    for c in &skipped {
        eprintln!("grid: skipping count {c} > {d} features");
    }
    let mu_pairs: Vec<(f64, f64)> = match &p.grid.mu2_candidates {
        Some(mu2s) => p
            .grid
            .mu_candidates
            .iter()
            .flat_map(|&a| mu2s.iter().map(move |&b| (a, b)))
            .collect(),
        None => p.grid.mu_candidates.iter().map(|&m| (m, m)).collect(),
    };
    let mut cell_keys = Vec::new();
    for &count in &counts {
        for &(mu1, mu2) in &mu_pairs {
            for &alpha in &p.grid.alpha_candidates {
                cell_keys.push((mu1, mu2, alpha, count));
            }
        }
    }

    let fp = fingerprint(&p, args.runs);
    let cell_dir = out.join("grid_cells");
    let cells = cell_keys
        .par_iter()
        .map(|&(mu1, mu2, alpha, count)| {
            let path = cell_dir.join(cell_name(mu1, mu2, alpha, count));
            if !fresh && path.exists() {
                if let Ok(cp) = load_report::<Checkpoint>(&path) {
                    if cp.fingerprint == fp {
                        return Ok(cp.cell);
                    }
                }
            }
            let cfg = SolverConfig {
                mu1,
                mu2,
                alpha,
                r: count,
                s: None,
                ..p.solver.clone()
            };
            let res = run(&p.data, &cfg)?;
            let ranking = rank_features(&res.z_final);
            let selected = ranking.top(count);
            let ev = evaluate(&p.data, selected, labels, args.runs, seed)?;
            let cell = GridCell {
                mu1,
                mu2,
                alpha,
                count,
                acc_mean: ev.acc_mean,
                acc_std: ev.acc_std,
                nmi_mean: ev.nmi_mean,
                nmi_std: ev.nmi_std,
                selected_1based: one_based(selected),
                outer_iters: res.outer_iters,
                converged: res.converged,
                objective_final: *res.objective_trace.last().expect("nonempty trace"),
            };
            save_report(
                &Checkpoint {
                    fingerprint: fp.clone(),
                    cell: cell.clone(),
                },
                &path,
            )?;
            Ok(cell)
        })
        .collect::<Result<Vec<_>>>()?;

    let best_per_count: Vec<GridCell> = counts
        .iter()
        .map(|&c| best_of(cells.iter().filter(|cell| cell.count == c)))
        .collect();
    let best = best_of(best_per_count.iter());
    let mut curve = String::from("count,acc_mean,acc_std,nmi_mean,nmi_std\n");
    for c in &best_per_count {
        curve.push_str(&format!(
            "{},{},{},{},{}\n",
            c.count, c.acc_mean, c.acc_std, c.nmi_mean, c.nmi_std
        ));
    }
    write_atomic(&out.join("grid_curve.csv"), curve.as_bytes())?;
    let report = GridReport {
        config: p.solver,
        grid: p.grid,
        runs: args.runs,
        skipped_counts: skipped,
        cells,
        best_per_count,
        best,
    };
    save_report(&Report::new("grid", seed, report), &out.join("grid.json"))
}

/// Highest mean ACC; the earliest cell wins ties.
fn best_of<'a>(cells: impl Iterator<Item = &'a GridCell>) -> GridCell {
    let mut best: Option<&GridCell> = None;
    for c in cells {
        if best.is_none_or(|b| c.acc_mean > b.acc_mean) {
            best = Some(c);
        }
    }
    best.expect("nonempty grid").clone()
}
