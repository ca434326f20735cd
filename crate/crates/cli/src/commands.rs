use std::path::Path;
use std::time::Instant;

use dscofs::cluster::{evaluate, EvaluationReport};
use dscofs::io::{save_csv, save_report, write_atomic, Report};
use dscofs::rng::rng_for;
use dscofs::selection::{fsr, rank_features, FeatureRanking};
use dscofs::solver::{convergence_diagnostics, initial_x, run_from, ConvergenceDiagnostics};
use dscofs::stats::{friedman, nemenyi_cd, pairwise_significance, FriedmanResult, ScoreTable};
use dscofs::synth::SyntheticKind;
use dscofs::{DscofsError, Result, SolveResult, SolverConfig};
use serde::Serialize;

use crate::config::prepare;
use crate::SolveArgs;

#[derive(Serialize)]
struct SynthInfo {
    name: String,
    samples: usize,
    features: usize,
    classes: usize,
    jitter: f64,
    informative: Vec<usize>,
    informative_1based: Vec<usize>,
}

pub fn synth(kind: SyntheticKind, samples: usize, jitter: f64, seed: u64, out: &Path) -> Result<()> {
    let mut rng = rng_for(seed, 1);
    let shape = kind.generate_shape(samples, jitter, &mut rng)?;
    let ds = dscofs::synth::embed_with_noise(&shape, &mut rng)?;
    save_csv(ds.data.values(), Some(&ds.labels), &out.join(format!("{}.csv", kind.name())))?;
    let info = SynthInfo {
        name: kind.name().into(),
        samples,
        features: ds.data.d(),
        classes: kind.classes(),
        jitter,
        informative: ds.informative.to_vec(),
        informative_1based: ds.informative.iter().map(|i| i + 1).collect(),
    };
    save_report(
        &Report::new("synth", seed, info),
        &out.join(format!("{}.informative.json", kind.name())),
    )
}

/// Top `count` features of a ranking as 1-based indices.
pub fn one_based(features: &[usize]) -> Vec<usize> {
    features.iter().map(|i| i + 1).collect()
}

#[derive(Serialize)]
struct SelectReport<'a> {
    config: &'a SolverConfig,
    selected: Vec<usize>,
    selected_1based: Vec<usize>,
    ranking: &'a FeatureRanking,
    diagnostics: ConvergenceDiagnostics,
    evaluation: Option<EvaluationReport>,
    result: &'a SolveResult,
}

fn timed_solve(a: &dscofs::DataMatrix, cfg: &SolverConfig, x0: dscofs::Mat, label: &str) -> Result<SolveResult> {
    let start = Instant::now();
    let res = run_from(a, cfg, x0)?;
    eprintln!(
        "{label}: {} outer iterations in {:.3}s",
        res.outer_iters,
        start.elapsed().as_secs_f64()
    );
    Ok(res)
}

pub fn select(args: &SolveArgs, seed: u64, out: &Path) -> Result<()> {
    let p = prepare(args, seed, false)?;
    let x0 = initial_x(&p.data, &p.solver)?;
    let res = timed_solve(&p.data, &p.solver, x0, "select")?;
    let ranking = rank_features(&res.z_final);
    let selected = ranking.top(p.solver.r).to_vec();
    let evaluation = match &p.labels {
        Some(l) => Some(evaluate(&p.data, &selected, l, args.runs, seed)?),
        None => None,
    };
    let report = SelectReport {
        config: &p.solver,
        selected_1based: one_based(&selected),
        selected,
        ranking: &ranking,
        diagnostics: convergence_diagnostics(&res),
        evaluation,
        result: &res,
    };
    save_report(&Report::new("select", seed, report), &out.join("select.json"))?;
    let mut csv = String::from("rank,feature,score\n");
    for (k, &i) in ranking.order.iter().enumerate() {
        csv.push_str(&format!("{},{},{}\n", k + 1, i + 1, ranking.scores[i]));
    }
    write_atomic(&out.join("ranking.csv"), csv.as_bytes())
}

#[derive(Serialize)]
struct AblationRun {
    s: usize,
    acc_mean: f64,
    acc_std: f64,
    nmi_mean: f64,
    nmi_std: f64,
    selected_1based: Vec<usize>,
    top_1based: Vec<usize>,
    outer_iters: usize,
    objective_trace: Vec<f64>,
    objective_nonincreasing: bool,
}

#[derive(Serialize)]
struct AblationReport {
    config: SolverConfig,
    top_n: usize,
    fsr: f64,
    row_only: AblationRun,
    double: AblationRun,
}

pub fn ablate(args: &SolveArgs, top: usize, identical: bool, seed: u64, out: &Path) -> Result<()> {
    let p = prepare(args, seed, true)?;
    let labels = p.labels.as_ref().expect("labels required");
    let d = p.data.d();
    let top_n = top.min(d);
    if top_n == 0 {
        return Err(DscofsError::invalid("--top must be at least 1"));
    }
    let x0 = initial_x(&p.data, &p.solver)?;
    let full = SolverConfig {
        s: Some(d * p.solver.m),
        ..p.solver.clone()
    };
    let sparse = if identical { full.clone() } else { p.solver.clone() };

    let mut runs = Vec::new();
    for (cfg, label) in [(&full, "row-only"), (&sparse, "double")] {
        let res = timed_solve(&p.data, cfg, x0.clone(), label)?;
        let ranking = rank_features(&res.z_final);
        let selected = ranking.top(cfg.r).to_vec();
        let ev = evaluate(&p.data, &selected, labels, args.runs, seed)?;
        runs.push((
            ranking.top(top_n).to_vec(),
            AblationRun {
                s: res.config.s,
                acc_mean: ev.acc_mean,
                acc_std: ev.acc_std,
                nmi_mean: ev.nmi_mean,
                nmi_std: ev.nmi_std,
                selected_1based: one_based(&selected),
                top_1based: one_based(ranking.top(top_n)),
                outer_iters: res.outer_iters,
                objective_nonincreasing: convergence_diagnostics(&res).objective_nonincreasing,
                objective_trace: res.objective_trace,
            },
        ));
    }
    let (top_d, double) = runs.pop().expect("two runs");
    let (top_r, row_only) = runs.pop().expect("two runs");
    let report = AblationReport {
        config: p.solver,
        top_n,
        fsr: fsr(&top_r, &top_d, top_n)?,
        row_only,
        double,
    };
    save_report(&Report::new("ablate", seed, report), &out.join("ablate.json"))
}

#[derive(Serialize)]
struct StatsReport {
    methods: Vec<String>,
    datasets: Vec<String>,
    alpha: f64,
    friedman: FriedmanResult,
    critical_difference: f64,
    significant: Vec<Vec<bool>>,
    significant_pairs: Vec<(String, String)>,
}

pub fn stats(scores: &Path, alpha: f64, seed: u64, out: &Path) -> Result<()> {
    let file = std::fs::File::open(scores).map_err(|source| DscofsError::Io {
        context: format!("reading {}", scores.display()),
        source,
    })?;
    let table = ScoreTable::from_csv_reader(file)?;
    let fr = friedman(&table)?;
    let cd = nemenyi_cd(table.n_methods(), table.n_datasets(), alpha)?;
    let significant = pairwise_significance(&fr.avg_ranks, cd);
    let mut pairs = Vec::new();
    for i in 0..table.n_methods() {
        for j in (i + 1)..table.n_methods() {
            if significant[i][j] {
                pairs.push((table.methods[i].clone(), table.methods[j].clone()));
            }
        }
    }
    let report = StatsReport {
        methods: table.methods.clone(),
        datasets: table.datasets.clone(),
        alpha,
        friedman: fr,
        critical_difference: cd,
        significant,
        significant_pairs: pairs,
    };
    save_report(&Report::new("stats", seed, report), &out.join("stats.json"))
}
