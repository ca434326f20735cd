//! Merging of the JSON config file with command-line overrides.

use std::fs;

use dscofs::cluster::LabelVector;
use dscofs::io::{load_csv, DatasetFile};
use dscofs::{center_columns, DataMatrix, DscofsError, Result, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::SolveArgs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub mu_candidates: Vec<f64>,
    /// When set, μ2 is searched independently of μ1.
    pub mu2_candidates: Option<Vec<f64>>,
    pub alpha_candidates: Vec<f64>,
    pub feature_counts: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            mu_candidates: vec![1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6],
            mu2_candidates: None,
            alpha_candidates: (1..=9).map(|i| i as f64 / 10.0).collect(),
            feature_counts: (1..=10).map(|i| i * 10).collect(),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let lists: [(&str, Vec<f64>); 4] = [
            ("mu_candidates", self.mu_candidates.clone()),
            ("mu2_candidates", self.mu2_candidates.clone().unwrap_or(vec![1.0])),
            ("alpha_candidates", self.alpha_candidates.clone()),
            ("feature_counts", self.feature_counts.iter().map(|&c| c as f64).collect()),
        ];
        for (name, values) in lists {
            if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(DscofsError::InvalidConfig(format!(
                    "{name} must be a nonempty list of positive values"
                )));
            }
        }
        Ok(())
    }
}

/// Everything a solving command needs, loaded and validated.
pub struct Prepared {
    pub data: DataMatrix,
    pub labels: Option<LabelVector>,
    pub solver: SolverConfig,
    pub grid: GridSpec,
}

pub fn prepare(args: &SolveArgs, seed: u64, require_labels: bool) -> Result<Prepared> {
    let mut file = DatasetFile::new(&args.data);
    if require_labels {
        file = file.require_labels();
    }
    let (raw, labels) = load_csv(&file)?;
    let data = center_columns(raw.values())?;

    let (mut solver, grid, has_m) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| DscofsError::Io {
                context: format!("reading {}", path.display()),
                source,
            })?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let has_m = value.get("m").is_some();
            let solver: SolverConfig = serde_json::from_value(value.clone())?;
            let grid: GridSpec = serde_json::from_value(value)?;
            (solver, grid, has_m)
        }
        None => (SolverConfig::default(), GridSpec::default(), false),
    };
    match (args.m, &labels) {
        (Some(m), _) => solver.m = m,
        (None, Some(l)) if !has_m => solver.m = l.classes(),
        (None, None) if !has_m => {
            return Err(DscofsError::invalid(
                "no label column: pass --m or set m in the config file",
            ))
        }
        _ => {}
    }
    if let Some(r) = args.r {
        solver.r = r;
    }
    if let Some(a) = args.alpha {
        solver.alpha = a;
    }
    if args.s.is_some() {
        solver.s = args.s;
    }
    if let Some(mu) = args.mu {
        solver.mu1 = mu;
        solver.mu2 = mu;
    }
    solver.rng_seed = seed;
    solver.validate(data.d())?;
    grid.validate()?;
    if args.runs == 0 {
        return Err(DscofsError::invalid("--runs must be at least 1"));
    }
    Ok(Prepared {
        data,
        labels,
        solver,
        grid,
    })
}
