//! Friedman rank test over a datasets × methods score table and the Nemenyi
//! critical difference for post-hoc pairwise comparison.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use crate::error::{DscofsError, Result};

/// Studentized range statistic divided by √2, for k = 2..=10 methods.
const Q_ALPHA_05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const Q_ALPHA_10: [f64; 9] = [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

/// Scores of `k` methods (columns) on `N` datasets (rows); higher is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn new(methods: Vec<String>, datasets: Vec<String>, scores: Vec<Vec<f64>>) -> Result<Self> {
        let t = ScoreTable {
            methods,
            datasets,
            scores,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let k = self.methods.len();
        if self.scores.len() < 2 {
            return Err(DscofsError::invalid(format!(
                "need at least 2 datasets, got {}",
                self.scores.len()
            )));
        }
        if k < 2 {
            return Err(DscofsError::invalid(format!("need at least 2 methods, got {k}")));
        }
        if self.datasets.len() != self.scores.len() {
            return Err(DscofsError::invalid("dataset names do not match score rows"));
        }
        for (i, row) in self.scores.iter().enumerate() {
            if row.len() != k {
                return Err(DscofsError::invalid(format!(
                    "row {i} has {} scores for {k} methods",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(DscofsError::invalid(format!("missing or non-finite score at row {i}, column {j}")));
            }
        }
        Ok(())
    }

    pub fn n_datasets(&self) -> usize {
        self.scores.len()
    }

    pub fn n_methods(&self) -> usize {
        self.methods.len()
    }

    /// Parses a CSV with a header row (first cell names the dataset column,
    /// the rest name methods) and one dataset per row.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(csv_error)?.clone();
        let methods: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut datasets = Vec::new();
        let mut scores = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_error)?;
            let line = i + 2;
            datasets.push(rec.get(0).unwrap_or_default().to_string());
            let row = rec
                .iter()
                .skip(1)
                .enumerate()
                .map(|(j, cell)| {
                    cell.parse::<f64>().map_err(|_| DscofsError::Parse {
                        line,
                        col: j + 2,
                        msg: format!("not a number: {cell:?}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            scores.push(row);
        }
        ScoreTable::new(methods, datasets, scores)
    }
}

pub(crate) fn csv_error(e: csv::Error) -> DscofsError {
    let (line, col) = e
        .position()
        .map(|p| (p.line() as usize, 0))
        .unwrap_or((0, 0));
    DscofsError::Parse {
        line,
        col,
        msg: e.to_string(),
    }
}

/// Ranks `1..k` with 1 for the highest score; tied scores share their average rank.
pub fn rank_row(row: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && row[idx[j + 1]] == row[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub avg_ranks: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
    pub df: usize,
    /// Iman-Davenport F refinement of the statistic.
    pub iman_davenport: f64,
    pub iman_davenport_p: f64,
}

pub fn friedman(table: &ScoreTable) -> Result<FriedmanResult> {
    table.validate()?;
    let n = table.n_datasets() as f64;
    let k = table.n_methods();
    let kf = k as f64;
    let mut avg_ranks = vec![0.0; k];
    for row in &table.scores {
        for (acc, r) in avg_ranks.iter_mut().zip(rank_row(row)) {
            *acc += r;
        }
    }
    for r in avg_ranks.iter_mut() {
        *r /= n;
    }
    let sum_sq: f64 = avg_ranks.iter().map(|r| r * r).sum();
    let statistic =
        (12.0 * n / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    let df = k - 1;
    let chi = ChiSquared::new(df as f64).expect("df >= 1");
    let p_value = chi.sf(statistic).clamp(f64::MIN_POSITIVE, 1.0);

    let id_den = n * (kf - 1.0) - statistic;
    let (iman_davenport, iman_davenport_p) = if id_den > 0.0 {
        let f = (n - 1.0) * statistic / id_den;
        let fd = FisherSnedecor::new(kf - 1.0, (kf - 1.0) * (n - 1.0)).expect("positive dof");
        (f, fd.sf(f).clamp(f64::MIN_POSITIVE, 1.0))
    } else {
        (f64::INFINITY, f64::MIN_POSITIVE)
    };
    Ok(FriedmanResult {
        avg_ranks,
        statistic,
        p_value,
        df,
        iman_davenport,
        iman_davenport_p,
    })
}

/// Nemenyi critical difference `q_α(k)·√(k(k+1)/(6N))`.
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<f64> {
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &Q_ALPHA_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q_ALPHA_10
    } else {
        return Err(DscofsError::invalid(format!(
            "alpha = {alpha} unsupported; tabulated levels are 0.05 and 0.10"
        )));
    };
    if !(2..=10).contains(&k) {
        return Err(DscofsError::invalid(format!(
            "k = {k} methods unsupported; tabulated range is 2..=10"
        )));
    }
    if n == 0 {
        return Err(DscofsError::invalid("N must be positive"));
    }
    let kf = k as f64;
    Ok(table[k - 2] * (kf * (kf + 1.0) / (6.0 * n as f64)).sqrt())
}

/// `out[i][j]` is true iff `|R_i − R_j| > cd`.
pub fn pairwise_significance(avg_ranks: &[f64], cd: f64) -> Vec<Vec<bool>> {
    avg_ranks
        .iter()
        .map(|ri| avg_ranks.iter().map(|rj| (ri - rj).abs() > cd).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(rank_row(&[3.0, 1.0, 2.0]), vec![1.0, 3.0, 2.0]);
        assert_eq!(rank_row(&[1.0, 2.0, 2.0, 0.0]), vec![3.0, 1.5, 1.5, 4.0]);
    }

    #[test]
    fn all_ties() {
        let t = ScoreTable::new(names("m", 4), names("d", 3), vec![vec![0.5; 4]; 3]).unwrap();
        let r = friedman(&t).unwrap();
        assert!(r.avg_ranks.iter().all(|&x| x == 2.5));
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn dominant_method_ranks_first() {
        let scores = vec![vec![0.9, 0.1, 0.5], vec![0.8, 0.7, 0.2], vec![0.6, 0.3, 0.4]];
        let t = ScoreTable::new(names("m", 3), names("d", 3), scores).unwrap();
        assert_eq!(friedman(&t).unwrap().avg_ranks[0], 1.0);
    }

    #[test]
    fn rejects_small_tables() {
        assert!(ScoreTable::new(names("m", 3), names("d", 1), vec![vec![1.0, 2.0, 3.0]]).is_err());
        assert!(ScoreTable::new(names("m", 2), names("d", 2), vec![vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn cd_values() {
        assert_abs_diff_eq!(nemenyi_cd(8, 8, 0.05).unwrap(), 3.031 * 1.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(nemenyi_cd(2, 8, 0.05).unwrap(), 0.693, epsilon = 1e-3);
        let cd1 = nemenyi_cd(5, 6, 0.10).unwrap();
        let cd4 = nemenyi_cd(5, 24, 0.10).unwrap();
        assert_abs_diff_eq!(cd4, cd1 / 2.0, epsilon = 1e-12);
        assert!(nemenyi_cd(11, 8, 0.05).is_err());
        assert!(nemenyi_cd(8, 8, 0.01).is_err());
    }

    #[test]
    fn pairwise_examples() {
        let sig = pairwise_significance(&[1.0, 2.0], 0.5);
        assert!(sig[0][1] && sig[1][0] && !sig[0][0]);
        let sig = pairwise_significance(&[2.0, 2.0, 2.0], 0.5);
        assert!(sig.iter().flatten().all(|s| !s));
    }

    #[test]
    fn csv_table() {
        let csv = "dataset,a,b\nx,1,2\ny,3,1.5\n";
        let t = ScoreTable::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(t.methods, vec!["a", "b"]);
        assert_eq!(t.scores[1], vec![3.0, 1.5]);
        assert!(ScoreTable::from_csv_reader("d,a,b\nx,1,oops\ny,1,2\n".as_bytes()).is_err());
    }
}
