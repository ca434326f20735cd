use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{DscofsError, Result};
use crate::model::{DataMatrix, Mat};

/// Features ordered by descending row norm of the row-sparse solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// 0-based feature indices, best first.
    pub order: Vec<usize>,
    /// Row norm of every feature, indexed by feature.
    pub scores: Vec<f64>,
}

impl FeatureRanking {
    pub fn top(&self, count: usize) -> &[usize] {
        &self.order[..count.min(self.order.len())]
    }

    /// Features with a nonzero score, best first.
    pub fn selected(&self) -> Vec<usize> {
        self.order
            .iter()
            .cloned()
            .take_while(|&i| self.scores[i] > 0.0)
            .collect()
    }
}

/// Ranks rows by Euclidean norm, ties broken by smaller index.
pub fn rank_features(z: &Mat) -> FeatureRanking {
    let scores: Vec<f64> = z.row_iter().map(|r| r.norm()).collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    FeatureRanking { order, scores }
}

/// Feature similarity rate: `|a ∩ b| / n` for two selections of size `n`.
pub fn fsr(set_a: &[usize], set_b: &[usize], n: usize) -> Result<f64> {
    if set_a.len() != n || set_b.len() != n {
        return Err(DscofsError::invalid(format!(
            "FSR needs two sets of size {n}, got {} and {}",
            set_a.len(),
            set_b.len()
        )));
    }
    if n == 0 {
        return Err(DscofsError::invalid("FSR needs at least one feature"));
    }
    let a: HashSet<usize> = set_a.iter().cloned().collect();
    let b: HashSet<usize> = set_b.iter().cloned().collect();
    if a.len() != n || b.len() != n {
        return Err(DscofsError::invalid("FSR sets contain duplicate features"));
    }
    Ok(a.intersection(&b).count() as f64 / n as f64)
}

/// Keeps only the selected feature rows, in the given order.
pub fn reduce_data(a: &DataMatrix, selected: &[usize]) -> Result<DataMatrix> {
    if selected.is_empty() {
        return Err(DscofsError::invalid("no features selected"));
    }
    if let Some(&bad) = selected.iter().find(|&&i| i >= a.d()) {
        return Err(DscofsError::invalid(format!(
            "feature index {bad} out of range for {} features",
            a.d()
        )));
    }
    Ok(a.select_rows_unchecked(selected))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_by_row_norm() {
        let z = Mat::from_row_slice(3, 2, &[0.0, 0.0, 3.0, 0.0, 0.6, 0.8]);
        let r = rank_features(&z);
        assert_eq!(r.order, vec![1, 2, 0]);
        assert_eq!(r.selected(), vec![1, 2]);
        assert_eq!(rank_features(&Mat::zeros(4, 2)).order, vec![0, 1, 2, 3]);
    }

    #[test]
    fn fsr_examples() {
        assert_eq!(fsr(&[1, 2, 3], &[3, 2, 1], 3).unwrap(), 1.0);
        assert_eq!(fsr(&[1, 2], &[3, 4], 2).unwrap(), 0.0);
        assert_eq!(fsr(&[2, 7, 1, 0], &[7, 2, 5, 9], 4).unwrap(), 0.5);
        assert!(fsr(&[1, 2], &[1], 2).is_err());
        assert!(fsr(&[1, 1], &[1, 2], 2).is_err());
    }

    #[test]
    fn reduce_rows() {
        let a = DataMatrix::new(Mat::from_fn(3, 4, |i, j| (10 * i + j) as f64)).unwrap();
        assert_eq!(reduce_data(&a, &[0, 1, 2]).unwrap(), a);
        let one = reduce_data(&a, &[2]).unwrap();
        assert_eq!(one.values(), &Mat::from_row_slice(1, 4, &[20.0, 21.0, 22.0, 23.0]));
        assert!(reduce_data(&a, &[3]).is_err());
        assert!(reduce_data(&a, &[]).is_err());
    }
}
