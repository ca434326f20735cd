//! Clustering-based evaluation: K-means on the selected features, optimal
//! label matching, ACC and NMI.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DscofsError, Result};
use crate::model::{DataMatrix, Mat};
use crate::rng::{rng_for, SolverRng};
use crate::selection::reduce_data;

pub const KMEANS_MAX_ITER: usize = 300;
pub const KMEANS_SHIFT_TOL: f64 = 1e-6;
pub const DEFAULT_RUNS: usize = 50;

/// Cluster or class ids, contiguous from 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    classes: usize,
}

impl LabelVector {
    /// Accepts ids that are already contiguous `0..c`.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; classes];
        for &l in &labels {
            seen[l] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(DscofsError::invalid("label ids are not contiguous from 0"));
        }
        Ok(LabelVector { labels, classes })
    }

    /// Re-encodes arbitrary keys to `0..c` in order of first occurrence.
    pub fn encode<T: Eq + std::hash::Hash + Clone>(raw: &[T]) -> Self {
        let mut ids = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|v| {
                let next = ids.len();
                *ids.entry(v.clone()).or_insert(next)
            })
            .collect();
        LabelVector {
            labels,
            classes: ids.len(),
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: LabelVector,
    /// Centroids as columns.
    pub centroids: Mat,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(data: &Mat, j: usize, centroids: &Mat, c: usize) -> f64 {
    data.column(j)
        .iter()
        .zip(centroids.column(c).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn nearest(data: &Mat, j: usize, centroids: &Mat) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.ncols() {
        let d = sq_dist(data, j, centroids, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_pp(data: &Mat, k: usize, rng: &mut impl Rng) -> Mat {
    let n = data.ncols();
    let mut centroids = Mat::zeros(data.nrows(), k);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    centroids.set_column(0, &data.column(first));
    chosen[first] = true;
    let mut dist: Vec<f64> = (0..n).map(|j| sq_dist(data, j, &centroids, 0)).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (j, &dj) in dist.iter().enumerate() {
                if dj > 0.0 && target < dj {
                    pick = j;
                    break;
                }
                target -= dj;
            }
            pick
        } else {
            // every remaining point coincides with a center
            chosen.iter().position(|c| !c).unwrap_or(0)
        };
        chosen[pick] = true;
        centroids.set_column(c, &data.column(pick));
        for (j, dj) in dist.iter_mut().enumerate() {
            *dj = dj.min(sq_dist(data, j, &centroids, c));
        }
    }
    centroids
}

/// Lloyd's algorithm from k-means++ seeding. `data` holds one sample per column.
pub fn kmeans(data: &Mat, k: usize, rng: &mut impl Rng) -> Result<KMeansResult> {
    let n = data.ncols();
    if k == 0 || k > n {
        return Err(DscofsError::invalid(format!(
            "cannot form {k} clusters from {n} samples"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(DscofsError::invalid("K-means input has non-finite entries"));
    }
    let dim = data.nrows();
    let mut centroids = kmeans_pp(data, k, rng);
    let mut labels = vec![0usize; n];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut dists = vec![0.0; n];
        for j in 0..n {
            let (c, d) = nearest(data, j, &centroids);
            labels[j] = c;
            dists[j] = d;
        }
        let mut sums = Mat::zeros(dim, k);
        let mut counts = vec![0usize; k];
        for j in 0..n {
            let c = labels[j];
            counts[c] += 1;
            let mut col = sums.column_mut(c);
            col += data.column(j);
        }
        let mut next = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                next.set_column(c, &(sums.column(c) / counts[c] as f64));
            } else {
                // re-seed at the point farthest from its centroid
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                next.set_column(c, &data.column(far));
                dists[far] = 0.0;
            }
        }
        let shift = (0..k)
            .map(|c| (next.column(c) - centroids.column(c)).norm())
            .fold(0.0, f64::max);
        centroids = next;
        if shift <= KMEANS_SHIFT_TOL || iterations >= KMEANS_MAX_ITER {
            break;
        }
    }
    let mut inertia = 0.0;
    for j in 0..n {
        let (c, d) = nearest(data, j, &centroids);
        labels[j] = c;
        inertia += d;
    }
    Ok(KMeansResult {
        labels: LabelVector::encode(&labels),
        centroids,
        inertia,
        iterations,
    })
}

/// Minimum-cost assignment on a square cost matrix (Kuhn-Munkres with potentials).
/// Returns the column assigned to each row.
pub fn assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// One-to-one mapping from pseudo ids to truth ids maximizing agreement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMapping {
    /// `mapping[p]` is the truth id matched to pseudo id `p`.
    pub mapping: Vec<usize>,
    pub matched: usize,
}

/// Contingency counts `table[p][t]`, padded to a square of side `max(c_p, c_t)`.
pub fn contingency(pseudo: &LabelVector, truth: &LabelVector) -> Result<Vec<Vec<usize>>> {
    if pseudo.len() != truth.len() {
        return Err(DscofsError::invalid(format!(
            "label lengths differ: {} vs {}",
            pseudo.len(),
            truth.len()
        )));
    }
    let c = pseudo.classes().max(truth.classes());
    let mut table = vec![vec![0usize; c]; c];
    for (&p, &t) in pseudo.as_slice().iter().zip(truth.as_slice()) {
        table[p][t] += 1;
    }
    Ok(table)
}

pub fn hungarian_match(pseudo: &LabelVector, truth: &LabelVector) -> Result<LabelMapping> {
    let table = contingency(pseudo, truth)?;
    let cost: Vec<Vec<f64>> = table
        .iter()
        .map(|row| row.iter().map(|&c| -(c as f64)).collect())
        .collect();
    let full = assignment(&cost);
    let matched = full.iter().enumerate().map(|(p, &t)| table[p][t]).sum();
    let mapping = full.into_iter().take(pseudo.classes()).collect();
    Ok(LabelMapping { mapping, matched })
}

/// Clustering accuracy after optimal matching, in `[0, 1]`.
pub fn acc(pseudo: &LabelVector, truth: &LabelVector) -> Result<f64> {
    let m = hungarian_match(pseudo, truth)?;
    if pseudo.is_empty() {
        return Ok(0.0);
    }
    Ok(m.matched as f64 / pseudo.len() as f64)
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `I(P, Q) / √(H(P) H(Q))` with natural logarithms; 0 when either entropy vanishes.
pub fn nmi(pseudo: &LabelVector, truth: &LabelVector) -> Result<f64> {
    let table = contingency(pseudo, truth)?;
    let n = pseudo.len() as f64;
    if pseudo.is_empty() {
        return Ok(0.0);
    }
    let c = table.len();
    let rows: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..c).map(|t| table.iter().map(|r| r[t]).sum()).collect();
    let hp = entropy(rows.iter().cloned(), n);
    let hq = entropy(cols.iter().cloned(), n);
    if hp <= 0.0 || hq <= 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for p in 0..c {
        for t in 0..c {
            let nij = table[p][t];
            if nij > 0 {
                let pij = nij as f64 / n;
                mi += pij * (nij as f64 * n / (rows[p] as f64 * cols[t] as f64)).ln();
            }
        }
    }
    Ok((mi / (hp * hq).sqrt()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub acc: f64,
    pub nmi: f64,
}

/// Mean and sample standard deviation of repeated K-means scores, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    pub runs: usize,
    pub selected_count: usize,
    pub selected: Vec<usize>,
    pub seed: u64,
    pub per_run: Vec<RunScore>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs K-means `runs` times on the selected features with `k` = number of classes.
pub fn evaluate(
    a: &DataMatrix,
    selected: &[usize],
    truth: &LabelVector,
    runs: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    if runs == 0 {
        return Err(DscofsError::invalid("evaluation needs at least one run"));
    }
    if truth.len() != a.n() {
        return Err(DscofsError::invalid(format!(
            "{} labels for {} samples",
            truth.len(),
            a.n()
        )));
    }
    let reduced = reduce_data(a, selected)?;
    let k = truth.classes();
    let per_run = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng: SolverRng = rng_for(seed, run as u64);
            let km = kmeans(reduced.values(), k, &mut rng)?;
            Ok(RunScore {
                acc: acc(&km.labels, truth)?,
                nmi: nmi(&km.labels, truth)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let accs: Vec<f64> = per_run.iter().map(|r| 100.0 * r.acc).collect();
    let nmis: Vec<f64> = per_run.iter().map(|r| 100.0 * r.nmi).collect();
    let (acc_mean, acc_std) = mean_std(&accs);
    let (nmi_mean, nmi_std) = mean_std(&nmis);
    Ok(EvaluationReport {
        acc_mean,
        acc_std,
        nmi_mean,
        nmi_std,
        runs,
        selected_count: selected.len(),
        selected: selected.to_vec(),
        seed,
        per_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lv(v: &[usize]) -> LabelVector {
        LabelVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn encode_is_first_occurrence_stable() {
        let l = LabelVector::encode(&["b", "a", "b", "c"]);
        assert_eq!(l.as_slice(), &[0, 1, 0, 2]);
        assert_eq!(l.classes(), 3);
        assert!(LabelVector::new(vec![0, 2]).is_err());
    }

    #[test]
    fn acc_examples() {
        assert_eq!(acc(&lv(&[0, 0, 1, 1]), &lv(&[1, 1, 0, 0])).unwrap(), 1.0);
        assert_eq!(acc(&lv(&[0, 1, 1, 1]), &lv(&[0, 0, 1, 1])).unwrap(), 0.75);
        assert_abs_diff_eq!(
            acc(&lv(&[0; 6]), &lv(&[0, 0, 1, 1, 2, 2])).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn matching_relabel() {
        let m = hungarian_match(&lv(&[2, 0, 1, 1]), &lv(&[0, 1, 2, 2])).unwrap();
        assert_eq!(m.mapping, vec![1, 2, 0]);
        assert_eq!(m.matched, 4);
        let m = hungarian_match(&lv(&[0, 1, 2]), &lv(&[0, 1, 2])).unwrap();
        assert_eq!(m.mapping, vec![0, 1, 2]);
    }

    #[test]
    fn nmi_examples() {
        assert_abs_diff_eq!(nmi(&lv(&[0, 0, 1, 1]), &lv(&[0, 0, 1, 1])).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(nmi(&lv(&[0, 0, 1, 1]), &lv(&[0, 1, 0, 1])).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(nmi(&lv(&[0, 0, 0, 0]), &lv(&[0, 0, 1, 1])).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(acc(&lv(&[0, 1]), &lv(&[0, 1, 0])).is_err());
    }

    #[test]
    fn kmeans_every_point_its_own_cluster() {
        let data = Mat::from_row_slice(1, 4, &[0.0, 1.0, 5.0, 9.0]);
        let r = kmeans(&data, 4, &mut rng_for(1, 0)).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert_eq!(r.labels.classes(), 4);
    }

    #[test]
    fn kmeans_rejects_too_many_clusters() {
        let data = Mat::zeros(2, 3);
        assert!(kmeans(&data, 4, &mut rng_for(1, 0)).is_err());
    }

    #[test]
    fn kmeans_handles_duplicate_points() {
        let data = Mat::from_row_slice(1, 4, &[1.0, 1.0, 1.0, 2.0]);
        let r = kmeans(&data, 3, &mut rng_for(2, 0)).unwrap();
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn single_run_has_zero_std() {
        let a = DataMatrix::new(Mat::from_row_slice(1, 4, &[0.0, 0.1, 5.0, 5.1])).unwrap();
        let r = evaluate(&a, &[0], &lv(&[0, 0, 1, 1]), 1, 3).unwrap();
        assert_eq!(r.acc_std, 0.0);
        assert_eq!(r.acc_mean, 100.0);
    }
}
