//! Closed-form Y- and Z-updates: Euclidean projections onto the element and
//! row budgets by hard thresholding.
//!
//! Ties at the threshold are broken toward the smallest index (row-major
//! linear index for elements, row index for rows) so that the budget holds
//! exactly.

use std::cmp::Ordering;

use crate::error::{DscofsError, Result};
use crate::model::{AuxY, AuxZ, Mat};

/// Which proximal blend a [`BlendedTarget`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlendKind {
    Element,
    Row,
}

/// Convex combination `(X_next + τ·P_prev) / (1 + τ)` that gets thresholded.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendedTarget {
    pub values: Mat,
    pub kind: BlendKind,
}

impl BlendedTarget {
    pub fn new(x_next: &Mat, prev: &Mat, tau: f64, kind: BlendKind) -> Result<Self> {
        if x_next.shape() != prev.shape() {
            return Err(DscofsError::shape(format!(
                "blend operands {:?} and {:?}",
                x_next.shape(),
                prev.shape()
            )));
        }
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(DscofsError::invalid(format!("proximal weight {tau}")));
        }
        let values = (x_next + prev * tau) / (1.0 + tau);
        Ok(BlendedTarget { values, kind })
    }
}

// descending magnitude, then ascending index
fn rank_order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Indices of the `k` largest keys under [`rank_order`], in no particular order.
fn top_k_indices(mut keyed: Vec<(f64, usize)>, k: usize) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    if k < keyed.len() {
        keyed.select_nth_unstable_by(k - 1, rank_order);
        keyed.truncate(k);
    }
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// The `k`-th largest key (1-based), or 0 when `k` is 0.
fn kth_largest(mut keys: Vec<f64>, k: usize) -> f64 {
    if k == 0 || keys.is_empty() {
        return 0.0;
    }
    let k = k.min(keys.len());
    keys.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    keys[k - 1]
}

/// `t_s`: the `s`-th largest absolute entry of `w`.
pub fn element_threshold(w: &Mat, s: usize) -> f64 {
    kth_largest(w.iter().map(|v| v.abs()).collect(), s)
}

/// `t_r`: the `r`-th largest row norm of `v`.
pub fn row_threshold(v: &Mat, r: usize) -> f64 {
    kth_largest(v.row_iter().map(|row| row.norm()).collect(), r)
}

/// Keeps the `s` entries of largest magnitude and zeroes the rest.
pub fn hard_threshold_elements(w: &Mat, s: usize) -> Result<AuxY> {
    let (d, m) = w.shape();
    if s > d * m {
        return Err(DscofsError::invalid(format!(
            "element budget {s} exceeds the {} entries",
            d * m
        )));
    }
    let keyed = (0..d)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| (w[(i, j)].abs(), i * m + j))
        .filter(|(a, _)| *a != 0.0)
        .collect();
    let mut out = Mat::zeros(d, m);
    for idx in top_k_indices(keyed, s) {
        let (i, j) = (idx / m, idx % m);
        out[(i, j)] = w[(i, j)];
    }
    Ok(AuxY { values: out, s })
}

/// Keeps the `r` rows of largest Euclidean norm and zeroes the rest.
pub fn hard_threshold_rows(v: &Mat, r: usize) -> Result<AuxZ> {
    let d = v.nrows();
    if r > d {
        return Err(DscofsError::invalid(format!(
            "row budget {r} exceeds the {d} rows"
        )));
    }
    let keyed = v
        .row_iter()
        .enumerate()
        .map(|(i, row)| (row.norm(), i))
        .filter(|(n, _)| *n != 0.0)
        .collect();
    let mut out = Mat::zeros(d, v.ncols());
    for i in top_k_indices(keyed, r) {
        out.set_row(i, &v.row(i));
    }
    Ok(AuxZ { values: out, r })
}

/// Y-update: element-threshold the blend `(X_next + τ2·Y_prev)/(1+τ2)`.
pub fn y_update(x_next: &Mat, y_prev: &Mat, tau2: f64, s: usize) -> Result<AuxY> {
    let w = BlendedTarget::new(x_next, y_prev, tau2, BlendKind::Element)?;
    hard_threshold_elements(&w.values, s)
}

/// Z-update: row-threshold the blend `(X_next + τ3·Z_prev)/(1+τ3)`.
pub fn z_update(x_next: &Mat, z_prev: &Mat, tau3: f64, r: usize) -> Result<AuxZ> {
    let v = BlendedTarget::new(x_next, z_prev, tau3, BlendKind::Row)?;
    hard_threshold_rows(&v.values, r)
}
