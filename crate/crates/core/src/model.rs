//! Domain types and the smooth part of the model.
//!
//! The data matrix `A` is stored feature-by-sample (`d × n`). Every quantity
//! involving the covariance `A Aᵀ` goes through the [`Covariance`] trait so that
//! callers can choose between the factored product `A (Aᵀ X)` and a
//! precomputed `d × d` Gram matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{DscofsError, Result};

pub type Mat = DMatrix<f64>;

/// Serde adapter writing a matrix as an array of rows.
pub mod rows {
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    use super::Mat;

    pub fn serialize<S: Serializer>(m: &Mat, ser: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().cloned().collect()).collect();
        rows.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(de)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }
}

/// Feature-by-sample data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Mat,
    centered: bool,
}

impl DataMatrix {
    /// Wraps a raw `d × n` matrix without centering it.
    pub fn new(values: Mat) -> Result<Self> {
        check_finite(&values)?;
        if values.nrows() < 1 {
            return Err(DscofsError::invalid("data needs at least one feature"));
        }
        if values.ncols() < 2 {
            return Err(DscofsError::invalid("data needs at least two samples"));
        }
        Ok(DataMatrix {
            values,
            centered: false,
        })
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn into_values(self) -> Mat {
        self.values
    }

    /// Number of features.
    pub fn d(&self) -> usize {
        self.values.nrows()
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    /// True when produced by [`center_columns`] (or derived from such a matrix).
    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Row submatrix in the given order. Centering survives row selection.
    pub(crate) fn select_rows_unchecked(&self, rows: &[usize]) -> DataMatrix {
        DataMatrix {
            values: self.values.select_rows(rows.iter()),
            centered: self.centered,
        }
    }
}

fn check_finite(m: &Mat) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(DscofsError::NonFinite {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Removes each feature's mean across samples. The input is left untouched.
pub fn center_columns(raw: &Mat) -> Result<DataMatrix> {
    let data = DataMatrix::new(raw.clone())?;
    let mut values = data.values;
    let n = values.ncols() as f64;
    for i in 0..values.nrows() {
        let mean = values.row(i).sum() / n;
        for v in values.row_mut(i).iter_mut() {
            *v -= mean;
        }
    }
    Ok(DataMatrix {
        values,
        centered: true,
    })
}

/// Projection matrix `X` (`d × m`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformMatrix {
    #[serde(with = "rows")]
    pub values: Mat,
}

impl TransformMatrix {
    pub fn new(values: Mat) -> Result<Self> {
        if values.ncols() == 0 || values.ncols() > values.nrows() {
            return Err(DscofsError::shape(format!(
                "transform must satisfy 1 <= m <= d, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        check_finite(&values)?;
        Ok(TransformMatrix { values })
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    /// `‖XᵀX − I‖_F`.
    pub fn orthogonality_residual(&self) -> f64 {
        orthogonality_residual(&self.values)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.orthogonality_residual() <= tol
    }
}

pub fn orthogonality_residual(x: &Mat) -> f64 {
    let m = x.ncols();
    (x.transpose() * x - Mat::identity(m, m)).norm()
}

/// Element-sparse auxiliary matrix: at most `s` nonzero entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxY {
    #[serde(with = "rows")]
    pub values: Mat,
    pub s: usize,
}

impl AuxY {
    pub fn new(values: Mat, s: usize) -> Result<Self> {
        let nnz = count_nonzeros(&values);
        if nnz > s {
            return Err(DscofsError::invalid(format!(
                "{nnz} nonzero entries exceed the element budget {s}"
            )));
        }
        Ok(AuxY { values, s })
    }

    pub fn nnz(&self) -> usize {
        count_nonzeros(&self.values)
    }
}

/// Row-sparse auxiliary matrix: at most `r` nonzero rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxZ {
    #[serde(with = "rows")]
    pub values: Mat,
    pub r: usize,
}

impl AuxZ {
    pub fn new(values: Mat, r: usize) -> Result<Self> {
        let rows = count_nonzero_rows(&values);
        if rows > r {
            return Err(DscofsError::invalid(format!(
                "{rows} nonzero rows exceed the row budget {r}"
            )));
        }
        Ok(AuxZ { values, r })
    }

    pub fn nonzero_rows(&self) -> usize {
        count_nonzero_rows(&self.values)
    }
}

pub fn count_nonzeros(m: &Mat) -> usize {
    m.iter().filter(|v| **v != 0.0).count()
}

pub fn count_nonzero_rows(m: &Mat) -> usize {
    m.row_iter().filter(|r| r.iter().any(|v| *v != 0.0)).count()
}

/// Access to products with the covariance `C = A Aᵀ`.
pub trait Covariance {
    fn dim(&self) -> usize;

    /// `C X`.
    fn apply(&self, x: &Mat) -> Mat;

    /// `Tr(Xᵀ C X)`.
    fn quad(&self, x: &Mat) -> f64 {
        x.dot(&self.apply(x))
    }

    /// Spectral norm `‖C‖₂`.
    fn spectral_norm(&self) -> f64;
}

impl Covariance for DataMatrix {
    fn dim(&self) -> usize {
        self.d()
    }

    fn apply(&self, x: &Mat) -> Mat {
        &self.values * (self.values.transpose() * x)
    }

    fn quad(&self, x: &Mat) -> f64 {
        (self.values.transpose() * x).norm_squared()
    }

    fn spectral_norm(&self) -> f64 {
        largest_singular_value_sq(&self.values)
    }
}

fn largest_singular_value_sq(a: &Mat) -> f64 {
    // eigen-decompose whichever Gram matrix is smaller
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Covariance operator chosen by shape: a materialized `d × d` Gram matrix when
/// `d ≤ n`, otherwise the factored product `A (Aᵀ X)`.
#[derive(Debug, Clone)]
pub enum GramOperator {
    Dense(Mat),
    Factored(Mat),
}

impl GramOperator {
    pub fn new(a: &DataMatrix) -> Self {
        let v = a.values();
        if v.nrows() <= v.ncols() {
            GramOperator::Dense(v * v.transpose())
        } else {
            GramOperator::Factored(v.clone())
        }
    }
}

impl Covariance for GramOperator {
    fn dim(&self) -> usize {
        match self {
            GramOperator::Dense(c) => c.nrows(),
            GramOperator::Factored(a) => a.nrows(),
        }
    }

    fn apply(&self, x: &Mat) -> Mat {
        match self {
            GramOperator::Dense(c) => c * x,
            GramOperator::Factored(a) => a * (a.transpose() * x),
        }
    }

    fn quad(&self, x: &Mat) -> f64 {
        match self {
            GramOperator::Dense(c) => x.dot(&(c * x)),
            GramOperator::Factored(a) => (a.transpose() * x).norm_squared(),
        }
    }

    fn spectral_norm(&self) -> f64 {
        match self {
            GramOperator::Dense(c) => SymmetricEigen::new(c.clone())
                .eigenvalues
                .iter()
                .cloned()
                .fold(0.0, f64::max),
            GramOperator::Factored(a) => largest_singular_value_sq(a),
        }
    }
}

fn check_same_shape(name: &str, a: &Mat, b: &Mat) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(DscofsError::shape(format!(
            "{name}: expected {:?}, got {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn check_cov(cov: &impl Covariance, x: &Mat) -> Result<()> {
    if cov.dim() != x.nrows() {
        return Err(DscofsError::shape(format!(
            "data has {} features but X has {} rows",
            cov.dim(),
            x.nrows()
        )));
    }
    Ok(())
}

/// Penalized objective `−Tr(XᵀAAᵀX) + μ1‖X−Y‖² + μ2‖X−Z‖²`.
pub fn objective_f(
    x: &Mat,
    y: &Mat,
    z: &Mat,
    cov: &impl Covariance,
    mu1: f64,
    mu2: f64,
) -> Result<f64> {
    check_same_shape("Y", x, y)?;
    check_same_shape("Z", x, z)?;
    check_cov(cov, x)?;
    Ok(-cov.quad(x) + mu1 * (x - y).norm_squared() + mu2 * (x - z).norm_squared())
}

/// Partial gradients of [`objective_f`] with respect to `X`, `Y` and `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGradient {
    pub dx: Mat,
    pub dy: Mat,
    pub dz: Mat,
}

pub fn grad_f(
    x: &Mat,
    y: &Mat,
    z: &Mat,
    cov: &impl Covariance,
    mu1: f64,
    mu2: f64,
) -> Result<ObjectiveGradient> {
    check_same_shape("Y", x, y)?;
    check_same_shape("Z", x, z)?;
    check_cov(cov, x)?;
    let dx = cov.apply(x) * -2.0 + (x - y) * (2.0 * mu1) + (x - z) * (2.0 * mu2);
    Ok(ObjectiveGradient {
        dx,
        dy: (y - x) * (2.0 * mu1),
        dz: (z - x) * (2.0 * mu2),
    })
}

/// Weights of the X-subproblem merit function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeritParams {
    pub mu1: f64,
    pub mu2: f64,
    pub tau1: f64,
    pub beta: f64,
}

/// Anchor points of one X-subproblem: the previous outer iterate and the
/// current auxiliary variables.
#[derive(Debug, Clone, Copy)]
pub struct Anchors<'a> {
    pub xk: &'a Mat,
    pub yk: &'a Mat,
    pub zk: &'a Mat,
}

impl Anchors<'_> {
    fn check(&self, x: &Mat) -> Result<()> {
        check_same_shape("X^k", x, self.xk)?;
        check_same_shape("Y^k", x, self.yk)?;
        check_same_shape("Z^k", x, self.zk)
    }
}

/// Proximal-regularized quadratic `l(X)` and its gradient, sharing one covariance product.
pub(crate) fn prox_quadratic(
    x: &Mat,
    anchors: &Anchors<'_>,
    cov: &impl Covariance,
    p: &MeritParams,
) -> (f64, Mat) {
    let cx = cov.apply(x);
    let dy = x - anchors.yk;
    let dz = x - anchors.zk;
    let dxk = x - anchors.xk;
    let value = -x.dot(&cx)
        + p.mu1 * dy.norm_squared()
        + p.mu2 * dz.norm_squared()
        + p.tau1 * dxk.norm_squared();
    let grad = cx * -2.0 + dy * (2.0 * p.mu1) + dz * (2.0 * p.mu2) + dxk * (2.0 * p.tau1);
    (value, grad)
}

/// `l(X)`: the X-subproblem objective without the orthogonality handling.
pub fn subproblem_objective(
    x: &Mat,
    anchors: &Anchors<'_>,
    cov: &impl Covariance,
    p: &MeritParams,
) -> Result<f64> {
    anchors.check(x)?;
    check_cov(cov, x)?;
    Ok(prox_quadratic(x, anchors, cov, p).0)
}

/// `Λ(X) = ½(Xᵀ∇l + ∇lᵀX)`, symmetrized explicitly.
pub fn lambda_matrix(x: &Mat, grad_l: &Mat) -> Result<Mat> {
    check_same_shape("grad_l", x, grad_l)?;
    Ok(lambda_unchecked(x, grad_l))
}

fn lambda_unchecked(x: &Mat, grad_l: &Mat) -> Mat {
    let p = x.transpose() * grad_l;
    let mut lam = (&p + p.transpose()) * 0.5;
    let m = lam.nrows();
    for i in 0..m {
        for j in (i + 1)..m {
            let v = 0.5 * (lam[(i, j)] + lam[(j, i)]);
            lam[(i, j)] = v;
            lam[(j, i)] = v;
        }
    }
    lam
}

/// Merit value and approximate gradient at one point.
pub(crate) struct MeritEval {
    pub value: f64,
    pub d: Mat,
}

pub(crate) fn merit_and_direction(
    x: &Mat,
    anchors: &Anchors<'_>,
    cov: &impl Covariance,
    p: &MeritParams,
) -> MeritEval {
    let m = x.ncols();
    let (l, grad) = prox_quadratic(x, anchors, cov, p);
    let lam = lambda_unchecked(x, &grad);
    let resid = x.transpose() * x - Mat::identity(m, m);
    let value = l - 0.5 * lam.dot(&resid) + 0.25 * p.beta * resid.norm_squared();
    let d = grad - x * &lam + (x * &resid) * p.beta;
    MeritEval { value, d }
}

/// Exact-penalty merit `h(X) = l(X) − ½⟨Λ(X), XᵀX − I⟩ + (β/4)‖XᵀX − I‖²`.
pub fn merit_h(
    x: &Mat,
    anchors: &Anchors<'_>,
    cov: &impl Covariance,
    p: &MeritParams,
) -> Result<f64> {
    anchors.check(x)?;
    check_cov(cov, x)?;
    Ok(merit_and_direction(x, anchors, cov, p).value)
}

/// Approximate merit gradient `D(X) = ∇l(X) − XΛ(X) + βX(XᵀX − I)`.
pub fn approx_grad_d(
    x: &Mat,
    anchors: &Anchors<'_>,
    cov: &impl Covariance,
    p: &MeritParams,
) -> Result<Mat> {
    anchors.check(x)?;
    check_cov(cov, x)?;
    Ok(merit_and_direction(x, anchors, cov, p).d)
}

/// Upper bounds on the constants that make the exact penalty valid on the ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyBound {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub beta_min: f64,
}

impl PenaltyBound {
    /// Bounds from `‖AAᵀ‖₂`, the weights and the ball radius. Anchors are assumed
    /// to lie in the ball as well.
    pub fn from_parts(cov_norm: f64, mu1: f64, mu2: f64, tau1: f64, rho: f64, m: usize) -> Self {
        // ‖∇l(X)‖ ≤ 2‖C‖ρ + Σ 2w(ρ + ρ) over the three proximal terms
        let grad_sup = 2.0 * cov_norm * rho + 4.0 * rho * (mu1 + mu2 + tau1);
        // ∇l is affine with slope (−2C + 2(μ1+μ2+τ1) I)
        let grad_lip = 2.0 * cov_norm + 2.0 * (mu1 + mu2 + tau1);
        let lambda0 = grad_sup.max(1.0);
        let lambda1 = (rho * grad_sup).max(1.0);
        // Λ(X1) − Λ(X2) splits as ΔXᵀ∇l(X1) + X2ᵀ(∇l(X1) − ∇l(X2))
        let lambda2 = (grad_sup + rho * grad_lip).max(1.0);
        let beta_min = (2.0 * (lambda0 + lambda1)).max(2.0 * m as f64 * lambda2);
        PenaltyBound {
            lambda0,
            lambda1,
            lambda2,
            beta_min,
        }
    }
}

/// Valid (possibly loose) penalty bound for `A` under the given weights and radius.
pub fn beta_lower_bound(
    cov: &impl Covariance,
    mu1: f64,
    mu2: f64,
    tau1: f64,
    rho: f64,
    m: usize,
) -> PenaltyBound {
    PenaltyBound::from_parts(cov.spectral_norm(), mu1, mu2, tau1, rho, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn centers_small_example() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 2.0]);
        let c = center_columns(&a).unwrap();
        assert_eq!(c.values(), &Mat::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, 0.0]));
        assert_eq!(a[(0, 0)], 1.0);
        assert!(c.is_centered());
    }

    #[test]
    fn centering_is_idempotent() {
        let a = Mat::from_row_slice(2, 3, &[-1.0, 0.0, 1.0, 2.0, -4.0, 2.0]);
        let c = center_columns(&a).unwrap();
        assert_abs_diff_eq!(c.values(), &a, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_finite_with_location() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, f64::NAN, 0.0]);
        match center_columns(&a) {
            Err(DscofsError::NonFinite { row, col, .. }) => assert_eq!((row, col), (1, 0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_single_sample() {
        assert!(DataMatrix::new(Mat::zeros(3, 1)).is_err());
    }

    #[test]
    fn scalar_objective_example() {
        let a = DataMatrix::new(Mat::from_row_slice(2, 2, &[2f64.sqrt(), 0.0, 0.0, 0.0])).unwrap();
        let x = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let y = Mat::zeros(2, 1);
        let f = objective_f(&x, &y, &x, &a, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(f, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn objective_shape_mismatch() {
        let a = DataMatrix::new(Mat::zeros(3, 4)).unwrap();
        let x = Mat::zeros(3, 2);
        assert!(objective_f(&x, &Mat::zeros(3, 1), &x, &a, 1.0, 1.0).is_err());
        assert!(objective_f(&Mat::zeros(2, 1), &Mat::zeros(2, 1), &Mat::zeros(2, 1), &a, 1.0, 1.0).is_err());
    }

    #[test]
    fn gradient_with_zero_data() {
        let a = DataMatrix::new(Mat::zeros(3, 4)).unwrap();
        let x = Mat::from_fn(3, 2, |i, j| (i + 2 * j) as f64);
        let y = Mat::from_fn(3, 2, |i, j| (i * j) as f64 - 1.0);
        let z = Mat::from_fn(3, 2, |i, _| i as f64 * 0.5);
        let g = grad_f(&x, &y, &z, &a, 0.3, 0.7).unwrap();
        let expect = (&x - &y) * 0.6 + (&x - &z) * 1.4;
        assert_abs_diff_eq!(g.dx, expect, epsilon = 1e-14);
        let g = grad_f(&x, &x, &x, &a, 0.3, 0.7).unwrap();
        assert_eq!(g.dy, Mat::zeros(3, 2));
        assert_eq!(g.dz, Mat::zeros(3, 2));
    }

    #[test]
    fn lambda_examples() {
        let x = Mat::identity(4, 2);
        assert_eq!(lambda_matrix(&x, &Mat::zeros(4, 2)).unwrap(), Mat::zeros(2, 2));
        assert_abs_diff_eq!(lambda_matrix(&x, &x).unwrap(), Mat::identity(2, 2), epsilon = 0.0);
    }

    #[test]
    fn merit_at_origin() {
        let a = DataMatrix::new(Mat::from_fn(3, 5, |i, j| (i as f64 - j as f64).sin())).unwrap();
        let zero = Mat::zeros(3, 2);
        let anchors = Anchors {
            xk: &zero,
            yk: &zero,
            zk: &zero,
        };
        let p = MeritParams {
            mu1: 1.0,
            mu2: 2.0,
            tau1: 0.5,
            beta: 3.0,
        };
        let h = merit_h(&zero, &anchors, &a, &p).unwrap();
        assert_abs_diff_eq!(h, 3.0 * 2.0 / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn bound_floor_without_data() {
        let b = PenaltyBound::from_parts(0.0, 0.0, 0.0, 0.0, 2.0, 3);
        assert_eq!((b.lambda0, b.lambda1, b.lambda2), (1.0, 1.0, 1.0));
        assert_eq!(b.beta_min, 6.0);
        let b = PenaltyBound::from_parts(0.0, 0.0, 0.0, 0.0, 2.0, 1);
        assert_eq!(b.beta_min, 4.0);
    }

    #[test]
    fn single_column_bound_selects_first_branch() {
        let b = PenaltyBound::from_parts(5.0, 1.0, 1.0, 0.01, 1.5, 1);
        assert!(2.0 * (b.lambda0 + b.lambda1) >= 2.0 * b.lambda2);
        assert_eq!(b.beta_min, 2.0 * (b.lambda0 + b.lambda1));
    }

    #[test]
    fn gram_operator_agrees_with_factored() {
        let tall = DataMatrix::new(Mat::from_fn(6, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0)).unwrap();
        let wide = DataMatrix::new(Mat::from_fn(3, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0)).unwrap();
        for a in [tall, wide] {
            let op = GramOperator::new(&a);
            let x = Mat::from_fn(a.d(), 2, |i, j| (i as f64 + 1.0) / (j as f64 + 2.0));
            assert_abs_diff_eq!(op.apply(&x), a.apply(&x), epsilon = 1e-10);
            assert_abs_diff_eq!(op.quad(&x), a.quad(&x), epsilon = 1e-10);
            assert_abs_diff_eq!(op.spectral_norm(), a.spectral_norm(), epsilon = 1e-9);
        }
    }
}
