//! Dense matrix primitives for small control problems.
//!
//! Everything here is sized for state dimensions up to roughly ten:
//! dense storage, direct symmetric eigendecompositions, no sparsity.
//! Symmetry is enforced at construction by averaging `(A + A^T)/2` so
//! that repeated rank-one updates cannot drift asymmetric.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: DMatrix<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::dim(format!(
                "matrix entries length {} does not match {}x{}",
                entries.len(),
                rows,
                cols
            )));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        Ok(Self {
            rows,
            cols,
            data: DMatrix::from_row_slice(rows, cols, &entries),
        })
    }

    /// Builds from nested rows, checking that they are rectangular.
    pub fn from_nested(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        let c = rows[0].len();
        if c == 0 || rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidArgument("ragged or empty matrix rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(r, c, flat)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: DMatrix::zeros(rows, cols) }
    }

    pub fn identity(n: usize) -> Self {
        Self { rows: n, cols: n, data: DMatrix::identity(n, n) }
    }

    /// Column vector from a slice.
    pub fn column(x: &[f64]) -> Self {
        Self { rows: x.len(), cols: 1, data: DMatrix::from_column_slice(x.len(), 1, x) }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[(i, j)] = v;
    }

    pub fn transpose(&self) -> Self {
        Self { rows: self.cols, cols: self.rows, data: self.data.transpose() }
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: other.cols,
            data: &self.data * &other.data,
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.cols != x.len() {
            return Err(Error::dim(format!(
                "cannot apply {}x{} to vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let v = nalgebra::DVector::from_column_slice(x);
        Ok((&self.data * v).iter().copied().collect())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.same_shape(other, "add")?;
        Ok(Matrix { rows: self.rows, cols: self.cols, data: &self.data + &other.data })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.same_shape(other, "subtract")?;
        Ok(Matrix { rows: self.rows, cols: self.cols, data: &self.data - &other.data })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: &self.data * s }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, e| m.max(e.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> Result<f64> {
        self.same_shape(other, "compare")?;
        Ok((&self.data - &other.data).iter().fold(0.0f64, |m, e| m.max(e.abs())))
    }

    /// Stacks `top` above `bottom`.
    pub fn vstack(top: &Matrix, bottom: &Matrix) -> Result<Matrix> {
        if top.cols != bottom.cols {
            return Err(Error::dim("vstack column mismatch"));
        }
        let mut out = Matrix::zeros(top.rows + bottom.rows, top.cols);
        for i in 0..top.rows {
            for j in 0..top.cols {
                out.set(i, j, top.get(i, j));
            }
        }
        for i in 0..bottom.rows {
            for j in 0..bottom.cols {
                out.set(top.rows + i, j, bottom.get(i, j));
            }
        }
        Ok(out)
    }

    /// Block-diagonal composition of two matrices.
    pub fn block_diag(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows + b.rows, a.cols + b.cols);
        for i in 0..a.rows {
            for j in 0..a.cols {
                out.set(i, j, a.get(i, j));
            }
        }
        for i in 0..b.rows {
            for j in 0..b.cols {
                out.set(a.rows + i, a.cols + j, b.get(i, j));
            }
        }
        out
    }

    /// General (non-symmetric) inverse via LU; errors when near-singular.
    pub fn inverse(&self) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::dim("inverse of non-square matrix"));
        }
        let inv = self
            .data
            .clone()
            .try_inverse()
            .ok_or(Error::Singular { min_abs_eigenvalue: 0.0 })?;
        if inv.iter().any(|e| !e.is_finite()) {
            return Err(Error::Numerical("non-finite inverse".into()));
        }
        Ok(Matrix { rows: self.rows, cols: self.cols, data: inv })
    }

    pub(crate) fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub(crate) fn from_dmatrix(data: DMatrix<f64>) -> Self {
        Self { rows: data.nrows(), cols: data.ncols(), data }
    }

    fn same_shape(&self, other: &Matrix, what: &str) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim(format!(
                "cannot {what} {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

/// Symmetric real matrix; stored full square, exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: DMatrix<f64>,
}

impl SymmetricMatrix {
    /// Builds from a full square entry list, averaging `(A + A^T)/2`.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        let m = Matrix::new(dim, dim, entries)?;
        Ok(Self::symmetrize(m.as_dmatrix()))
    }

    pub fn from_nested(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Matrix::from_nested(rows)?;
        Self::from_matrix(&m)
    }

    /// Symmetrizes a square matrix; errors if it is not square.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::dim(format!(
                "symmetric matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        Ok(Self::symmetrize(m.as_dmatrix()))
    }

    fn symmetrize(d: &DMatrix<f64>) -> Self {
        let sym = (d + d.transpose()) * 0.5;
        Self { dim: d.nrows(), data: sym }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, data: DMatrix::identity(dim, dim) }
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        Self { dim, data: DMatrix::identity(dim, dim) * s }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_dmatrix(self.data.clone())
    }

    pub fn add(&self, other: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        self.same_dim(other)?;
        Ok(Self { dim: self.dim, data: &self.data + &other.data })
    }

    pub fn sub(&self, other: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        self.same_dim(other)?;
        Ok(Self { dim: self.dim, data: &self.data - &other.data })
    }

    pub fn scale(&self, s: f64) -> SymmetricMatrix {
        Self { dim: self.dim, data: &self.data * s }
    }

    /// `self + v v^T` (exactly symmetric, no re-averaging needed).
    pub fn add_outer(&self, v: &[f64]) -> Result<SymmetricMatrix> {
        if v.len() != self.dim {
            return Err(Error::dim("outer-product update dimension mismatch"));
        }
        let mut data = self.data.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                data[(i, j)] += v[i] * v[j];
            }
        }
        Ok(Self { dim: self.dim, data })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, e| m.max(e.abs()))
    }

    pub fn max_abs_diff(&self, other: &SymmetricMatrix) -> Result<f64> {
        self.same_dim(other)?;
        Ok((&self.data - &other.data).iter().fold(0.0f64, |m, e| m.max(e.abs())))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let eig = SymmetricEigen::new(self.data.clone());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("eigenvalue solver produced non-finite values".into()));
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(vals)
    }

    /// Smallest eigenvalue. Compare against a tolerance to decide
    /// positive semi-definiteness; a signed margin is needed because
    /// feasibility certificates are checked at marginal attenuation.
    pub fn psd_margin(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    /// Default tolerance for semi-definiteness decisions: `1e-9 * dim * max|entry|`.
    pub fn psd_tolerance(&self) -> f64 {
        1e-9 * self.dim as f64 * self.max_abs()
    }

    /// Inverse through the eigendecomposition; carries the smallest
    /// |eigenvalue| on failure so callers can report conditioning.
    pub fn sym_inverse(&self) -> Result<SymmetricMatrix> {
        let eig = SymmetricEigen::new(self.data.clone());
        let min_abs = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let max_abs = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !min_abs.is_finite() || !max_abs.is_finite() {
            return Err(Error::Numerical("eigenvalue solver failed".into()));
        }
        if min_abs <= 1e-13 * max_abs.max(1.0) {
            return Err(Error::Singular { min_abs_eigenvalue: min_abs });
        }
        let inv_vals = eig.eigenvalues.map(|v| 1.0 / v);
        let recomposed =
            &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
        Ok(Self::symmetrize(&recomposed))
    }

    /// Principal square root of a positive semi-definite matrix.
    pub fn sym_sqrt(&self) -> Result<SymmetricMatrix> {
        let tol = self.psd_tolerance();
        let eig = SymmetricEigen::new(self.data.clone());
        let mut vals = eig.eigenvalues.clone();
        for v in vals.iter_mut() {
            if *v < -tol {
                return Err(Error::InvalidArgument(format!(
                    "square root of indefinite matrix (eigenvalue {v:.3e})"
                )));
            }
            *v = v.max(0.0).sqrt();
        }
        let recomposed =
            &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        Ok(Self::symmetrize(&recomposed))
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn sym_eigen(&self) -> Result<(Vec<f64>, Matrix)> {
        let eig = SymmetricEigen::new(self.data.clone());
        let mut order: Vec<usize> = (0..self.dim).collect();
        let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("eigenvalue solver produced non-finite values".into()));
        }
        order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
        let sorted: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
        let mut vecs = DMatrix::zeros(self.dim, self.dim);
        for (col, &src) in order.iter().enumerate() {
            vecs.set_column(col, &eig.eigenvectors.column(src));
        }
        Ok((sorted, Matrix::from_dmatrix(vecs)))
    }

    /// Eigenvector for the largest eigenvalue.
    pub fn top_eigenvector(&self) -> Result<Vec<f64>> {
        let eig = SymmetricEigen::new(self.data.clone());
        let mut idx = 0;
        for (k, v) in eig.eigenvalues.iter().enumerate() {
            if *v > eig.eigenvalues[idx] {
                idx = k;
            }
        }
        let col = eig.eigenvectors.column(idx);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("eigenvector solver failed".into()));
        }
        Ok(col.iter().copied().collect())
    }

    fn same_dim(&self, other: &SymmetricMatrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::dim(format!(
                "symmetric dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }
}

/// `x^T A x`.
pub fn quad_form(x: &[f64], a: &SymmetricMatrix) -> Result<f64> {
    if x.len() != a.dim() {
        return Err(Error::dim(format!(
            "quad_form: vector length {} vs matrix dim {}",
            x.len(),
            a.dim()
        )));
    }
    let mut acc = 0.0;
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            acc += x[i] * a.get(i, j) * x[j];
        }
    }
    Ok(acc)
}

/// `trace(B^T A B)` for `B` with as many rows as `A` has columns.
pub fn weighted_norm_sq(b: &Matrix, a: &SymmetricMatrix) -> Result<f64> {
    if b.rows() != a.dim() {
        return Err(Error::dim(format!(
            "weighted_norm_sq: B has {} rows, A dim {}",
            b.rows(),
            a.dim()
        )));
    }
    let prod = a.to_matrix().mul(b)?;
    let mut acc = 0.0;
    for i in 0..b.rows() {
        for j in 0..b.cols() {
            acc += b.get(i, j) * prod.get(i, j);
        }
    }
    Ok(acc)
}

/// `trace(A^T B) = sum_ij A_ij B_ij`.
pub fn trace_inner(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::dim(format!(
            "trace_inner: shapes {}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut acc = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            acc += a.get(i, j) * b.get(i, j);
        }
    }
    Ok(acc)
}

/// Clips to [-1, 1].
pub fn sat(y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::InvalidArgument("sat of non-finite value".into()));
    }
    Ok(y.clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rows: &[&[f64]]) -> SymmetricMatrix {
        let nested: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        SymmetricMatrix::from_nested(&nested).unwrap()
    }

    #[test]
    fn quad_form_examples() {
        assert_eq!(quad_form(&[1.0, 0.0], &SymmetricMatrix::identity(2)).unwrap(), 1.0);
        // |x|^2_P at x = 1 for the scalar benchmark value P = 1.6985
        assert_eq!(quad_form(&[1.0], &sym(&[&[1.6985]])).unwrap(), 1.6985);
        // hand expansion: 2*1 + 2*(1*2) + 3*4 = 18
        let a = sym(&[&[2.0, 1.0], &[1.0, 3.0]]);
        assert!((quad_form(&[1.0, 2.0], &a).unwrap() - 18.0).abs() < 1e-14);
        assert!(quad_form(&[1.0], &a).is_err());
    }

    #[test]
    fn weighted_norm_examples() {
        let id2 = SymmetricMatrix::identity(2);
        assert_eq!(weighted_norm_sq(&Matrix::identity(2), &id2).unwrap(), 2.0);
        let z = sym(&[&[1.0, 1.0], &[1.0, 1.0]]);
        // stacked [I; iA] for n = 1, A = 1: z11 + 2 z12 + z22
        let b_plus = Matrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        assert_eq!(weighted_norm_sq(&b_plus, &z).unwrap(), 4.0);
        let b_minus = Matrix::new(2, 1, vec![1.0, -1.0]).unwrap();
        assert_eq!(weighted_norm_sq(&b_minus, &z).unwrap(), 0.0);
        assert!(weighted_norm_sq(&Matrix::identity(3), &z).is_err());
    }

    #[test]
    fn trace_inner_examples() {
        let i2 = Matrix::identity(2);
        assert_eq!(trace_inner(&i2, &i2).unwrap(), 2.0);
        let sel = Matrix::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let b = Matrix::new(2, 2, vec![5.0, 7.0, 9.0, 11.0]).unwrap();
        assert_eq!(trace_inner(&sel, &b).unwrap(), 5.0);
        let a = Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let ones = Matrix::new(2, 2, vec![1.0; 4]).unwrap();
        assert_eq!(trace_inner(&a, &ones).unwrap(), 10.0);
        assert!(trace_inner(&a, &Matrix::identity(3)).is_err());
    }

    #[test]
    fn sat_examples() {
        assert_eq!(sat(0.5).unwrap(), 0.5);
        assert_eq!(sat(2.0).unwrap(), 1.0);
        assert_eq!(sat(-3.93).unwrap(), -1.0);
        assert!(sat(f64::NAN).is_err());
    }

    #[test]
    fn psd_margin_examples() {
        assert!((SymmetricMatrix::identity(2).psd_margin().unwrap() - 1.0).abs() < 1e-12);
        let rank1 = sym(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(rank1.psd_margin().unwrap().abs() < 1e-12);
        let indef = sym(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!((indef.psd_margin().unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sym_inverse_examples() {
        let id3 = SymmetricMatrix::identity(3);
        assert!(id3.sym_inverse().unwrap().max_abs_diff(&id3).unwrap() < 1e-14);

        let d = sym(&[&[2.0, 0.0], &[0.0, 4.0]]);
        let dinv = d.sym_inverse().unwrap();
        assert!((dinv.get(0, 0) - 0.5).abs() < 1e-14);
        assert!((dinv.get(1, 1) - 0.25).abs() < 1e-14);
        assert!(dinv.get(0, 1).abs() < 1e-14);

        // scalar S-computation step; oracle is the reciprocal
        let s = sym(&[&[0.43168]]).sym_inverse().unwrap();
        assert!((s.get(0, 0) - 1.0 / 0.43168).abs() < 1e-12);
        assert!((s.get(0, 0) - 2.3165).abs() < 1e-3);

        match sym(&[&[1.0, 1.0], &[1.0, 1.0]]).sym_inverse() {
            Err(Error::Singular { min_abs_eigenvalue }) => {
                assert!(min_abs_eigenvalue.abs() < 1e-12)
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn symmetrization_averages() {
        let m = Matrix::new(2, 2, vec![1.0, 2.0, 4.0, 3.0]).unwrap();
        let s = SymmetricMatrix::from_matrix(&m).unwrap();
        assert_eq!(s.get(0, 1), 3.0);
        assert_eq!(s.get(1, 0), 3.0);
    }

    #[test]
    fn sqrt_recomposes() {
        let a = sym(&[&[4.0, 1.0], &[1.0, 3.0]]);
        let r = a.sym_sqrt().unwrap();
        let sq = SymmetricMatrix::from_matrix(&r.to_matrix().mul(&r.to_matrix()).unwrap()).unwrap();
        assert!(sq.max_abs_diff(&a).unwrap() < 1e-12);
        assert!(sym(&[&[0.0, 1.0], &[1.0, 0.0]]).sym_sqrt().is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Matrix::new(1, 1, vec![f64::INFINITY]).is_err());
        assert!(SymmetricMatrix::new(1, vec![f64::NAN]).is_err());
    }
}
