//! Small dense linear algebra: a row-major matrix, one-sided Jacobi SVD and
//! cyclic Jacobi symmetric eigendecomposition.
//!
//! Blocks in this crate are at most a few thousand entries, so both
//! factorizations use plain Jacobi rotations. They are accurate to a few ulps
//! on the singular values and need no pivoting heuristics.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 80;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    /// Builds a matrix from row-major data.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    /// A column vector (`n x 1`).
    pub fn column(values: Vec<S>) -> Self {
        let n = values.len();
        Self::from_vec(n, 1, values)
    }

    pub fn diag(values: &[S]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        let c = self.cols;
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn col_to_vec(&self, c: usize) -> Vec<S> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    /// Matrix product. Panics on incompatible inner dimensions.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == S::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d = *d + a * b;
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: S) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> S {
        self.data.iter().map(|&v| v * v).sum::<S>().sqrt()
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self - other`; panics on shape mismatch.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &S {
        &self.data[r * self.cols + c]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut S {
        &mut self.data[r * self.cols + c]
    }
}

/// Thin singular value decomposition `M = U diag(sigma) V^T`.
///
/// `u` is `rows x r`, `v` is `cols x r`, `sigma` is sorted in decreasing order
/// and only holds the `r` singular values above the rank cutoff.
#[derive(Debug, Clone)]
pub struct Svd<S> {
    pub u: Matrix<S>,
    pub sigma: Vec<S>,
    pub v: Matrix<S>,
}

impl<S: Scalar> Svd<S> {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> Matrix<S> {
        let mut us = self.u.clone();
        for r in 0..us.rows() {
            for (c, &s) in self.sigma.iter().enumerate() {
                us[(r, c)] = us[(r, c)] * s;
            }
        }
        us.matmul(&self.v.transpose())
    }

    /// The polar factor `U V^T` of the decomposed matrix.
    pub fn polar(&self) -> Matrix<S> {
        self.u.matmul(&self.v.transpose())
    }
}

/// Thin SVD by one-sided (Hestenes) Jacobi rotations.
///
/// Singular values at or below `rank_tolerance * sigma_max` are dropped,
/// so the zero matrix yields an empty decomposition.
pub fn thin_svd<S: Scalar>(m: &Matrix<S>) -> Result<Svd<S>> {
    if !m.is_finite() {
        return Err(Error::NonFinite("matrix passed to thin_svd"));
    }
    if m.rows() < m.cols() {
        let t = thin_svd(&m.transpose())?;
        return Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }
    let (rows, cols) = m.shape();
    // Column-major working copies: a[j] is column j of A, vcols[j] column j of V.
    let mut a: Vec<Vec<S>> = (0..cols).map(|j| m.col_to_vec(j)).collect();
    let mut vcols: Vec<Vec<S>> = (0..cols)
        .map(|j| {
            let mut e = vec![S::zero(); cols];
            e[j] = S::one();
            e
        })
        .collect();

    // Rounding in a length-`rows` dot product is about `rows * eps`; asking for
    // more orthogonality than that can stall the sweeps.
    let tol = S::epsilon() * S::lit(rows as f64);
    let negligible = S::epsilon() * m.frobenius_norm();
    let mut converged = cols < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let (mut alpha, mut beta, mut gamma) = (S::zero(), S::zero(), S::zero());
                for (&x, &y) in a[i].iter().zip(&a[j]) {
                    alpha = alpha + x * x;
                    beta = beta + y * y;
                    gamma = gamma + x * y;
                }
                let (na, nb) = (alpha.sqrt(), beta.sqrt());
                if gamma == S::zero() || na <= negligible || nb <= negligible || gamma.abs() <= tol * na * nb {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (S::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (S::one() + zeta * zeta).sqrt());
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut a, i, j, c, s);
                rotate_pair(&mut vcols, i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "thin_svd",
            sweeps: MAX_SWEEPS,
        });
    }

    let norms: Vec<S> = a
        .iter()
        .map(|col| col.iter().map(|&x| x * x).sum::<S>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    // Stable sort keeps the original column order among equal singular values.
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).expect("finite norms"));
    let sigma_max = order.first().map_or(S::zero(), |&k| norms[k]);
    let cutoff = S::rank_tolerance() * sigma_max;
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&k| norms[k] > cutoff && norms[k] > S::zero())
        .collect();

    let r = kept.len();
    let mut u = Matrix::zeros(rows, r);
    let mut v = Matrix::zeros(cols, r);
    let mut sigma = Vec::with_capacity(r);
    for (c, &k) in kept.iter().enumerate() {
        let s = norms[k];
        sigma.push(s);
        for row in 0..rows {
            u[(row, c)] = a[k][row] / s;
        }
        for row in 0..cols {
            v[(row, c)] = vcols[k][row];
        }
    }
    Ok(Svd { u, sigma, v })
}

#[inline]
fn rotate_pair<S: Scalar>(cols: &mut [Vec<S>], i: usize, j: usize, c: S, s: S) {
    let (left, right) = cols.split_at_mut(j);
    let (ci, cj) = (&mut left[i], &mut right[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Eigendecomposition of a symmetric matrix; eigenvalues in decreasing order,
/// eigenvectors stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<S> {
    pub values: Vec<S>,
    pub vectors: Matrix<S>,
}

impl<S: Scalar> SymmetricEigen<S> {
    /// Rebuilds `V f(diag) V^T` for a spectral function `f`.
    pub fn map_spectrum(&self, f: impl Fn(S) -> S) -> Matrix<S> {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == S::zero() {
                continue;
            }
            for i in 0..n {
                let vi = self.vectors[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] = out[(i, j)] + vi * self.vectors[(j, k)];
                }
            }
        }
        out
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Only the upper triangle is trusted; the input is symmetrized first.
pub fn symmetric_eigen<S: Scalar>(m: &Matrix<S>) -> Result<SymmetricEigen<S>> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::ShapeMismatch {
            block: 0,
            expected: (n, n),
            found: m.shape(),
        });
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("matrix passed to symmetric_eigen"));
    }
    let half = S::lit(0.5);
    let mut a = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = half * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    let mut v = Matrix::identity(n);
    let eps = S::epsilon();
    // Off-diagonal noise below this is rounding, even where diagonal entries vanish.
    let floor = eps * a.frobenius_norm();
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == S::zero() {
                    continue;
                }
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                if apq.abs() <= floor || apq.abs() <= eps * app.abs().sqrt() * aqq.abs().sqrt() {
                    a[(p, q)] = S::zero();
                    a[(q, p)] = S::zero();
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (S::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (S::one() + theta * theta).sqrt());
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "symmetric_eigen",
            sweeps: MAX_SWEEPS,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].partial_cmp(&a[(x, x)]).expect("finite eigenvalues"));
    let values = order.iter().map(|&k| a[(k, k)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, c)] = v[(r, k)];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// `M^{-1/p}` of a symmetric positive semidefinite matrix. Eigenvalues at or
/// below `rank_tolerance * lambda_max` are pseudo-inverted to zero.
pub fn psd_inverse_root<S: Scalar>(m: &Matrix<S>, p: u32) -> Result<Matrix<S>> {
    let eig = symmetric_eigen(m)?;
    let lam_max = eig.values.first().copied().unwrap_or(S::zero());
    let cutoff = S::rank_tolerance() * lam_max;
    let exponent = -S::one() / S::from_u32(p).expect("small integer");
    Ok(eig.map_spectrum(|lam| {
        if lam > cutoff && lam > S::zero() {
            lam.powf(exponent)
        } else {
            S::zero()
        }
    }))
}
