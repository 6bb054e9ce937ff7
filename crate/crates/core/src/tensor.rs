//! Dense order-3 tensors and the handful of matrix routines the estimators
//! need: matricization, mode products, norms, SVD and subspace distances.
//!
//! Indices are 0-based in code. The mode-`s` matricization places tensor
//! entry `(i1, i2, i3)` at
//!
//! ```text
//! mode 1: row i1, column i2 * p3 + i3        (p1 x p2 p3)
//! mode 2: row i2, column i3 * p1 + i1        (p2 x p3 p1)
//! mode 3: row i3, column i1 * p2 + i2        (p3 x p1 p2)
//! ```
//!
//! which is the cyclic convention; every module in the crate relies on it.

use std::ops::{Add, Index, IndexMut, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense column-major real matrix.
pub type Matrix = DMatrix<f64>;

/// Tolerance used when validating orthonormal column bases.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Dense `p1 x p2 x p3` real tensor, stored with the last index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self::filled(dims, 0.0)
    }

    pub fn filled(dims: [usize; 3], value: f64) -> Self {
        Tensor3 {
            dims,
            data: vec![value; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for l in 0..dims[2] {
                    data.push(f(i, j, l));
                }
            }
        }
        Tensor3 { dims, data }
    }

    /// Wraps a buffer laid out as `data[(i * p2 + j) * p3 + l]`.
    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::usage(format!(
                "tensor buffer of length {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.data[self.offset(i, j, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, l: usize, value: f64) {
        let o = self.offset(i, j, l);
        self.data[o] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Tensor3 {
        self.map(|x| x * factor)
    }

    /// Entrywise combination of two tensors of equal shape.
    pub fn zip_with(&self, other: &Tensor3, f: impl Fn(f64, f64) -> f64) -> Result<Tensor3> {
        if self.dims != other.dims {
            return Err(Error::usage(format!(
                "shape mismatch: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(Tensor3 {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `<self, other>`, summed over all entries.
    pub fn inner(&self, other: &Tensor3) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::usage("inner product of tensors with different shapes"));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Entrywise maximum absolute value.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Unfolds the tensor along `mode` (1, 2 or 3).
    pub fn matricize(&self, mode: usize) -> Result<Matrix> {
        let [p1, p2, p3] = self.dims;
        match mode {
            1 => Ok(Matrix::from_row_slice(p1, p2 * p3, &self.data)),
            2 => {
                let mut m = Matrix::zeros(p2, p3 * p1);
                for i in 0..p1 {
                    for j in 0..p2 {
                        for l in 0..p3 {
                            m[(j, l * p1 + i)] = self.get(i, j, l);
                        }
                    }
                }
                Ok(m)
            }
            3 => {
                let mut m = Matrix::zeros(p3, p1 * p2);
                for i in 0..p1 {
                    for j in 0..p2 {
                        for l in 0..p3 {
                            m[(l, i * p2 + j)] = self.get(i, j, l);
                        }
                    }
                }
                Ok(m)
            }
            _ => Err(invalid_mode(mode)),
        }
    }

    /// Inverse of [`Tensor3::matricize`]: folds `m` back into a tensor of
    /// shape `dims` along `mode`.
    pub fn fold(m: &Matrix, mode: usize, dims: [usize; 3]) -> Result<Tensor3> {
        let [p1, p2, p3] = dims;
        let expected = match mode {
            1 => (p1, p2 * p3),
            2 => (p2, p3 * p1),
            3 => (p3, p1 * p2),
            _ => return Err(invalid_mode(mode)),
        };
        if m.shape() != expected {
            return Err(Error::usage(format!(
                "cannot fold {:?} matrix into {:?} along mode {mode}",
                m.shape(),
                dims
            )));
        }
        Ok(Tensor3::from_fn(dims, |i, j, l| match mode {
            1 => m[(i, j * p3 + l)],
            2 => m[(j, l * p1 + i)],
            _ => m[(l, i * p2 + j)],
        }))
    }

    /// Marginal multiplication `self x_mode u`: contracts the `mode` index
    /// with the columns of `u`.
    pub fn mode_product(&self, u: &Matrix, mode: usize) -> Result<Tensor3> {
        if !(1..=3).contains(&mode) {
            return Err(invalid_mode(mode));
        }
        let p = self.dims[mode - 1];
        if u.ncols() != p {
            return Err(Error::usage(format!(
                "mode-{mode} product needs a matrix with {p} columns, got {}",
                u.ncols()
            )));
        }
        let mut dims = self.dims;
        dims[mode - 1] = u.nrows();
        if mode == 1 {
            // The mode-1 unfolding is the storage itself; skip the copy.
            let [p1, p2, p3] = self.dims;
            let cols = p2 * p3;
            let mut out = vec![0.0; u.nrows() * cols];
            for r in 0..u.nrows() {
                let dst = &mut out[r * cols..(r + 1) * cols];
                for k in 0..p1 {
                    let w = u[(r, k)];
                    if w == 0.0 {
                        continue;
                    }
                    let src = &self.data[k * cols..(k + 1) * cols];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
            return Tensor3::from_vec(dims, out);
        }
        let unfolded = self.matricize(mode)?;
        Tensor3::fold(&(u * unfolded), mode, dims)
    }

    /// `M_s(T) M_s(T)^T`, the Gram matrix of the mode-`s` unfolding.
    pub fn gram(&self, mode: usize) -> Result<Matrix> {
        let m = self.matricize(mode)?;
        Ok(&m * m.transpose())
    }

    /// Largest spectral norm over the three matricizations.
    pub fn spectral_norm(&self) -> f64 {
        (1..=3)
            .map(|mode| {
                let m = self.matricize(mode).expect("valid mode");
                singular_values(&m).first().copied().unwrap_or(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Smallest non-zero singular value over the three matricizations
    /// (zero for the zero tensor).
    pub fn sigma_min(&self) -> f64 {
        let mut best = f64::INFINITY;
        for mode in 1..=3 {
            let m = self.matricize(mode).expect("valid mode");
            let s = singular_values(&m);
            let top = s.first().copied().unwrap_or(0.0);
            let cutoff = rank_cutoff(top, m.nrows().max(m.ncols()));
            if let Some(&smallest) = s.iter().rev().find(|&&x| x > cutoff) {
                best = best.min(smallest);
            }
        }
        if best.is_finite() {
            best
        } else {
            0.0
        }
    }

    /// Rank of the mode-`s` matricization at relative threshold `tol`.
    pub fn mode_rank(&self, mode: usize, tol: f64) -> Result<usize> {
        let m = self.matricize(mode)?;
        let s = singular_values(&m);
        let top = s.first().copied().unwrap_or(0.0);
        Ok(s.iter().filter(|&&x| x > tol * top.max(1.0)).count())
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;

    fn index(&self, (i, j, l): (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(i, j, l)]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (i, j, l): (usize, usize, usize)) -> &mut f64 {
        let o = self.offset(i, j, l);
        &mut self.data[o]
    }
}

impl Add for &Tensor3 {
    type Output = Tensor3;

    fn add(self, rhs: &Tensor3) -> Tensor3 {
        self.zip_with(rhs, |a, b| a + b)
            .expect("tensor addition requires equal shapes")
    }
}

impl Sub for &Tensor3 {
    type Output = Tensor3;

    fn sub(self, rhs: &Tensor3) -> Tensor3 {
        self.zip_with(rhs, |a, b| a - b)
            .expect("tensor subtraction requires equal shapes")
    }
}

fn invalid_mode(mode: usize) -> Error {
    Error::usage(format!("mode must be 1, 2 or 3, got {mode}"))
}

fn rank_cutoff(top: f64, dim: usize) -> f64 {
    top * dim as f64 * f64::EPSILON * 4.0
}

/// Thin singular value decomposition `a = u diag(s) v^T`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows x min(rows, cols)`, orthonormal columns.
    pub u: Matrix,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// `cols x min(rows, cols)`, orthonormal columns.
    pub v: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (c, &sv) in self.s.iter().enumerate() {
            us.column_mut(c).scale_mut(sv);
        }
        us * self.v.transpose()
    }
}

/// Thin SVD with singular values sorted in decreasing order and each left
/// singular vector signed so that its largest-magnitude entry is positive.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::usage("svd of a matrix with non-finite entries"));
    }
    let (rows, cols) = a.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(SvdResult {
            u: Matrix::zeros(rows, 0),
            s: Vec::new(),
            v: Matrix::zeros(cols, 0),
        });
    }
    let dec = a.clone().svd(true, true);
    let u_raw = dec.u.ok_or_else(|| Error::Numerical("svd did not return U".into()))?;
    let vt_raw = dec
        .v_t
        .ok_or_else(|| Error::Numerical("svd did not return V".into()))?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| dec.singular_values[y].total_cmp(&dec.singular_values[x]));

    let mut u = Matrix::zeros(rows, k);
    let mut v = Matrix::zeros(cols, k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut ucol = u_raw.column(src).into_owned();
        let mut vcol = vt_raw.row(src).transpose();
        if sign_flip_needed(ucol.as_slice()) {
            ucol.neg_mut();
            vcol.neg_mut();
        }
        u.set_column(dst, &ucol);
        v.set_column(dst, &vcol);
        s.push(dec.singular_values[src].max(0.0));
    }
    Ok(SvdResult { u, s, v })
}

/// Singular values only, in decreasing order.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().map(|x| x.max(0.0)).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// True when the largest-magnitude entry is negative (first one wins ties).
pub(crate) fn sign_flip_needed(col: &[f64]) -> bool {
    let mut best = 0.0_f64;
    let mut neg = false;
    for &x in col {
        if x.abs() > best.abs() + 1e-14 {
            best = x;
            neg = x < 0.0;
        }
    }
    neg
}

/// `max |U^T U - I|`.
pub fn orthonormality_defect(u: &Matrix) -> f64 {
    let g = u.transpose() * u;
    let mut worst = 0.0_f64;
    for r in 0..g.nrows() {
        for c in 0..g.ncols() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((g[(r, c)] - target).abs());
        }
    }
    worst
}

/// `min over orthogonal O of || u1 - u2 O ||` for orthonormal bases of equal
/// shape. Equals `2 sin(theta_max / 2)` where `theta_max` is the largest
/// principal angle between the two column spans.
pub fn sin_theta_distance(u1: &Matrix, u2: &Matrix) -> Result<f64> {
    if u1.shape() != u2.shape() {
        return Err(Error::usage(format!(
            "subspace bases differ in shape: {:?} vs {:?}",
            u1.shape(),
            u2.shape()
        )));
    }
    for (name, u) in [("first", u1), ("second", u2)] {
        let defect = orthonormality_defect(u);
        if defect > ORTHONORMAL_TOL {
            return Err(Error::usage(format!(
                "{name} basis is not orthonormal (defect {defect:.2e})"
            )));
        }
    }
    if u1.ncols() == 0 {
        return Ok(0.0);
    }
    // sin(theta_max) from the residual is accurate near zero, unlike
    // 1 - cos(theta) from the cross product.
    let residual = u1 - u2 * (u2.transpose() * u1);
    let sin_max = singular_values(&residual)
        .first()
        .copied()
        .unwrap_or(0.0)
        .min(1.0);
    let cos_max = (1.0 - sin_max * sin_max).max(0.0).sqrt();
    Ok(sin_max * (2.0 / (1.0 + cos_max)).sqrt())
}

/// Orthogonal projector `u u^T`.
pub fn projector(u: &Matrix) -> Matrix {
    u * u.transpose()
}
