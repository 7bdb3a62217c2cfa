//! Dense row-major matrices and vectors.

use std::ops::{Index, IndexMut};

use crate::numerics::NumericsError;
use crate::scalar::Scalar;

/// Flat storage shared by [`Mat`] and [`Vector`], so that series utilities
/// (smoothing, Table-1 norms, partial sums) work on either.
pub trait Tensor<T: Scalar>: Clone {
    fn as_slice(&self) -> &[T];
    fn as_mut_slice(&mut self) -> &mut [T];
    /// Same shape, all entries zero.
    fn zeros_like(&self) -> Self;

    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn is_empty(&self) -> bool {
        self.as_slice().is_empty()
    }

    fn same_shape(&self, other: &Self) -> bool;

    /// Euclidean norm of the flattened entries (Frobenius norm for matrices).
    fn norm(&self) -> T {
        self.as_slice().iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    fn norm_sq(&self) -> T {
        self.as_slice().iter().map(|&v| v * v).sum()
    }

    /// `self += alpha * other`.
    fn axpy(&mut self, alpha: T, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (a, &b) in self.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *a = *a + alpha * b;
        }
    }

    fn scale_mut(&mut self, alpha: T) {
        for a in self.as_mut_slice() {
            *a = *a * alpha;
        }
    }

    fn scaled(&self, alpha: T) -> Self {
        let mut out = self.clone();
        out.scale_mut(alpha);
        out
    }

    /// `self - other` as a new tensor.
    fn minus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-T::one(), other);
        out
    }

    fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(T::one(), other);
        out
    }

    fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    /// Largest absolute entrywise difference.
    fn max_abs_diff(&self, other: &Self) -> T {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

/// Column vector of dimension `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector<T> {
    data: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            data: vec![T::zero(); dim],
        }
    }

    pub fn filled(dim: usize, value: T) -> Self {
        Self {
            data: vec![value; dim],
        }
    }

    /// Validating constructor: rejects non-finite entries.
    pub fn from_vec(data: Vec<T>) -> Result<Self, NumericsError> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        Ok(Self { data })
    }

    /// Builds a vector without the finiteness check. Used on hot paths whose
    /// callers check finiteness themselves (forward passes, path simulation).
    pub fn from_vec_unchecked(data: Vec<T>) -> Self {
        Self { data }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize) -> T) -> Self {
        Self {
            data: (0..dim).map(f).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn dot(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }
}

impl<T: Scalar> Tensor<T> for Vector<T> {
    fn as_slice(&self) -> &[T] {
        &self.data
    }
    fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }
    fn zeros_like(&self) -> Self {
        Self::zeros(self.dim())
    }
    fn same_shape(&self, other: &Self) -> bool {
        self.dim() == other.dim()
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

/// Dense `rows x cols` matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::ShapeMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Single-column matrix holding `v`; lets bias series share matrix code.
    pub fn column(v: &Vector<T>) -> Self {
        Self {
            rows: v.dim(),
            cols: 1,
            data: v.as_slice().to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self * x`.
    pub fn matvec(&self, x: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.cols, x.dim());
        Vector::from_vec_unchecked(
            (0..self.rows)
                .map(|r| self.row(r).iter().zip(x.iter()).map(|(&a, &b)| a * b).sum())
                .collect(),
        )
    }

    /// `self^T * y`.
    pub fn tr_matvec(&self, y: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.rows, y.dim());
        let mut out = vec![T::zero(); self.cols];
        for r in 0..self.rows {
            let yr = y[r];
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o = *o + a * yr;
            }
        }
        Vector::from_vec_unchecked(out)
    }

    /// `self += alpha * u v^T`.
    pub fn add_outer(&mut self, alpha: T, u: &Vector<T>, v: &Vector<T>) {
        debug_assert_eq!((self.rows, self.cols), (u.dim(), v.dim()));
        for r in 0..self.rows {
            let s = alpha * u[r];
            let cols = self.cols;
            for (a, &b) in self.data[r * cols..(r + 1) * cols].iter_mut().zip(v.iter()) {
                *a = *a + s * b;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn frobenius_norm(&self) -> T {
        frobenius_norm(self)
    }
}

/// `sqrt(sum of squared entries)`.
pub fn frobenius_norm<T: Scalar>(m: &Mat<T>) -> T {
    m.norm()
}

impl<T: Scalar> Tensor<T> for Mat<T> {
    fn as_slice(&self) -> &[T] {
        &self.data
    }
    fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }
    fn zeros_like(&self) -> Self {
        Self::zeros(self.rows, self.cols)
    }
    fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}
