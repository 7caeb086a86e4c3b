//! Small dense matrices over real or complex scalars.

use std::ops::{Add, Mul, Neg, Sub};

use crate::bigfloat::{Cplx, Precision, Real};
use crate::error::{Error, Result};

/// Matrix entry: a real scalar or a complex number over one.
pub trait Entry:
    Copy + std::fmt::Debug + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    type Scalar: Real;
    fn zero_at(prec: Precision) -> Self;
    fn one_at(prec: Precision) -> Self;
    fn scale(self, s: Self::Scalar) -> Self;
    /// Upper bound on the modulus (exact for reals).
    fn modulus_bound(self) -> Self::Scalar;
    /// `sum a_i b_i` over paired slices.
    fn dot(prec: Precision, a: &[Self], b: &[Self]) -> Self;
}

impl<R: Real> Entry for R {
    type Scalar = R;
    fn zero_at(prec: Precision) -> Self {
        R::zero(prec)
    }
    fn one_at(prec: Precision) -> Self {
        R::one(prec)
    }
    fn scale(self, s: R) -> Self {
        self * s
    }
    fn modulus_bound(self) -> R {
        self.abs()
    }
    fn dot(prec: Precision, a: &[Self], b: &[Self]) -> Self {
        R::dot(prec, a.iter().zip(b))
    }
}

impl<R: Real> Entry for Cplx<R> {
    type Scalar = R;
    fn zero_at(prec: Precision) -> Self {
        Cplx::zero(prec)
    }
    fn one_at(prec: Precision) -> Self {
        Cplx::from_real(R::one(prec))
    }
    fn scale(self, s: R) -> Self {
        Cplx::scale(self, s)
    }
    fn modulus_bound(self) -> R {
        self.l1()
    }
    fn dot(prec: Precision, a: &[Self], b: &[Self]) -> Self {
        let re = R::dot_signed(
            prec,
            a.iter().zip(b).flat_map(|(x, y)| [(&x.re, &y.re, false), (&x.im, &y.im, true)]),
        );
        let im = R::dot_signed(
            prec,
            a.iter().zip(b).flat_map(|(x, y)| [(&x.re, &y.im, false), (&x.im, &y.re, false)]),
        );
        Cplx::new(re, im)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> Mat<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Mat<U> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

impl<T: Entry> Mat<T> {
    pub fn identity(n: usize, prec: Precision) -> Self {
        Mat::from_fn(n, n, |r, c| if r == c { T::one_at(prec) } else { T::zero_at(prec) })
    }

    pub fn zeros(rows: usize, cols: usize, prec: Precision) -> Self {
        Mat::from_fn(rows, cols, |_, _| T::zero_at(prec))
    }

    /// Maximum absolute column sum (an upper bound for complex entries).
    pub fn norm1(&self, prec: Precision) -> T::Scalar {
        let mut best = T::Scalar::zero(prec);
        for c in 0..self.cols {
            let mut sum = T::Scalar::zero(prec);
            for r in 0..self.rows {
                sum += self.get(r, c).modulus_bound();
            }
            best = best.max(sum);
        }
        best
    }

    pub fn matmul(&self, other: &Self, prec: Precision) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let t = other.transpose();
        Ok(Mat::from_fn(self.rows, other.cols, |r, c| T::dot(prec, self.row(r), t.row(c))))
    }

    pub fn matvec(&self, v: &[T], prec: Precision) -> Result<Vec<T>> {
        if self.cols != v.len() {
            return Err(Error::Dimension(format!("{}x{} times vector of {}", self.rows, self.cols, v.len())));
        }
        Ok((0..self.rows).map(|r| T::dot(prec, self.row(r), v)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: T::Scalar) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a.scale(s)).collect() }
    }
}
