use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use super::{Precision, Real};

/// Complex number over either real scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cplx<R> {
    pub re: R,
    pub im: R,
}

impl<R: Real> Cplx<R> {
    pub fn new(re: R, im: R) -> Self {
        Cplx { re, im }
    }

    pub fn zero(prec: Precision) -> Self {
        Cplx { re: R::zero(prec), im: R::zero(prec) }
    }

    pub fn from_real(re: R) -> Self {
        Cplx { re, im: R::zero(re.precision()) }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(self) -> Self {
        Cplx { re: self.re, im: -self.im }
    }

    pub fn norm_sqr(self) -> R {
        self.re * self.re + self.im * self.im
    }

    pub fn abs(self) -> R {
        self.norm_sqr().sqrt().expect("a sum of squares is non-negative")
    }

    /// `|re| + |im|`, an upper bound for the modulus that needs no root.
    pub fn l1(self) -> R {
        self.re.abs() + self.im.abs()
    }

    pub fn scale(self, s: R) -> Self {
        Cplx { re: self.re * s, im: self.im * s }
    }

    /// Multiplication by `i^power`.
    pub fn mul_i_pow(self, power: i64) -> Self {
        match power.rem_euclid(4) {
            0 => self,
            1 => Cplx { re: -self.im, im: self.re },
            2 => Cplx { re: -self.re, im: -self.im },
            _ => Cplx { re: self.im, im: -self.re },
        }
    }
}

impl<R: Real> Add for Cplx<R> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Cplx { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

impl<R: Real> AddAssign for Cplx<R> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<R: Real> Sub for Cplx<R> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Cplx { re: self.re - rhs.re, im: self.im - rhs.im }
    }
}

impl<R: Real> Mul for Cplx<R> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Cplx {
            re: self.re * rhs.re - self.im * rhs.im,
            im: self.re * rhs.im + self.im * rhs.re,
        }
    }
}

impl<R: Real> Neg for Cplx<R> {
    type Output = Self;
    fn neg(self) -> Self {
        Cplx { re: -self.re, im: -self.im }
    }
}
