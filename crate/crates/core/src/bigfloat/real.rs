use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use super::accumulate::DotAccumulator;
use super::transcendental::{ln2_bits, pi_bits};
use super::{ArithError, ExtendedReal, Precision};

/// Real scalar used by every numerical kernel, implemented by native `f64`
/// and by [`ExtendedReal`]. Constructors take the working precision, which
/// `f64` ignores.
pub trait Real:
    Copy
    + Debug
    + Display
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
{
    fn from_i64(n: i64, prec: Precision) -> Self;
    fn from_f64(x: f64, prec: Precision) -> Result<Self, ArithError>;
    fn from_ratio(num: i64, den: i64, prec: Precision) -> Result<Self, ArithError>;
    fn parse(text: &str, prec: Precision) -> Result<Self, ArithError>;
    fn pi(prec: Precision) -> Self;
    fn ln2(prec: Precision) -> Self;

    fn precision(&self) -> Precision;
    fn is_zero(&self) -> bool;
    fn abs(self) -> Self;
    fn sqrt(self) -> Result<Self, ArithError>;
    fn exp(self) -> Result<Self, ArithError>;
    fn checked_div(self, rhs: Self) -> Result<Self, ArithError>;
    /// Exact scaling by `2^k`.
    fn mul_pow2(self, k: i64) -> Result<Self, ArithError>;
    fn powi(self, n: u32) -> Result<Self, ArithError>;

    fn to_f64(self) -> f64;
    /// `log2 |x|`, finite even when `x` lies outside the `f64` range.
    fn log2_abs(self) -> f64;
    /// Scientific notation with `digits` significant digits.
    fn to_sci(self, digits: usize) -> String;
    fn cache_key(&self) -> Vec<u64>;

    fn zero(prec: Precision) -> Self {
        Self::from_i64(0, prec)
    }

    fn one(prec: Precision) -> Self {
        Self::from_i64(1, prec)
    }

    /// `sum a_i b_i`.
    fn dot<'a, I>(prec: Precision, terms: I) -> Self
    where
        I: IntoIterator<Item = (&'a Self, &'a Self)>,
    {
        Self::dot_signed(prec, terms.into_iter().map(|(a, b)| (a, b, false)))
    }

    /// `sum +-a_i b_i`, subtracting the terms flagged `true`.
    fn dot_signed<'a, I>(prec: Precision, terms: I) -> Self
    where
        I: IntoIterator<Item = (&'a Self, &'a Self, bool)>,
    {
        let mut s = Self::zero(prec);
        for (a, b, negate) in terms {
            if negate {
                s -= *a * *b;
            } else {
                s += *a * *b;
            }
        }
        s
    }

    fn log10_abs(self) -> f64 {
        self.log2_abs() * std::f64::consts::LOG10_2
    }

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Real for ExtendedReal {
    fn from_i64(n: i64, prec: Precision) -> Self {
        ExtendedReal::from_i64(n, prec)
    }
    fn from_f64(x: f64, prec: Precision) -> Result<Self, ArithError> {
        ExtendedReal::from_f64(x, prec)
    }
    fn from_ratio(num: i64, den: i64, prec: Precision) -> Result<Self, ArithError> {
        ExtendedReal::from_ratio(num, den, prec)
    }
    fn parse(text: &str, prec: Precision) -> Result<Self, ArithError> {
        ExtendedReal::parse_decimal(text, prec)
    }
    fn pi(prec: Precision) -> Self {
        pi_bits(prec.bits())
    }
    fn ln2(prec: Precision) -> Self {
        ln2_bits(prec.bits())
    }
    fn precision(&self) -> Precision {
        ExtendedReal::precision(self)
    }
    fn is_zero(&self) -> bool {
        ExtendedReal::is_zero(self)
    }
    fn abs(self) -> Self {
        ExtendedReal::abs(self)
    }
    fn sqrt(self) -> Result<Self, ArithError> {
        self.checked_sqrt()
    }
    fn exp(self) -> Result<Self, ArithError> {
        self.checked_exp()
    }
    fn checked_div(self, rhs: Self) -> Result<Self, ArithError> {
        ExtendedReal::checked_div(self, rhs)
    }
    fn mul_pow2(self, k: i64) -> Result<Self, ArithError> {
        ExtendedReal::mul_pow2(self, k)
    }
    fn powi(self, n: u32) -> Result<Self, ArithError> {
        ExtendedReal::powi(self, n)
    }
    fn to_f64(self) -> f64 {
        ExtendedReal::to_f64(&self)
    }
    fn log2_abs(self) -> f64 {
        ExtendedReal::log2_abs(&self)
    }
    fn to_sci(self, digits: usize) -> String {
        self.to_sci_string(digits)
    }
    fn cache_key(&self) -> Vec<u64> {
        ExtendedReal::cache_key(self)
    }
    fn dot_signed<'a, I>(prec: Precision, terms: I) -> Self
    where
        I: IntoIterator<Item = (&'a Self, &'a Self, bool)>,
    {
        let mut acc = DotAccumulator::new(prec.bits());
        for (a, b, negate) in terms {
            acc.add_signed_product(a, b, negate);
        }
        acc.finish()
    }
}

fn finite(x: f64) -> Result<f64, ArithError> {
    if x.is_finite() {
        Ok(x)
    } else if x.is_nan() {
        Err(ArithError::NonFinite)
    } else {
        Err(ArithError::Overflow)
    }
}

impl Real for f64 {
    fn from_i64(n: i64, _: Precision) -> Self {
        n as f64
    }
    fn from_f64(x: f64, _: Precision) -> Result<Self, ArithError> {
        if x.is_finite() {
            Ok(x)
        } else {
            Err(ArithError::NonFinite)
        }
    }
    fn from_ratio(num: i64, den: i64, _: Precision) -> Result<Self, ArithError> {
        if den == 0 {
            return Err(ArithError::DivisionByZero);
        }
        Ok(num as f64 / den as f64)
    }
    fn parse(text: &str, _: Precision) -> Result<Self, ArithError> {
        // Share the grammar of the extended parser, then round once to f64.
        Ok(ExtendedReal::parse_decimal(text, Precision::DOUBLE)?.to_f64())
    }
    fn pi(_: Precision) -> Self {
        std::f64::consts::PI
    }
    fn ln2(_: Precision) -> Self {
        std::f64::consts::LN_2
    }
    fn precision(&self) -> Precision {
        Precision::DOUBLE
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sqrt(self) -> Result<Self, ArithError> {
        if self < 0.0 {
            Err(ArithError::NegativeSqrt)
        } else {
            Ok(f64::sqrt(self))
        }
    }
    fn exp(self) -> Result<Self, ArithError> {
        finite(f64::exp(self))
    }
    fn checked_div(self, rhs: Self) -> Result<Self, ArithError> {
        if rhs == 0.0 {
            Err(ArithError::DivisionByZero)
        } else {
            finite(self / rhs)
        }
    }
    fn mul_pow2(self, k: i64) -> Result<Self, ArithError> {
        finite(super::extended::ldexp(self, k))
    }
    fn powi(self, n: u32) -> Result<Self, ArithError> {
        finite(f64::powi(self, n as i32))
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn log2_abs(self) -> f64 {
        f64::abs(self).log2()
    }
    fn to_sci(self, digits: usize) -> String {
        match ExtendedReal::from_f64(self, Precision::new_unchecked(64)) {
            Ok(v) => v.to_sci_string(digits),
            Err(_) => format!("{self}"),
        }
    }
    fn cache_key(&self) -> Vec<u64> {
        vec![53, self.to_bits()]
    }
}
