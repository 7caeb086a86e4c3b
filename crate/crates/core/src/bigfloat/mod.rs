//! Configurable-precision binary floating point and the scalar interface
//! shared with native `f64`.

mod accumulate;
mod complex;
mod decimal;
mod extended;
mod limbs;
mod real;
mod transcendental;

pub use accumulate::DotAccumulator;
pub use complex::Cplx;
pub use decimal::digits_for_bits;
pub use extended::ExtendedReal;
pub use real::Real;

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArithError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative number")]
    NegativeSqrt,
    #[error("exponent overflow")]
    Overflow,
    #[error("exponent underflow")]
    Underflow,
    #[error("non-finite input")]
    NonFinite,
    #[error("cannot parse {0:?} as a decimal number")]
    Parse(String),
    #[error("precision {0} outside the supported range {min}..={max} bits", min = Precision::MIN_BITS, max = Precision::MAX_BITS)]
    Precision(u32),
}

/// Working precision in bits. Native `f64` arithmetic reports 53.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Precision(u32);

impl Precision {
    pub const MIN_BITS: u32 = 8;
    pub const MAX_BITS: u32 = 512;
    pub const DOUBLE: Precision = Precision(53);
    pub const DEFAULT: Precision = Precision(256);

    pub fn new(bits: u32) -> Result<Self, ArithError> {
        if (Self::MIN_BITS..=Self::MAX_BITS).contains(&bits) {
            Ok(Precision(bits))
        } else {
            Err(ArithError::Precision(bits))
        }
    }

    pub(crate) fn new_unchecked(bits: u32) -> Self {
        Precision(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Unit roundoff `2^-p` as a decimal exponent, `-p log10 2`.
    pub fn decimal_digits(self) -> f64 {
        self.0 as f64 * std::f64::consts::LOG10_2
    }
}

impl Default for Precision {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} bits", self.0)
    }
}
