use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigUint;

use super::limbs;
use super::{ArithError, Precision};

/// Limb capacity: public precisions go up to 512 bits, the extra room is
/// used for guard bits inside transcendental evaluations.
pub(crate) const MAX_LIMBS: usize = 10;
pub(crate) const MAX_INTERNAL_BITS: u32 = 64 * MAX_LIMBS as u32;

/// Largest binary exponent (of the leading bit) before reporting overflow.
const EXP_LIMIT: i64 = 1 << 48;

/// Binary floating-point number with a runtime precision of `prec` bits.
///
/// The value is `(-1)^neg * mant * 2^exp`, where `mant` occupies the low
/// `limbs(prec)` entries of the array with its top bit set and every bit
/// below the `prec` most significant ones cleared. Zero is stored with an
/// all-zero mantissa.
#[derive(Clone, Copy)]
pub struct ExtendedReal {
    neg: bool,
    prec: u32,
    exp: i64,
    mant: [u64; MAX_LIMBS],
}

#[inline]
pub(crate) fn limb_count(prec: u32) -> usize {
    prec.div_ceil(64) as usize
}

impl ExtendedReal {
    pub fn zero(prec: Precision) -> Self {
        Self::zero_bits(prec.bits())
    }

    pub(crate) fn zero_bits(prec: u32) -> Self {
        ExtendedReal { neg: false, prec, exp: 0, mant: [0; MAX_LIMBS] }
    }

    pub fn one(prec: Precision) -> Self {
        Self::from_u64_bits(false, 1, prec.bits())
    }

    pub fn from_i64(n: i64, prec: Precision) -> Self {
        Self::from_u64_bits(n < 0, n.unsigned_abs(), prec.bits())
    }

    pub(crate) fn from_u64_bits(neg: bool, v: u64, prec: u32) -> Self {
        round_limbs(neg, &[v], 0, false, prec).expect("u64 is always in range")
    }

    pub fn from_f64(x: f64, prec: Precision) -> Result<Self, ArithError> {
        if !x.is_finite() {
            return Err(ArithError::NonFinite);
        }
        if x == 0.0 {
            return Ok(Self::zero(prec));
        }
        let bits = x.to_bits();
        let neg = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if biased == 0 { (frac, -1074) } else { (frac | (1u64 << 52), biased - 1075) };
        round_limbs(neg, &[m], e, false, prec.bits())
    }

    /// Correctly rounded `num / den`.
    pub fn from_ratio(num: i64, den: i64, prec: Precision) -> Result<Self, ArithError> {
        if den == 0 {
            return Err(ArithError::DivisionByZero);
        }
        let neg = (num < 0) != (den < 0);
        from_biguint_ratio(
            neg,
            &BigUint::from(num.unsigned_abs()),
            &BigUint::from(den.unsigned_abs()),
            0,
            prec.bits(),
        )
    }

    pub fn precision(&self) -> Precision {
        Precision::new_unchecked(self.prec)
    }

    pub(crate) fn prec_bits(&self) -> u32 {
        self.prec
    }

    #[inline]
    fn n(&self) -> usize {
        limb_count(self.prec)
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.mant[self.n() - 1] == 0
    }

    pub fn is_negative(&self) -> bool {
        self.neg
    }

    pub fn abs(self) -> Self {
        ExtendedReal { neg: false, ..self }
    }

    /// Mantissa limbs (little-endian) and the exponent of their lowest bit.
    pub(crate) fn parts(&self) -> (&[u64], i64) {
        (&self.mant[..self.n()], self.exp)
    }

    /// Exponent `e` with `2^e <= |x| < 2^(e+1)`; `None` for zero.
    pub fn binary_exponent(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.exp + 64 * self.n() as i64 - 1)
        }
    }

    /// Exact multiplication by `2^k`.
    pub fn mul_pow2(self, k: i64) -> Result<Self, ArithError> {
        if self.is_zero() {
            return Ok(self);
        }
        let out = ExtendedReal { exp: self.exp + k, ..self };
        out.check_range()
    }

    fn check_range(self) -> Result<Self, ArithError> {
        match self.binary_exponent() {
            Some(e) if e > EXP_LIMIT => Err(ArithError::Overflow),
            Some(e) if e < -EXP_LIMIT => Err(ArithError::Underflow),
            _ => Ok(self),
        }
    }

    /// Re-rounds to another precision.
    pub fn with_precision(self, prec: Precision) -> Self {
        self.round_to_bits(prec.bits())
    }

    pub(crate) fn round_to_bits(self, prec: u32) -> Self {
        if self.is_zero() {
            return Self::zero_bits(prec);
        }
        let (m, e) = self.parts();
        round_limbs(self.neg, m, e, false, prec).expect("re-rounding keeps the exponent in range")
    }

    /// Mantissa widened to `n` limbs, with the matching exponent.
    fn widened(&self, n: usize) -> ([u64; MAX_LIMBS], i64) {
        let own = self.n();
        if own == n {
            return (self.mant, self.exp);
        }
        let mut out = [0u64; MAX_LIMBS];
        out[n - own..n].copy_from_slice(&self.mant[..own]);
        (out, self.exp - 64 * (n - own) as i64)
    }

    fn cmp_abs(&self, other: &Self) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        let n = self.n().max(other.n());
        let (ma, ea) = self.widened(n);
        let (mb, eb) = other.widened(n);
        ea.cmp(&eb).then_with(|| limbs::cmp(&ma[..n], &mb[..n]))
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self, ArithError> {
        add_signed(self, rhs, false)
    }

    pub fn checked_sub(self, rhs: Self) -> Result<Self, ArithError> {
        add_signed(self, rhs, true)
    }

    pub fn checked_mul(self, rhs: Self) -> Result<Self, ArithError> {
        let prec = self.prec.max(rhs.prec);
        if self.is_zero() || rhs.is_zero() {
            return Ok(Self::zero_bits(prec));
        }
        let (a, ea) = self.parts();
        let (b, eb) = rhs.parts();
        let mut out = [0u64; 2 * MAX_LIMBS];
        limbs::mul(a, b, &mut out);
        round_limbs(self.neg != rhs.neg, &out[..a.len() + b.len()], ea + eb, false, prec)
    }

    pub fn checked_div(self, rhs: Self) -> Result<Self, ArithError> {
        let prec = self.prec.max(rhs.prec);
        if rhs.is_zero() {
            return Err(ArithError::DivisionByZero);
        }
        if self.is_zero() {
            return Ok(Self::zero_bits(prec));
        }
        let (a, ea) = self.parts();
        let (b, eb) = rhs.parts();
        from_biguint_ratio(self.neg != rhs.neg, &to_biguint(a), &to_biguint(b), ea - eb, prec)
    }

    pub fn checked_sqrt(self) -> Result<Self, ArithError> {
        if self.is_zero() {
            return Ok(self);
        }
        if self.neg {
            return Err(ArithError::NegativeSqrt);
        }
        let prec = self.prec;
        let (m, e) = self.parts();
        let bits = 64 * m.len() as i64;
        // Enough bits that the integer root carries prec + 2 significant bits.
        let mut shift = (2 * (prec as i64 + 2) - bits).max(0);
        if (e - shift) % 2 != 0 {
            shift += 1;
        }
        let radicand = to_biguint(m) << shift as usize;
        let root = radicand.sqrt();
        let sticky = &root * &root != radicand;
        round_limbs(false, &root.to_u64_digits(), (e - shift) / 2, sticky, prec)
    }

    pub fn powi(self, mut n: u32) -> Result<Self, ArithError> {
        let mut base = self;
        let mut acc = Self::from_u64_bits(false, 1, self.prec);
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.checked_mul(base)?;
            }
            n >>= 1;
            if n > 0 {
                base = base.checked_mul(base)?;
            }
        }
        Ok(acc)
    }

    /// Nearest `f64` (flushes to zero or infinity outside its range).
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let n = self.n();
        let hi = self.mant[n - 1] as u128;
        let lo = if n >= 2 { self.mant[n - 2] as u128 } else { 0 };
        let top = ((hi << 64) | lo) as f64;
        let v = ldexp(top, self.exp + 64 * (n as i64 - 2));
        if self.neg {
            -v
        } else {
            v
        }
    }

    /// `log2 |x|` as an `f64`, valid far outside the `f64` exponent range.
    pub fn log2_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let n = self.n();
        let hi = self.mant[n - 1] as f64;
        hi.log2() + (self.exp + 64 * (n as i64 - 1)) as f64
    }

    /// Exact decomposition `(negative, mantissa limbs little-endian, exponent)`
    /// with `|x| = mantissa * 2^exponent`.
    pub fn to_parts(&self) -> (bool, Vec<u64>, i64) {
        let (m, e) = self.parts();
        (self.neg, m.to_vec(), e)
    }

    /// Bitwise identity used for memoisation.
    pub fn cache_key(&self) -> Vec<u64> {
        let mut key = vec![self.prec as u64, self.neg as u64, self.exp as u64];
        key.extend_from_slice(&self.mant[..self.n()]);
        key
    }
}

pub(crate) fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

pub(crate) fn to_biguint(m: &[u64]) -> BigUint {
    let mut digits = Vec::with_capacity(2 * m.len());
    for &w in m {
        digits.push(w as u32);
        digits.push((w >> 32) as u32);
    }
    BigUint::new(digits)
}

/// Rounds `(-1)^neg * (num / den) * 2^exp` to `prec` bits.
pub(crate) fn from_biguint_ratio(
    neg: bool,
    num: &BigUint,
    den: &BigUint,
    exp: i64,
    prec: u32,
) -> Result<ExtendedReal, ArithError> {
    if num.bits() == 0 {
        return Ok(ExtendedReal::zero_bits(prec));
    }
    let shift = (prec as i64 + 3 + den.bits() as i64 - num.bits() as i64).max(0);
    let scaled = num << shift as usize;
    let q = &scaled / den;
    let sticky = &q * den != scaled;
    round_limbs(neg, &q.to_u64_digits(), exp - shift, sticky, prec)
}

/// Round-to-nearest-even of `(-1)^neg * (src + delta) * 2^lsb_exp` to `prec`
/// bits, where `delta` lies strictly between 0 and 1 when `sticky` is set
/// and is zero otherwise. Callers supply at least two bits below the
/// rounding position whenever `sticky` is set.
pub(crate) fn round_limbs(
    neg: bool,
    src: &[u64],
    lsb_exp: i64,
    sticky: bool,
    prec: u32,
) -> Result<ExtendedReal, ArithError> {
    debug_assert!(prec >= 2 && prec <= MAX_INTERNAL_BITS);
    let len = limbs::bit_len(src);
    if len == 0 {
        return Ok(ExtendedReal::zero_bits(prec));
    }
    let n = limb_count(prec);
    let width = 64 * n as u64;
    let mut mant = [0u64; MAX_LIMBS];
    let exp;
    if len <= prec as u64 {
        debug_assert!(!sticky);
        let shift = width - len;
        limbs::shl(src, shift, &mut mant[..n]);
        exp = lsb_exp - shift as i64;
    } else {
        let drop = len - prec as u64;
        let round = limbs::bit(src, drop - 1);
        let rest = sticky || limbs::any_below(src, drop - 1);
        let mut kept = [0u64; MAX_LIMBS];
        limbs::shr(src, drop, &mut kept[..n]);
        let mut e = lsb_exp + drop as i64;
        if round && (rest || kept[0] & 1 == 1) {
            let carry = limbs::increment(&mut kept[..n]);
            if carry || limbs::bit_len(&kept[..n]) > prec as u64 {
                kept = [0; MAX_LIMBS];
                let top = prec as u64 - 1;
                kept[(top / 64) as usize] = 1 << (top % 64);
                e += 1;
            }
        }
        let pad = width - prec as u64;
        limbs::shl(&kept[..n], pad, &mut mant[..n]);
        exp = e - pad as i64;
    }
    ExtendedReal { neg, prec, exp, mant }.check_range()
}

fn add_signed(a: ExtendedReal, b: ExtendedReal, negate_b: bool) -> Result<ExtendedReal, ArithError> {
    let prec = a.prec.max(b.prec);
    let b_neg = b.neg != negate_b;
    if b.is_zero() {
        return Ok(a.round_to_bits(prec));
    }
    if a.is_zero() {
        let out = b.round_to_bits(prec);
        return Ok(ExtendedReal { neg: b_neg && !out.is_zero(), ..out });
    }
    let n = limb_count(prec);
    let (mut xm, mut xe) = a.widened(n);
    let (mut ym, mut ye) = b.widened(n);
    let (mut x_neg, mut y_neg) = (a.neg, b_neg);
    let order = xe.cmp(&ye).then_with(|| limbs::cmp(&xm[..n], &ym[..n]));
    if order == Ordering::Less {
        std::mem::swap(&mut xm, &mut ym);
        std::mem::swap(&mut xe, &mut ye);
        std::mem::swap(&mut x_neg, &mut y_neg);
    }
    let width = 64 * n as u64;
    let d = (xe - ye) as u64;
    if d > width + 130 {
        // The smaller operand sits entirely below half an ulp of the larger.
        return round_limbs(x_neg, &xm[..n], xe, false, prec);
    }
    const W: usize = MAX_LIMBS + 3;
    let len = n + 3;
    let mut xb = [0u64; W];
    xb[2..2 + n].copy_from_slice(&xm[..n]);
    let mut yb_full = [0u64; W];
    yb_full[2..2 + n].copy_from_slice(&ym[..n]);
    let mut yb = [0u64; W];
    let sticky = limbs::shr(&yb_full[..len], d, &mut yb[..len]);
    if x_neg == y_neg {
        limbs::add_assign(&mut xb[..len], &yb[..len]);
    } else {
        limbs::sub_assign(&mut xb[..len], &yb[..len]);
        if sticky {
            limbs::decrement(&mut xb[..len]);
        }
    }
    round_limbs(x_neg, &xb[..len], xe - 128, sticky, prec)
}

impl PartialEq for ExtendedReal {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let sa = if self.is_zero() { 0 } else if self.neg { -1 } else { 1 };
        let sb = if other.is_zero() { 0 } else if other.neg { -1 } else { 1 };
        if sa != sb || sa == 0 {
            return Some(sa.cmp(&sb));
        }
        let mag = self.cmp_abs(other);
        Some(if sa > 0 { mag } else { mag.reverse() })
    }
}

impl Neg for ExtendedReal {
    type Output = Self;
    fn neg(self) -> Self {
        if self.is_zero() {
            self
        } else {
            ExtendedReal { neg: !self.neg, ..self }
        }
    }
}

macro_rules! panicking_op {
    ($tr:ident, $method:ident, $checked:ident, $atr:ident, $amethod:ident) => {
        impl $tr for ExtendedReal {
            type Output = Self;
            #[inline]
            fn $method(self, rhs: Self) -> Self {
                match self.$checked(rhs) {
                    Ok(v) => v,
                    Err(e) => panic!("extended-precision {}: {e}", stringify!($method)),
                }
            }
        }
        impl $atr for ExtendedReal {
            #[inline]
            fn $amethod(&mut self, rhs: Self) {
                *self = $tr::$method(*self, rhs);
            }
        }
    };
}

panicking_op!(Add, add, checked_add, AddAssign, add_assign);
panicking_op!(Sub, sub, checked_sub, SubAssign, sub_assign);
panicking_op!(Mul, mul, checked_mul, MulAssign, mul_assign);
panicking_op!(Div, div, checked_div, DivAssign, div_assign);

impl fmt::Debug for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = super::decimal::digits_for_bits(self.prec);
        write!(f, "{}", self.to_sci_string(digits))
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or_else(|| super::decimal::digits_for_bits(self.prec));
        write!(f, "{}", self.to_sci_string(digits.max(1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(bits: u32) -> Precision {
        Precision::new(bits).unwrap()
    }

    #[test]
    fn small_integers_are_exact() {
        let a = ExtendedReal::from_i64(3, p(64));
        let b = ExtendedReal::from_i64(-5, p(64));
        assert_eq!((a + b).to_f64(), -2.0);
        assert_eq!((a * b).to_f64(), -15.0);
        assert_eq!((a - a).to_f64(), 0.0);
        assert!((a - a).is_zero());
    }

    #[test]
    fn f64_round_trip() {
        for x in [1.0, -0.1, 3.5e-300, 1.7e300, 5e-324, 123456.789] {
            let v = ExtendedReal::from_f64(x, p(128)).unwrap();
            assert_eq!(v.to_f64(), x);
        }
    }

    #[test]
    fn rounding_ties_to_even() {
        // 2^53 + 1 is a tie at 53 bits and must round down to the even neighbour.
        let v = ExtendedReal::from_i64((1 << 53) + 1, p(53));
        assert_eq!(v.to_f64(), (1u64 << 53) as f64);
        let w = ExtendedReal::from_i64((1 << 53) + 3, p(53));
        assert_eq!(w.to_f64(), ((1u64 << 53) + 4) as f64);
    }

    #[test]
    fn subtraction_with_cancellation() {
        let one = ExtendedReal::one(p(256));
        let tiny = one.mul_pow2(-200).unwrap();
        let x = one + tiny;
        assert_eq!((x - one), tiny);
    }

    #[test]
    fn division_and_sqrt() {
        let two = ExtendedReal::from_i64(2, p(53));
        assert_eq!(two.checked_sqrt().unwrap().to_f64(), 2f64.sqrt());
        let third = ExtendedReal::from_ratio(1, 3, p(53)).unwrap();
        assert_eq!(third.to_f64(), 1.0 / 3.0);
        assert_eq!(two.checked_div(ExtendedReal::zero(p(53))), Err(ArithError::DivisionByZero));
        assert_eq!((-two).checked_sqrt(), Err(ArithError::NegativeSqrt));
    }

    #[test]
    fn overflow_is_reported() {
        let one = ExtendedReal::one(p(64));
        assert_eq!(one.mul_pow2(EXP_LIMIT + 5), Err(ArithError::Overflow));
        assert_eq!(one.mul_pow2(-EXP_LIMIT - 5), Err(ArithError::Underflow));
    }

    #[test]
    fn mixed_precision_uses_the_larger() {
        let a = ExtendedReal::from_ratio(1, 3, p(64)).unwrap();
        let b = ExtendedReal::from_ratio(1, 3, p(256)).unwrap();
        assert_eq!((a + b).precision().bits(), 256);
    }
}
