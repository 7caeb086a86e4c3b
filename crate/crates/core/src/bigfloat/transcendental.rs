//! `exp`, and the constants ln 2 and pi, with a per-precision cache.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::{BigInt, BigUint, Sign};

use super::extended::{round_limbs, ExtendedReal, MAX_INTERNAL_BITS};
use super::ArithError;

const GUARD_BITS: u32 = 64;
const EXP_HALVINGS: i64 = 12;

#[derive(Clone, Copy)]
struct Constants {
    ln2: ExtendedReal,
    pi: ExtendedReal,
}

fn cache() -> &'static Mutex<HashMap<u32, Constants>> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Constants>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn constants(prec: u32) -> Constants {
    if let Some(c) = cache().lock().expect("constant cache poisoned").get(&prec) {
        return *c;
    }
    // Computed outside the lock; concurrent first use just duplicates work.
    let c = Constants { ln2: compute_ln2(prec), pi: compute_pi(prec) };
    *cache().lock().expect("constant cache poisoned").entry(prec).or_insert(c)
}

pub(crate) fn ln2_bits(prec: u32) -> ExtendedReal {
    constants(prec).ln2
}

pub(crate) fn pi_bits(prec: u32) -> ExtendedReal {
    constants(prec).pi
}

fn fixed_to_real(v: &BigUint, frac_bits: u32, prec: u32) -> ExtendedReal {
    round_limbs(false, &v.to_u64_digits(), -(frac_bits as i64), false, prec).expect("constant in range")
}

/// ln 2 = sum_{k>=1} 1 / (k 2^k), in fixed point with guard bits.
fn compute_ln2(prec: u32) -> ExtendedReal {
    let w = prec + 32;
    let one = BigUint::from(1u32) << w as usize;
    let mut sum = BigUint::from(0u32);
    for k in 1..=w {
        sum += (&one >> k as usize) / BigUint::from(k);
    }
    fixed_to_real(&sum, w, prec)
}

/// atan(1/x) * 2^w by its alternating Taylor series.
fn atan_inv(x: u32, w: u32) -> BigInt {
    let x2 = BigUint::from(x) * BigUint::from(x);
    let mut power = (BigUint::from(1u32) << w as usize) / BigUint::from(x);
    let mut sum = BigInt::from(0);
    let mut j: u32 = 0;
    while power.bits() > 0 {
        let term = BigInt::from_biguint(Sign::Plus, &power / BigUint::from(2 * j + 1));
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        power /= &x2;
        j += 1;
    }
    sum
}

/// Machin: pi = 16 atan(1/5) - 4 atan(1/239).
fn compute_pi(prec: u32) -> ExtendedReal {
    let w = prec + 32;
    let pi: BigInt = atan_inv(5, w) * 16 - atan_inv(239, w) * 4;
    let (_, mag) = pi.into_parts();
    fixed_to_real(&mag, w, prec)
}

impl ExtendedReal {
    /// `e^x` with relative error a few units in the last place.
    pub fn checked_exp(self) -> Result<Self, ArithError> {
        let prec = self.prec_bits();
        if self.is_zero() {
            return Ok(Self::from_u64_bits(false, 1, prec));
        }
        let approx = self.to_f64();
        if approx.abs() > 1e14 {
            return Err(if approx > 0.0 { ArithError::Overflow } else { ArithError::Underflow });
        }
        let w = (prec + GUARD_BITS).min(MAX_INTERNAL_BITS - 64);
        let m = (approx / std::f64::consts::LN_2).round() as i64;
        // x - m ln2 with enough bits of ln2 to absorb the size of m.
        let wide = w + 64;
        let ln2 = ln2_bits(wide);
        let r = self.round_to_bits(wide).checked_sub(ln2.checked_mul(Self::from_u64_bits(m < 0, m.unsigned_abs(), wide))?)?;
        let r = r.round_to_bits(w).mul_pow2(-EXP_HALVINGS)?;
        let mut sum = Self::from_u64_bits(false, 1, w);
        let mut term = sum;
        let cutoff = -(w as i64) - 4;
        for j in 1u64.. {
            term = term.checked_mul(r)?.checked_div(Self::from_u64_bits(false, j, w))?;
            sum = sum.checked_add(term)?;
            match term.binary_exponent() {
                Some(e) if e >= cutoff => {}
                _ => break,
            }
        }
        for _ in 0..EXP_HALVINGS {
            sum = sum.checked_mul(sum)?;
        }
        Ok(sum.mul_pow2(m)?.round_to_bits(prec))
    }
}

#[cfg(test)]
mod tests {
    use super::super::Precision;
    use super::*;

    #[test]
    fn constants_at_double_precision() {
        assert_eq!(ln2_bits(53).to_f64(), std::f64::consts::LN_2);
        assert_eq!(pi_bits(53).to_f64(), std::f64::consts::PI);
    }

    #[test]
    fn exp_at_double_precision() {
        let p = Precision::new(53).unwrap();
        for x in [1.0, -1.0, 0.5, 10.0, -30.0, 700.0] {
            let v = ExtendedReal::from_f64(x, p).unwrap().checked_exp().unwrap().to_f64();
            let rel = (v - x.exp()).abs() / x.exp();
            assert!(rel < 4e-16, "exp({x}) = {v}");
        }
    }

    #[test]
    fn exp_far_outside_f64_range() {
        let p = Precision::new(128).unwrap();
        let big = ExtendedReal::from_i64(100_000, p).checked_exp().unwrap();
        let expected_log2 = 100_000.0 / std::f64::consts::LN_2;
        assert!((big.log2_abs() - expected_log2).abs() < 1e-6);
        let small = ExtendedReal::from_i64(-100_000, p).checked_exp().unwrap();
        assert!((small.log2_abs() + expected_log2).abs() < 1e-6);
    }
}
