//! Fused dot products: exact limb products summed in a wide two's-complement
//! window, rounded once at the end.

use super::extended::{limb_count, round_limbs, ExtendedReal, MAX_LIMBS};
use super::limbs;

const HEADROOM_LIMBS: usize = 2;
const GUARD_LIMBS: usize = 1;
const ACC_LIMBS: usize = 2 * MAX_LIMBS + HEADROOM_LIMBS + GUARD_LIMBS;

/// Sums products whose magnitudes stay within roughly `2 * prec` bits of the
/// largest term; anything further below is truncated, an absolute error far
/// below one ulp of the largest product.
pub struct DotAccumulator {
    prec: u32,
    width: usize,
    acc: [u64; ACC_LIMBS],
    /// Exponent of bit 0 of `acc`; `None` until the first nonzero term.
    base: Option<i64>,
}

impl DotAccumulator {
    pub fn new(prec: u32) -> Self {
        let width = 2 * limb_count(prec) + HEADROOM_LIMBS + GUARD_LIMBS;
        DotAccumulator { prec, width, acc: [0; ACC_LIMBS], base: None }
    }

    #[inline]
    pub fn add_product(&mut self, a: &ExtendedReal, b: &ExtendedReal) {
        self.add_signed_product(a, b, false);
    }

    /// Adds `a * b`, or subtracts it when `negate` is set.
    #[inline]
    pub fn add_signed_product(&mut self, a: &ExtendedReal, b: &ExtendedReal, negate: bool) {
        if a.is_zero() || b.is_zero() {
            return;
        }
        let (ma, ea) = a.parts();
        let (mb, eb) = b.parts();
        let subtract = (a.is_negative() != b.is_negative()) != negate;
        if ma.len() == mb.len() {
            match ma.len() {
                1 => return self.accumulate::<1>(ma, mb, ea + eb, subtract),
                2 => return self.accumulate::<2>(ma, mb, ea + eb, subtract),
                3 => return self.accumulate::<3>(ma, mb, ea + eb, subtract),
                4 => return self.accumulate::<4>(ma, mb, ea + eb, subtract),
                5 => return self.accumulate::<5>(ma, mb, ea + eb, subtract),
                6 => return self.accumulate::<6>(ma, mb, ea + eb, subtract),
                8 => return self.accumulate::<8>(ma, mb, ea + eb, subtract),
                _ => {}
            }
        }
        let plen = ma.len() + mb.len();
        let mut prod = [0u64; 2 * MAX_LIMBS];
        limbs::mul(ma, mb, &mut prod);
        self.add_shifted(&prod[..plen], ea + eb, subtract);
    }

    #[inline]
    fn accumulate<const N: usize>(&mut self, ma: &[u64], mb: &[u64], pe: i64, subtract: bool) {
        let a: &[u64; N] = ma.try_into().expect("limb count");
        let b: &[u64; N] = mb.try_into().expect("limb count");
        let mut prod = [0u64; 2 * MAX_LIMBS];
        for i in 0..N {
            let mut carry: u128 = 0;
            for j in 0..N {
                let t = (a[i] as u128) * (b[j] as u128) + prod[i + j] as u128 + carry;
                prod[i + j] = t as u64;
                carry = t >> 64;
            }
            prod[i + N] = carry as u64;
        }
        self.add_shifted(&prod[..2 * N], pe, subtract);
    }

    #[inline]
    fn add_shifted(&mut self, prod: &[u64], pe: i64, subtract: bool) {
        let plen = prod.len();
        let w = self.width;
        let top_bits = (64 * (w - HEADROOM_LIMBS)) as i64;
        let base = match self.base {
            Some(base) => base,
            None => {
                let base = pe - 64 * GUARD_LIMBS as i64;
                self.base = Some(base);
                base
            }
        };
        // Products are normalised, so their bit length is within one of 64 * plen.
        let prod_top = pe + 64 * plen as i64;
        let base = if prod_top - base > top_bits {
            let delta = (prod_top - base - top_bits) as u64;
            self.rebase(delta);
            base + delta as i64
        } else {
            base
        };
        let offset = pe - base;
        let mut part = [0u64; 2 * MAX_LIMBS + 1];
        let (start, len) = if offset >= 0 {
            let q = (offset / 64) as usize;
            let r = (offset % 64) as u32;
            if r == 0 {
                part[..plen].copy_from_slice(prod);
            } else {
                let mut below = 0u64;
                for i in 0..plen {
                    part[i] = (prod[i] << r) | (below >> (64 - r));
                    below = prod[i];
                }
                part[plen] = below >> (64 - r);
            }
            (q, plen + 1)
        } else {
            let down = (-offset) as u64;
            if down >= 64 * plen as u64 {
                return;
            }
            limbs::shr(prod, down, &mut part[..plen]);
            (0, plen)
        };
        let len = len.min(w - start);
        if subtract {
            sub_at(&mut self.acc[..w], start, &part[..len]);
        } else {
            add_at(&mut self.acc[..w], start, &part[..len]);
        }
    }

    /// Arithmetic right shift of the window by `delta` bits.
    fn rebase(&mut self, delta: u64) {
        let w = self.width;
        let negative = self.acc[w - 1] >> 63 == 1;
        let mut out = [0u64; ACC_LIMBS];
        limbs::shr(&self.acc[..w], delta, &mut out[..w]);
        if negative {
            // Refill the vacated top bits with ones.
            let total = 64 * w as u64;
            let keep = total.saturating_sub(delta);
            for bit in keep..total {
                out[(bit / 64) as usize] |= 1 << (bit % 64);
            }
        }
        self.acc = out;
        self.base = self.base.map(|b| b + delta as i64);
    }

    pub fn finish(self) -> ExtendedReal {
        let Some(base) = self.base else {
            return ExtendedReal::zero_bits(self.prec);
        };
        let w = self.width;
        let mut mag = self.acc;
        let negative = mag[w - 1] >> 63 == 1;
        if negative {
            for limb in mag[..w].iter_mut() {
                *limb = !*limb;
            }
            limbs::increment(&mut mag[..w]);
        }
        round_limbs(negative, &mag[..w], base, false, self.prec).expect("dot product out of exponent range")
    }
}

#[inline]
fn add_at(acc: &mut [u64], start: usize, part: &[u64]) {
    let mut carry = false;
    for (x, &y) in acc[start..].iter_mut().zip(part) {
        let (s1, c1) = x.overflowing_add(y);
        let (s2, c2) = s1.overflowing_add(carry as u64);
        *x = s2;
        carry = c1 || c2;
    }
    let mut i = start + part.len();
    while carry && i < acc.len() {
        let (s, c) = acc[i].overflowing_add(1);
        acc[i] = s;
        carry = c;
        i += 1;
    }
}

#[inline]
fn sub_at(acc: &mut [u64], start: usize, part: &[u64]) {
    let mut borrow = false;
    for (x, &y) in acc[start..].iter_mut().zip(part) {
        let (d1, b1) = x.overflowing_sub(y);
        let (d2, b2) = d1.overflowing_sub(borrow as u64);
        *x = d2;
        borrow = b1 || b2;
    }
    let mut i = start + part.len();
    while borrow && i < acc.len() {
        let (d, b) = acc[i].overflowing_sub(1);
        acc[i] = d;
        borrow = b;
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::super::Precision;
    use super::*;

    fn naive(a: &[ExtendedReal], b: &[ExtendedReal]) -> ExtendedReal {
        let mut s = ExtendedReal::zero(a[0].precision());
        for (x, y) in a.iter().zip(b) {
            s = s + *x * *y;
        }
        s
    }

    #[test]
    fn matches_naive_sum_with_mixed_signs_and_scales() {
        let p = Precision::new(256).unwrap();
        let a: Vec<_> = (0..40)
            .map(|i| ExtendedReal::from_ratio(i * 7 - 100, 13 + i, p).unwrap().mul_pow2((i % 9 - 4) * 20).unwrap())
            .collect();
        let b: Vec<_> = (0..40).map(|i| ExtendedReal::from_ratio(3 - i, 7, p).unwrap()).collect();
        let mut acc = DotAccumulator::new(256);
        for (x, y) in a.iter().zip(&b) {
            acc.add_product(x, y);
        }
        let fused = acc.finish();
        let plain = naive(&a, &b);
        let rel = ((fused - plain) / plain).abs();
        assert!(rel.log2_abs() < -240.0, "{rel:?}");
    }

    #[test]
    fn exact_cancellation_gives_zero() {
        let p = Precision::new(128).unwrap();
        let x = ExtendedReal::from_ratio(1, 3, p).unwrap();
        let mut acc = DotAccumulator::new(128);
        acc.add_product(&x, &x);
        acc.add_product(&-x, &x);
        assert!(acc.finish().is_zero());
    }

    #[test]
    fn growing_terms_trigger_rebase() {
        let p = Precision::new(64).unwrap();
        let mut acc = DotAccumulator::new(64);
        let one = ExtendedReal::one(p);
        let tiny = one.mul_pow2(-100).unwrap();
        let huge = one.mul_pow2(400).unwrap();
        acc.add_product(&tiny, &one);
        acc.add_product(&-huge, &one);
        acc.add_product(&one, &one);
        let got = acc.finish();
        assert_eq!(got, -huge);
    }
}
