//! Little-endian u64 limb arithmetic on slices.

use std::cmp::Ordering;

pub(crate) fn bit_len(x: &[u64]) -> u64 {
    for i in (0..x.len()).rev() {
        if x[i] != 0 {
            return 64 * i as u64 + (64 - x[i].leading_zeros() as u64);
        }
    }
    0
}

pub(crate) fn bit(x: &[u64], i: u64) -> bool {
    let limb = (i / 64) as usize;
    limb < x.len() && (x[limb] >> (i % 64)) & 1 == 1
}

/// True when any bit strictly below position `i` is set.
pub(crate) fn any_below(x: &[u64], i: u64) -> bool {
    let limb = (i / 64) as usize;
    let r = i % 64;
    let full = limb.min(x.len());
    if x[..full].iter().any(|&w| w != 0) {
        return true;
    }
    r > 0 && limb < x.len() && x[limb] & ((1u64 << r) - 1) != 0
}

/// `dst = src >> d`, truncated to `dst.len()` limbs. Returns whether any
/// shifted-out bit was set.
pub(crate) fn shr(src: &[u64], d: u64, dst: &mut [u64]) -> bool {
    let q = (d / 64) as usize;
    let r = (d % 64) as u32;
    for (i, out) in dst.iter_mut().enumerate() {
        let j = i + q;
        let lo = if j < src.len() { src[j] } else { 0 };
        *out = if r == 0 {
            lo
        } else {
            let hi = if j + 1 < src.len() { src[j + 1] } else { 0 };
            (lo >> r) | (hi << (64 - r))
        };
    }
    any_below(src, d)
}

/// `dst = src << d`, truncated to `dst.len()` limbs.
pub(crate) fn shl(src: &[u64], d: u64, dst: &mut [u64]) {
    let q = (d / 64) as usize;
    let r = (d % 64) as u32;
    for (i, out) in dst.iter_mut().enumerate() {
        if i < q {
            *out = 0;
            continue;
        }
        let j = i - q;
        let lo = if j < src.len() { src[j] } else { 0 };
        *out = if r == 0 {
            lo
        } else {
            let below = if j >= 1 && j - 1 < src.len() { src[j - 1] } else { 0 };
            (lo << r) | (below >> (64 - r))
        };
    }
}

pub(crate) fn add_assign(a: &mut [u64], b: &[u64]) -> bool {
    let mut carry = false;
    for i in 0..a.len() {
        let bi = if i < b.len() { b[i] } else { 0 };
        let (s1, c1) = a[i].overflowing_add(bi);
        let (s2, c2) = s1.overflowing_add(carry as u64);
        a[i] = s2;
        carry = c1 || c2;
    }
    carry
}

/// `a -= b`; requires `a >= b`.
pub(crate) fn sub_assign(a: &mut [u64], b: &[u64]) {
    let mut borrow = false;
    for i in 0..a.len() {
        let bi = if i < b.len() { b[i] } else { 0 };
        let (d1, b1) = a[i].overflowing_sub(bi);
        let (d2, b2) = d1.overflowing_sub(borrow as u64);
        a[i] = d2;
        borrow = b1 || b2;
    }
    debug_assert!(!borrow);
}

pub(crate) fn increment(a: &mut [u64]) -> bool {
    for w in a.iter_mut() {
        let (s, c) = w.overflowing_add(1);
        *w = s;
        if !c {
            return false;
        }
    }
    true
}

pub(crate) fn decrement(a: &mut [u64]) {
    for w in a.iter_mut() {
        let (s, b) = w.overflowing_sub(1);
        *w = s;
        if !b {
            return;
        }
    }
}

pub(crate) fn cmp(a: &[u64], b: &[u64]) -> Ordering {
    debug_assert_eq!(a.len(), b.len());
    for i in (0..a.len()).rev() {
        match a[i].cmp(&b[i]) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Schoolbook product; `out.len() >= a.len() + b.len()`.
pub(crate) fn mul(a: &[u64], b: &[u64], out: &mut [u64]) {
    for w in out[..a.len() + b.len()].iter_mut() {
        *w = 0;
    }
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        let mut carry: u128 = 0;
        for (j, &bj) in b.iter().enumerate() {
            let t = (ai as u128) * (bj as u128) + out[i + j] as u128 + carry;
            out[i + j] = t as u64;
            carry = t >> 64;
        }
        out[i + b.len()] = carry as u64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifts_round_trip() {
        let src = [0x0123_4567_89ab_cdef, 0xfedc_ba98_7654_3210, 0x1];
        for d in [0u64, 1, 13, 63, 64, 65, 100] {
            let mut wide = [0u64; 6];
            shl(&src, d, &mut wide);
            let mut back = [0u64; 3];
            let sticky = shr(&wide, d, &mut back);
            assert_eq!(back, src, "shift {d}");
            assert!(!sticky);
        }
    }

    #[test]
    fn shr_reports_lost_bits() {
        let mut out = [0u64; 1];
        assert!(shr(&[0b101], 1, &mut out));
        assert_eq!(out[0], 0b10);
        assert!(!shr(&[0b100], 2, &mut out));
        assert!(shr(&[1, 0, 1], 128, &mut out));
    }

    #[test]
    fn bit_length() {
        assert_eq!(bit_len(&[0, 0]), 0);
        assert_eq!(bit_len(&[1, 0]), 1);
        assert_eq!(bit_len(&[0, 1 << 63]), 128);
    }

    #[test]
    fn product_matches_u128() {
        let a = [u64::MAX];
        let b = [u64::MAX - 7];
        let mut out = [0u64; 2];
        mul(&a, &b, &mut out);
        let expect = (u64::MAX as u128) * ((u64::MAX - 7) as u128);
        assert_eq!(out[0], expect as u64);
        assert_eq!(out[1], (expect >> 64) as u64);
    }
}
