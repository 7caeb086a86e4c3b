//! Decimal scientific-notation conversion.

use num_bigint::BigUint;
use num_integer::Integer;

use super::extended::{from_biguint_ratio, round_limbs, to_biguint, ExtendedReal};
use super::{ArithError, Precision};

/// Significant decimal digits that identify a `bits`-bit value uniquely.
pub fn digits_for_bits(bits: u32) -> usize {
    (bits as f64 * std::f64::consts::LOG10_2).ceil() as usize + 1
}

fn pow10(k: u32) -> BigUint {
    BigUint::from(10u32).pow(k)
}

impl ExtendedReal {
    /// Formats as `[-]d.ddd...E[+-]xx` with `digits` significant digits,
    /// rounding half to even.
    pub fn to_sci_string(&self, digits: usize) -> String {
        let digits = digits.max(1);
        if self.is_zero() {
            let frac = if digits > 1 { format!(".{}", "0".repeat(digits - 1)) } else { String::new() };
            return format!("0{frac}E+00");
        }
        let (m, e) = self.parts();
        let mant = to_biguint(m);
        let mut exp10 = (self.log2_abs() * std::f64::consts::LOG10_2).floor() as i64;
        let lower = pow10(digits as u32 - 1);
        let upper = pow10(digits as u32);
        let scaled = loop {
            // |x| * 10^(digits - 1 - exp10) as a ratio num / den.
            let q = digits as i64 - 1 - exp10;
            let mut num = mant.clone();
            let mut den = BigUint::from(1u32);
            if e >= 0 {
                num <<= e as usize;
            } else {
                den <<= (-e) as usize;
            }
            if q >= 0 {
                num *= pow10(q as u32);
            } else {
                den *= pow10((-q) as u32);
            }
            let (quot, rem) = num.div_rem(&den);
            let twice = rem << 1;
            let rounded = if twice > den || (twice == den && quot.is_odd()) { quot + 1u32 } else { quot };
            if rounded >= upper {
                exp10 += 1;
            } else if rounded < lower {
                exp10 -= 1;
            } else {
                break rounded;
            }
        };
        let text = scaled.to_string();
        let sign = if self.is_negative() { "-" } else { "" };
        let (lead, rest) = text.split_at(1);
        let frac = if rest.is_empty() { String::new() } else { format!(".{rest}") };
        let esign = if exp10 < 0 { '-' } else { '+' };
        format!("{sign}{lead}{frac}E{esign}{:02}", exp10.abs())
    }

    /// Parses `[+-]digits[.digits][(e|E)[+-]digits]`, correctly rounded.
    pub fn parse_decimal(text: &str, prec: Precision) -> Result<Self, ArithError> {
        let bad = || ArithError::Parse(text.to_string());
        let s = text.trim();
        let (neg, body) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let (mantissa, exponent) = match body.find(['e', 'E']) {
            Some(i) => (&body[..i], Some(&body[i + 1..])),
            None => (body, None),
        };
        let (int_part, frac_part) = match mantissa.find('.') {
            Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
            None => (mantissa, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let mut exp10: i64 = match exponent {
            Some(x) => x.parse().map_err(|_| bad())?,
            None => 0,
        };
        if exp10.abs() > 1_000_000 {
            return Err(if exp10 > 0 { ArithError::Overflow } else { ArithError::Underflow });
        }
        exp10 -= frac_part.len() as i64;
        let all_digits = format!("{int_part}{frac_part}");
        let value = BigUint::parse_bytes(all_digits.as_bytes(), 10).ok_or_else(bad)?;
        if value.bits() == 0 {
            return Ok(ExtendedReal::zero(prec));
        }
        if exp10 >= 0 {
            let n = value * pow10(exp10 as u32);
            round_limbs(neg, &n.to_u64_digits(), 0, false, prec.bits())
        } else {
            from_biguint_ratio(neg, &value, &pow10((-exp10) as u32), 0, prec.bits())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(bits: u32) -> Precision {
        Precision::new(bits).unwrap()
    }

    #[test]
    fn formats_simple_values() {
        let x = ExtendedReal::parse_decimal("5.21e-8", p(128)).unwrap();
        assert_eq!(x.to_sci_string(3), "5.21E-08");
        let y = ExtendedReal::from_i64(-1234, p(64));
        assert_eq!(y.to_sci_string(2), "-1.2E+03");
        assert_eq!(ExtendedReal::from_i64(9999, p(64)).to_sci_string(2), "1.0E+04");
        assert_eq!(ExtendedReal::zero(p(64)).to_sci_string(3), "0.00E+00");
    }

    #[test]
    fn parse_rejects_garbage() {
        for s in ["", ".", "1.2.3", "abc", "1e", "--1", "nan", "inf"] {
            assert!(ExtendedReal::parse_decimal(s, p(64)).is_err(), "{s}");
        }
    }

    #[test]
    fn parse_matches_f64_at_double_precision() {
        for s in ["0.1", "3.14159", "-2.5e-10", "6.02214076e23", "1e-300"] {
            let v = ExtendedReal::parse_decimal(s, p(53)).unwrap();
            assert_eq!(v.to_f64(), s.parse::<f64>().unwrap(), "{s}");
        }
    }
}
