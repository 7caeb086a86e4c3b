//! Moment-system bookkeeping: model configuration, per-wavenumber generators
//! and the Legendre-Fourier state.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_integer::Integer;

use crate::bigfloat::{digits_for_bits, Cplx, Precision, Real};
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Exact positive-or-zero rational, used for the scaling parameter and times
/// so that cache keys and frequency thresholds are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i64,
    den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Parse("zero denominator".into()));
        }
        let g = num.gcd(&den);
        let sign = if den < 0 { -1 } else { 1 };
        Ok(Rational { num: sign * num / g.max(1), den: sign * den / g.max(1) })
    }

    pub fn integer(n: i64) -> Self {
        Rational { num: n, den: 1 }
    }

    pub fn num(self) -> i64 {
        self.num
    }

    pub fn den(self) -> i64 {
        self.den
    }

    pub fn is_positive(self) -> bool {
        self.num > 0
    }

    pub fn to_real<R: Real>(self, prec: Precision) -> R {
        R::from_ratio(self.num, self.den, prec).expect("nonzero denominator")
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn checked_mul(self, other: Rational) -> Result<Self> {
        let overflow = || Error::Range(format!("{self} * {other} overflows"));
        let num = self.num.checked_mul(other.num).ok_or_else(overflow)?;
        let den = self.den.checked_mul(other.den).ok_or_else(overflow)?;
        Rational::new(num, den)
    }

    pub fn checked_add(self, other: Rational) -> Result<Self> {
        let overflow = || Error::Range(format!("{self} + {other} overflows"));
        let num = self
            .num
            .checked_mul(other.den)
            .and_then(|a| other.num.checked_mul(self.den).and_then(|b| a.checked_add(b)))
            .ok_or_else(overflow)?;
        let den = self.den.checked_mul(other.den).ok_or_else(overflow)?;
        Rational::new(num, den)
    }

    pub fn checked_div_int(self, n: i64) -> Result<Self> {
        let den = self.den.checked_mul(n).ok_or_else(|| Error::Range(format!("{self} / {n} overflows")))?;
        Rational::new(self.num, den)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Rational {
    type Err = Error;

    /// Accepts `p/q`, integers and plain decimals such as `0.125`.
    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::Parse(format!("cannot parse {text:?} as a rational"));
        if let Some((p, q)) = text.split_once('/') {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            return Rational::new(p, q).map_err(|_| bad());
        }
        let (negative, digits) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text.strip_prefix('+').unwrap_or(text)),
        };
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) || frac_part.len() > 18 {
            return Err(bad());
        }
        let den = 10i64.pow(frac_part.len() as u32);
        let whole: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
        let frac: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
        let num = whole.checked_mul(den).and_then(|w| w.checked_add(frac)).ok_or_else(bad)?;
        Rational::new(if negative { -num } else { num }, den)
    }
}

/// Default order of the reference solution.
pub const REFERENCE_ORDER: usize = 65;
/// Default Fourier cutoff.
pub const DEFAULT_MODES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Moment cutoff `N`: moments `0..=N` are kept.
    pub order: usize,
    pub eps: Rational,
    /// Fourier cutoff `K`: wavenumbers `-K..=K`.
    pub modes: usize,
    pub ref_order: usize,
    pub precision: Precision,
    pub times: Vec<Rational>,
}

impl ModelConfig {
    pub fn new(order: usize, eps: Rational) -> Self {
        ModelConfig {
            order,
            eps,
            modes: DEFAULT_MODES,
            ref_order: REFERENCE_ORDER,
            precision: Precision::DEFAULT,
            times: vec![Rational::integer(1)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::Config("moment order must be at least 1".into()));
        }
        if self.ref_order <= self.order {
            return Err(Error::Config(format!(
                "reference order {} must exceed the moment order {}",
                self.ref_order, self.order
            )));
        }
        if !self.eps.is_positive() || self.eps.num() > self.eps.den() {
            return Err(Error::Config(format!("scaling parameter {} must lie in (0, 1]", self.eps)));
        }
        if self.modes < 1 {
            return Err(Error::Config("Fourier cutoff must be at least 1".into()));
        }
        if let Some(t) = self.times.iter().find(|t| t.num() < 0) {
            return Err(Error::Config(format!("negative time {t}")));
        }
        Ok(())
    }
}

/// `(l+1) / sqrt((2l+1)(2l+3))`, the three-term recurrence coefficient of the
/// orthonormal Legendre polynomials.
pub fn coupling<R: Real>(l: usize, prec: Precision) -> R {
    let l = l as i64;
    let num = (l + 1) * (l + 1);
    let den = (2 * l + 1) * (2 * l + 3);
    R::from_ratio(num, den, prec).and_then(R::sqrt).expect("positive ratio")
}

#[derive(Debug, Clone)]
pub struct CouplingCoefficients<R> {
    a: Vec<R>,
}

impl<R: Real> CouplingCoefficients<R> {
    /// Coefficients `a_0..=a_order`.
    pub fn new(order: usize, prec: Precision) -> Self {
        CouplingCoefficients { a: (0..=order).map(|l| coupling(l, prec)).collect() }
    }

    pub fn get(&self, l: usize) -> R {
        self.a[l]
    }

    pub fn as_slice(&self) -> &[R] {
        &self.a
    }
}

/// `-(ik/eps) M - R/eps^2` for one wavenumber.
#[derive(Debug, Clone)]
pub struct WaveGenerator<R> {
    pub k: i64,
    pub matrix: Mat<Cplx<R>>,
}

/// Real tridiagonal matrix similar to the wave generator through
/// `diag(i^l)`: `A_k = D B D^{-1}`.
#[derive(Debug, Clone)]
pub struct Tridiagonal<R> {
    pub diag: Vec<R>,
    /// Entries `(l, l+1)`.
    pub upper: Vec<R>,
    /// Entries `(l+1, l)`.
    pub lower: Vec<R>,
}

impl<R: Real> Tridiagonal<R> {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self, prec: Precision) -> Mat<R> {
        Mat::from_fn(self.dim(), self.dim(), |r, c| {
            if r == c {
                self.diag[r]
            } else if c == r + 1 {
                self.upper[r]
            } else if r == c + 1 {
                self.lower[c]
            } else {
                R::zero(prec)
            }
        })
    }
}

pub fn assemble_generator<R: Real>(eps: Rational, order: usize, k: i64, prec: Precision) -> WaveGenerator<R> {
    let real = real_generator::<R>(eps, order, k, prec);
    let zero = R::zero(prec);
    let n = order + 1;
    let matrix = Mat::from_fn(n, n, |r, c| {
        if r == c {
            Cplx::from_real(real.diag[r])
        } else if c == r + 1 {
            // i^r * b * i^-(r+1) = -i b
            Cplx::new(zero, -real.upper[r])
        } else if r == c + 1 {
            Cplx::new(zero, real.lower[c])
        } else {
            Cplx::zero(prec)
        }
    });
    WaveGenerator { k, matrix }
}

pub fn real_generator<R: Real>(eps: Rational, order: usize, k: i64, prec: Precision) -> Tridiagonal<R> {
    let n = order + 1;
    let a = CouplingCoefficients::<R>::new(order, prec);
    let wave = R::from_ratio(k * eps.den(), eps.num(), prec).expect("positive eps");
    let inv_eps = R::from_ratio(eps.den(), eps.num(), prec).expect("positive eps");
    let relax = -(inv_eps * inv_eps);
    let diag = (0..n).map(|l| if l == 0 { R::zero(prec) } else { relax }).collect();
    let upper: Vec<R> = (0..order).map(|l| wave * a.get(l)).collect();
    let lower = upper.iter().map(|&x| -x).collect();
    Tridiagonal { diag, upper, lower }
}

/// Fourier coefficients `G_k`, `k = -K..=K`, of a real-valued function.
#[derive(Debug, Clone)]
pub struct FourierCoefficients<R> {
    modes: usize,
    coeffs: Vec<Cplx<R>>,
}

impl<R: Real> FourierCoefficients<R> {
    pub fn from_fn(modes: usize, mut f: impl FnMut(i64) -> Cplx<R>) -> Self {
        let k_max = modes as i64;
        FourierCoefficients { modes, coeffs: (-k_max..=k_max).map(&mut f).collect() }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn get(&self, k: i64) -> Cplx<R> {
        self.coeffs[(k + self.modes as i64) as usize]
    }

    pub fn set(&mut self, k: i64, v: Cplx<R>) {
        self.coeffs[(k + self.modes as i64) as usize] = v;
    }

    /// First wavenumber violating `G_{-k} = conj(G_k)`, if any.
    pub fn asymmetry(&self) -> Option<i64> {
        (0..=self.modes as i64).find(|&k| self.get(-k) != self.get(k).conj())
    }
}

/// Legendre-Fourier coefficients `u_{l,k}` for `l = 0..=order`,
/// `k = -K..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState<R> {
    order: usize,
    modes: usize,
    blocks: Vec<Vec<Cplx<R>>>,
}

impl<R: Real> SpectralState<R> {
    pub fn zeros(order: usize, modes: usize, prec: Precision) -> Self {
        SpectralState { order, modes, blocks: vec![vec![Cplx::zero(prec); order + 1]; 2 * modes + 1] }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn wavenumbers(&self) -> std::ops::RangeInclusive<i64> {
        -(self.modes as i64)..=self.modes as i64
    }

    fn index(&self, k: i64) -> usize {
        assert!(k.unsigned_abs() as usize <= self.modes, "wavenumber {k} outside cutoff {}", self.modes);
        (k + self.modes as i64) as usize
    }

    pub fn get(&self, l: usize, k: i64) -> Cplx<R> {
        self.blocks[self.index(k)][l]
    }

    pub fn set(&mut self, l: usize, k: i64, v: Cplx<R>) {
        let i = self.index(k);
        self.blocks[i][l] = v;
    }

    pub fn block(&self, k: i64) -> &[Cplx<R>] {
        &self.blocks[self.index(k)]
    }

    pub fn block_mut(&mut self, k: i64) -> &mut [Cplx<R>] {
        let i = self.index(k);
        &mut self.blocks[i]
    }

    pub fn from_blocks(order: usize, modes: usize, blocks: Vec<Vec<Cplx<R>>>) -> Result<Self> {
        if blocks.len() != 2 * modes + 1 || blocks.iter().any(|b| b.len() != order + 1) {
            return Err(Error::Dimension(format!("blocks do not form an order-{order}, {modes}-mode state")));
        }
        Ok(SpectralState { order, modes, blocks })
    }

    /// Zero-pads or truncates the moment index to `order`.
    pub fn with_order(&self, order: usize, prec: Precision) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| (0..=order).map(|l| b.get(l).copied().unwrap_or_else(|| Cplx::zero(prec))).collect())
            .collect();
        SpectralState { order, modes: self.modes, blocks }
    }

    /// Keeps only the wavenumbers accepted by `keep`, zeroing the rest.
    pub fn restrict(&self, prec: Precision, keep: impl Fn(i64) -> bool) -> Self {
        let mut out = SpectralState::zeros(self.order, self.modes, prec);
        for k in self.wavenumbers() {
            if keep(k) {
                out.block_mut(k).copy_from_slice(self.block(k));
            }
        }
        out
    }

    pub fn is_hermitian(&self) -> bool {
        (0..=self.modes as i64).all(|k| self.block(k).iter().zip(self.block(-k)).all(|(a, b)| *a == b.conj()))
    }

    /// Writes `k,l,re,im` rows with enough digits to round-trip.
    pub fn write_table(&self, out: &mut impl Write, prec: Precision) -> Result<()> {
        let digits = digits_for_bits(prec.bits());
        writeln!(out, "k,l,re,im")?;
        for k in self.wavenumbers() {
            for (l, v) in self.block(k).iter().enumerate() {
                writeln!(out, "{k},{l},{},{}", v.re.to_sci(digits), v.im.to_sci(digits))?;
            }
        }
        Ok(())
    }

    pub fn parse_table(text: &str, prec: Precision) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with('k')) {
                continue;
            }
            let bad = || Error::Parse(format!("line {}: expected k,l,re,im", n + 1));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(bad());
            }
            let k: i64 = fields[0].parse().map_err(|_| bad())?;
            let l: usize = fields[1].parse().map_err(|_| bad())?;
            let re = R::parse(fields[2], prec)?;
            let im = R::parse(fields[3], prec)?;
            rows.push((k, l, Cplx::new(re, im)));
        }
        let modes = rows.iter().map(|r| r.0.unsigned_abs() as usize).max().unwrap_or(0);
        let order = rows.iter().map(|r| r.1).max().unwrap_or(0);
        let mut state = SpectralState::zeros(order, modes, prec);
        for (k, l, v) in rows {
            state.set(l, k, v);
        }
        Ok(state)
    }
}

/// `u_{0,k} = sqrt(2) G_k`, higher moments zero.
pub fn project_isotropic<R: Real>(g: &FourierCoefficients<R>, order: usize, prec: Precision) -> Result<SpectralState<R>> {
    if let Some(k) = g.asymmetry() {
        return Err(Error::Asymmetric(k));
    }
    let sqrt2 = R::from_i64(2, prec).sqrt()?;
    let mut state = SpectralState::zeros(order, g.modes(), prec);
    for k in state.wavenumbers() {
        state.set(0, k, g.get(k).scale(sqrt2));
    }
    Ok(state)
}

/// `|k| eps <= 1/2`, evaluated exactly.
pub fn is_low_frequency(k: i64, eps: Rational) -> bool {
    2 * (k.unsigned_abs() as i128) * eps.num() as i128 <= eps.den() as i128
}

/// `(high, low)`; the boundary `|k| eps = 1/2` belongs to the low part.
pub fn split_frequencies<R: Real>(
    state: &SpectralState<R>,
    eps: Rational,
    prec: Precision,
) -> (SpectralState<R>, SpectralState<R>) {
    let high = state.restrict(prec, |k| !is_low_frequency(k, eps));
    let low = state.restrict(prec, |k| is_low_frequency(k, eps));
    (high, low)
}
