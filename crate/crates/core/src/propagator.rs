//! Exact-in-time evolution `u(t) = exp(t A_k) u(0)` of each wavenumber block.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::bigfloat::{Cplx, Precision, Real};
use crate::error::{Error, Result};
use crate::linalg::{Entry, Mat};
use crate::moment_system::{coupling, Rational, SpectralState};

/// Smallest `s` with `norm / 2^s <= 1/2`.
fn squarings_for(norm_log2: f64) -> u32 {
    if norm_log2.is_finite() {
        (norm_log2 + 1.0).ceil().max(0.0) as u32
    } else {
        0
    }
}

/// Taylor terms are summed until their 1-norm drops below `2^-(p+16)`.
fn taylor_cutoff(prec: Precision) -> f64 {
    (-(prec.bits() as f64 + 16.0)).exp2()
}

const MAX_TAYLOR_TERMS: usize = 2000;

/// Dense scaling-and-squaring exponential `exp(tau A)`.
pub fn expm<T: Entry>(a: &Mat<T>, tau: T::Scalar, prec: Precision) -> Result<Mat<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension(format!("expm of a {}x{} matrix", n, a.cols())));
    }
    let scaled = a.scale(tau);
    let s = squarings_for(scaled.norm1(prec).log2_abs());
    let x = scaled.scale(T::Scalar::one(prec).mul_pow2(-(s as i64))?);
    let cutoff = taylor_cutoff(prec);
    let mut sum = Mat::<T>::identity(n, prec);
    let mut term = sum.clone();
    for j in 1..=MAX_TAYLOR_TERMS {
        let recip = T::Scalar::from_ratio(1, j as i64, prec)?;
        term = x.matmul(&term, prec)?.scale(recip);
        sum = sum.add(&term);
        if term.norm1(prec).to_f64() < cutoff {
            break;
        }
        if j == MAX_TAYLOR_TERMS {
            return Err(Error::Range("Taylor series did not converge".into()));
        }
    }
    for _ in 0..s {
        sum = sum.matmul(&sum, prec)?;
    }
    Ok(sum)
}

/// `tau B` for the real form of the wave generator,
/// `B = (k/eps) S - R/eps^2`, with `S` antisymmetric tridiagonal.
struct ScaledGenerator<R> {
    /// Diagonal entry of moments `l >= 1`; moment 0 has a zero diagonal.
    relax: R,
    /// `(l, l+1)` entries; `(l+1, l)` is the negation.
    upper: Vec<R>,
}

impl<R: Real> ScaledGenerator<R> {
    fn new(order: usize, k: i64, eps: Rational, t: Rational, prec: Precision) -> Result<Self> {
        let inv_eps = Rational::new(eps.den(), eps.num())?;
        let wave = t.checked_mul(inv_eps)?.checked_mul(Rational::integer(k))?;
        let relax = t.checked_mul(inv_eps)?.checked_mul(inv_eps)?;
        let wave: R = wave.to_real(prec);
        Ok(ScaledGenerator {
            relax: -relax.to_real::<R>(prec),
            upper: (0..order).map(|l| wave * coupling::<R>(l, prec)).collect(),
        })
    }

    fn dim(&self) -> usize {
        self.upper.len() + 1
    }

    fn norm1_log2(&self) -> f64 {
        let n = self.dim();
        let relax = self.relax.to_f64().abs();
        let up: Vec<f64> = self.upper.iter().map(|x| x.to_f64().abs()).collect();
        (0..n)
            .map(|c| {
                let diag = if c == 0 { 0.0 } else { relax };
                let above = if c > 0 { up[c - 1] } else { 0.0 };
                let below = if c + 1 < n { up[c] } else { 0.0 };
                diag + above + below
            })
            .fold(0.0f64, f64::max)
            .log2()
    }
}

/// Mirrors the upper triangle into the lower one using `E^T = P E P`,
/// `P = diag((-1)^l)`, which every function of the real generator obeys.
fn mirror_parity<R: Real>(m: &mut Mat<R>) {
    let n = m.rows();
    for r in 0..n {
        for c in r + 1..n {
            let v = m.get(r, c);
            m.set(c, r, if (r + c) % 2 == 1 { -v } else { v });
        }
    }
}

/// `exp(X)` for `X = tau B / 2^s`, by a Taylor sum whose terms are banded.
fn taylor_tridiagonal<R: Real>(g: &ScaledGenerator<R>, s: u32, prec: Precision) -> Result<Mat<R>> {
    let n = g.dim();
    let relax = g.relax.mul_pow2(-(s as i64))?;
    let upper: Vec<R> = g.upper.iter().map(|x| x.mul_pow2(-(s as i64))).collect::<std::result::Result<_, _>>()?;
    let zero = R::zero(prec);
    let cutoff = taylor_cutoff(prec);
    let mut sum = Mat::<R>::identity(n, prec);
    let mut term = sum.clone();
    let mut next = Mat::<R>::zeros(n, n, prec);
    for j in 1..=MAX_TAYLOR_TERMS {
        let recip = R::from_ratio(1, j as i64, prec)?;
        let mut col_norms = vec![0.0f64; n];
        for r in 0..n {
            for c in r..n.min(r + j + 1) {
                let mut pairs: [(R, R, bool); 3] = [(zero, zero, false); 3];
                let mut len = 0;
                if r > 0 {
                    pairs[len] = (upper[r - 1], term.get(r - 1, c), true);
                    len += 1;
                }
                if r > 0 {
                    pairs[len] = (relax, term.get(r, c), false);
                    len += 1;
                }
                if r + 1 < n {
                    pairs[len] = (upper[r], term.get(r + 1, c), false);
                    len += 1;
                }
                let v = R::dot_signed(prec, pairs[..len].iter().map(|(a, b, neg)| (a, b, *neg))) * recip;
                next.set(r, c, v);
                sum.set(r, c, sum.get(r, c) + v);
                let mag = v.to_f64().abs();
                col_norms[c] += mag;
                if c != r {
                    col_norms[r] += mag;
                }
            }
        }
        mirror_parity(&mut next);
        std::mem::swap(&mut term, &mut next);
        if col_norms.iter().copied().fold(0.0, f64::max) < cutoff {
            mirror_parity(&mut sum);
            return Ok(sum);
        }
    }
    Err(Error::Range("Taylor series did not converge".into()))
}

/// `E^2` for a matrix with the parity symmetry, computing the upper triangle
/// from rows only: `(E^2)_{ij} = sum_m E_{im} E_{jm} (-1)^{m+j}`.
fn square_parity<R: Real>(e: &Mat<R>, prec: Precision) -> Mat<R> {
    let n = e.rows();
    let mut out = Mat::<R>::zeros(n, n, prec);
    for i in 0..n {
        let ri = e.row(i);
        for j in i..n {
            let rj = e.row(j);
            let v = R::dot_signed(prec, ri.iter().zip(rj).enumerate().map(|(m, (a, b))| (a, b, (m + j) % 2 == 1)));
            out.set(i, j, v);
        }
    }
    mirror_parity(&mut out);
    out
}

/// Relative cost of one dense squaring against one matrix-vector product.
fn final_products(s: u32, n: usize) -> u32 {
    let n = n as f64;
    (0..=s.min(20))
        .min_by(|&a, &b| {
            let cost = |j: u32| (s - j) as f64 * n * n * n / 2.0 + (1u64 << j) as f64 * n * n;
            cost(a).total_cmp(&cost(b))
        })
        .unwrap_or(0)
}

fn exp_real_generator<R: Real>(g: &ScaledGenerator<R>, squarings_kept: bool, prec: Precision) -> Result<(Mat<R>, u32)> {
    let s = squarings_for(g.norm1_log2());
    let tail = if squarings_kept { final_products(s, g.dim()) } else { 0 };
    let mut e = taylor_tridiagonal(g, s, prec)?;
    for _ in 0..s - tail {
        e = square_parity(&e, prec);
    }
    Ok((e, tail))
}

/// Diagonal exponential for the uncoupled `k = 0` block.
fn exp_uncoupled<R: Real>(order: usize, eps: Rational, t: Rational, prec: Precision) -> Result<Mat<R>> {
    let inv_eps = Rational::new(eps.den(), eps.num())?;
    let rate = t.checked_mul(inv_eps)?.checked_mul(inv_eps)?;
    let decay = (-rate.to_real::<R>(prec)).exp()?;
    let n = order + 1;
    Ok(Mat::from_fn(n, n, |r, c| match (r == c, r) {
        (true, 0) => R::one(prec),
        (true, _) => decay,
        _ => R::zero(prec),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey {
    order: usize,
    k: u64,
    eps: Rational,
    t: Rational,
    bits: u32,
}

type Cache<V> = Mutex<HashMap<CacheKey, Arc<V>>>;

/// Computes and caches block exponentials of the real generator.
/// For `k >= 0` the complex propagator is
/// `exp(t A_k)_{lm} = i^{l-m} E_{lm}` with `E = exp(t B_k)`, and negative
/// wavenumbers follow from `E(-k) = P E(k) P`.
pub struct Propagator<R> {
    prec: Precision,
    columns: Cache<Vec<R>>,
    blocks: Cache<Mat<R>>,
}

impl<R: Real> Propagator<R> {
    pub fn new(prec: Precision) -> Self {
        Propagator { prec, columns: Mutex::new(HashMap::new()), blocks: Mutex::new(HashMap::new()) }
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    fn key(&self, order: usize, k: i64, eps: Rational, t: Rational) -> CacheKey {
        CacheKey { order, k: k.unsigned_abs(), eps, t, bits: self.prec.bits() }
    }

    fn cached<V>(cache: &Cache<V>, key: CacheKey, compute: impl FnOnce() -> Result<V>) -> Result<Arc<V>> {
        if let Some(v) = cache.lock().expect("cache poisoned").get(&key) {
            return Ok(v.clone());
        }
        let v = Arc::new(compute()?);
        Ok(cache.lock().expect("cache poisoned").entry(key).or_insert(v).clone())
    }

    /// `E = exp(t B_|k|)`.
    pub fn block_exponential(&self, order: usize, k: i64, eps: Rational, t: Rational) -> Result<Arc<Mat<R>>> {
        let prec = self.prec;
        Self::cached(&self.blocks, self.key(order, k, eps, t), || {
            if k == 0 {
                return exp_uncoupled(order, eps, t, prec);
            }
            let g = ScaledGenerator::new(order, k.abs(), eps, t, prec)?;
            Ok(exp_real_generator(&g, false, prec)?.0)
        })
    }

    /// First column of `exp(t B_|k|)`: the response to isotropic data, so that
    /// `u_l(t) = i^l rho_l u_0(0)` for `k >= 0`.
    pub fn response(&self, order: usize, k: i64, eps: Rational, t: Rational) -> Result<Arc<Vec<R>>> {
        let prec = self.prec;
        Self::cached(&self.columns, self.key(order, k, eps, t), || {
            let n = order + 1;
            if k == 0 || t.num() == 0 {
                return Ok((0..n).map(|l| if l == 0 { R::one(prec) } else { R::zero(prec) }).collect());
            }
            let g = ScaledGenerator::new(order, k.abs(), eps, t, prec)?;
            let (f, tail) = exp_real_generator(&g, true, prec)?;
            let mut v: Vec<R> = (0..n).map(|r| f.get(r, 0)).collect();
            for _ in 1..(1u64 << tail) {
                v = (0..n).map(|r| R::dot(prec, f.row(r).iter().zip(&v))).collect();
            }
            Ok(v)
        })
    }

    /// Applies `exp(t A_k)` blockwise.
    pub fn evolve(&self, state: &SpectralState<R>, eps: Rational, t: Rational) -> Result<SpectralState<R>> {
        let order = state.order();
        if t.num() < 0 {
            return Err(Error::Range(format!("negative time {t}")));
        }
        if t.num() == 0 {
            return Ok(state.clone());
        }
        let blocks: Vec<Vec<Cplx<R>>> = state
            .wavenumbers()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|k| self.evolve_block(state.block(k), order, k, eps, t))
            .collect::<Result<_>>()?;
        SpectralState::from_blocks(order, state.modes(), blocks)
    }

    fn evolve_block(&self, u: &[Cplx<R>], order: usize, k: i64, eps: Rational, t: Rational) -> Result<Vec<Cplx<R>>> {
        let prec = self.prec;
        if u.iter().all(Cplx::is_zero) {
            return Ok(u.to_vec());
        }
        let flip = |l: usize| k < 0 && l % 2 == 1;
        if u[1..].iter().all(Cplx::is_zero) {
            let rho = self.response(order, k, eps, t)?;
            return Ok((0..=order)
                .map(|l| {
                    let v = u[0].scale(rho[l]).mul_i_pow(l as i64);
                    if flip(l) {
                        -v
                    } else {
                        v
                    }
                })
                .collect());
        }
        let e = self.block_exponential(order, k, eps, t)?;
        Ok((0..=order)
            .map(|l| {
                let terms: Vec<Cplx<R>> = (0..=order)
                    .map(|m| {
                        let w = e.get(l, m);
                        let w = if k < 0 && (l + m) % 2 == 1 { -w } else { w };
                        u[m].scale(w).mul_i_pow(l as i64 - m as i64)
                    })
                    .collect();
                terms.into_iter().fold(Cplx::zero(prec), |acc, x| acc + x)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bigfloat::ExtendedReal;
    use crate::moment_system::assemble_generator;

    const P: Precision = Precision::DEFAULT;

    fn rat(n: i64, d: i64) -> Rational {
        Rational::new(n, d).unwrap()
    }

    fn rel_diff<R: Real>(a: R, b: R) -> f64 {
        let d = (a - b).abs();
        if d.is_zero() {
            f64::NEG_INFINITY
        } else {
            d.log2_abs() - a.abs().max(b.abs()).log2_abs()
        }
    }

    #[test]
    fn expm_of_zero_and_diagonal() {
        let z = Mat::<ExtendedReal>::zeros(3, 3, P);
        let e = expm(&z, ExtendedReal::one(P), P).unwrap();
        assert_eq!(e, Mat::identity(3, P));

        let inv_eps2 = ExtendedReal::from_i64(64, P);
        let d = Mat::from_fn(2, 2, |r, c| if r == c && r == 1 { -inv_eps2 } else { ExtendedReal::zero(P) });
        let e = expm(&d, ExtendedReal::one(P), P).unwrap();
        let expected = (-inv_eps2).exp().unwrap();
        assert_eq!(e.get(0, 0), ExtendedReal::one(P));
        assert!(rel_diff(e.get(1, 1), expected) < -240.0);
        assert!(e.get(0, 1).is_zero() && e.get(1, 0).is_zero());

        let rect = Mat::<ExtendedReal>::zeros(2, 3, P);
        assert!(matches!(expm(&rect, ExtendedReal::one(P), P), Err(Error::Dimension(_))));
    }

    #[test]
    fn tridiagonal_path_matches_dense_complex_expm() {
        let (order, k, eps, t) = (5, 3, rat(1, 8), rat(1, 2));
        let prop = Propagator::<ExtendedReal>::new(P);
        let e = prop.block_exponential(order, k, eps, t).unwrap();
        let rho = prop.response(order, k, eps, t).unwrap();
        let a = assemble_generator::<ExtendedReal>(eps, order, k, P);
        let dense = expm(&a.matrix, t.to_real(P), P).unwrap();
        for l in 0..=order {
            for m in 0..=order {
                let want = Cplx::from_real(e.get(l, m)).mul_i_pow(l as i64 - m as i64);
                let got = dense.get(l, m);
                assert!((got - want).l1().log2_abs() < -230.0, "({l},{m})");
            }
            assert!((rho[l] - e.get(l, 0)).abs().log2_abs() < -230.0);
        }
    }

    #[test]
    fn rk4_oracle_in_double() {
        let (order, k, eps) = (5usize, 3i64, rat(1, 8));
        let p = Precision::DOUBLE;
        let a = assemble_generator::<f64>(eps, order, k, p).matrix;
        let u0: Vec<Cplx<f64>> = (0..=order).map(|l| Cplx::new(1.0 / (l as f64 + 1.0), 0.5 - 0.1 * l as f64)).collect();
        let apply = |v: &[Cplx<f64>]| a.matvec(v, p).unwrap();
        let axpy = |v: &[Cplx<f64>], d: &[Cplx<f64>], h: f64| -> Vec<Cplx<f64>> {
            v.iter().zip(d).map(|(x, y)| *x + y.scale(h)).collect()
        };
        let steps = 1_000_000;
        let h = 1.0 / steps as f64;
        let mut u = u0.clone();
        for _ in 0..steps {
            let k1 = apply(&u);
            let k2 = apply(&axpy(&u, &k1, h / 2.0));
            let k3 = apply(&axpy(&u, &k2, h / 2.0));
            let k4 = apply(&axpy(&u, &k3, h));
            for i in 0..u.len() {
                u[i] = u[i] + (k1[i] + k2[i].scale(2.0) + k3[i].scale(2.0) + k4[i]).scale(h / 6.0);
            }
        }
        let mut state = SpectralState::<f64>::zeros(order, 3, p);
        state.block_mut(k).copy_from_slice(&u0);
        let out = Propagator::<f64>::new(p).evolve(&state, eps, Rational::integer(1)).unwrap();
        let diff: f64 = u.iter().zip(out.block(k)).map(|(x, y)| (*x - *y).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = u.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-9, "{}", diff / norm);
    }

    fn isotropic_state(order: usize, modes: usize) -> SpectralState<ExtendedReal> {
        let mut s = SpectralState::zeros(order, modes, P);
        for k in 0..=modes as i64 {
            let v = Cplx::new(ExtendedReal::from_ratio(1, 1 + k * k, P).unwrap(), ExtendedReal::from_ratio(k, 7, P).unwrap());
            s.set(0, k, v);
            s.set(0, -k, v.conj());
        }
        s
    }

    #[test]
    fn evolve_identities() {
        let prop = Propagator::<ExtendedReal>::new(P);
        let s = isotropic_state(4, 3);
        let eps = rat(1, 8);
        assert_eq!(prop.evolve(&s, eps, Rational::integer(0)).unwrap(), s);
        let out = prop.evolve(&s, eps, Rational::integer(10)).unwrap();
        assert_eq!(out.get(0, 0), s.get(0, 0));
        for l in 1..=4 {
            assert!(out.get(l, 0).is_zero());
        }
        assert!(out.is_hermitian());
    }

    #[test]
    fn semigroup_and_general_blocks() {
        let prop = Propagator::<ExtendedReal>::new(P);
        let eps = rat(1, 4);
        let s = isotropic_state(6, 4);
        let once = prop.evolve(&s, eps, rat(3, 10)).unwrap();
        // The second step starts from anisotropic blocks and takes the full-matrix path.
        let twice = prop.evolve(&once, eps, rat(7, 10)).unwrap();
        let direct = prop.evolve(&s, eps, Rational::integer(1)).unwrap();
        for k in s.wavenumbers() {
            for l in 0..=6 {
                let d = (twice.get(l, k) - direct.get(l, k)).l1();
                let scale = direct.get(l, k).l1().max(ExtendedReal::from_f64(1e-60, P).unwrap());
                assert!(d.log2_abs() - scale.log2_abs() < -128.0, "l={l} k={k}");
            }
        }
    }

    #[test]
    fn energy_never_increases() {
        let prop = Propagator::<ExtendedReal>::new(P);
        let eps = rat(1, 32);
        let s = isotropic_state(5, 6);
        let energy = |st: &SpectralState<ExtendedReal>, k: i64| {
            st.block(k).iter().fold(ExtendedReal::zero(P), |acc, v| acc + v.norm_sqr())
        };
        let slack = ExtendedReal::one(P) + ExtendedReal::parse("1e-20", P).unwrap();
        let mut prev = s.clone();
        for t in [rat(1, 10), Rational::integer(1), Rational::integer(10)] {
            let cur = prop.evolve(&s, eps, t).unwrap();
            for k in s.wavenumbers() {
                assert!(energy(&cur, k) <= energy(&prev, k) * slack, "k={k} t={t}");
            }
            prev = cur;
        }
    }

    #[test]
    fn cost_model_prefers_a_few_final_products() {
        assert_eq!(final_products(0, 66), 0);
        let j = final_products(20, 66);
        assert!((4..=7).contains(&j), "{j}");
    }
}
