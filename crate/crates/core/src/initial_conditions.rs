//! Benchmark initial data and their Fourier coefficients
//! `G_k = (2 pi)^{-1/2} \int G(x) e^{-ikx} dx` over `[-pi, pi)`.

use std::fmt;
use std::path::Path;

use crate::bigfloat::{Cplx, Precision, Real};
use crate::error::{Error, Result};
use crate::moment_system::FourierCoefficients;

/// Isotropic data sampled on the uniform grid `x_j = -pi + 2 pi j / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledData {
    /// Sample values as decimal text, parsed at whatever precision is requested.
    values: Vec<String>,
}

impl SampledData {
    pub fn new(points: &[(f64, String)]) -> Result<Self> {
        let n = points.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Samples(format!("{n} samples; expected a power of two")));
        }
        let h = 2.0 * std::f64::consts::PI / n as f64;
        for (j, (x, value)) in points.iter().enumerate() {
            let expected = -std::f64::consts::PI + h * j as f64;
            if (x - expected).abs() > 1e-9 * h.max(1.0) {
                return Err(Error::Samples(format!("sample {j} at x = {x}, expected {expected}")));
            }
            value.parse::<f64>().map_err(|_| Error::Samples(format!("sample {j}: bad value {value:?}")))?;
        }
        Ok(SampledData { values: points.iter().map(|(_, v)| v.clone()).collect() })
    }

    /// Two columns `x value` per line, separated by whitespace or a comma;
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
            let bad = || Error::Samples(format!("line {}: expected two columns", n + 1));
            if fields.len() != 2 {
                return Err(bad());
            }
            let x: f64 = fields[0].parse().map_err(|_| bad())?;
            points.push((x, fields[1].to_string()));
        }
        SampledData::new(&points)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// `1 + 1_{[-pi/2, pi/2]}`
    G1,
    /// `1 + cos(x) 1_{[-pi/2, pi/2]}`
    G2,
    /// `1 + cos(x)`
    G3,
    Sampled(SampledData),
}

impl InitialCondition {
    /// `g1`, `g2`, `g3` or `file:<path>`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        match spec {
            "g1" => Ok(InitialCondition::G1),
            "g2" => Ok(InitialCondition::G2),
            "g3" => Ok(InitialCondition::G3),
            _ => match spec.strip_prefix("file:") {
                Some(path) => Self::from_file(Path::new(path)),
                None => Err(Error::Parse(format!("unknown initial condition {spec:?}"))),
            },
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(InitialCondition::Sampled(SampledData::parse(&text)?))
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitialCondition::G1 => "g1",
            InitialCondition::G2 => "g2",
            InitialCondition::G3 => "g3",
            InitialCondition::Sampled(_) => "sampled",
        }
    }

    /// Whether `G_k` vanishes identically, known in closed form.
    pub fn vanishes_at(&self, k: i64) -> bool {
        let k = k.abs();
        match self {
            InitialCondition::G1 => k != 0 && k % 2 == 0,
            InitialCondition::G2 => k >= 3 && k % 2 == 1,
            InitialCondition::G3 => k >= 2,
            InitialCondition::Sampled(_) => false,
        }
    }

    pub fn fourier_coefficients<R: Real>(&self, modes: usize, prec: Precision) -> Result<FourierCoefficients<R>> {
        match self {
            InitialCondition::Sampled(data) => sampled_coefficients(data, modes, prec),
            _ => {
                let mut out = FourierCoefficients::from_fn(modes, |_| Cplx::zero(prec));
                let sqrt_2pi = (R::pi(prec) * R::from_i64(2, prec)).sqrt()?;
                for k in 0..=modes as i64 {
                    let v = self.closed_form::<R>(k, sqrt_2pi, prec)?;
                    out.set(k, Cplx::from_real(v));
                    out.set(-k, Cplx::from_real(v));
                }
                Ok(out)
            }
        }
    }

    /// Real closed form for `k >= 0`; every analytic datum is even in `x`.
    fn closed_form<R: Real>(&self, k: i64, sqrt_2pi: R, prec: Precision) -> Result<R> {
        let pi = R::pi(prec);
        let int = |n: i64| R::from_i64(n, prec);
        // sin(k pi / 2) and cos(k pi / 2) are integers.
        let sin_half = [0, 1, 0, -1][(k % 4) as usize];
        let cos_half = [1, 0, -1, 0][(k % 4) as usize];
        let integral = match (self, k) {
            (InitialCondition::G1, 0) => int(3) * pi,
            (InitialCondition::G1, _) => int(2 * sin_half).checked_div(int(k))?,
            (InitialCondition::G2, 0) => int(2) * pi + int(2),
            (InitialCondition::G2, 1) => pi.mul_pow2(-1)?,
            (InitialCondition::G2, _) => int(-2 * cos_half).checked_div(int(k * k - 1))?,
            (InitialCondition::G3, 0) => int(2) * pi,
            (InitialCondition::G3, 1) => pi,
            (InitialCondition::G3, _) => R::zero(prec),
            (InitialCondition::Sampled(_), _) => unreachable!("sampled data has no closed form"),
        };
        Ok(integral.checked_div(sqrt_2pi)?)
    }

    /// Sobolev index `q` such that the datum lies in `H^s` for every `s < q`;
    /// infinite for smooth data.
    pub fn regularity_report(&self) -> Result<f64> {
        match self {
            InitialCondition::G1 => Ok(0.5),
            InitialCondition::G2 => Ok(1.5),
            InitialCondition::G3 => Ok(f64::INFINITY),
            InitialCondition::Sampled(_) => Err(Error::Unsupported("regularity of sampled data is unknown".into())),
        }
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `(cos, sin)` of `2 pi / n` for a power of two `n`, by half-angle steps
/// from `pi / 2` that need only square roots.
fn base_twiddle<R: Real>(n: usize, prec: Precision) -> Result<(R, R)> {
    match n {
        1 => return Ok((R::one(prec), R::zero(prec))),
        2 => return Ok((-R::one(prec), R::zero(prec))),
        _ => {}
    }
    let (mut c, mut s) = (R::zero(prec), R::one(prec));
    let mut m = 4;
    while m < n {
        let half_c = ((R::one(prec) + c).mul_pow2(-1)?).sqrt()?;
        s = s.checked_div(half_c.mul_pow2(1)?)?;
        c = half_c;
        m *= 2;
    }
    Ok((c, s))
}

fn sampled_coefficients<R: Real>(data: &SampledData, modes: usize, prec: Precision) -> Result<FourierCoefficients<R>> {
    let n = data.len();
    if 2 * modes >= n {
        return Err(Error::Samples(format!("{modes} Fourier modes need more than {} samples, have {n}", 2 * modes)));
    }
    let values: Vec<R> = data.values.iter().map(|v| R::parse(v, prec)).collect::<std::result::Result<_, _>>()?;
    // powers[b] = exp(-2 pi i 2^b / n)
    let (c, s) = base_twiddle::<R>(n, prec)?;
    let mut powers = vec![Cplx::new(c, -s)];
    while (1usize << powers.len()) < n {
        let last = *powers.last().expect("nonempty");
        powers.push(last * last);
    }
    let twiddle = |m: usize| {
        let mut w = Cplx::from_real(R::one(prec));
        for (b, p) in powers.iter().enumerate() {
            if m >> b & 1 == 1 {
                w = w * *p;
            }
        }
        w
    };
    let table: Vec<Cplx<R>> = (0..n).map(twiddle).collect();
    // G_k = sqrt(2 pi) / n * (-1)^k * sum_j G(x_j) w^{kj}
    let weight = (R::pi(prec) * R::from_i64(2, prec)).sqrt()?.checked_div(R::from_i64(n as i64, prec))?;
    let mut out = FourierCoefficients::from_fn(modes, |_| Cplx::zero(prec));
    for k in 0..=modes {
        let mut re = Vec::with_capacity(n);
        let mut im = Vec::with_capacity(n);
        for (j, v) in values.iter().enumerate() {
            let w = table[(k * j) % n];
            re.push((*v, w.re));
            im.push((*v, w.im));
        }
        let sum_re = R::dot(prec, re.iter().map(|(a, b)| (a, b)));
        let sum_im = if k == 0 { R::zero(prec) } else { R::dot(prec, im.iter().map(|(a, b)| (a, b))) };
        let mut g = Cplx::new(sum_re, sum_im).scale(weight);
        if k % 2 == 1 {
            g = -g;
        }
        out.set(k as i64, g);
        out.set(-(k as i64), g.conj());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bigfloat::ExtendedReal;
    use std::f64::consts::PI;

    const D: Precision = Precision::DOUBLE;

    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    /// Quadrature of `G(x) cos(kx)` split at the kinks of the data; `g` is
    /// told whether it is evaluated on the middle piece `[-pi/2, pi/2]`.
    fn quadrature(g: &dyn Fn(f64, bool) -> f64, k: i64) -> f64 {
        let h = PI / 2.0;
        [(-PI, -h, false), (-h, h, true), (h, PI, false)]
            .iter()
            .map(|&(a, b, inside)| simpson(&|x| g(x, inside) * (k as f64 * x).cos(), a, b, 4000))
            .sum::<f64>()
            / (2.0 * PI).sqrt()
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let g1 = |_: f64, inside: bool| 1.0 + if inside { 1.0 } else { 0.0 };
        let g2 = |x: f64, inside: bool| 1.0 + if inside { x.cos() } else { 0.0 };
        let g3 = |x: f64, _: bool| 1.0 + x.cos();
        let cases: [(InitialCondition, &dyn Fn(f64, bool) -> f64); 3] =
            [(InitialCondition::G1, &g1), (InitialCondition::G2, &g2), (InitialCondition::G3, &g3)];
        for (ic, g) in cases {
            let coeffs = ic.fourier_coefficients::<f64>(12, D).unwrap();
            for k in -12..=12i64 {
                let want = quadrature(g, k);
                let got = coeffs.get(k);
                assert!(got.im == 0.0);
                assert!((got.re - want).abs() < 1e-10, "{ic} k={k}: {} vs {want}", got.re);
                assert_eq!(ic.vanishes_at(k), got.re == 0.0, "{ic} k={k}");
            }
        }
    }

    #[test]
    fn spec_values() {
        let p = Precision::DEFAULT;
        let g3 = InitialCondition::G3.fourier_coefficients::<ExtendedReal>(3, p).unwrap();
        let sqrt_2pi = (ExtendedReal::pi(p) * ExtendedReal::from_i64(2, p)).sqrt().unwrap();
        assert!(((g3.get(0).re - sqrt_2pi) / sqrt_2pi).abs().log2_abs() < -250.0);
        assert!(g3.get(2).is_zero());
        assert!((g3.get(1).re.to_f64() - (PI / 2.0).sqrt()).abs() < 1e-15);
        let g1 = InitialCondition::G1.fourier_coefficients::<ExtendedReal>(3, p).unwrap();
        let want = ExtendedReal::from_i64(2, p) / sqrt_2pi;
        assert!(((g1.get(1).re - want) / want).abs().log2_abs() < -250.0);
    }

    #[test]
    fn coefficient_decay_envelopes() {
        let k_max = 200;
        let g1 = InitialCondition::G1.fourier_coefficients::<f64>(k_max, D).unwrap();
        let g2 = InitialCondition::G2.fourier_coefficients::<f64>(k_max, D).unwrap();
        let c1 = (8..=k_max as i64).map(|k| g1.get(k).re.abs() * k as f64).fold(0.0, f64::max);
        let c2 = (8..=k_max as i64).map(|k| g2.get(k).re.abs() * (k * k) as f64).fold(0.0, f64::max);
        for k in 8..=k_max as i64 {
            assert!(g1.get(k).re.abs() <= c1 / k as f64 * (1.0 + 1e-12));
            assert!(g2.get(k).re.abs() <= c2 / (k * k) as f64 * (1.0 + 1e-12));
        }
        // The envelopes are sharp: odd (even) wavenumbers attain them up to the last sample.
        let k = k_max as i64 - 1;
        assert!(g1.get(k).re.abs() * k as f64 > 0.99 * c1);
        assert!(g2.get(k_max as i64).re.abs() * (k_max * k_max) as f64 > 0.98 * c2);
    }

    fn sample(n: usize, f: impl Fn(f64) -> f64) -> SampledData {
        let points: Vec<(f64, String)> = (0..n)
            .map(|j| {
                let x = -PI + 2.0 * PI * j as f64 / n as f64;
                (x, format!("{:e}", f(x)))
            })
            .collect();
        SampledData::new(&points).unwrap()
    }

    #[test]
    fn dft_reproduces_closed_form_for_g3() {
        let data = InitialCondition::Sampled(sample(32, |x| 1.0 + x.cos()));
        let dft = data.fourier_coefficients::<f64>(10, D).unwrap();
        let exact = InitialCondition::G3.fourier_coefficients::<f64>(10, D).unwrap();
        let scale = exact.get(0).re;
        for k in -10..=10 {
            let d = (dft.get(k) - exact.get(k)).abs();
            assert!(d / scale < 1e-12, "k={k}: {d}");
        }
        assert!(dft.asymmetry().is_none());
    }

    #[test]
    fn dft_in_extended_precision() {
        let p = Precision::new(192).unwrap();
        let n = 64;
        let points: Vec<(f64, String)> =
            (0..n).map(|j| (-PI + 2.0 * PI * j as f64 / n as f64, if j % 16 == 0 { "1".into() } else { "0".into() })).collect();
        let data = InitialCondition::Sampled(SampledData::new(&points).unwrap());
        let coeffs = data.fourier_coefficients::<ExtendedReal>(8, p).unwrap();
        // Samples at x = -pi, -pi/2, 0, pi/2: G_k = sqrt(2 pi)/64 * sum_j e^{-ik x_j}.
        let weight = (ExtendedReal::pi(p) * ExtendedReal::from_i64(2, p)).sqrt().unwrap() / ExtendedReal::from_i64(64, p);
        for k in 0..=8i64 {
            let sum = if k % 4 == 0 { 4 } else { 0 };
            let want = weight * ExtendedReal::from_i64(sum, p);
            let got = coeffs.get(k);
            assert!((got.re - want).abs().log2_abs() < -180.0, "k={k}");
            assert!(got.im.abs().log2_abs() < -180.0, "k={k}");
        }
    }

    #[test]
    fn sampled_input_validation() {
        let data = sample(16, |x| x.sin());
        assert!(InitialCondition::Sampled(data.clone()).fourier_coefficients::<f64>(8, D).is_err());
        assert!(InitialCondition::Sampled(data).fourier_coefficients::<f64>(7, D).is_ok());
        let three: Vec<(f64, String)> = (0..3).map(|j| (j as f64, "1".to_string())).collect();
        assert!(SampledData::new(&three).is_err());
        let shifted: Vec<(f64, String)> = (0..4).map(|j| (j as f64, "1".to_string())).collect();
        assert!(SampledData::new(&shifted).is_err());
        let text = "# x value\n-3.141592653589793 1\n-1.5707963267948966, 2\n0 3\n1.5707963267948966 4\n";
        assert_eq!(SampledData::parse(text).unwrap().len(), 4);
        assert!(SampledData::parse("0 1 2\n").is_err());
        assert!(InitialCondition::from_spec("g4").is_err());
        assert_eq!(InitialCondition::from_spec("g2").unwrap(), InitialCondition::G2);
    }

    #[test]
    fn regularity() {
        assert_eq!(InitialCondition::G1.regularity_report().unwrap(), 0.5);
        assert_eq!(InitialCondition::G2.regularity_report().unwrap(), 1.5);
        assert!(InitialCondition::G3.regularity_report().unwrap().is_infinite());
        assert!(InitialCondition::Sampled(sample(4, |_| 1.0)).regularity_report().is_err());
    }
}
