//! Shared solve path: project isotropic data and propagate, with the
//! propagator cache reused across orders, data and tables.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::bigfloat::{Precision, Real};
use crate::error::Result;
use crate::initial_conditions::InitialCondition;
use crate::moment_system::{project_isotropic, FourierCoefficients, Rational, SpectralState, DEFAULT_MODES};
use crate::propagator::Propagator;

/// Scaling parameters `2 * 4^-m`, `m = 1..=5`.
pub fn eps_grid() -> Vec<Rational> {
    (1..=5).map(|m| Rational::new(1, 2 * 4i64.pow(m - 1)).expect("nonzero")).collect()
}

/// Ratio between adjacent rows of [`eps_grid`].
pub const EPS_RATIO: f64 = 4.0;

/// Fourier cutoff needed to resolve short times at moderate scaling
/// parameters; everything else uses the default.
pub fn resolution_modes(t: Rational, eps: Rational) -> usize {
    let tenth = Rational::new(1, 10).expect("nonzero");
    let eighth = Rational::new(1, 8).expect("nonzero");
    let half = Rational::new(1, 2).expect("nonzero");
    let one = Rational::integer(1);
    if t == tenth && eps == eighth {
        1000
    } else if t == tenth && eps == half {
        2500
    } else if t == one && eps == half {
        1000
    } else {
        DEFAULT_MODES
    }
}

pub struct Solver<R> {
    prec: Precision,
    propagator: Propagator<R>,
    coefficients: Mutex<HashMap<(&'static str, usize), Arc<FourierCoefficients<R>>>>,
}

impl<R: Real> Solver<R> {
    pub fn new(prec: Precision) -> Self {
        Solver { prec, propagator: Propagator::new(prec), coefficients: Mutex::new(HashMap::new()) }
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    pub fn propagator(&self) -> &Propagator<R> {
        &self.propagator
    }

    pub fn coefficients(&self, ic: &InitialCondition, modes: usize) -> Result<Arc<FourierCoefficients<R>>> {
        if let InitialCondition::Sampled(_) = ic {
            return Ok(Arc::new(ic.fourier_coefficients(modes, self.prec)?));
        }
        let key = (ic.name(), modes);
        if let Some(c) = self.coefficients.lock().expect("cache poisoned").get(&key) {
            return Ok(c.clone());
        }
        let c = Arc::new(ic.fourier_coefficients(modes, self.prec)?);
        Ok(self.coefficients.lock().expect("cache poisoned").entry(key).or_insert(c).clone())
    }

    pub fn initial_state(&self, ic: &InitialCondition, order: usize, modes: usize) -> Result<SpectralState<R>> {
        project_isotropic(&*self.coefficients(ic, modes)?, order, self.prec)
    }

    /// The order-`order` moment solution at time `t`.
    pub fn solve(
        &self,
        ic: &InitialCondition,
        order: usize,
        eps: Rational,
        modes: usize,
        t: Rational,
    ) -> Result<SpectralState<R>> {
        let initial = self.initial_state(ic, order, modes)?;
        self.propagator.evolve(&initial, eps, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_resolution() {
        let grid: Vec<String> = eps_grid().iter().map(|e| e.to_string()).collect();
        assert_eq!(grid, ["1/2", "1/8", "1/32", "1/128", "1/512"]);
        let r = |s: &str| s.parse::<Rational>().unwrap();
        assert_eq!(resolution_modes(r("0.1"), r("1/8")), 1000);
        assert_eq!(resolution_modes(r("0.1"), r("1/2")), 2500);
        assert_eq!(resolution_modes(r("1"), r("1/2")), 1000);
        assert_eq!(resolution_modes(r("1"), r("1/8")), 100);
        assert_eq!(resolution_modes(r("10"), r("1/2")), 100);
    }

    #[test]
    fn solving_at_time_zero_returns_the_projection() {
        let solver = Solver::<f64>::new(Precision::DOUBLE);
        let ic = InitialCondition::G3;
        let eps = Rational::integer(1);
        let u = solver.solve(&ic, 1, eps, 4, Rational::integer(0)).unwrap();
        assert_eq!(u, solver.initial_state(&ic, 1, 4).unwrap());
    }
}
