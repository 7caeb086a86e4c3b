//! Errors against the reference solution, observed orders, convergence
//! tables and error-ratio profiles.
//!
//! Reported norms are per-period root-mean-square values, the absolute
//! `L^2(dmu dx)` norm divided by `sqrt(2 pi)`.

use std::io::Write;

use crate::bigfloat::{Cplx, ExtendedReal, Precision, Real};
use crate::error::{Error, Result};
use crate::initial_conditions::InitialCondition;
use crate::moment_system::{Rational, SpectralState};
use crate::solver::{resolution_modes, Solver};

/// Wavenumbers in reduction order: `0, 1, -1, 2, -2, ...`.
fn reduction_order(modes: usize) -> impl Iterator<Item = i64> {
    std::iter::once(0).chain((1..=modes as i64).flat_map(|k| [k, -k]))
}

fn sum_squares<R: Real>(prec: Precision, values: &[Cplx<R>]) -> R {
    R::dot(prec, values.iter().flat_map(|v| [(&v.re, &v.re), (&v.im, &v.im)]))
}

fn per_period<R: Real>(absolute: R, prec: Precision) -> Result<R> {
    let sqrt_2pi = (R::pi(prec) * R::from_i64(2, prec)).sqrt()?;
    Ok(absolute.checked_div(sqrt_2pi)?)
}

fn check_compatible<R: Real>(reference: &SpectralState<R>, approx: &SpectralState<R>) -> Result<()> {
    if reference.modes() != approx.modes() {
        return Err(Error::Dimension(format!(
            "reference has {} Fourier modes, approximation {}",
            reference.modes(),
            approx.modes()
        )));
    }
    if reference.order() < approx.order() {
        return Err(Error::Dimension(format!(
            "reference order {} below approximation order {}",
            reference.order(),
            approx.order()
        )));
    }
    Ok(())
}

/// Differences `ref - pad(approx)` for moments `ls`, in reduction order.
fn differences<R: Real>(
    reference: &SpectralState<R>,
    approx: &SpectralState<R>,
    ls: std::ops::RangeInclusive<usize>,
    prec: Precision,
) -> Vec<Cplx<R>> {
    let mut out = Vec::new();
    for l in ls {
        for k in reduction_order(reference.modes()) {
            let a = if l <= approx.order() { approx.get(l, k) } else { Cplx::zero(prec) };
            out.push(reference.get(l, k) - a);
        }
    }
    out
}

/// `sqrt(sum_{l,k} |ref - pad(approx)|^2)`, the absolute `L^2(dmu dx)` norm.
pub fn l2_error_absolute<R: Real>(reference: &SpectralState<R>, approx: &SpectralState<R>, prec: Precision) -> Result<R> {
    check_compatible(reference, approx)?;
    Ok(sum_squares(prec, &differences(reference, approx, 0..=reference.order(), prec)).sqrt()?)
}

pub fn l2_error<R: Real>(reference: &SpectralState<R>, approx: &SpectralState<R>, prec: Precision) -> Result<R> {
    per_period(l2_error_absolute(reference, approx, prec)?, prec)
}

/// Absolute `L^2(dx)` error in the single moment `l`.
pub fn moment_error_absolute<R: Real>(
    reference: &SpectralState<R>,
    approx: &SpectralState<R>,
    l: usize,
    prec: Precision,
) -> Result<R> {
    check_compatible(reference, approx)?;
    if l > approx.order() {
        return Err(Error::Range(format!("moment {l} above approximation order {}", approx.order())));
    }
    Ok(sum_squares(prec, &differences(reference, approx, l..=l, prec)).sqrt()?)
}

/// Error in the single moment `l`.
pub fn moment_error<R: Real>(reference: &SpectralState<R>, approx: &SpectralState<R>, l: usize, prec: Precision) -> Result<R> {
    per_period(moment_error_absolute(reference, approx, l, prec)?, prec)
}

/// `||f_l||`, the norm of one moment.
pub fn coefficient_norm<R: Real>(state: &SpectralState<R>, l: usize, prec: Precision) -> Result<R> {
    if l > state.order() {
        return Err(Error::Range(format!("moment {l} above order {}", state.order())));
    }
    let values: Vec<Cplx<R>> = reduction_order(state.modes()).map(|k| state.get(l, k)).collect();
    per_period(sum_squares(prec, &values).sqrt()?, prec)
}

pub fn solution_norm<R: Real>(state: &SpectralState<R>, prec: Precision) -> Result<R> {
    let values: Vec<Cplx<R>> =
        (0..=state.order()).flat_map(|l| reduction_order(state.modes()).map(move |k| (l, k))).map(|(l, k)| state.get(l, k)).collect();
    per_period(sum_squares(prec, &values).sqrt()?, prec)
}

/// `(||eta||, ||xi||)`: the error split into the moments above the
/// approximation order, absent from it, and the error in the kept moments.
pub fn error_split<R: Real>(reference: &SpectralState<R>, approx: &SpectralState<R>, prec: Precision) -> Result<(R, R)> {
    check_compatible(reference, approx)?;
    let n = approx.order();
    let xi = sum_squares(prec, &differences(reference, approx, 0..=n, prec)).sqrt()?;
    let eta = if n < reference.order() {
        sum_squares(prec, &differences(reference, approx, n + 1..=reference.order(), prec)).sqrt()?
    } else {
        R::zero(prec)
    };
    Ok((per_period(eta, prec)?, per_period(xi, prec)?))
}

/// `log(coarse / fine) / log(ratio)`; `None` when either error vanishes.
pub fn observed_order<R: Real>(coarse: R, fine: R, ratio: f64) -> Option<f64> {
    if coarse.is_zero() || fine.is_zero() || ratio <= 1.0 {
        return None;
    }
    Some((coarse.log2_abs() - fine.log2_abs()) / ratio.log2())
}

/// `log2` of the smallest error distinguishable from rounding noise:
/// `10^(2 - p log10 2)` times the solution norm.
pub fn precision_floor_log2<R: Real>(prec: Precision, solution_norm: R) -> f64 {
    2.0 * std::f64::consts::LOG2_10 - prec.bits() as f64 + solution_norm.log2_abs()
}

/// Least-squares slope `q` of `log e = c - q log N`.
pub fn algebraic_rate_fit(errors_by_order: &[(usize, f64)]) -> Result<f64> {
    if errors_by_order.len() < 4 {
        return Err(Error::Range(format!("{} points; the fit needs at least 4", errors_by_order.len())));
    }
    if let Some((n, e)) = errors_by_order.iter().find(|(n, e)| *e <= 0.0 || *n == 0 || !e.is_finite()) {
        return Err(Error::Range(format!("cannot fit the error {e} at order {n}")));
    }
    let pts: Vec<(f64, f64)> = errors_by_order.iter().map(|&(n, e)| ((n as f64).ln(), e.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(-sxy / sxx)
}

/// Error quantity tracked by a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// `||f - f^N||` for each order.
    Total,
    /// `||xi_l||` for each moment of a fixed order.
    Moment { order: usize },
    /// `||f^N_l||` for each moment of a fixed order.
    Coefficient { order: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub eps: Rational,
    pub error: f64,
    pub log2: f64,
    /// Full-precision decimal value.
    pub raw: String,
    pub order: Option<f64>,
    pub below_floor: bool,
}

impl Cell {
    fn new<R: Real>(eps: Rational, value: R, floor_log2: f64, prec: Precision) -> Self {
        let log2 = if value.is_zero() { f64::NEG_INFINITY } else { value.log2_abs() };
        Cell {
            eps,
            error: value.to_f64(),
            log2,
            raw: value.to_sci(crate::bigfloat::digits_for_bits(prec.bits())),
            order: None,
            below_floor: log2 < floor_log2,
        }
    }

    /// The value rounded to `digits` significant digits, e.g. `5.21E-08`.
    pub fn formatted(&self, digits: usize) -> String {
        let p = Precision::MAX_BITS;
        ExtendedReal::parse_decimal(&self.raw, Precision::new(p).expect("valid"))
            .map(|v| v.to_sci_string(digits))
            .unwrap_or_else(|_| self.raw.clone())
    }

    pub fn order_text(&self) -> String {
        match (self.below_floor, self.order) {
            (true, _) => "below floor".into(),
            (false, Some(o)) => format!("{o:.2}"),
            (false, None) => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    /// `P3`, `xi2` or `f2`.
    pub label: String,
    pub order: usize,
    pub moment: Option<usize>,
    pub cells: Vec<Cell>,
}

impl Column {
    /// Orders between adjacent rows, skipped where either value is below the floor.
    fn fill_orders(&mut self) {
        for i in 1..self.cells.len() {
            let (prev, cur) = (&self.cells[i - 1], &self.cells[i]);
            if prev.below_floor || cur.below_floor || !prev.log2.is_finite() || !cur.log2.is_finite() {
                continue;
            }
            let ratio = prev.eps.to_f64() / cur.eps.to_f64();
            if ratio > 1.0 {
                let order = (prev.log2 - cur.log2) / ratio.log2();
                self.cells[i].order = Some(order);
            }
        }
    }

    pub fn cell(&self, eps: Rational) -> Option<&Cell> {
        self.cells.iter().find(|c| c.eps == eps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub ic: String,
    pub t: Rational,
    pub quantity: Quantity,
    pub columns: Vec<Column>,
}

impl ConvergenceTable {
    pub fn column(&self, label: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.label == label)
    }

    /// One block with header `eps,error,order`; `raw` selects full precision.
    pub fn write_csv(&self, column: usize, out: &mut impl Write, digits: Option<usize>) -> Result<()> {
        let col = self.columns.get(column).ok_or_else(|| Error::Range(format!("no column {column}")))?;
        writeln!(out, "eps,error,order")?;
        for cell in &col.cells {
            let value = match digits {
                Some(d) => cell.formatted(d),
                None => cell.raw.clone(),
            };
            let order = match (digits, cell.order) {
                (None, Some(o)) if !cell.below_floor => format!("{o}"),
                _ => cell.order_text(),
            };
            writeln!(out, "{},{},{}", cell.eps, value, order)?;
        }
        Ok(())
    }

    /// Aligned Markdown with one row per scaling parameter and an
    /// `error | order` pair per column.
    pub fn write_markdown(&self, out: &mut impl Write, digits: usize) -> Result<()> {
        let title = match self.quantity {
            Quantity::Total => "errors".to_string(),
            Quantity::Moment { order } => format!("moment errors of P{order}"),
            Quantity::Coefficient { order } => format!("moment norms of P{order}"),
        };
        writeln!(out, "### {} {}, t = {}", self.ic, title, self.t)?;
        writeln!(out)?;
        let mut header = vec!["eps".to_string()];
        for c in &self.columns {
            header.push(c.label.clone());
            header.push("order".into());
        }
        let mut rows = vec![header];
        let n_rows = self.columns.first().map_or(0, |c| c.cells.len());
        for i in 0..n_rows {
            let mut row = vec![self.columns[0].cells[i].eps.to_string()];
            for c in &self.columns {
                row.push(c.cells[i].formatted(digits));
                row.push(c.cells[i].order_text());
            }
            rows.push(row);
        }
        let widths: Vec<usize> =
            (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j].len()).max().unwrap_or(0)).collect();
        let line = |r: &[String]| {
            let cells: Vec<String> = r.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
            format!("| {} |", cells.join(" | "))
        };
        writeln!(out, "{}", line(&rows[0]))?;
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        writeln!(out, "|-{}-|", rule.join("-|-"))?;
        for r in &rows[1..] {
            writeln!(out, "{}", line(r))?;
        }
        Ok(())
    }
}

/// Where a sweep draws its Fourier cutoff and reference order from.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub eps: Vec<Rational>,
    pub t: Rational,
    /// Overrides the built-in resolution table.
    pub modes: Option<usize>,
    pub ref_order: usize,
}

impl SweepConfig {
    pub fn modes_for(&self, eps: Rational) -> usize {
        self.modes.unwrap_or_else(|| resolution_modes(self.t, eps))
    }
}

fn check_orders(orders: &[usize], ref_order: usize) -> Result<()> {
    if orders.is_empty() {
        return Err(Error::Config("empty sweep".into()));
    }
    if let Some(n) = orders.iter().find(|&&n| n < 1 || n >= ref_order) {
        return Err(Error::Config(format!("order {n} outside 1..{ref_order}")));
    }
    Ok(())
}

/// `||f - f^N||` for every order, one column per order.
pub fn total_table<R: Real>(solver: &Solver<R>, ic: &InitialCondition, orders: &[usize], sweep: &SweepConfig) -> Result<ConvergenceTable> {
    check_orders(orders, sweep.ref_order)?;
    let prec = solver.precision();
    let mut columns: Vec<Column> = orders
        .iter()
        .map(|&n| Column { label: format!("P{n}"), order: n, moment: None, cells: Vec::new() })
        .collect();
    for &eps in &sweep.eps {
        let modes = sweep.modes_for(eps);
        let reference = solver.solve(ic, sweep.ref_order, eps, modes, sweep.t)?;
        let floor = precision_floor_log2(prec, solution_norm(&reference, prec)?);
        for col in columns.iter_mut() {
            let approx = solver.solve(ic, col.order, eps, modes, sweep.t)?;
            col.cells.push(Cell::new(eps, l2_error(&reference, &approx, prec)?, floor, prec));
        }
    }
    columns.iter_mut().for_each(Column::fill_orders);
    Ok(ConvergenceTable { ic: ic.name().into(), t: sweep.t, quantity: Quantity::Total, columns })
}

fn per_moment_table<R: Real>(
    solver: &Solver<R>,
    ic: &InitialCondition,
    order: usize,
    sweep: &SweepConfig,
    quantity: Quantity,
) -> Result<ConvergenceTable> {
    check_orders(&[order], sweep.ref_order)?;
    let prec = solver.precision();
    let prefix = if let Quantity::Moment { .. } = quantity { "xi" } else { "f" };
    let mut columns: Vec<Column> = (0..=order)
        .map(|l| Column { label: format!("{prefix}{l}"), order, moment: Some(l), cells: Vec::new() })
        .collect();
    for &eps in &sweep.eps {
        let modes = sweep.modes_for(eps);
        let reference = solver.solve(ic, sweep.ref_order, eps, modes, sweep.t)?;
        let approx = solver.solve(ic, order, eps, modes, sweep.t)?;
        let floor = precision_floor_log2(prec, solution_norm(&reference, prec)?);
        for (l, col) in columns.iter_mut().enumerate() {
            let value = match quantity {
                Quantity::Coefficient { .. } => coefficient_norm(&approx, l, prec)?,
                _ => moment_error(&reference, &approx, l, prec)?,
            };
            col.cells.push(Cell::new(eps, value, floor, prec));
        }
    }
    columns.iter_mut().for_each(Column::fill_orders);
    Ok(ConvergenceTable { ic: ic.name().into(), t: sweep.t, quantity, columns })
}

/// `||xi_l||` for `l = 0..=order`.
pub fn moment_table<R: Real>(solver: &Solver<R>, ic: &InitialCondition, order: usize, sweep: &SweepConfig) -> Result<ConvergenceTable> {
    per_moment_table(solver, ic, order, sweep, Quantity::Moment { order })
}

/// `||f^N_l||` for `l = 0..=order`.
pub fn coefficient_table<R: Real>(
    solver: &Solver<R>,
    ic: &InitialCondition,
    order: usize,
    sweep: &SweepConfig,
) -> Result<ConvergenceTable> {
    per_moment_table(solver, ic, order, sweep, Quantity::Coefficient { order })
}

/// Which error a ratio profile follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioQuantity {
    Total,
    Moment(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub order: usize,
    pub raw: f64,
    /// `raw / eps` for the total error, `raw / eps^2` for moments.
    pub normalized: f64,
    /// Either error lies below the precision floor.
    pub below_floor: bool,
}

/// Ratios `e^{N+1} / e^N` from errors listed by consecutive order.
pub fn ratio_profile_from_errors(errors: &[(usize, f64, bool)], eps: Rational, quantity: RatioQuantity) -> Vec<RatioRow> {
    let scale = match quantity {
        RatioQuantity::Total => eps.to_f64(),
        RatioQuantity::Moment(_) => eps.to_f64() * eps.to_f64(),
    };
    errors
        .windows(2)
        .filter(|w| w[1].0 == w[0].0 + 1)
        .map(|w| {
            let raw = w[1].1 / w[0].1;
            RatioRow { order: w[0].0, raw, normalized: raw / scale, below_floor: w[0].2 || w[1].2 || !raw.is_finite() }
        })
        .collect()
}

/// Error ratios for `N = first..=max_order`, where `first` is 1 for the total
/// error and `max(1, l)` for moment `l`.
pub fn ratio_profile<R: Real>(
    solver: &Solver<R>,
    ic: &InitialCondition,
    eps: Rational,
    max_order: usize,
    quantity: RatioQuantity,
    sweep: &SweepConfig,
) -> Result<Vec<RatioRow>> {
    let first = match quantity {
        RatioQuantity::Total => 1,
        RatioQuantity::Moment(l) => l.max(1),
    };
    if max_order < first {
        return Err(Error::Config(format!("maximum order {max_order} below the first order {first}")));
    }
    check_orders(&[max_order + 1], sweep.ref_order)?;
    let prec = solver.precision();
    let modes = sweep.modes_for(eps);
    let reference = solver.solve(ic, sweep.ref_order, eps, modes, sweep.t)?;
    let floor = precision_floor_log2(prec, solution_norm(&reference, prec)?);
    let mut errors = Vec::new();
    for n in first..=max_order + 1 {
        let approx = solver.solve(ic, n, eps, modes, sweep.t)?;
        let e = match quantity {
            RatioQuantity::Total => l2_error(&reference, &approx, prec)?,
            RatioQuantity::Moment(l) => moment_error(&reference, &approx, l, prec)?,
        };
        let below = e.is_zero() || e.log2_abs() < floor;
        errors.push((n, e.to_f64(), below));
    }
    Ok(ratio_profile_from_errors(&errors, eps, quantity))
}

#[cfg(test)]
mod tests {
    use super::*;

    const D: Precision = Precision::DOUBLE;

    fn state(order: usize, modes: usize, f: impl Fn(usize, i64) -> f64) -> SpectralState<f64> {
        let mut s = SpectralState::zeros(order, modes, D);
        for k in s.wavenumbers() {
            for l in 0..=order {
                s.set(l, k, Cplx::new(f(l, k), 0.5 * f(l, k)));
            }
        }
        s
    }

    #[test]
    fn identical_states_have_zero_error() {
        let s = state(3, 2, |l, k| (l as f64 + 1.0) / (1.0 + k.abs() as f64));
        assert_eq!(l2_error(&s, &s, D).unwrap(), 0.0);
        assert_eq!(moment_error(&s, &s, 0, D).unwrap(), 0.0);
        assert!(moment_error(&s, &s, 4, D).is_err());
        let other_modes = state(3, 3, |_, _| 1.0);
        assert!(l2_error(&s, &other_modes, D).is_err());
    }

    #[test]
    fn padding_and_orthogonal_split() {
        let reference = state(6, 3, |l, k| 1.0 / ((l + 1) as f64 * (1.0 + (k * k) as f64)));
        let approx = state(2, 3, |l, k| 0.9 / ((l + 1) as f64 * (1.0 + (k * k) as f64)));
        let total = l2_error(&reference, &approx, D).unwrap();
        let (eta, xi) = error_split(&reference, &approx, D).unwrap();
        assert!(total <= eta + xi);
        assert!(((eta * eta + xi * xi) - total * total).abs() / (total * total) < 1e-14);
        let absolute = l2_error_absolute(&reference, &approx, D).unwrap();
        assert!((absolute / total - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn orders() {
        assert_eq!(observed_order(1.0, 1.0, 4.0), Some(0.0));
        let o = observed_order(2.60e-3, 1.60e-4, 4.0).unwrap();
        assert_eq!(format!("{o:.2}"), "2.01");
        // Tabulated orders come from unrounded errors; the rounded pair gives 7.993.
        let o = observed_order(9.48e-16, 1.46e-20, 4.0).unwrap();
        assert!((o - 8.00).abs() < 0.01, "{o}");
        assert_eq!(observed_order(0.0, 1.0, 4.0), None);
    }

    #[test]
    fn rate_fit() {
        let pts: Vec<(usize, f64)> = (1..=6).map(|n| (n, 3.0 / (n * n) as f64)).collect();
        assert!((algebraic_rate_fit(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert!(algebraic_rate_fit(&pts[..3]).is_err());
        assert!(algebraic_rate_fit(&[(1, 1.0), (2, 0.0), (3, 1.0), (4, 1.0)]).is_err());
    }

    #[test]
    fn ratio_rows() {
        let eps = Rational::new(1, 8).unwrap();
        let errs = vec![(1, 1e-3, false), (2, 1e-3, false), (3, 1e-3, false)];
        let rows = ratio_profile_from_errors(&errs, eps, RatioQuantity::Total);
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.raw == 1.0 && r.normalized == 8.0 && !r.below_floor));
        let rows = ratio_profile_from_errors(&[(1, 1e-3, false), (2, 1e-40, true)], eps, RatioQuantity::Moment(0));
        assert!(rows[0].below_floor);
        assert!((rows[0].normalized / 6.4e-36 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn floor_tracks_precision() {
        let f = precision_floor_log2(Precision::DEFAULT, 1.0f64);
        assert!((f * std::f64::consts::LOG10_2 - (2.0 - 256.0 * std::f64::consts::LOG10_2)).abs() < 1e-12);
    }

    #[test]
    fn table_emitters() {
        let eps: Vec<Rational> = ["1/2", "1/8", "1/32"].iter().map(|s| s.parse().unwrap()).collect();
        let values = [2.60e-3, 1.60e-4, 1e-300];
        let floor = -900.0;
        let mut col = Column {
            label: "P1".into(),
            order: 1,
            moment: None,
            cells: eps.iter().zip(values).map(|(&e, v)| Cell::new(e, v, floor, D)).collect(),
        };
        col.cells[2].below_floor = true;
        col.fill_orders();
        let table = ConvergenceTable { ic: "g1".into(), t: Rational::integer(1), quantity: Quantity::Total, columns: vec![col] };
        let mut csv = Vec::new();
        table.write_csv(0, &mut csv, Some(3)).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert_eq!(csv, "eps,error,order\n1/2,2.60E-03,\n1/8,1.60E-04,2.01\n1/32,1.00E-300,below floor\n");
        let mut md = Vec::new();
        table.write_markdown(&mut md, 3).unwrap();
        let md = String::from_utf8(md).unwrap();
        assert!(md.contains("| 1/8  | 1.60E-04  | 2.01        |"), "{md}");
    }
}
