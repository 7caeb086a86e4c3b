use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use kinetic_pn::bigfloat::{Precision, Real};
use kinetic_pn::error::{Error, Result};
use kinetic_pn::error_analysis::{
    coefficient_table, moment_table, ratio_profile, total_table, ConvergenceTable, RatioQuantity, SweepConfig,
};
use kinetic_pn::initial_conditions::InitialCondition;
use kinetic_pn::moment_system::{ModelConfig, Rational, REFERENCE_ORDER};
use kinetic_pn::solver::{eps_grid, resolution_modes, Solver};
use kinetic_pn::theory_bounds::{a_sequence, write_reports, BoundConstants, BoundEvaluator};
use serde_json::{json, Value};

use crate::{BoundsArgs, Command, FigureKind, RatioKind, SolveArgs, SweepArgs, TableKind};

/// What a command produced: its configuration snapshot, the files written
/// and the directory receiving the manifest.
pub struct RunRecord {
    pub config: Value,
    pub outputs: Vec<PathBuf>,
    pub run_dir: PathBuf,
}

pub fn execute<R: Real>(command: &Command, prec: Precision, digits: usize) -> Result<RunRecord> {
    match command {
        Command::Solve(args) => solve::<R>(args, prec),
        Command::Table { kind } => table::<R>(kind, prec, digits),
        Command::Figure { kind: FigureKind::Ratio { sweep, quantity, max_order, eps } } => {
            ratio::<R>(sweep, *quantity, *max_order, eps.as_deref(), prec, digits)
        }
        Command::Figure { kind: FigureKind::AnRatio { s, nmax, cutoff, out_dir } } => {
            an_ratio::<R>(*s, *nmax, *cutoff, out_dir, prec, digits)
        }
        Command::Bounds(args) => bounds::<R>(args, prec, digits),
    }
}

/// `1/32` becomes `1-32` so that values can appear in file names.
fn tag(q: Rational) -> String {
    q.to_string().replace('/', "-")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<PathBuf> {
    let mut out = create(path)?;
    body(&mut out)?;
    out.flush()?;
    Ok(path.to_path_buf())
}

fn snapshot(config: &ModelConfig) -> Value {
    json!({
        "order": config.order,
        "eps": config.eps.to_string(),
        "modes": config.modes,
        "ref_order": config.ref_order,
        "precision": config.precision.bits(),
        "times": config.times.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
    })
}

fn validated(order: usize, eps: Rational, modes: usize, t: Rational, prec: Precision) -> Result<ModelConfig> {
    let config = ModelConfig { order, eps, modes, ref_order: REFERENCE_ORDER, precision: prec, times: vec![t] };
    config.validate()?;
    Ok(config)
}

fn solve<R: Real>(args: &SolveArgs, prec: Precision) -> Result<RunRecord> {
    let ic = InitialCondition::from_spec(&args.ic)?;
    let modes = args.modes.unwrap_or_else(|| resolution_modes(args.t, args.eps));
    let config = validated(args.order, args.eps, modes, args.t, prec)?;
    let state = Solver::<R>::new(prec).solve(&ic, args.order, args.eps, modes, args.t)?;
    let path = write_file(&args.out, |out| state.write_table(out, prec))?;
    let run_dir = args.out.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(RunRecord { config: json!({ "command": "solve", "ic": ic.name(), "model": snapshot(&config) }), outputs: vec![path], run_dir })
}

fn sweep_config(args: &SweepArgs, eps: Vec<Rational>) -> Result<SweepConfig> {
    if !args.t.is_positive() && args.t != Rational::integer(0) {
        return Err(Error::Config(format!("negative time {}", args.t)));
    }
    if args.modes == Some(0) {
        return Err(Error::Config("Fourier cutoff must be at least 1".into()));
    }
    Ok(SweepConfig { eps, t: args.t, modes: args.modes, ref_order: REFERENCE_ORDER })
}

fn sweep_json(sweep: &SweepConfig) -> Value {
    json!({
        "eps": sweep.eps.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        "t": sweep.t.to_string(),
        "modes": sweep.eps.iter().map(|&e| sweep.modes_for(e)).collect::<Vec<_>>(),
        "ref_order": sweep.ref_order,
    })
}

fn check_order(order: usize, what: &str) -> Result<()> {
    if order < 1 || order >= REFERENCE_ORDER {
        return Err(Error::Config(format!("{what} = {order} must lie in 1..{REFERENCE_ORDER}")));
    }
    Ok(())
}

fn table<R: Real>(kind: &TableKind, prec: Precision, digits: usize) -> Result<RunRecord> {
    let (args, name, order) = match kind {
        TableKind::Total { sweep, max_order } => (sweep, "total", *max_order),
        TableKind::Moment { sweep, order } => (sweep, "moment", *order),
        TableKind::Coefficient { sweep, order } => (sweep, "coefficient", *order),
    };
    check_order(order, if name == "total" { "Nmax" } else { "N" })?;
    let ic = InitialCondition::from_spec(&args.ic)?;
    let sweep = sweep_config(args, eps_grid())?;
    let solver = Solver::<R>::new(prec);
    let table = match kind {
        TableKind::Total { .. } => total_table(&solver, &ic, &(1..=order).collect::<Vec<_>>(), &sweep)?,
        TableKind::Moment { .. } => moment_table(&solver, &ic, order, &sweep)?,
        TableKind::Coefficient { .. } => coefficient_table(&solver, &ic, order, &sweep)?,
    };
    let stem = format!("table_{name}_{}_t{}", ic.name(), tag(sweep.t));
    let outputs = write_table_files(&table, &args.out_dir, &stem, digits)?;
    let config = json!({ "command": format!("table {name}"), "ic": ic.name(), "order": order, "sweep": sweep_json(&sweep), "precision": prec.bits() });
    Ok(RunRecord { config, outputs, run_dir: args.out_dir.clone() })
}

/// Markdown with error and order columns side by side, then a rounded and a full-precision CSV per column.
fn write_table_files(table: &ConvergenceTable, dir: &Path, stem: &str, digits: usize) -> Result<Vec<PathBuf>> {
    let mut outputs = vec![write_file(&dir.join(format!("{stem}.md")), |out| table.write_markdown(out, digits))?];
    for (i, column) in table.columns.iter().enumerate() {
        let base = format!("{stem}_{}", column.label);
        outputs.push(write_file(&dir.join(format!("{base}.csv")), |out| table.write_csv(i, out, Some(digits)))?);
        outputs.push(write_file(&dir.join(format!("{base}.raw.csv")), |out| table.write_csv(i, out, None))?);
    }
    Ok(outputs)
}

fn ratio<R: Real>(
    args: &SweepArgs,
    kind: RatioKind,
    max_order: usize,
    eps: Option<&[Rational]>,
    prec: Precision,
    digits: usize,
) -> Result<RunRecord> {
    let (quantity, label) = match kind {
        RatioKind::Total => (RatioQuantity::Total, "total"),
        RatioKind::M0 => (RatioQuantity::Moment(0), "m0"),
        RatioKind::M1 => (RatioQuantity::Moment(1), "m1"),
        RatioKind::M2 => (RatioQuantity::Moment(2), "m2"),
    };
    if max_order + 1 >= REFERENCE_ORDER {
        return Err(Error::Config(format!("Nmax = {max_order} must stay below {}", REFERENCE_ORDER - 1)));
    }
    let ic = InitialCondition::from_spec(&args.ic)?;
    let grid = eps.map_or_else(eps_grid, <[Rational]>::to_vec);
    if let Some(e) = grid.iter().find(|e| !e.is_positive() || e.num() > e.den()) {
        return Err(Error::Config(format!("scaling parameter {e} must lie in (0, 1]")));
    }
    let sweep = sweep_config(args, grid)?;
    let solver = Solver::<R>::new(prec);
    let mut outputs = Vec::new();
    for &e in &sweep.eps {
        let rows = ratio_profile(&solver, &ic, e, max_order, quantity, &sweep)?;
        let path = args.out_dir.join(format!("ratio_{}_t{}_{label}_eps{}.csv", ic.name(), tag(sweep.t), tag(e)));
        outputs.push(write_file(&path, |out| {
            writeln!(out, "N,value,below_floor")?;
            for row in &rows {
                writeln!(out, "{},{},{}", row.order, row.normalized.to_sci(digits), row.below_floor)?;
            }
            Ok(())
        })?);
    }
    let config = json!({
        "command": "figure ratio", "ic": ic.name(), "quantity": label, "Nmax": max_order,
        "sweep": sweep_json(&sweep), "precision": prec.bits(),
    });
    Ok(RunRecord { config, outputs, run_dir: args.out_dir.clone() })
}

fn an_ratio<R: Real>(s: Rational, nmax: u32, cutoff: usize, dir: &Path, prec: Precision, digits: usize) -> Result<RunRecord> {
    if !s.is_positive() || cutoff == 0 || nmax == 0 {
        return Err(Error::Config("an-ratio needs s > 0, nmax >= 1 and K >= 1".into()));
    }
    let consts = BoundConstants::<R>::new(prec)?;
    let sr = s.to_real::<R>(prec);
    let seq = a_sequence(&consts, sr, nmax + 1, cutoff)?;
    let path = dir.join(format!("an_ratio_s{}_K{cutoff}.csv", tag(s)));
    let path = write_file(&path, |out| {
        writeln!(out, "n,ratio,reference")?;
        for n in 0..=nmax as usize {
            let ratio = seq[n + 1].ratio(seq[n])?;
            let reference = R::from_i64(n as i64 + 1, prec).checked_div(sr)?;
            writeln!(out, "{n},{},{}", ratio.to_sci(digits), reference.to_sci(digits))?;
        }
        Ok(())
    })?;
    let config = json!({ "command": "figure an-ratio", "s": s.to_string(), "nmax": nmax, "K": cutoff, "precision": prec.bits() });
    Ok(RunRecord { config, outputs: vec![path], run_dir: dir.to_path_buf() })
}

fn bounds<R: Real>(args: &BoundsArgs, prec: Precision, digits: usize) -> Result<RunRecord> {
    let ic = InitialCondition::from_spec(&args.ic)?;
    let modes = args.modes.unwrap_or_else(|| resolution_modes(args.t, args.eps));
    let config = validated(args.order, args.eps, modes, args.t, prec)?;
    if !args.t.is_positive() {
        return Err(Error::Config("bounds need t > 0".into()));
    }
    let solver = Solver::<R>::new(prec);
    let g = solver.initial_state(&ic, 0, modes)?;
    let evaluator = BoundEvaluator::for_condition(&ic, &g, prec)?;
    let reference = solver.solve(&ic, REFERENCE_ORDER, args.eps, modes, args.t)?;
    let approx = solver.solve(&ic, args.order, args.eps, modes, args.t)?;
    let mut reports = evaluator.theorem_bounds(&reference, &approx, args.t, args.eps)?;
    reports.extend(evaluator.energy_decay_check(&approx, args.t, args.eps)?);
    reports.extend(evaluator.coefficient_check(&approx, args.t, args.eps)?);
    let path = args.out_dir.join(format!("bounds_{}_N{}_eps{}_t{}.csv", ic.name(), args.order, tag(args.eps), tag(args.t)));
    let path = write_file(&path, |out| write_reports(&reports, out, digits))?;
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        eprintln!("{failed} of {} bounds exceeded", reports.len());
    }
    let config = json!({
        "command": "bounds", "ic": ic.name(), "model": snapshot(&config),
        "hypothesis_unmet": evaluator.hypothesis_unmet(),
    });
    Ok(RunRecord { config, outputs: vec![path], run_dir: args.out_dir.clone() })
}
