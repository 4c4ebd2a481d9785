use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use serde_json::{json, Value};

use quasispec_core::arithmetic::{resonance_repulsion_check, resonances, Frequency, Precision};
use quasispec_core::cocycle::lyapunov;
use quasispec_core::conjugation::reduction::ReductionStep;
use quasispec_core::conjugation::{
    perturbed_schrodinger, schrodinger_reduction, tx_asymptotics_check, tx_bruteforce, tx_closed_form, BandFunction,
    MatFunction, TriangularCocycle,
};
use quasispec_core::io::{
    write_rows, CsvRecord, Format, LyapunovRow, MFunctionRow, ResonanceRow, TxRow,
};
use quasispec_core::potential::{Orbit, Potential};
use quasispec_core::spectral::{
    energy_grid, fit_rows, gap_edges, holder_rows, ids, label_distance, spectral_range, thouless_check, IdsMethod,
    IdsTable,
};
use quasispec_core::subordinacy::{geometric_k_list, k_for_eps, p_ladder, profile_rows, JL_CONSTANT};
use quasispec_core::weyl::{m_triple, WeylOptions};
use quasispec_core::{Error, Result};

use crate::{Command, Common, GapsArgs, IdsArgs, ReduceArgs};

/// Smallest `Im z` accepted without `--allow-tiny-eps`.
pub const TINY_EPS: f64 = 1e-6;

pub struct Context {
    pub freq: Frequency,
    pub orbit: Orbit,
    pub potential: Potential,
    pub theta: f64,
    pub weyl: WeylOptions,
    pub allow_tiny_eps: bool,
}

impl Context {
    pub fn new(common: &Common, precision: Precision) -> Result<Self> {
        let freq = Frequency::parse(&common.alpha, common.cf_depth, precision)?;
        let orbit = Orbit::new(&freq);
        if !common.theta.is_finite() {
            return Err(invalid("theta must be finite"));
        }
        if !(common.tol > 0.0 && common.tol < 1.0) {
            return Err(invalid("--tol must lie in (0, 1)"));
        }
        Ok(Context {
            freq,
            orbit,
            potential: parse_potential(common)?,
            theta: common.theta,
            weyl: WeylOptions::with_tol(common.tol),
            allow_tiny_eps: common.allow_tiny_eps,
        })
    }

    fn check_eps(&self, eps: f64) -> Result<()> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid("eps must be positive"));
        }
        if eps < TINY_EPS && !self.allow_tiny_eps {
            return Err(invalid(format!(
                "eps = {eps:e} is below {TINY_EPS:e}; pass --allow-tiny-eps to run anyway"
            )));
        }
        Ok(())
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn parse_potential(common: &Common) -> Result<Potential> {
    if let Some(path) = &common.potential_json {
        let text = std::fs::read_to_string(path)?;
        return serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())));
    }
    match common.potential.to_ascii_lowercase().as_str() {
        "amo" => Potential::amo(common.lambda),
        "free" => Ok(Potential::free()),
        "trigpoly" => {
            let spec = common
                .coeffs
                .as_deref()
                .ok_or_else(|| invalid("--potential trigpoly needs --coeffs"))?;
            Potential::trig_poly(&parse_coeffs(spec)?)
        }
        other => Err(invalid(format!("unknown potential '{other}' (expected amo, free or trigpoly)"))),
    }
}

/// `k:re[:im],...`
fn parse_coeffs(spec: &str) -> Result<Vec<(i64, Complex64)>> {
    spec.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|term| {
            let parts: Vec<&str> = term.trim().split(':').collect();
            let bad = || invalid(format!("bad coefficient '{term}' (expected k:re or k:re:im)"));
            if parts.len() < 2 || parts.len() > 3 {
                return Err(bad());
            }
            let k = parts[0].parse::<i64>().map_err(|_| bad())?;
            let re = parts[1].parse::<f64>().map_err(|_| bad())?;
            let im = match parts.get(2) {
                Some(s) => s.parse::<f64>().map_err(|_| bad())?,
                None => 0.0,
            };
            Ok((k, Complex64::new(re, im)))
        })
        .collect()
}

/// A single energy `E` or a grid `lo:hi:points`.
pub fn parse_energies(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| invalid(format!("bad energy '{s}'")))
    };
    match parts.as_slice() {
        [e] => Ok(vec![num(e)?]),
        [lo, hi, n] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let n = n
                .parse::<usize>()
                .map_err(|_| invalid(format!("bad point count '{n}'")))?;
            if !(hi > lo) || n < 2 {
                return Err(invalid("energy grid needs lo < hi and at least two points"));
            }
            Ok(energy_grid(lo, hi, n))
        }
        _ => Err(invalid(format!("bad energy spec '{spec}' (expected E or lo:hi:points)"))),
    }
}

/// Columns drawn by the gnuplot stub.
pub struct Plot {
    pub x: &'static str,
    pub y: &'static str,
    pub logx: bool,
    pub logy: bool,
}

type TableWriter = Box<dyn Fn(Format, &mut dyn Write) -> Result<()>>;

pub struct Table {
    pub rows: usize,
    pub write: TableWriter,
    pub plot: Plot,
}

impl Table {
    fn new<R: CsvRecord + 'static>(rows: Vec<R>, plot: Plot) -> Self {
        Table {
            rows: rows.len(),
            write: Box::new(move |format, out| write_rows(&rows, format, out)),
            plot,
        }
    }
}

/// Result of a command: the table (possibly partial), a summary for the
/// manifest, the failure if any, and extra artifacts keyed by file suffix.
pub struct Outcome {
    pub table: Table,
    pub summary: Value,
    pub error: Option<Error>,
    pub extra: Vec<(&'static str, String)>,
}

impl Outcome {
    fn new(table: Table, summary: Value, error: Option<Error>) -> Self {
        Outcome {
            table,
            summary,
            error,
            extra: Vec::new(),
        }
    }
}

pub fn dispatch(cmd: &Command, ctx: &Context) -> Result<Outcome> {
    match cmd {
        Command::Resonances(a) => {
            let rs = resonances(&ctx.freq, ctx.theta, a.eps0, a.scan_limit)?;
            let rows: Vec<ResonanceRow> = rs
                .indices
                .iter()
                .zip(&rs.distances)
                .enumerate()
                .map(|(j, (&n, &distance))| ResonanceRow { j, n, distance })
                .collect();
            let repulsion = resonance_repulsion_check(&rs, &ctx.freq);
            let summary = json!({ "count": rows.len(), "repulsion": repulsion });
            let plot = Plot { x: "n", y: "distance", logx: false, logy: true };
            Ok(Outcome::new(Table::new(rows, plot), summary, None))
        }
        Command::Lyapunov(a) => {
            let energies = energies_or_range(a.energy.e.as_deref(), &ctx.potential, 201)?;
            let mut rows = Vec::with_capacity(energies.len());
            let mut error = None;
            for &e in &energies {
                match lyapunov(e, &ctx.potential, ctx.orbit, a.n, a.phases) {
                    Ok(l) => rows.push(LyapunovRow { e, n: a.n, lyapunov: l }),
                    Err(err) if !err.is_numerical() => return Err(err),
                    Err(err) => {
                        error = Some(err);
                        break;
                    }
                }
            }
            let summary = json!({ "energies": energies.len() });
            let plot = Plot { x: "E", y: "lyapunov", logx: false, logy: false };
            Ok(Outcome::new(Table::new(rows, plot), summary, error))
        }
        Command::Mfunction(a) => {
            ctx.check_eps(a.eps)?;
            let energies = energies_or_range(a.energy.e.as_deref(), &ctx.potential, 201)?;
            let mut rows = Vec::with_capacity(energies.len());
            let mut error = None;
            for &e in &energies {
                match m_triple(Complex64::new(e, a.eps), &ctx.potential, ctx.orbit, ctx.theta, &ctx.weyl) {
                    Ok(t) => rows.push(MFunctionRow {
                        e,
                        eps: a.eps,
                        mplus_re: t.m_plus.re(),
                        mplus_im: t.m_plus.im(),
                        mminus_re: t.m_minus.re(),
                        mminus_im: t.m_minus.im(),
                        big_m_re: t.big_m.re(),
                        big_m_im: t.big_m.im(),
                        est_error: t.est_error,
                        depth: t.depth,
                    }),
                    Err(err) if !err.is_numerical() => return Err(err),
                    Err(err) => {
                        error = Some(err);
                        break;
                    }
                }
            }
            let summary = json!({ "energies": energies.len() });
            let plot = Plot { x: "E", y: "M_im", logx: false, logy: true };
            Ok(Outcome::new(Table::new(rows, plot), summary, error))
        }
        Command::Subordinacy(a) => {
            if a.k_max == 0 || !(a.k_ratio > 1.0) || !(a.slack >= 0.0 && a.slack < 1.0) {
                return Err(invalid("need k_max >= 1, k_ratio > 1 and slack in [0, 1)"));
            }
            let ladder = p_ladder(a.e, &ctx.potential, ctx.orbit, ctx.theta, a.k_max)?;
            let k_cap = if ctx.allow_tiny_eps {
                a.k_max
            } else {
                k_for_eps(&ladder, TINY_EPS)
            };
            if k_cap == 0 {
                return Err(invalid("eps_1 is already below 1e-6; pass --allow-tiny-eps"));
            }
            let k_list = geometric_k_list(k_cap, a.k_ratio);
            let (rows, error) = profile_rows(a.e, &ctx.potential, ctx.orbit, ctx.theta, &k_list, &ctx.weyl);
            if let Some(err) = &error {
                if rows.is_empty() && !err.is_numerical() {
                    return Err(err.clone());
                }
            }
            let lo = (1.0 - a.slack) / JL_CONSTANT;
            let hi = (1.0 + a.slack) * JL_CONSTANT;
            let violations = rows.iter().filter(|r| !(r.ratio_jl >= lo && r.ratio_jl <= hi)).count();
            let summary = json!({
                "k_cap": k_cap,
                "bracket": [lo, hi],
                "violations": violations,
                "ratio_blabl_max": rows.iter().map(|r| r.ratio_blabl).fold(0.0, f64::max),
                "ratio_blabl_min": rows.iter().map(|r| r.ratio_blabl).fold(f64::INFINITY, f64::min),
            });
            let plot = Plot { x: "k", y: "ratio_jl", logx: true, logy: true };
            Ok(Outcome::new(Table::new(rows, plot), summary, error))
        }
        Command::Holder(a) => {
            ctx.check_eps(a.eps_min.min(a.eps_max))?;
            let (rows, error) = holder_rows(
                a.e,
                &ctx.potential,
                ctx.orbit,
                ctx.theta,
                (a.eps_max, a.eps_min),
                a.points,
                &ctx.weyl,
            );
            if let Some(err) = &error {
                if rows.is_empty() && !err.is_numerical() {
                    return Err(err.clone());
                }
            }
            let summary = if error.is_none() {
                let fit = fit_rows(a.e, ctx.theta, rows.clone())?;
                json!({
                    "slope": fit.slope,
                    "intercept": fit.intercept,
                    "rms": fit.rms,
                    "scaled_min": fit.scaled_min,
                    "scaled_max": fit.scaled_max,
                })
            } else {
                Value::Null
            };
            let plot = Plot { x: "eps", y: "w", logx: true, logy: true };
            Ok(Outcome::new(Table::new(rows, plot), summary, error))
        }
        Command::Ids(a) => {
            let table = ids_table(a, ctx)?;
            let summary = json!({ "size": table.size, "method": table.method, "resolution": table.resolution() });
            let plot = Plot { x: "E", y: "N", logx: false, logy: false };
            Ok(Outcome::new(Table::new(table.rows(), plot), summary, None))
        }
        Command::Gaps(a) => gaps(a, ctx),
        Command::Thouless(a) => {
            let table = ids_table(&a.ids, ctx)?;
            let checks = match a.check.as_deref() {
                Some(s) => parse_energies(s)?,
                None => {
                    let (lo, hi) = spectral_range(&ctx.potential);
                    energy_grid(lo, hi, 41)
                }
            };
            let mut rows = Vec::with_capacity(checks.len());
            let mut error = None;
            for &e in &checks {
                match lyapunov(e, &ctx.potential, ctx.orbit, a.n, a.lyapunov_phases) {
                    Ok(l) => rows.push(thouless_check(e, &table, l)),
                    Err(err) if !err.is_numerical() => return Err(err),
                    Err(err) => {
                        error = Some(err);
                        break;
                    }
                }
            }
            let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
            let summary = json!({ "max_residual": worst, "ids_size": table.size });
            let plot = Plot { x: "E", y: "residual", logx: false, logy: false };
            Ok(Outcome::new(Table::new(rows, plot), summary, error))
        }
        Command::TxOracle(a) => {
            let tc = TriangularCocycle::new(ctx.theta, ctx.freq.alpha(), a.r, Complex64::new(a.t_hat, a.t_hat_im), a.k)?;
            let closed = tx_closed_form(&tc, a.x);
            let brute = tx_bruteforce(&tc, a.x)?;
            let rel_error = closed.max_rel_error(&brute, a.k);
            let asymptotics = if a.k >= 2 {
                serde_json::to_value(tx_asymptotics_check(&tc, a.x)?).unwrap_or(Value::Null)
            } else {
                Value::Null
            };
            let summary = json!({
                "rel_error": rel_error,
                "delta": tc.delta(),
                "asymptotics": asymptotics,
            });
            let rows = vec![TxRow::new("closed", a.k, &closed), TxRow::new("brute", a.k, &brute)];
            let plot = Plot { x: "k", y: "normX", logx: false, logy: false };
            Ok(Outcome::new(Table::new(rows, plot), summary, None))
        }
        Command::Reduce(a) => reduce(a, ctx),
    }
}

fn energies_or_range(spec: Option<&str>, v: &Potential, points: usize) -> Result<Vec<f64>> {
    match spec {
        Some(s) => parse_energies(s),
        None => {
            let (lo, hi) = spectral_range(v);
            Ok(energy_grid(lo, hi, points))
        }
    }
}

fn ids_table(a: &IdsArgs, ctx: &Context) -> Result<IdsTable> {
    let grid = energies_or_range(a.energy.e.as_deref(), &ctx.potential, a.points)?;
    let method = match a.method.to_ascii_lowercase().as_str() {
        "box" => IdsMethod::FiniteBox { theta: ctx.theta },
        "average" => IdsMethod::PhaseAverage { phases: a.phases },
        other => return Err(invalid(format!("unknown IDS method '{other}' (expected box or average)"))),
    };
    ids(&ctx.potential, ctx.orbit, &grid, method, a.size)
}

fn gaps(a: &GapsArgs, ctx: &Context) -> Result<Outcome> {
    let table = ids_table(&a.ids, ctx)?;
    let tol = a.plateau_tol.unwrap_or(0.5 / table.size as f64);
    if !(tol > 0.0) {
        return Err(invalid("plateau tolerance must be positive"));
    }
    let gaps = gap_edges(&table, tol);
    let labels: Vec<Value> = gaps
        .iter()
        .map(|g| {
            let (k, d) = label_distance(g.n_plateau, &ctx.freq, a.label_max);
            json!({ "label": k, "distance": d })
        })
        .collect();
    let summary = json!({ "count": gaps.len(), "plateau_tol": tol, "labels": labels });
    let plot = Plot { x: "E_left", y: "N_plateau", logx: false, logy: false };
    Ok(Outcome::new(Table::new(gaps, plot), summary, None))
}

/// Traceless `w` with real-symmetric entries of majorant norm `size`.
fn builtin_perturbation(size: f64, band: f64) -> Result<MatFunction> {
    let sym = |modes: &[(i64, f64, f64)]| {
        let mut m = BTreeMap::new();
        for &(k, re, im) in modes {
            m.insert(k, Complex64::new(re, im));
            if k != 0 {
                m.insert(-k, Complex64::new(re, -im));
            }
        }
        BandFunction::new(m, band)
    };
    let w1 = sym(&[(1, 0.4, 0.12)])?;
    let w2 = sym(&[(0, 0.2, 0.0), (2, -0.3, -0.09)])?;
    let w3 = sym(&[(0, 0.5, 0.0), (3, 0.1, 0.03)])?;
    let mut w = MatFunction::new(w1.clone(), w2, w3, w1.scale((-1.0).into()));
    let s = Complex64::from(size / w.norm());
    w.entries.iter_mut().for_each(|e| *e = e.scale(s));
    Ok(w)
}

fn reduce(a: &ReduceArgs, ctx: &Context) -> Result<Outcome> {
    if !(a.band > 0.0 && a.size > 0.0 && a.reduce_tol > 0.0) {
        return Err(invalid("band, size and reduce-tol must be positive"));
    }
    let v = ctx.potential.energy_symbol(a.e);
    let cocycle = match &a.cocycle {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<MatFunction>(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?
        }
        None => perturbed_schrodinger(&v, &builtin_perturbation(a.size, a.band)?, 256)?,
    };
    let plot = Plot { x: "iteration", y: "w_norm", logx: false, logy: true };
    let r = match schrodinger_reduction(&cocycle, &v, ctx.freq.alpha(), a.band, a.max_iter, a.reduce_tol) {
        Ok(r) => r,
        Err(err) if err.is_numerical() => {
            return Ok(Outcome::new(Table::new(Vec::<ReductionStep>::new(), plot), Value::Null, Some(err)));
        }
        Err(err) => return Err(err),
    };
    let error = (!r.converged).then(|| Error::NoConvergence {
        depth_cap: a.max_iter,
        spread: r.steps.last().map_or(f64::NAN, |s| s.w_norm),
    });
    let summary = json!({
        "converged": r.converged,
        "iterations": r.iterations,
        "residual": r.residual,
        "contraction_constant": r.contraction_constant,
        "inverse_bound": r.inverse_bound,
        "v_asymmetry": r.v_asymmetry,
        "v_out": r.v_out,
    });
    let b = serde_json::to_string_pretty(&r.b).map_err(|e| Error::Io(e.to_string()))? + "\n";
    let mut out = Outcome::new(Table::new(r.steps, plot), summary, error);
    out.extra.push(("B.json", b));
    Ok(out)
}
