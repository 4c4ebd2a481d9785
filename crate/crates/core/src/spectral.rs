//! Spectral measures: smoothed windows, local Hölder exponents, the
//! integrated density of states, gap detection and the Thouless formula.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arithmetic::Frequency;
use crate::cocycle::log_norm_real;
use crate::error::{invalid, Error, Result};
use crate::fit::{geometric_ladder, loglog_fit};
use crate::potential::{Orbit, Potential};
use crate::weyl::{m_triple, WeylOptions};

/// `w(E, eps) = 2 eps Im M(E + i eps)`, comparable to
/// `mu(E - eps, E + eps)` for the spectral measure of `e_0 + e_1`.
pub fn smoothed_window(e: f64, eps: f64, v: &Potential, orbit: Orbit, theta: f64, opts: &WeylOptions) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    let t = m_triple(Complex64::new(e, eps), v, orbit, theta, opts)?;
    Ok(2.0 * eps * t.big_m.im())
}

/// One point of a Hölder ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderRow {
    #[serde(rename = "E")]
    pub e: f64,
    pub eps: f64,
    pub w: f64,
    #[serde(rename = "ImM")]
    pub im_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub e: f64,
    pub theta: f64,
    pub rows: Vec<HolderRow>,
    /// Fitted exponent in `w ~ eps^slope`.
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
    /// Extremes of `Im M(E + i eps) eps^{1/2}` over the ladder.
    pub scaled_min: f64,
    pub scaled_max: f64,
}

impl HolderFit {
    pub fn scaled_ratio(&self) -> f64 {
        self.scaled_max / self.scaled_min
    }
}

/// Evaluates `w` on `points` geometrically spaced `eps` from `eps_range.0`
/// down to `eps_range.1` and fits `ln w` against `ln eps`.
pub fn holder_fit(
    e: f64,
    v: &Potential,
    orbit: Orbit,
    theta: f64,
    eps_range: (f64, f64),
    points: usize,
    opts: &WeylOptions,
) -> Result<HolderFit> {
    let (rows, err) = holder_rows(e, v, orbit, theta, eps_range, points, opts);
    if let Some(err) = err {
        return Err(err);
    }
    fit_rows(e, theta, rows)
}

/// Ladder rows in order of decreasing `eps`, stopping at the first failure.
pub fn holder_rows(
    e: f64,
    v: &Potential,
    orbit: Orbit,
    theta: f64,
    eps_range: (f64, f64),
    points: usize,
    opts: &WeylOptions,
) -> (Vec<HolderRow>, Option<Error>) {
    let (hi, lo) = (eps_range.0.max(eps_range.1), eps_range.0.min(eps_range.1));
    if !(lo > 0.0) || points < 2 || !e.is_finite() {
        return (
            Vec::new(),
            Some(invalid("need 0 < eps_min < eps_max, at least two points and a finite energy")),
        );
    }
    let ladder = geometric_ladder(hi, lo, points);
    let results: Vec<Result<HolderRow>> = ladder
        .par_iter()
        .map(|&eps| {
            let t = m_triple(Complex64::new(e, eps), v, orbit, theta, opts)?;
            Ok(HolderRow {
                e,
                eps,
                w: 2.0 * eps * t.big_m.im(),
                im_m: t.big_m.im(),
            })
        })
        .collect();
    let mut rows = Vec::with_capacity(points);
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(err) => return (rows, Some(err)),
        }
    }
    (rows, None)
}

pub fn fit_rows(e: f64, theta: f64, rows: Vec<HolderRow>) -> Result<HolderFit> {
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let w: Vec<f64> = rows.iter().map(|r| r.w).collect();
    let fit = loglog_fit(&eps, &w).ok_or_else(|| invalid("not enough ladder points to fit"))?;
    let scaled: Vec<f64> = rows.iter().map(|r| r.im_m * r.eps.sqrt()).collect();
    Ok(HolderFit {
        e,
        theta,
        slope: fit.slope,
        intercept: fit.intercept,
        rms: fit.rms,
        scaled_min: scaled.iter().copied().fold(f64::INFINITY, f64::min),
        scaled_max: scaled.iter().copied().fold(0.0, f64::max),
        rows,
    })
}

/// Estimator for the integrated density of states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum IdsMethod {
    /// Normalized eigenvalue count of the box `0..size` at phase `theta`.
    FiniteBox { theta: f64 },
    /// Average over `phases` uniform phases of the `e_0` spectral measure of
    /// the box `-size/2..size/2` centred on site 0.
    PhaseAverage { phases: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsTable {
    pub energies: Vec<f64>,
    pub values: Vec<f64>,
    pub method: IdsMethod,
    pub size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdsRow {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "N")]
    pub n: f64,
}

impl IdsTable {
    /// `N(E)` by linear interpolation, constant outside the table.
    pub fn value_at(&self, e: f64) -> f64 {
        let x = &self.energies;
        if e <= x[0] {
            return self.values[0];
        }
        if e >= x[x.len() - 1] {
            return self.values[x.len() - 1];
        }
        let i = x.partition_point(|&t| t <= e) - 1;
        let t = (e - x[i]) / (x[i + 1] - x[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    pub fn rows(&self) -> Vec<IdsRow> {
        self.energies
            .iter()
            .zip(&self.values)
            .map(|(&e, &n)| IdsRow { e, n })
            .collect()
    }

    /// Smallest plateau step that is not an artefact of box truncation: a
    /// Dirichlet box carries at most two edge states in each gap.
    pub fn resolution(&self) -> f64 {
        2.5 / self.size as f64
    }
}

/// Symmetric interval containing the spectrum with a margin of `0.5`.
pub fn spectral_range(v: &Potential) -> (f64, f64) {
    let r = 2.0 + v.sup_bound() + 0.5;
    (-r, r)
}

/// `points` equally spaced energies on `[lo, hi]`.
pub fn energy_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Number of eigenvalues below `e` of the tridiagonal matrix with unit
/// off-diagonals and diagonal `diag`.
pub fn sturm_count(diag: &[f64], e: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for (i, &d) in diag.iter().enumerate() {
        q = if i == 0 { d - e } else { d - e - 1.0 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (d.abs() + e.abs() + 2.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn box_diagonal(v: &Potential, orbit: Orbit, theta: f64, lo: i64, size: usize) -> Vec<f64> {
    (0..size)
        .map(|j| v.value(orbit.phase(theta, lo + j as i64)))
        .collect()
}

/// Integrated density of states on `e_grid`.
pub fn ids(v: &Potential, orbit: Orbit, e_grid: &[f64], method: IdsMethod, size: usize) -> Result<IdsTable> {
    if size < 100 {
        return Err(invalid("box size must be at least 100"));
    }
    if e_grid.is_empty() || e_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("energy grid must be non-empty and strictly increasing"));
    }
    let values = match method {
        IdsMethod::FiniteBox { theta } => {
            let diag = box_diagonal(v, orbit, theta, 0, size);
            e_grid
                .par_iter()
                .map(|&e| sturm_count(&diag, e) as f64 / size as f64)
                .collect()
        }
        IdsMethod::PhaseAverage { phases } => {
            if phases == 0 {
                return Err(invalid("phase average needs at least one phase"));
            }
            let per_phase: Vec<Vec<f64>> = (0..phases)
                .into_par_iter()
                .map(|j| {
                    let theta = j as f64 / phases as f64;
                    let lo = -(size as i64 / 2);
                    let diag = box_diagonal(v, orbit, theta, lo, size);
                    let centre = (-lo) as usize;
                    site_distribution(&diag, centre, e_grid)
                })
                .collect::<Result<Vec<_>>>()?;
            (0..e_grid.len())
                .map(|i| per_phase.iter().map(|p| p[i]).sum::<f64>() / phases as f64)
                .collect()
        }
    };
    Ok(IdsTable {
        energies: e_grid.to_vec(),
        values,
        method,
        size,
    })
}

/// `mu_site(-inf, E]` on `e_grid` for the spectral measure of one site of
/// a Jacobi matrix with unit off-diagonals.
fn site_distribution(diag: &[f64], site: usize, e_grid: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![1.0; n];
    e[n - 1] = 0.0;
    let mut row = vec![0.0; n];
    row[site] = 1.0;
    tql_row(&mut d, &mut e, &mut row)?;
    let mut pairs: Vec<(f64, f64)> = d.into_iter().zip(row.into_iter().map(|r| r * r)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = Vec::with_capacity(n);
    let mut s = 0.0;
    for &(_, w) in &pairs {
        s += w;
        cum.push(s);
    }
    Ok(e_grid
        .iter()
        .map(|&x| {
            let k = pairs.partition_point(|p| p.0 <= x);
            if k == 0 {
                0.0
            } else {
                cum[k - 1]
            }
        })
        .collect())
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix
/// (`d` diagonal, `e[i]` coupling `i` and `i+1`), tracking one row of
/// the eigenvector matrix.
fn tql_row(d: &mut [f64], e: &mut [f64], row: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::NoConvergence {
                    depth_cap: 100,
                    spread: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let fz = row[i + 1];
                row[i + 1] = s * row[i] + c * fz;
                row[i] = c * row[i] - s * fz;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// An interval of the energy grid on which `N` is constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    #[serde(rename = "E_left")]
    pub e_left: f64,
    #[serde(rename = "E_right")]
    pub e_right: f64,
    #[serde(rename = "N_plateau")]
    pub n_plateau: f64,
}

impl Gap {
    pub fn width(&self) -> f64 {
        self.e_right - self.e_left
    }
}

/// Maximal runs of at least three grid points over which `N` rises by no
/// more than `plateau_tol`, excluding the runs below and above the
/// spectrum. Runs separated by a single box-truncation jump are merged.
pub fn gap_edges(table: &IdsTable, plateau_tol: f64) -> Vec<Gap> {
    let (x, n) = (&table.energies, &table.values);
    let len = x.len();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < len {
        let mut j = i;
        while j + 1 < len && n[j + 1] - n[i] <= plateau_tol {
            j += 1;
        }
        if j >= i + 2 && n[i] > plateau_tol && n[j] < 1.0 - plateau_tol {
            runs.push((i, j));
            i = j + 1;
        } else {
            i += 1;
        }
    }
    let jump = table.resolution();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for r in runs {
        if let Some(last) = merged.last_mut() {
            if r.0 == last.1 + 1 && n[r.1] - n[last.0] <= jump {
                last.1 = r.1;
                continue;
            }
        }
        merged.push(r);
    }
    merged
        .into_iter()
        .map(|(a, b)| Gap {
            e_left: x[a],
            e_right: x[b],
            n_plateau: 0.5 * (n[a] + n[b]),
        })
        .collect()
}

/// `min_{|k| <= k_max} |nu - {k alpha}|` on the circle: distance of an IDS
/// value from the gap labels.
pub fn label_distance(nu: f64, freq: &Frequency, k_max: i64) -> (i64, f64) {
    (-k_max..=k_max)
        .map(|k| {
            let lab = freq.orbit_point(0.0, k);
            let d = (nu - lab).abs();
            (k, d.min(1.0 - d))
        })
        .fold((0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc })
}

/// Membership test `N(E + delta) - N(E - delta) > threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMask {
    pub table: IdsTable,
    pub delta: f64,
    pub threshold: f64,
}

impl SpectrumMask {
    /// `delta` is ten grid steps; the threshold is the table resolution.
    pub fn new(table: IdsTable) -> Self {
        let step = (table.energies[table.energies.len() - 1] - table.energies[0])
            / (table.energies.len().max(2) - 1) as f64;
        let threshold = table.resolution();
        SpectrumMask {
            table,
            delta: 10.0 * step,
            threshold,
        }
    }

    pub fn contains(&self, e: f64) -> bool {
        self.table.value_at(e + self.delta) - self.table.value_at(e - self.delta) > self.threshold
    }
}

/// Heuristic uniform-hyperbolicity test: `ln ||A_n(theta)|| > ln n + margin`.
pub fn looks_hyperbolic(e: f64, v: &Potential, orbit: Orbit, theta: f64, n: usize, margin: f64) -> bool {
    log_norm_real(e, v, orbit, theta, n) > (n as f64).ln() + margin
}

/// Bisects between `e_band` (not hyperbolic) and `e_gap` (hyperbolic) and
/// returns the last non-hyperbolic energy found.
pub fn refine_gap_edge(
    v: &Potential,
    orbit: Orbit,
    theta: f64,
    e_band: f64,
    e_gap: f64,
    n_probe: usize,
) -> Result<f64> {
    const MARGIN: f64 = 20.0;
    if looks_hyperbolic(e_band, v, orbit, theta, n_probe, MARGIN) {
        return Err(Error::PreconditionFailed(format!(
            "E = {e_band} already looks hyperbolic"
        )));
    }
    if !looks_hyperbolic(e_gap, v, orbit, theta, n_probe, MARGIN) {
        return Err(Error::PreconditionFailed(format!(
            "E = {e_gap} does not look hyperbolic"
        )));
    }
    let (mut band, mut gap) = (e_band, e_gap);
    for _ in 0..60 {
        let mid = 0.5 * (band + gap);
        if mid == band || mid == gap {
            break;
        }
        if looks_hyperbolic(mid, v, orbit, theta, n_probe, MARGIN) {
            gap = mid;
        } else {
            band = mid;
        }
    }
    Ok(band)
}

/// Energy with finite-box IDS equal to `nu`, by bisection on the
/// eigenvalue count of the box `0..size` at phase `theta`.
pub fn energy_at_ids(v: &Potential, orbit: Orbit, theta: f64, nu: f64, size: usize) -> Result<f64> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(invalid("target IDS must lie in (0, 1)"));
    }
    let diag = box_diagonal(v, orbit, theta, 0, size);
    let (mut lo, mut hi) = spectral_range(v);
    let target = (nu * size as f64).round() as usize;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if sturm_count(&diag, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Thouless-formula check at one energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThoulessRecord {
    #[serde(rename = "E")]
    pub e: f64,
    pub integral: f64,
    pub lyapunov: f64,
    pub residual: f64,
}

/// `int ln|E' - E| dN(E')`, exact for the piecewise-linear interpolant of
/// the table.
pub fn log_potential(table: &IdsTable, e: f64) -> f64 {
    // antiderivative of ln|t|
    let prim = |t: f64| if t == 0.0 { 0.0 } else { t * t.abs().ln() - t };
    let (x, n) = (&table.energies, &table.values);
    let mut s = 0.0;
    for i in 0..x.len() - 1 {
        let dn = n[i + 1] - n[i];
        if dn == 0.0 {
            continue;
        }
        let h = x[i + 1] - x[i];
        s += dn / h * (prim(x[i + 1] - e) - prim(x[i] - e));
    }
    s
}

pub fn thouless_check(e: f64, table: &IdsTable, lyapunov: f64) -> ThoulessRecord {
    let integral = log_potential(table, e);
    ThoulessRecord {
        e,
        integral,
        lyapunov,
        residual: (integral - lyapunov).abs(),
    }
}

/// `(sum_k |f(k)| w_k^{1/2})^2` with `w_k` the smoothed window at phase
/// `theta + k alpha`, centre of `interval` and half its length: an upper
/// bound for the spectral measure of `f` on the interval.
pub fn l1_window_bound(
    coeffs: &BTreeMap<i64, Complex64>,
    interval: (f64, f64),
    v: &Potential,
    orbit: Orbit,
    theta: f64,
    opts: &WeylOptions,
) -> Result<f64> {
    let (a, b) = interval;
    if !(b > a) {
        return Err(invalid("interval must have positive length"));
    }
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let terms: Vec<Result<f64>> = coeffs
        .par_iter()
        .map(|(&k, c)| {
            let w = smoothed_window(centre, half, v, orbit, orbit.phase(theta, k), opts)?;
            Ok(c.norm() * w.sqrt())
        })
        .collect();
    let mut s = 0.0;
    for t in terms {
        s += t?;
    }
    Ok(s * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::Precision;

    fn golden() -> Orbit {
        Orbit::new(&Frequency::golden(30, Precision::Extended).unwrap())
    }

    #[test]
    fn sturm_counts_free_box() {
        // eigenvalues of the free box are 2 cos(pi j / (n+1))
        let diag = vec![0.0; 9];
        assert_eq!(sturm_count(&diag, -0.1), 4);
        assert_eq!(sturm_count(&diag, 0.1), 5);
        assert_eq!(sturm_count(&diag, 2.0), 9);
        assert_eq!(sturm_count(&diag, -2.0), 0);
    }

    #[test]
    fn tql_recovers_free_weights() {
        let n = 7;
        let diag = vec![0.0; n];
        let grid = energy_grid(-2.5, 2.5, 11);
        let dist = site_distribution(&diag, 0, &grid).unwrap();
        assert!((dist[10] - 1.0).abs() < 1e-12);
        // weights at site 0: (2/(n+1)) sin^2(pi j/(n+1))
        let expected: f64 = (1..=n)
            .filter(|&j| 2.0 * (std::f64::consts::PI * j as f64 / (n + 1) as f64).cos() <= 0.0)
            .map(|j| 2.0 / (n + 1) as f64 * (std::f64::consts::PI * j as f64 / (n + 1) as f64).sin().powi(2))
            .sum();
        assert!((dist[5] - expected).abs() < 1e-12);
    }

    #[test]
    fn free_ids_is_arccos() {
        let grid = energy_grid(-2.5, 2.5, 51);
        let t = ids(&Potential::free(), golden(), &grid, IdsMethod::FiniteBox { theta: 0.0 }, 2000).unwrap();
        for (&e, &n) in grid.iter().zip(&t.values) {
            let exact = if e <= -2.0 {
                0.0
            } else if e >= 2.0 {
                1.0
            } else {
                (-e / 2.0).acos() / std::f64::consts::PI
            };
            assert!((n - exact).abs() < 2e-3, "E = {e}");
        }
    }

    #[test]
    fn log_potential_of_uniform_cell() {
        let t = IdsTable {
            energies: vec![0.0, 1.0],
            values: vec![0.0, 1.0],
            method: IdsMethod::FiniteBox { theta: 0.0 },
            size: 100,
        };
        // int_0^1 ln|x - 2| dx = [ (x-2) ln|x-2| - x ]_0^1 = 2 ln 2 - 1
        assert!((log_potential(&t, 2.0) - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-14);
        assert!((log_potential(&t, 0.5) - (-2f64.ln() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn free_window_at_centre() {
        // M = 2 G(0,0), and G(0,0)(i eps) -> i/2 as eps -> 0
        let w = smoothed_window(0.0, 1e-3, &Potential::free(), golden(), 0.0, &WeylOptions::with_tol(1e-10)).unwrap();
        assert!((w / 1e-3 - 2.0).abs() < 1e-2, "{w}");
    }

    #[test]
    fn gaps_from_synthetic_table() {
        let energies = energy_grid(0.0, 1.0, 11);
        let values = vec![0.0, 0.0, 0.0, 0.1, 0.2, 0.2, 0.2, 0.2, 0.5, 1.0, 1.0];
        let t = IdsTable {
            energies,
            values,
            method: IdsMethod::FiniteBox { theta: 0.0 },
            size: 1000,
        };
        let g = gap_edges(&t, 1e-3);
        assert_eq!(g.len(), 1);
        assert!((g[0].e_left - 0.4).abs() < 1e-12 && (g[0].e_right - 0.7).abs() < 1e-12);
        assert_eq!(g[0].n_plateau, 0.2);
    }
}
