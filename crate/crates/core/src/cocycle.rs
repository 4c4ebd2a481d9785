//! Schrödinger cocycles `(alpha, A)` with `A = [[z - v(x), -1], [1, 0]]`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::{loglog_fit, LineFit};
use crate::linalg::{real2_mul, real2_norm, Mat2, Real2, ScaledMat};
use crate::potential::{Orbit, Potential};

/// Renormalization period for long products.
const RENORM_EVERY: usize = 32;

/// Default phase-grid size for [`growth_profile`].
pub const GROWTH_PHASES: usize = 128;

#[inline]
fn check_scale(m: &ScaledMat) -> Result<()> {
    if m.log_scale.is_finite() && m.mat.is_finite() {
        Ok(())
    } else {
        Err(Error::Overflow)
    }
}

fn forward(z: Complex64, v: &Potential, orbit: Orbit, x: f64, n: usize) -> Result<ScaledMat> {
    let mut acc = ScaledMat::identity();
    for j in 0..n {
        let a = Mat2::transfer(z, v.value(orbit.phase(x, j as i64)));
        acc.mat = a * acc.mat;
        if (j + 1) % RENORM_EVERY == 0 {
            acc.renormalize();
        }
    }
    acc.renormalize();
    check_scale(&acc)?;
    Ok(acc)
}

/// `A_n(x)`: `A(x + (n-1) alpha) ... A(x)` for `n > 0`, the identity for
/// `n = 0`, and `A_{|n|}(x + n alpha)^{-1}` for `n < 0`.
pub fn iterate(z: Complex64, v: &Potential, orbit: Orbit, x: f64, n: i64) -> Result<ScaledMat> {
    if !(z.re.is_finite() && z.im.is_finite() && x.is_finite()) {
        return Err(invalid("energy and phase must be finite"));
    }
    if n >= 0 {
        forward(z, v, orbit, x, n as usize)
    } else {
        let m = n.unsigned_abs() as usize;
        let start = orbit.phase(x, n);
        let f = forward(z, v, orbit, start, m)?;
        // unimodular, so the adjugate is the inverse; norms agree
        Ok(ScaledMat {
            mat: f.mat.adjugate(),
            log_scale: f.log_scale,
        })
    }
}

/// `ln ||A_n(x)||` at real energy, using real arithmetic.
pub fn log_norm_real(e: f64, v: &Potential, orbit: Orbit, x: f64, n: usize) -> f64 {
    let mut m: Real2 = [[1.0, 0.0], [0.0, 1.0]];
    let mut log_scale = 0.0;
    for j in 0..n {
        let a = e - v.value(orbit.phase(x, j as i64));
        m = [
            [a * m[0][0] - m[1][0], a * m[0][1] - m[1][1]],
            [m[0][0], m[0][1]],
        ];
        if (j + 1) % RENORM_EVERY == 0 {
            let s = real2_norm(&m);
            m = [[m[0][0] / s, m[0][1] / s], [m[1][0] / s, m[1][1] / s]];
            log_scale += s.ln();
        }
    }
    log_scale + real2_norm(&m).ln()
}

/// How phases are chosen when averaging over the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSampling {
    /// `x_j = j alpha mod 1`, a single-orbit Birkhoff average.
    Orbit,
    /// `x_j = j / count`.
    Uniform,
}

fn sample_phases(orbit: Orbit, count: usize, sampling: PhaseSampling) -> Vec<f64> {
    (0..count)
        .map(|j| match sampling {
            PhaseSampling::Orbit => orbit.phase(0.0, j as i64),
            PhaseSampling::Uniform => j as f64 / count as f64,
        })
        .collect()
}

/// Finite-`n` Lyapunov exponent `(1/n) <ln ||A_n(x)||>` averaged over
/// `x_grid` phases along a single orbit.
pub fn lyapunov(e: f64, v: &Potential, orbit: Orbit, n: usize, x_grid: usize) -> Result<f64> {
    lyapunov_with(e, v, orbit, n, x_grid, PhaseSampling::Orbit)
}

pub fn lyapunov_with(
    e: f64,
    v: &Potential,
    orbit: Orbit,
    n: usize,
    x_grid: usize,
    sampling: PhaseSampling,
) -> Result<f64> {
    if n == 0 || x_grid == 0 {
        return Err(invalid("lyapunov needs n >= 1 and at least one phase"));
    }
    if !e.is_finite() {
        return Err(invalid("energy must be finite"));
    }
    let phases = sample_phases(orbit, x_grid, sampling);
    let logs: Vec<f64> = phases
        .par_iter()
        .map(|&x| log_norm_real(e, v, orbit, x, n))
        .collect();
    if logs.iter().any(|l| !l.is_finite()) {
        return Err(Error::Overflow);
    }
    Ok(logs.iter().sum::<f64>() / (x_grid as f64 * n as f64))
}

/// `(s, sup_x ||A_s(x)||)` for `s = 1..=s_max`, the supremum taken over a
/// uniform grid of [`GROWTH_PHASES`] phases.
pub fn growth_profile(e: f64, v: &Potential, orbit: Orbit, s_max: usize) -> Result<Vec<(usize, f64)>> {
    growth_profile_with(e, v, orbit, s_max, GROWTH_PHASES)
}

pub fn growth_profile_with(
    e: f64,
    v: &Potential,
    orbit: Orbit,
    s_max: usize,
    phases: usize,
) -> Result<Vec<(usize, f64)>> {
    if s_max == 0 || phases == 0 {
        return Err(invalid("growth profile needs s_max >= 1 and at least one phase"));
    }
    let xs = sample_phases(orbit, phases, PhaseSampling::Uniform);
    let per_phase: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| {
            let mut out = Vec::with_capacity(s_max);
            let mut m: Real2 = [[1.0, 0.0], [0.0, 1.0]];
            let mut log_scale = 0.0;
            for j in 0..s_max {
                let a = e - v.value(orbit.phase(x, j as i64));
                m = real2_mul(&[[a, -1.0], [1.0, 0.0]], &m);
                let s = real2_norm(&m);
                out.push(log_scale + s.ln());
                if (j + 1) % RENORM_EVERY == 0 {
                    m = [[m[0][0] / s, m[0][1] / s], [m[1][0] / s, m[1][1] / s]];
                    log_scale += s.ln();
                }
            }
            out
        })
        .collect();
    let profile: Vec<(usize, f64)> = (0..s_max)
        .map(|j| {
            let sup = per_phase
                .iter()
                .map(|p| p[j])
                .fold(f64::NEG_INFINITY, f64::max);
            (j + 1, sup.exp())
        })
        .collect();
    if profile.iter().any(|(_, g)| !g.is_finite()) {
        return Err(Error::Overflow);
    }
    Ok(profile)
}

/// Log-log slope of a growth profile, fitted on about 60 log-spaced
/// samples with `s >= s_min`.
pub fn growth_exponent(profile: &[(usize, f64)], s_min: usize) -> Option<LineFit> {
    let s_max = profile.last()?.0;
    if s_max <= s_min {
        return None;
    }
    let mut picked: Vec<usize> = (0..60)
        .map(|i| {
            let t = i as f64 / 59.0;
            ((s_min as f64).ln() * (1.0 - t) + (s_max as f64).ln() * t).exp().round() as usize
        })
        .collect();
    picked.dedup();
    let (xs, ys): (Vec<f64>, Vec<f64>) = picked
        .into_iter()
        .filter_map(|s| profile.get(s.checked_sub(1)?).map(|&(s, g)| (s as f64, g)))
        .unzip();
    loglog_fit(&xs, &ys)
}

/// A generalized eigenfunction `u_0, ..., u_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSeq {
    pub beta: f64,
    pub z: Complex64,
    pub x: f64,
    pub values: Vec<Complex64>,
}

impl SolutionSeq {
    /// `(sum_{j=1}^{len} |u_j|^2)^{1/2}`.
    pub fn norm(&self, len: usize) -> f64 {
        self.values
            .iter()
            .skip(1)
            .take(len)
            .map(|u| u.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest defect of `u_{j+1} + u_{j-1} + v(x + j alpha) u_j = z u_j`.
    pub fn recurrence_residual(&self, v: &Potential, orbit: Orbit) -> f64 {
        (1..self.values.len().saturating_sub(1))
            .map(|j| {
                let u = &self.values;
                let vj = v.value(orbit.phase(self.x, j as i64));
                (u[j + 1] + u[j - 1] + vj * u[j] - self.z * u[j]).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Solution with `u_0 cos(beta) + u_1 sin(beta) = 0` and `|u_0|^2 + |u_1|^2 = 1`,
/// namely `(u_0, u_1) = (-sin beta, cos beta)`, continued to `u_len`.
pub fn solution(beta: f64, z: Complex64, v: &Potential, orbit: Orbit, x: f64, len: usize) -> SolutionSeq {
    let (s, c) = beta.sin_cos();
    let mut values = Vec::with_capacity(len + 1);
    values.push(Complex64::new(-s, 0.0));
    if len >= 1 {
        values.push(Complex64::new(c, 0.0));
    }
    for j in 1..len {
        let vj = v.value(orbit.phase(x, j as i64));
        let next = (z - vj) * values[j] - values[j - 1];
        values.push(next);
    }
    SolutionSeq {
        beta,
        z,
        x,
        values,
    }
}
