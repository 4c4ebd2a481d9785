//! Conjugating a perturbation `A = A^{(v)} e^w` of a Schrödinger cocycle
//! back to Schrödinger form `A^{(v')} = [[v', -1], [1, 0]]`.
//!
//! Each step sets `s = [[0, s2], [s3, 0]]` with
//!
//! ```text
//! s2(x) = w2(x) + w1(x) / v(x)
//! s3(x) = -w1(x - alpha) / v(x - alpha)
//! v~(x) = v(x) - w3(x) + w2(x + alpha) + w1(x + alpha) / v(x + alpha)
//!         + v(x) w1(x) - w1(x - alpha) / v(x - alpha)
//! ```
//!
//! and replaces `A` by `e^{s(x + alpha)} A(x) e^{-s(x)} = A^{(v~)} e^{w~}`,
//! where `||w~|| <= C ||w||^2`.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::band::{BandFunction, MatFunction, NOISE_REL, TRUNCATION_REL};
use crate::error::{invalid, Error, Result};
use crate::linalg::Mat2;
use crate::potential::Potential;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionOptions {
    /// Interpolation grid for pointwise operations.
    pub grid: usize,
    /// Grid for the conjugacy residual.
    pub verify_grid: usize,
    /// Boundary grid for the lower bound on `|v|`.
    pub inverse_grid: usize,
    /// `K` in the contraction test `||w~|| <= K ||w||^{3/2}`.
    pub contraction_k: f64,
    /// Norms below this are rounding noise and skip the contraction test.
    pub noise_floor: f64,
    /// Refuse when the certified `inf |v|` falls below this.
    pub min_inverse_bound: f64,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        ReductionOptions {
            grid: 256,
            verify_grid: 512,
            inverse_grid: 4096,
            contraction_k: 1e3,
            noise_floor: 1e-13,
            min_inverse_bound: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionStep {
    pub iteration: usize,
    /// `||w_m||` before the step.
    pub w_norm: f64,
    /// `||w_m|| / ||w_{m-1}||^2`, when both are above the noise floor.
    pub ratio: Option<f64>,
    /// Conjugacy residual of the accumulated `B` against `A^{(v_m)}`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionResult {
    pub v_out: Potential,
    pub b: MatFunction,
    pub residual: f64,
    /// Conjugation steps applied.
    pub iterations: usize,
    pub converged: bool,
    pub steps: Vec<ReductionStep>,
    /// Largest reported `||w_{m+1}|| / ||w_m||^2`.
    pub contraction_constant: f64,
    /// Smallest certified `inf |v_m|` over the band across iterations.
    pub inverse_bound: f64,
    /// `sup_k |c_{-k} - conj c_k|` of the final diagonal before symmetrizing.
    pub v_asymmetry: f64,
}

/// `e^w` for traceless `w`.
pub fn exp_sl2(w: &Mat2) -> Mat2 {
    let mu2 = w.a * w.a + w.b * w.c;
    let (ch, sh) = cosh_sinhc(mu2);
    Mat2::new(ch + sh * w.a, sh * w.b, sh * w.c, ch - sh * w.a)
}

/// `(cosh mu, sinh(mu) / mu)` as functions of `mu^2`.
fn cosh_sinhc(mu2: Complex64) -> (Complex64, Complex64) {
    if mu2.norm() < 1e-6 {
        let ch = 1.0 + mu2 / 2.0 + mu2 * mu2 / 24.0 + mu2 * mu2 * mu2 / 720.0;
        let sh = 1.0 + mu2 / 6.0 + mu2 * mu2 / 120.0 + mu2 * mu2 * mu2 / 5040.0;
        (ch, sh)
    } else {
        let mu = mu2.sqrt();
        (mu.cosh(), mu.sinh() / mu)
    }
}

/// Principal logarithm of `m` in SL(2) near the identity, as a traceless matrix.
pub fn log_sl2(m: &Mat2) -> Result<Mat2> {
    let c = (m.a + m.d) * 0.5;
    if c.re <= 0.0 {
        return Err(Error::PreconditionFailed("matrix logarithm undefined: trace not positive".into()));
    }
    // w = (mu / sinh mu) (m - c I), with sinh^2 mu = c^2 - 1
    let y2 = (c - 1.0) * (c + 1.0);
    let f = if y2.norm() < 1e-6 {
        1.0 - y2 / 6.0 + y2 * y2 * (3.0 / 40.0) - y2 * y2 * y2 * (5.0 / 112.0)
    } else {
        let y = y2.sqrt();
        y.asinh() / y
    };
    let half = (m.a - m.d) * 0.5;
    Ok(Mat2::new(f * half, f * m.b, f * m.c, -f * half))
}

/// Certified lower bound for `|v|` on the closed band `|Im x| <= band`.
///
/// `|v|` is sampled on both boundary lines and lowered by the Lipschitz
/// bound `sum 2 pi |k| |c_k| e^{2 pi band |k|}` times half the spacing. The
/// winding numbers along the two lines must agree, so `v` has no zero inside
/// and the minimum modulus sits on the boundary.
pub fn certified_inverse_bound(v: &BandFunction, points: usize) -> Result<f64> {
    if points < 16 {
        return Err(invalid("inverse-bound grid too coarse"));
    }
    let band = v.band();
    let lip: f64 = v
        .coeffs()
        .iter()
        .map(|(&k, c)| 2.0 * PI * k.abs() as f64 * c.norm() * (2.0 * PI * band * k.abs() as f64).exp())
        .sum();
    let h = 1.0 / points as f64;
    let mut min = f64::INFINITY;
    let mut windings = [0.0; 2];
    for (slot, s) in [-1.0, 1.0].into_iter().enumerate() {
        let vals: Vec<Complex64> = (0..=points)
            .map(|j| v.eval(Complex64::new(j as f64 * h, s * band)))
            .collect();
        for w in vals.windows(2) {
            min = min.min(w[0].norm());
            windings[slot] += (w[1] / w[0]).arg();
        }
    }
    let bound = min - 0.5 * lip * h;
    if !(bound > 0.0) || lip * h >= min {
        return Err(Error::PreconditionFailed(format!(
            "cannot certify a lower bound for |v| on the band (grid min {min:.3e})"
        )));
    }
    if ((windings[0] - windings[1]) / (2.0 * PI)).abs() > 0.5 {
        return Err(Error::PreconditionFailed("v vanishes inside the band".into()));
    }
    Ok(bound)
}

fn real_grid(vals: Vec<Complex64>) -> Vec<Complex64> {
    vals.into_iter().map(|z| Complex64::new(z.re, 0.0)).collect()
}

fn real_mat(m: Mat2) -> Mat2 {
    Mat2::real(m.a.re, m.b.re, m.c.re, m.d.re)
}

/// `A^{(v)}(x) e^{w(x)}` interpolated from `grid` points, for traceless `w`
/// with real-symmetric entries.
pub fn perturbed_schrodinger(v: &Potential, w: &MatFunction, grid: usize) -> Result<MatFunction> {
    let band = w.band();
    MatFunction::from_fn(grid, band, |x| {
        Mat2::transfer(Complex64::new(0.0, 0.0), -v.value(x)) * real_mat(exp_sl2(&w.eval_real(x)))
    })
}

/// `sup_j ||B(x_j + alpha) A(x_j) B(x_j)^{-1} - A^{(v)}(x_j)||` on `n` equally spaced points.
pub fn conjugacy_residual(a: &MatFunction, b: &MatFunction, v: &BandFunction, alpha: f64, n: usize) -> f64 {
    let ag = a.sample(n);
    let bg = b.sample(n);
    let bs = b.shift(alpha).sample(n);
    let vg = v.sample(n);
    (0..n)
        .map(|j| {
            let lhs = bs[j] * ag[j] * bg[j].adjugate();
            let target = Mat2::new(vg[j], (-1.0).into(), 1.0.into(), 0.0.into());
            lhs.sub(&target).norm()
        })
        .fold(0.0, f64::max)
}

/// Iterates the Schrödinger-form step until `||w||_band < tol` or `max_iter` steps.
pub fn schrodinger_reduction(
    a: &MatFunction,
    v: &Potential,
    alpha: f64,
    band: f64,
    max_iter: usize,
    tol: f64,
) -> Result<ReductionResult> {
    schrodinger_reduction_with(a, v, alpha, band, max_iter, tol, &ReductionOptions::default())
}

pub fn schrodinger_reduction_with(
    a: &MatFunction,
    v: &Potential,
    alpha: f64,
    band: f64,
    max_iter: usize,
    tol: f64,
    opts: &ReductionOptions,
) -> Result<ReductionResult> {
    if !(tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    if !alpha.is_finite() {
        return Err(invalid("alpha must be finite"));
    }
    let n = opts.grid;
    if n < 16 {
        return Err(invalid("reduction grid too coarse"));
    }
    let det_defect = a.det_defect(opts.verify_grid);
    if det_defect > 1e-8 {
        return Err(Error::NotUnimodular { det: 1.0 + det_defect });
    }
    let [e0, e1, e2, e3] = &a.entries;
    let rebanded = |e: &BandFunction| BandFunction::new(e.coeffs().clone(), band);
    let a0 = MatFunction::new(rebanded(e0)?, rebanded(e1)?, rebanded(e2)?, rebanded(e3)?);
    let mut vf = BandFunction::from_potential(v, band)?;
    let mut cur = a0.clone();
    let mut b = MatFunction::identity(band)?;
    let mut steps = Vec::new();
    let mut inverse_bound = f64::INFINITY;
    let mut prev_w: Option<f64> = None;
    let mut violations = 0;
    let mut contraction_constant: f64 = 0.0;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        inverse_bound = inverse_bound.min(certified_inverse_bound(&vf, opts.inverse_grid)?);
        if inverse_bound < opts.min_inverse_bound {
            return Err(Error::PreconditionFailed(format!(
                "certified inf |v| = {inverse_bound:.3e} is below {:.1e}",
                opts.min_inverse_bound
            )));
        }

        let vg = vf.sample(n);
        let ag = cur.sample(n);
        let mut w1g = Vec::with_capacity(n);
        let mut w2g = Vec::with_capacity(n);
        let mut w3g = Vec::with_capacity(n);
        let mut scale: f64 = 0.0;
        for j in 0..n {
            let inv_av = Mat2::new(0.0.into(), 1.0.into(), (-1.0).into(), vg[j]);
            scale = scale.max(inv_av.norm() * ag[j].norm());
            let w = log_sl2(&real_mat(inv_av * ag[j]))?;
            w1g.push(w.a);
            w2g.push(w.b);
            w3g.push(w.c);
        }
        // rounding in w is set by the size of the product, not of w
        let floor = NOISE_REL * scale;
        let w1 = BandFunction::from_samples_floor(&real_grid(w1g), band, floor)?.truncated(TRUNCATION_REL);
        let w2 = BandFunction::from_samples_floor(&real_grid(w2g), band, floor)?.truncated(TRUNCATION_REL);
        let w3 = BandFunction::from_samples_floor(&real_grid(w3g), band, floor)?.truncated(TRUNCATION_REL);
        let w_norm = (2.0 * w1.norm().powi(2) + w2.norm().powi(2) + w3.norm().powi(2)).sqrt();

        let mut ratio = None;
        if let Some(p) = prev_w {
            if w_norm > opts.noise_floor && p > opts.noise_floor {
                let r = w_norm / (p * p);
                ratio = Some(r);
                contraction_constant = contraction_constant.max(r);
                if w_norm > opts.contraction_k * p.powf(1.5) {
                    violations += 1;
                    if violations >= 2 {
                        return Err(Error::NotContracting {
                            iteration: iterations,
                            previous: p,
                            current: w_norm,
                        });
                    }
                } else {
                    violations = 0;
                }
            }
        }
        let residual = conjugacy_residual(&a0, &b, &vf, alpha, opts.verify_grid);
        steps.push(ReductionStep {
            iteration: iterations,
            w_norm,
            ratio,
            residual,
        });
        if w_norm < tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        if w_norm >= LN_2 {
            return Err(Error::PreconditionFailed(format!(
                "||w|| = {w_norm:.3e} is outside the logarithm guard ln 2"
            )));
        }

        let w1s = w1.sample(n);
        let g = BandFunction::from_samples_floor(
            &real_grid((0..n).map(|j| w1s[j] / vg[j]).collect()),
            band,
            floor / vg.iter().map(|z| z.norm()).fold(0.0, f64::max),
        )?
        .truncated(TRUNCATION_REL);
        let g_back = g.shift(-alpha);
        let s2 = w2.add(&g);
        let s3 = g_back.scale((-1.0).into());
        let v_next = vf
            .sub(&w3)
            .add(&w2.shift(alpha))
            .add(&g.shift(alpha))
            .add(&vf.mul(&w1))
            .sub(&g_back)
            .truncated(TRUNCATION_REL);

        let (s2g, s3g) = (s2.sample(n), s3.sample(n));
        let (s2f, s3f) = (s2.shift(alpha).sample(n), s3.shift(alpha).sample(n));
        let bg = b.sample(n);
        let mut next_a = Vec::with_capacity(n);
        let mut next_b = Vec::with_capacity(n);
        let zero = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let e_fwd = exp_sl2(&Mat2::new(zero, s2f[j], s3f[j], zero));
            let e_here = exp_sl2(&Mat2::new(zero, s2g[j], s3g[j], zero));
            next_a.push(real_mat(e_fwd * ag[j] * e_here.adjugate()));
            next_b.push(real_mat(e_here * bg[j]));
        }
        cur = MatFunction::from_grid(&next_a, band)?.truncated(TRUNCATION_REL);
        b = MatFunction::from_grid(&next_b, band)?.truncated(TRUNCATION_REL);
        vf = v_next;
        iterations += 1;
        prev_w = Some(w_norm);
    }

    let residual = steps.last().map_or(f64::NAN, |s| s.residual);
    Ok(ReductionResult {
        v_out: vf.to_potential()?,
        v_asymmetry: vf.real_asymmetry(),
        b,
        residual,
        iterations,
        converged,
        steps,
        contraction_constant,
        inverse_bound,
    })
}
