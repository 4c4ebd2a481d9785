//! Conjugating a constant `A* in SL(2, R)` to companion form `[[E, -1], [1, 0]]`
//! with `E != 0`, possibly through an `x`-dependent rotation `R_{kx}`.
//!
//! The conjugator is `C(x) = L R_{kx} S`, where `S` brings `A*` to a
//! rotation or a Jordan block and `L` is constant.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::band::{BandFunction, MatFunction};
use crate::error::{invalid, Error, Result};
use crate::linalg::{real2_mul, real2_norm, Real2};

const UNIMODULAR_TOL: f64 = 1e-10;
/// `|tr| = 2` within this tolerance is treated as parabolic.
const PARABOLIC_TOL: f64 = 1e-12;
/// Accepted range for `sin 2 pi theta` is `[SIN_MARGIN, 1 - SIN_MARGIN]`.
const SIN_MARGIN: f64 = 1e-3;
/// Search range for the rotation shift `k`.
const SHIFT_SEARCH: i64 = 10_000;

const ID: Real2 = [[1.0, 0.0], [0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantCase {
    Hyperbolic,
    Elliptic,
    Parabolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub case: ConstantCase,
    /// Diagonal entry `E` of the companion target.
    pub target_e: f64,
    pub left: Real2,
    /// `k` in the factor `R_{kx}`.
    pub shift: i64,
    pub right: Real2,
    /// Rotation number of `S A* S^{-1}` before the shift (elliptic and parabolic).
    pub theta: Option<f64>,
    /// Sign of the Jordan block `[[1, tau], [0, 1]]` (parabolic).
    pub tau: Option<f64>,
    /// `sign(tr A*)` (parabolic).
    pub sign: Option<f64>,
}

pub fn rotation(t: f64) -> Real2 {
    let (s, c) = (2.0 * PI * t).sin_cos();
    [[c, -s], [s, c]]
}

pub fn companion(e: f64) -> Real2 {
    [[e, -1.0], [1.0, 0.0]]
}

fn det(m: &Real2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn inv(m: &Real2) -> Real2 {
    let d = det(m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

fn scale(m: &Real2, s: f64) -> Real2 {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

fn sub(x: &Real2, y: &Real2) -> Real2 {
    [[x[0][0] - y[0][0], x[0][1] - y[0][1]], [x[1][0] - y[1][0], x[1][1] - y[1][1]]]
}

/// `C_theta` with `C_theta R_theta C_theta^{-1} = [[2 cos 2 pi theta, -1], [1, 0]]`,
/// for `0 < sin 2 pi theta`.
pub fn c_theta(theta: f64) -> Real2 {
    let (s, c) = (2.0 * PI * theta).sin_cos();
    let r = s.sqrt();
    inv(&[[0.0, -s / r], [1.0 / r, -c / r]])
}

/// Jordan-shrinking factor `[[eps, 0], [eps, 1/eps]]`.
pub fn jordan_shrink(eps: f64) -> Real2 {
    [[eps, 0.0], [eps, 1.0 / eps]]
}

/// `eps_n = defect_n^{1/4}`, so `||C^(n)||^2 defect_n ~ defect_n^{1/2} -> 0`.
pub fn jordan_schedule(defects: &[f64]) -> Vec<f64> {
    defects.iter().map(|d| d.powf(0.25)).collect()
}

fn in_window(s: f64) -> bool {
    (SIN_MARGIN..=1.0 - SIN_MARGIN).contains(&s)
}

/// Smallest `|k|` (positive first) with `sin 2 pi (theta + k alpha)` inside the window.
fn find_shift(theta: f64, alpha: f64) -> Result<i64> {
    for m in 0..=SHIFT_SEARCH {
        for k in if m == 0 { vec![0] } else { vec![m, -m] } {
            if in_window((2.0 * PI * (theta + k as f64 * alpha)).sin()) {
                return Ok(k);
            }
        }
    }
    Err(Error::PreconditionFailed(format!(
        "no rotation shift |k| <= {SHIFT_SEARCH} brings sin 2 pi theta into (0, 1)"
    )))
}

/// Row vector `u` with `Q(u) = det[[u A], [u]] > 0`, preferring `e_2`.
fn cyclic_row(a: &Real2) -> Result<[f64; 2]> {
    let q = |u: [f64; 2]| {
        let ua = [u[0] * a[0][0] + u[1] * a[1][0], u[0] * a[0][1] + u[1] * a[1][1]];
        ua[0] * u[1] - ua[1] * u[0]
    };
    let e2 = [0.0, 1.0];
    if q(e2) > 1e-3 {
        return Ok(e2);
    }
    // Q(u) = u S u^T with S symmetric; take the top eigenvector
    let s11 = -a[0][1];
    let s22 = a[1][0];
    let s12 = 0.5 * (a[0][0] - a[1][1]);
    let tr = s11 + s22;
    let disc = (0.25 * (s11 - s22).powi(2) + s12 * s12).sqrt();
    let lam = 0.5 * tr + disc;
    if lam <= 0.0 {
        return Err(Error::PreconditionFailed("no cyclic row of positive orientation".into()));
    }
    let u = if (s11 - lam).abs() + s12.abs() > (s22 - lam).abs() + s12.abs() {
        [-s12, s11 - lam]
    } else {
        [s22 - lam, -s12]
    };
    let n = (u[0] * u[0] + u[1] * u[1]).sqrt();
    Ok([u[0] / n, u[1] / n])
}

/// Conjugator to companion form for a constant `A*`.
pub fn normalize_constant(a_star: &Real2, alpha: f64) -> Result<Normalization> {
    if a_star.iter().flatten().any(|x| !x.is_finite()) || !alpha.is_finite() {
        return Err(invalid("matrix and alpha must be finite"));
    }
    let d = det(a_star);
    if (d - 1.0).abs() > UNIMODULAR_TOL {
        return Err(Error::NotUnimodular { det: d });
    }
    let tr = a_star[0][0] + a_star[1][1];
    if tr.abs() > 2.0 + PARABOLIC_TOL {
        let u = cyclic_row(a_star)?;
        let ua = [
            u[0] * a_star[0][0] + u[1] * a_star[1][0],
            u[0] * a_star[0][1] + u[1] * a_star[1][1],
        ];
        let c = [[ua[0], ua[1]], [u[0], u[1]]];
        let right = scale(&c, 1.0 / det(&c).sqrt());
        return Ok(Normalization {
            case: ConstantCase::Hyperbolic,
            target_e: tr,
            left: ID,
            shift: 0,
            right,
            theta: None,
            tau: None,
            sign: None,
        });
    }
    if tr.abs() < 2.0 - PARABOLIC_TOL {
        let cs = 0.5 * tr;
        let c21 = a_star[1][0];
        let sn = c21.signum() * (1.0 - cs * cs).sqrt();
        // columns g1 = e1, g2 = (A e1 - cos e1) / sin, so A [g1 g2] = [g1 g2] R_theta
        let g = [[1.0, (a_star[0][0] - cs) / sn], [0.0, c21 / sn]];
        let g = scale(&g, 1.0 / det(&g).sqrt());
        let theta = sn.atan2(cs) / (2.0 * PI);
        let k = find_shift(theta, alpha)?;
        let shifted = theta + k as f64 * alpha;
        return Ok(Normalization {
            case: ConstantCase::Elliptic,
            target_e: 2.0 * (2.0 * PI * shifted).cos(),
            left: c_theta(shifted),
            shift: k,
            right: inv(&g),
            theta: Some(theta),
            tau: None,
            sign: None,
        });
    }
    let sign = tr.signum();
    let theta = if sign > 0.0 { 0.0 } else { 0.5 };
    let n = sub(&scale(a_star, sign), &ID);
    let k = find_shift(theta, alpha)?;
    let shifted = theta + k as f64 * alpha;
    let target_e = 2.0 * (2.0 * PI * shifted).cos();
    if real2_norm(&n) < 1e-12 {
        return Ok(Normalization {
            case: ConstantCase::Parabolic,
            target_e,
            left: c_theta(shifted),
            shift: k,
            right: ID,
            theta: Some(theta),
            tau: Some(0.0),
            sign: Some(sign),
        });
    }
    // Jordan basis e = N f, with f the column direction N moves most
    let f = if n[0][0].hypot(n[1][0]) >= n[0][1].hypot(n[1][1]) {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let e = [n[0][0] * f[0] + n[0][1] * f[1], n[1][0] * f[0] + n[1][1] * f[1]];
    let dd = e[0] * f[1] - e[1] * f[0];
    let tau = dd.signum();
    let s = 1.0 / dd.abs().sqrt();
    let p_inv = [[e[0] * s, tau * f[0] * s], [e[1] * s, tau * f[1] * s]];
    Ok(Normalization {
        case: ConstantCase::Parabolic,
        target_e,
        left: c_theta(shifted),
        shift: k,
        right: inv(&p_inv),
        theta: Some(theta),
        tau: Some(tau),
        sign: Some(sign),
    })
}

/// `cos(2 pi k x)` and `sin(2 pi k x)` as band functions.
fn rotation_entries(k: i64, band: f64) -> Result<(BandFunction, BandFunction)> {
    if k == 0 {
        return Ok((BandFunction::constant(1.0.into(), band)?, BandFunction::zero(band)?));
    }
    let half = Complex64::new(0.5, 0.0);
    let ihalf = Complex64::new(0.0, 0.5);
    Ok((
        BandFunction::new(BTreeMap::from([(k, half), (-k, half)]), band)?,
        BandFunction::new(BTreeMap::from([(k, -ihalf), (-k, ihalf)]), band)?,
    ))
}

impl Normalization {
    /// `C(x) = L R_{kx} S`, with the Jordan factor at `eps` in the parabolic case.
    pub fn conjugator(&self, x: f64, eps: Option<f64>) -> Real2 {
        let s = match (self.case, eps) {
            (ConstantCase::Parabolic, Some(e)) if self.tau != Some(0.0) => real2_mul(&jordan_shrink(e), &self.right),
            _ => self.right,
        };
        real2_mul(&self.left, &real2_mul(&rotation(self.shift as f64 * x), &s))
    }

    /// `sup_x ||C(x + alpha) A* C(x)^{-1} - [[E, -1], [1, 0]]||` on `n` points.
    pub fn companion_residual(&self, a_star: &Real2, alpha: f64, eps: Option<f64>, n: usize) -> f64 {
        let target = companion(self.target_e);
        (0..n.max(1))
            .map(|j| {
                let x = j as f64 / n.max(1) as f64;
                let m = real2_mul(
                    &real2_mul(&self.conjugator(x + alpha, eps), a_star),
                    &inv(&self.conjugator(x, eps)),
                );
                real2_norm(&sub(&m, &target))
            })
            .fold(0.0, f64::max)
    }

    /// `sup_x ||C(x)||`.
    pub fn conjugator_norm(&self, eps: Option<f64>) -> f64 {
        (0..64)
            .map(|j| real2_norm(&self.conjugator(j as f64 / 64.0, eps)))
            .fold(0.0, f64::max)
    }

    /// The conjugator as a matrix of trigonometric polynomials.
    pub fn as_mat_function(&self, band: f64, eps: Option<f64>) -> Result<MatFunction> {
        let s = self.conjugator(0.0, eps);
        let s = real2_mul(&inv(&self.left), &s);
        let (cos, sin) = rotation_entries(self.shift, band)?;
        let cst = |v: f64| BandFunction::constant(v.into(), band);
        let l = &self.left;
        let rot = MatFunction::new(cos.clone(), sin.scale((-1.0).into()), sin, cos);
        let lm = MatFunction::new(cst(l[0][0])?, cst(l[0][1])?, cst(l[1][0])?, cst(l[1][1])?);
        let sm = MatFunction::new(cst(s[0][0])?, cst(s[0][1])?, cst(s[1][0])?, cst(s[1][1])?);
        Ok(lm.mul(&rot).mul(&sm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    #[test]
    fn companion_is_fixed() {
        let a = companion(2.5);
        let n = normalize_constant(&a, golden()).unwrap();
        assert_eq!(n.case, ConstantCase::Hyperbolic);
        assert_eq!(n.target_e, 2.5);
        assert_eq!(n.right, ID);
        assert!(n.companion_residual(&a, golden(), None, 8) < 1e-14);
    }

    #[test]
    fn hyperbolic_diagonal() {
        let a = [[3.0, 0.0], [0.0, 1.0 / 3.0]];
        let n = normalize_constant(&a, golden()).unwrap();
        assert!((n.target_e - 10.0 / 3.0).abs() < 1e-15);
        assert!(n.companion_residual(&a, golden(), None, 8) < 1e-12);
    }

    #[test]
    fn c_theta_formula() {
        // sin 2 pi theta = 1/2
        let theta = 1.0 / 12.0;
        let c = c_theta(theta);
        let m = real2_mul(&real2_mul(&c, &rotation(theta)), &inv(&c));
        let want = companion(2.0 * (2.0 * PI * theta).cos());
        assert!(real2_norm(&sub(&m, &want)) < 1e-12);
        let n = normalize_constant(&rotation(theta), golden()).unwrap();
        assert_eq!(n.case, ConstantCase::Elliptic);
        assert_eq!(n.shift, 0);
        assert!(n.companion_residual(&rotation(theta), golden(), None, 16) < 1e-12);
    }

    #[test]
    fn elliptic_needs_shift() {
        // sin 2 pi theta < 0 for the reversed rotation
        let a = rotation(-0.1);
        let n = normalize_constant(&a, golden()).unwrap();
        assert_ne!(n.shift, 0);
        assert!(n.companion_residual(&a, golden(), None, 32) < 1e-10);
        let m = n.as_mat_function(0.05, None).unwrap();
        for x in [0.0, 0.3, 0.77] {
            let c = n.conjugator(x, None);
            let e = m.eval_real(x);
            assert!((e.a.re - c[0][0]).abs() + (e.b.re - c[0][1]).abs() + (e.c.re - c[1][0]).abs() + (e.d.re - c[1][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn parabolic_shrinks() {
        let a = [[1.0, 1.0], [0.0, 1.0]];
        let n = normalize_constant(&a, golden()).unwrap();
        assert_eq!(n.case, ConstantCase::Parabolic);
        let defects: Vec<f64> = (1..=5).map(|i| 10f64.powi(-2 * i)).collect();
        let eps = jordan_schedule(&defects);
        let mut prev = f64::INFINITY;
        for (d, e) in defects.iter().zip(&eps) {
            let v = n.conjugator_norm(Some(*e)).powi(2) * d;
            assert!(v < prev);
            prev = v;
            assert!(n.companion_residual(&a, golden(), Some(*e), 16) < 10.0 * e * e);
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn rejects_non_unimodular() {
        assert!(matches!(
            normalize_constant(&[[2.0, 0.0], [0.0, 1.0]], golden()),
            Err(Error::NotUnimodular { .. })
        ));
    }
}
