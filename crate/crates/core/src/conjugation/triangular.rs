//! Triangular cocycles `T(x) = [[e^{2 pi i theta}, t(x)], [0, e^{-2 pi i theta}]]`
//! with a single Fourier mode `t(x) = t_r e^{2 pi i r x}`, and the Gram sums
//! `X = sum_{j=1}^k T_{2j-1}^* T_{2j-1}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::band::{BandFunction, MatFunction};
use crate::arithmetic::torus_norm;
use crate::error::{invalid, Result};
use crate::linalg::Mat2;

/// Constant used in the perturbation premise `||T~ - T||_0 <= c k^-2 (1 + 2k ||t||_0)^-2`.
pub const PERTURBATION_C: f64 = 1.0 / 16.0;

/// Horizon guard for the brute-force sum.
pub const BRUTEFORCE_K_MAX: u64 = 1_000_000;

/// Below this `|delta|` (mod 1) the closed forms use their limits.
const DELTA_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangularCocycle {
    pub theta: f64,
    pub alpha: f64,
    pub r: i64,
    pub t_hat: Complex64,
    pub k: u64,
}

/// The entries of `X = [[k, x1], [conj x1, x2]]` and its spectral data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxRecord {
    pub x1: Complex64,
    pub x2: f64,
    #[serde(rename = "detX")]
    pub det_x: f64,
    #[serde(rename = "normX")]
    pub norm_x: f64,
    #[serde(rename = "invnormX")]
    pub invnorm_x: f64,
}

impl TxRecord {
    fn from_entries(k: f64, x1: Complex64, x2: f64, det_x: f64) -> Self {
        let half = 0.5 * (x2 - k);
        let norm_x = 0.5 * (k + x2) + (half * half + x1.norm_sqr()).sqrt();
        TxRecord {
            x1,
            x2,
            det_x,
            norm_x,
            invnorm_x: det_x / norm_x,
        }
    }

    /// Largest relative discrepancy with `other`. `x1` is compared on the
    /// scale `sqrt(k x2)`, which bounds `|x1|` by positivity.
    pub fn max_rel_error(&self, other: &TxRecord, k: u64) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        let x1_scale = (k as f64 * self.x2.max(other.x2)).sqrt();
        [
            (self.x1 - other.x1).norm() / x1_scale,
            rel(self.x2, other.x2),
            rel(self.det_x, other.det_x),
            rel(self.norm_x, other.norm_x),
            rel(self.invnorm_x, other.invnorm_x),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl TriangularCocycle {
    pub fn new(theta: f64, alpha: f64, r: i64, t_hat: Complex64, k: u64) -> Result<Self> {
        if !(theta.is_finite() && alpha.is_finite() && t_hat.re.is_finite() && t_hat.im.is_finite()) {
            return Err(invalid("triangular cocycle parameters must be finite"));
        }
        if k == 0 {
            return Err(invalid("horizon k must be at least 1"));
        }
        Ok(TriangularCocycle {
            theta,
            alpha,
            r,
            t_hat,
            k,
        })
    }

    /// `delta = r alpha - 2 theta`, reduced to `[-1/2, 1/2]`.
    pub fn delta(&self) -> f64 {
        let p = self.r as f64 * self.alpha;
        let e = (self.r as f64).mul_add(self.alpha, -p);
        let d = (p - p.round()) + e - 2.0 * self.theta;
        d - d.round()
    }

    pub fn t_at(&self, x: f64) -> Complex64 {
        self.t_hat * cis(self.r as f64 * x)
    }

    pub fn matrix_at(&self, x: f64) -> Mat2 {
        let e = cis(self.theta);
        Mat2::new(e, self.t_at(x), Complex64::new(0.0, 0.0), e.conj())
    }

    pub fn as_mat_function(&self, band: f64) -> Result<MatFunction> {
        let e = cis(self.theta);
        Ok(MatFunction::new(
            BandFunction::constant(e, band)?,
            BandFunction::new(BTreeMap::from([(self.r, self.t_hat)]), band)?,
            BandFunction::zero(band)?,
            BandFunction::constant(e.conj(), band)?,
        ))
    }

    /// Off-diagonal entry of `T_j(x)` from the geometric-sum formula.
    pub fn t_j(&self, x: f64, j: u64) -> Complex64 {
        let d = self.delta();
        let ratio = if d.abs() < DELTA_LIMIT {
            Complex64::new(j as f64, 0.0)
        } else {
            // (e^{2 pi i j d} - 1) / (e^{2 pi i d} - 1)
            cis(0.5 * (j as f64 - 1.0) * d) * (sin_2pi(0.5 * j as f64 * d) / sin_2pi(0.5 * d))
        };
        self.t_hat * cis(self.r as f64 * x + (j as f64 - 1.0) * self.theta) * ratio
    }
}

/// `e^{2 pi i t}`.
fn cis(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (t - t.round()))
}

/// `sin(2 pi t)` with exact reduction of `t` to `[-1/4, 1/4]`.
fn sin_2pi(t: f64) -> f64 {
    let mut u = t - t.round();
    if u > 0.25 {
        u = 0.5 - u;
    } else if u < -0.25 {
        u = -0.5 - u;
    }
    (2.0 * PI * u).sin()
}

/// `m t` reduced mod 1 with the product error restored.
fn frac_mul(m: f64, t: f64) -> f64 {
    let p = m * t;
    let e = m.mul_add(t, -p);
    let r = (p - p.round()) + e;
    r - r.round()
}

/// `1 - sin(2 pi m u) / (m sin(2 pi u))` for `|u| <= 1/4`, accurate when small.
fn h_reduced(m: u64, u: f64) -> f64 {
    let mf = m as f64;
    let y = 2.0 * PI * u;
    if y == 0.0 {
        return 0.0;
    }
    if (mf * y).abs() < 0.5 {
        // m sin y - sin(m y) = sum_{n >= 1} (-1)^{n+1} (m^{2n+1} - m) y^{2n+1} / (2n+1)!
        let (mut num, mut fact, mut ypow, mut mpow) = (0.0, 1.0, y, mf);
        let mut sign = 1.0;
        for n in 1..40 {
            fact *= (2 * n) as f64 * (2 * n + 1) as f64;
            ypow *= y * y;
            mpow *= mf * mf;
            let term = sign * (mpow - mf) * ypow / fact;
            num += term;
            if term.abs() <= 1e-18 * num.abs() {
                break;
            }
            sign = -sign;
        }
        num / (mf * y.sin())
    } else {
        1.0 - sin_2pi(frac_mul(mf, u)) / (mf * y.sin())
    }
}

/// `1 - sin(2 pi m d) / (m sin(2 pi d))` for even `m` and any `d`, avoiding
/// cancellation near `d = 0` and `d = 1/2`.
fn h_even(m: u64, d: f64) -> f64 {
    let mut u = d - d.round();
    if u.abs() <= 0.25 {
        h_reduced(m, u)
    } else {
        // shifting d by 1/2 flips the sign of the ratio for even m
        u = if u > 0.0 { u - 0.5 } else { u + 0.5 };
        2.0 - h_reduced(m, u)
    }
}

/// `1 - (sin(2 pi k d) / (k sin(2 pi d)))^2`.
fn one_minus_ratio_sq(k: u64, d: f64) -> f64 {
    let mut u = d - d.round();
    if u > 0.25 {
        u -= 0.5;
    } else if u < -0.25 {
        u += 0.5;
    }
    let h = h_reduced(k, u);
    h * (2.0 - h)
}

/// Closed forms for `X`.
pub fn tx_closed_form(tc: &TriangularCocycle, x: f64) -> TxRecord {
    let k = tc.k as f64;
    let d = tc.delta();
    let t2 = tc.t_hat.norm_sqr();
    let phase = tc.t_hat * cis(tc.r as f64 * x - tc.theta);
    if d.abs() < DELTA_LIMIT {
        // limits: sum of odd integers and of their squares
        let x1 = phase * (k * k);
        let x2 = k + t2 * k * (4.0 * k * k - 1.0) / 3.0;
        let det = k * k * (1.0 + t2 * (k * k - 1.0) / 3.0);
        return TxRecord::from_entries(k, x1, x2, det);
    }
    let s_half = sin_2pi(0.5 * d);
    let q_minus_1_sq = 4.0 * s_half * s_half;
    let x2 = k * (1.0 + 2.0 * t2 / q_minus_1_sq * h_even(2 * tc.k, d));
    let det = k * k * (1.0 + t2 / q_minus_1_sq * one_minus_ratio_sq(tc.k, d));
    // sum_{j=1}^k (q^{2j-1} - 1) = -k h(2k, d) + i sin^2(2 pi k d) / sin(2 pi d)
    let skd = sin_2pi(frac_mul(k, d));
    let sd = sin_2pi(d);
    let im = if sd == 0.0 { 0.0 } else { skd * skd / sd };
    let num = Complex64::new(-k * h_even(2 * tc.k, d), im);
    let q_minus_1 = Complex64::new(0.0, 2.0 * s_half) * cis(0.5 * d);
    TxRecord::from_entries(k, phase * num / q_minus_1, x2, det)
}

/// `T_1(x), ..., T_n(x)` by explicit products.
pub fn tx_products(tc: &TriangularCocycle, x: f64, n: u64) -> Vec<Mat2> {
    let mut out = Vec::with_capacity(n as usize);
    let mut acc = Mat2::identity();
    for j in 0..n {
        acc = tc.matrix_at(x + j as f64 * tc.alpha) * acc;
        out.push(acc);
    }
    out
}

/// `(x1, X_11, x2)` from `sum_j T_{2j-1}^* T_{2j-1}`.
fn gram_sum(products: &[Mat2], k: u64) -> (Complex64, f64, f64) {
    let mut x11 = 0.0;
    let mut x1 = Complex64::new(0.0, 0.0);
    let mut x2 = 0.0;
    for j in 1..=k as usize {
        let m = &products[2 * j - 2];
        let g = m.adjoint() * *m;
        x11 += g.a.re;
        x1 += g.b;
        x2 += g.d.re;
    }
    (x1, x11, x2)
}

/// `X` by summing explicit products. `det X` is taken from the Cauchy-Binet
/// expansion `k^2 + sum_{m<n} |a_m t_n - a_n t_m|^2` of the stacked rows,
/// which avoids the cancellation in `k x2 - |x1|^2`.
pub fn tx_bruteforce(tc: &TriangularCocycle, x: f64) -> Result<TxRecord> {
    if tc.k > BRUTEFORCE_K_MAX {
        return Err(invalid(format!("k = {} exceeds the brute-force guard {}", tc.k, BRUTEFORCE_K_MAX)));
    }
    let products = tx_products(tc, x, 2 * tc.k - 1);
    let (x1, x11, x2) = gram_sum(&products, tc.k);
    let rows: Vec<(Complex64, Complex64)> = (1..=tc.k as usize)
        .map(|j| (products[2 * j - 2].a, products[2 * j - 2].b))
        .collect();
    let mut cross = 0.0;
    for m in 0..rows.len() {
        let mut s = 0.0;
        for n in m + 1..rows.len() {
            s += (rows[m].0 * rows[n].1 - rows[n].0 * rows[m].1).norm_sqr();
        }
        cross += s;
    }
    let k = tc.k as f64;
    debug_assert!((x11 - k).abs() <= 1e-9 * k);
    Ok(TxRecord::from_entries(k, x1, x2, k * k + cross))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxAsymptotics {
    pub norm_ratio: f64,
    pub inv_ratio: f64,
}

/// `||X||` against `k (1 + |t_r|^2 min(k^2, ||delta||^-2))` and `||X^-1||^-1` against `k`.
pub fn tx_asymptotics_check(tc: &TriangularCocycle, x: f64) -> Result<TxAsymptotics> {
    if tc.k < 2 {
        return Err(invalid("asymptotics need k >= 2"));
    }
    let rec = tx_closed_form(tc, x);
    let k = tc.k as f64;
    let dn = torus_norm(tc.delta());
    let m = if dn * k >= 1.0 { dn.powi(-2) } else { k * k };
    let cmp = k * (1.0 + tc.t_hat.norm_sqr() * m);
    Ok(TxAsymptotics {
        norm_ratio: rec.norm_x / cmp,
        inv_ratio: rec.invnorm_x / k,
    })
}

/// Both sides of the perturbation bound at one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    /// `||X~ - X||` at `x`.
    pub lhs: f64,
    /// Conclusion bound, 1.
    pub rhs: f64,
    /// `||T~ - T||_0` on the phase grid.
    pub premise: f64,
    /// `c k^-2 (1 + 2k ||t||_0)^-2`.
    pub threshold: f64,
    pub premise_holds: bool,
    pub holds: bool,
}

/// Phase grid for the premise norm.
pub const PREMISE_GRID: usize = 1024;

pub fn perturbation_bound_check(tc: &TriangularCocycle, x: f64, t_tilde: &MatFunction) -> PerturbationRecord {
    let premise = (0..PREMISE_GRID)
        .map(|j| {
            let y = j as f64 / PREMISE_GRID as f64;
            t_tilde.eval_real(y).sub(&tc.matrix_at(y)).norm()
        })
        .fold(0.0, f64::max);
    let k = tc.k as f64;
    let threshold = PERTURBATION_C / (k * k * (1.0 + 2.0 * k * tc.t_hat.norm()).powi(2));
    let n = 2 * tc.k - 1;
    let mut acc = Mat2::identity();
    let mut acc_t = Mat2::identity();
    let mut diff = Mat2::new(0.0.into(), 0.0.into(), 0.0.into(), 0.0.into());
    for j in 0..n {
        let y = x + j as f64 * tc.alpha;
        acc = tc.matrix_at(y) * acc;
        acc_t = t_tilde.eval_real(y) * acc_t;
        if j % 2 == 0 {
            diff = diff.add(&(acc_t.adjoint() * acc_t).sub(&(acc.adjoint() * acc)));
        }
    }
    let lhs = diff.norm();
    PerturbationRecord {
        lhs,
        rhs: 1.0,
        premise,
        threshold,
        premise_holds: premise <= threshold,
        holds: lhs <= 1.0,
    }
}

/// `T (Id + eta E_12)`.
pub fn upper_perturbation(tc: &TriangularCocycle, eta: f64, band: f64) -> Result<MatFunction> {
    let n = MatFunction::constant(&Mat2::real(1.0, eta, 0.0, 1.0), band)?;
    Ok(tc.as_mat_function(band)?.mul(&n))
}

/// Largest `eta` on a halving ladder from `eta_hi` for which `T (Id + eta E_12)`
/// keeps `||X~ - X|| <= 1`, refined by bisection to relative `1e-3`.
pub fn empirical_threshold(tc: &TriangularCocycle, x: f64, eta_hi: f64) -> Result<f64> {
    let holds = |eta: f64| -> Result<bool> {
        let tt = upper_perturbation(tc, eta, 0.01)?;
        Ok(perturbation_bound_check(tc, x, &tt).holds)
    };
    let mut hi = eta_hi;
    if holds(hi)? {
        return Ok(hi);
    }
    let mut lo = hi;
    for _ in 0..200 {
        lo *= 0.5;
        if holds(lo)? {
            break;
        }
        hi = lo;
    }
    while hi - lo > 1e-3 * lo {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
