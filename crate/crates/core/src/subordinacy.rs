//! Subordinacy profiles built from the quadratic forms
//! `P_(k) = sum_{j=1}^k A_{2j-1}(x+alpha)^* A_{2j-1}(x+alpha)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::solution;
use crate::error::{invalid, Error, Result};
use crate::potential::{Orbit, Potential};
use crate::weyl::{m_plus, psi, rotate_beta, WeylOptions};

/// `5 + sqrt(24)`, the two-sided constant in the half-line subordinacy bracket.
pub const JL_CONSTANT: f64 = 9.898_979_485_566_356;
/// `2 + sqrt(3)`, the constant of the sharper variant at `det P = 1/eps^2`.
pub const KKL_CONSTANT: f64 = 3.732_050_807_568_877;

/// A real symmetric positive 2x2 matrix `[[a, b], [b, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PMatrix {
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl PMatrix {
    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// `ad - b^2`, with the products formed exactly.
    pub fn det(&self) -> f64 {
        let w = self.b * self.b;
        let err = (-self.b).mul_add(self.b, w);
        self.a.mul_add(self.d, -w) + err
    }

    /// Largest eigenvalue.
    pub fn norm(&self) -> f64 {
        let h = 0.5 * (self.a - self.d);
        0.5 * self.trace() + h.hypot(self.b)
    }

    /// Smallest eigenvalue `||P^{-1}||^{-1} = det / ||P||`.
    pub fn inv_norm_inv(&self) -> f64 {
        self.det() / self.norm()
    }

    /// `<P w, w>` for real `w`.
    pub fn quad(&self, w: [f64; 2]) -> f64 {
        self.a * w[0] * w[0] + 2.0 * self.b * w[0] * w[1] + self.d * w[1] * w[1]
    }

    /// `eps_k = (4 det P)^{-1/2}`.
    pub fn eps(&self) -> f64 {
        0.5 / self.det().sqrt()
    }
}

/// `P_(1), ..., P_(k_max)` at real energy `e` and phase `x`.
pub fn p_ladder(e: f64, v: &Potential, orbit: Orbit, x: f64, k_max: usize) -> Result<Vec<PMatrix>> {
    if k_max == 0 {
        return Err(invalid("k_max must be at least 1"));
    }
    if !e.is_finite() || !x.is_finite() {
        return Err(invalid("energy and phase must be finite"));
    }
    let mut out = Vec::with_capacity(k_max);
    // M_j = A_j(x + alpha) = A(x + j alpha) M_{j-1}
    let mut m = [[1.0f64, 0.0], [0.0, 1.0]];
    let (mut sa, mut sb, mut sd) = (0.0f64, 0.0f64, 0.0f64);
    for j in 1..=(2 * k_max - 1) {
        let t = e - v.value(orbit.phase(x, j as i64));
        m = [
            [t * m[0][0] - m[1][0], t * m[0][1] - m[1][1]],
            [m[0][0], m[0][1]],
        ];
        if j % 2 == 1 {
            sa += m[0][0] * m[0][0] + m[1][0] * m[1][0];
            sb += m[0][0] * m[0][1] + m[1][0] * m[1][1];
            sd += m[0][1] * m[0][1] + m[1][1] * m[1][1];
            if !(sa.is_finite() && sd.is_finite()) {
                return Err(Error::Overflow);
            }
            out.push(PMatrix {
                k: j.div_ceil(2),
                a: sa,
                b: sb,
                d: sd,
            });
        }
    }
    Ok(out)
}

/// Independent evaluation of `det P_(k)` as
/// `min_beta ||u^beta||_L^2 ||u^{beta+pi/2}||_L^2` with `L = 2k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaScan {
    pub det: f64,
    pub beta_min: f64,
    /// `max_beta ||u^beta||_L^2`, which equals `||P_(k)||`.
    pub norm: f64,
}

/// Minimizes over a uniform grid of `grid` angles in `[0, pi)`, then
/// refines with golden-section search.
pub fn det_via_beta_scan(e: f64, v: &Potential, orbit: Orbit, x: f64, k: usize, grid: usize) -> Result<BetaScan> {
    if k == 0 || grid < 4 {
        return Err(invalid("need k >= 1 and a grid of at least 4 angles"));
    }
    let len = 2 * k;
    let z = Complex64::new(e, 0.0);
    let norm_sq = |beta: f64| solution(beta, z, v, orbit, x, len).norm(len).powi(2);
    let f = |beta: f64| norm_sq(beta) * norm_sq(beta + std::f64::consts::FRAC_PI_2);
    let h = std::f64::consts::PI / grid as f64;
    let samples: Vec<(f64, f64, f64)> = (0..grid)
        .into_par_iter()
        .map(|i| {
            let b = i as f64 * h;
            (b, f(b), norm_sq(b))
        })
        .collect();
    let (mut b0, mut f0) = (0.0, f64::INFINITY);
    let mut max_sq = 0.0f64;
    for &(b, fb, nb) in &samples {
        if fb < f0 {
            b0 = b;
            f0 = fb;
        }
        max_sq = max_sq.max(nb);
    }
    let (beta_min, det) = golden_section(f, b0 - h, b0 + h, 1e-12);
    // the maximizer of ||u^beta||^2 is a quarter turn from the minimizer of f
    let (_, neg_max) = golden_section(
        |b| -norm_sq(b),
        beta_min + std::f64::consts::FRAC_PI_2 - 2.0 * h,
        beta_min + std::f64::consts::FRAC_PI_2 + 2.0 * h,
        1e-12,
    );
    Ok(BetaScan {
        det: det.min(f0),
        beta_min,
        norm: (-neg_max).max(max_sq),
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// One row of a subordinacy profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub k: usize,
    #[serde(rename = "norm_P")]
    pub norm_p: f64,
    #[serde(rename = "det_P")]
    pub det_p: f64,
    pub eps_k: f64,
    pub psi_mplus: f64,
    pub ratio_jl: f64,
    pub ratio_blabl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinacyProfile {
    pub e: f64,
    pub theta: f64,
    pub rows: Vec<ProfileRow>,
}

impl SubordinacyProfile {
    /// Rows whose `ratio_jl` lies outside the bracket widened by `slack`.
    pub fn bracket_violations(&self, slack: f64) -> Vec<&ProfileRow> {
        let lo = (1.0 - slack) / JL_CONSTANT;
        let hi = (1.0 + slack) * JL_CONSTANT;
        self.rows
            .iter()
            .filter(|r| !(r.ratio_jl >= lo && r.ratio_jl <= hi))
            .collect()
    }
}

/// `k_j = ceil(ratio^j)`, deduplicated, up to `k_max`.
pub fn geometric_k_list(k_max: usize, ratio: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut t = 1.0f64;
    while (t.ceil() as usize) <= k_max {
        let k = t.ceil() as usize;
        if out.last() != Some(&k) {
            out.push(k);
        }
        t *= ratio.max(1.0001);
    }
    out
}

/// Largest `k` in `ladder` with `eps_k >= eps_floor`.
pub fn k_for_eps(ladder: &[PMatrix], eps_floor: f64) -> usize {
    ladder
        .iter()
        .take_while(|p| p.eps() >= eps_floor)
        .last()
        .map_or(0, |p| p.k)
}

/// Profile rows for each `k` in `k_list`, in order. Rows computed before
/// the first failure are returned together with that failure.
pub fn profile_rows(
    e: f64,
    v: &Potential,
    orbit: Orbit,
    theta: f64,
    k_list: &[usize],
    opts: &WeylOptions,
) -> (Vec<ProfileRow>, Option<Error>) {
    let k_max = match k_list.iter().max() {
        Some(&k) => k,
        None => return (Vec::new(), Some(invalid("empty k list"))),
    };
    if k_list.contains(&0) {
        return (Vec::new(), Some(invalid("k must be at least 1")));
    }
    let ladder = match p_ladder(e, v, orbit, theta, k_max) {
        Ok(l) => l,
        Err(err) => return (Vec::new(), Some(err)),
    };
    let results: Vec<Result<ProfileRow>> = k_list
        .par_iter()
        .map(|&k| {
            let p = ladder[k - 1];
            let det = p.det();
            if !(det > 0.0) {
                return Err(Error::PreconditionFailed(format!(
                    "det P_({k}) = {det:e} is not positive to working precision"
                )));
            }
            let norm = p.norm();
            let eps = 0.5 / det.sqrt();
            let m = m_plus(Complex64::new(e, eps), v, orbit, theta, opts)?;
            let ps = psi(m.value);
            Ok(ProfileRow {
                k,
                norm_p: norm,
                det_p: det,
                eps_k: eps,
                psi_mplus: ps,
                ratio_jl: ps / (2.0 * eps * norm),
                ratio_blabl: norm / p.inv_norm_inv().powi(3),
            })
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(err) => return (rows, Some(err)),
        }
    }
    (rows, None)
}

pub fn profile(
    e: f64,
    v: &Potential,
    orbit: Orbit,
    theta: f64,
    k_list: &[usize],
    opts: &WeylOptions,
) -> Result<SubordinacyProfile> {
    let (rows, err) = profile_rows(e, v, orbit, theta, k_list, opts);
    match err {
        Some(err) => Err(err),
        None => Ok(SubordinacyProfile { e, theta, rows }),
    }
}

/// Evaluation of the fixed-`beta` bracket at scale `L = 2k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JlBracket {
    pub beta: f64,
    pub k: usize,
    /// Solves `||u^beta||_L ||u^{beta+pi/2}||_L = 1/(2 eps)`.
    pub eps: f64,
    /// `|m^+_beta(E + i eps)| ||u^beta||_L / ||u^{beta+pi/2}||_L`.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

pub fn jl_bracket_check(
    e: f64,
    v: &Potential,
    orbit: Orbit,
    theta: f64,
    beta: f64,
    k: usize,
    opts: &WeylOptions,
) -> Result<JlBracket> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let len = 2 * k;
    let z = Complex64::new(e, 0.0);
    let nb = solution(beta, z, v, orbit, theta, len).norm(len);
    let np = solution(beta + std::f64::consts::FRAC_PI_2, z, v, orbit, theta, len).norm(len);
    // at real energy both norms are independent of eps, so the scale
    // equation is solved exactly
    let eps = 0.5 / (nb * np);
    let m = m_plus(Complex64::new(e, eps), v, orbit, theta, opts)?;
    let value = rotate_beta(m.value.value(), beta).abs() * nb / np;
    let (lower, upper) = (1.0 / JL_CONSTANT, JL_CONSTANT);
    Ok(JlBracket {
        beta,
        k,
        eps,
        value,
        lower,
        upper,
        holds: value > lower && value < upper,
    })
}

/// The variant at `det P_(k) = 1/eps^2`: `psi(m^+(E+i eps)) / (eps ||P_(k)||)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KklBracket {
    pub k: usize,
    pub eps: f64,
    pub value: f64,
    pub holds: bool,
}

pub fn kkl_bracket_check(
    e: f64,
    v: &Potential,
    orbit: Orbit,
    theta: f64,
    k: usize,
    opts: &WeylOptions,
) -> Result<KklBracket> {
    let ladder = p_ladder(e, v, orbit, theta, k)?;
    let p = ladder[k - 1];
    let eps = 1.0 / p.det().sqrt();
    let m = m_plus(Complex64::new(e, eps), v, orbit, theta, opts)?;
    let value = psi(m.value) / (eps * p.norm());
    Ok(KklBracket {
        k,
        eps,
        value,
        holds: value > 1.0 / KKL_CONSTANT && value < KKL_CONSTANT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::{Frequency, Precision};

    fn golden() -> Orbit {
        Orbit::new(&Frequency::golden(30, Precision::Extended).unwrap())
    }

    #[test]
    fn constants() {
        assert!((JL_CONSTANT - (5.0 + 24f64.sqrt())).abs() < 1e-15);
        assert!((KKL_CONSTANT - (2.0 + 3f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn free_rotation_at_zero() {
        // A = [[0,-1],[1,0]]: odd powers are +-A, so P_(k) = k I
        let l = p_ladder(0.0, &Potential::free(), golden(), 0.0, 5).unwrap();
        for p in &l {
            assert!((p.a - p.k as f64).abs() < 1e-12 && p.b.abs() < 1e-12);
            assert!((p.det() - (p.k * p.k) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn trace_bound_and_monotone() {
        let v = Potential::amo(0.5).unwrap();
        let l = p_ladder(0.3, &v, golden(), 0.1, 200).unwrap();
        for w in l.windows(2) {
            let diff = PMatrix {
                k: 0,
                a: w[1].a - w[0].a,
                b: w[1].b - w[0].b,
                d: w[1].d - w[0].d,
            };
            assert!(diff.trace() >= 0.0 && diff.det() >= -1e-9 * w[1].norm().powi(2));
        }
        for p in &l {
            assert!(p.trace() >= 2.0 * p.k as f64 - 1e-9);
        }
    }

    #[test]
    fn beta_scan_matches_det() {
        let v = Potential::amo(0.5).unwrap();
        let l = p_ladder(0.2, &v, golden(), 0.0, 20).unwrap();
        let s = det_via_beta_scan(0.2, &v, golden(), 0.0, 20, 256).unwrap();
        assert!((s.det - l[19].det()).abs() < 1e-8 * l[19].det());
        assert!((s.norm - l[19].norm()).abs() < 1e-8 * l[19].norm());
    }

    #[test]
    fn geometric_list() {
        assert_eq!(geometric_k_list(10, 2.0), vec![1, 2, 4, 8]);
        let l = geometric_k_list(1000, 1.3);
        assert!(l.windows(2).all(|w| w[0] < w[1]));
        assert!(*l.last().unwrap() <= 1000);
    }

    #[test]
    fn free_bracket_example() {
        let b = jl_bracket_check(
            0.0,
            &Potential::free(),
            golden(),
            0.0,
            std::f64::consts::FRAC_PI_4,
            20,
            &WeylOptions::with_tol(1e-10),
        )
        .unwrap();
        assert!(b.holds, "{b:?}");
    }
}
