//! Half-line Weyl functions `m^+`, `m^-`, the whole-line function `M`, and
//! the hyperbolic-geometry quantities `phi`, `psi` on the upper half-plane.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::potential::{Orbit, Potential};

/// A point of the open upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlanePoint(Complex64);

impl HalfPlanePoint {
    pub fn new(z: Complex64) -> Result<Self> {
        if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
            Ok(HalfPlanePoint(z))
        } else {
            Err(invalid(format!("{z} is not in the open upper half-plane")))
        }
    }

    pub fn value(self) -> Complex64 {
        self.0
    }

    pub fn re(self) -> f64 {
        self.0.re
    }

    pub fn im(self) -> f64 {
        self.0.im
    }

    pub fn abs(self) -> f64 {
        self.0.norm()
    }
}

/// Controls for the backward Möbius recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylOptions {
    /// Stop once the two seeds agree to `tol * max(1, |m|)`.
    pub tol: f64,
    pub initial_depth: usize,
    pub depth_cap: usize,
}

impl Default for WeylOptions {
    fn default() -> Self {
        WeylOptions {
            tol: 1e-10,
            initial_depth: 64,
            depth_cap: 10_000_000,
        }
    }
}

impl WeylOptions {
    pub fn with_tol(tol: f64) -> Self {
        WeylOptions {
            tol,
            ..Self::default()
        }
    }
}

/// A Weyl-function value with the seed spread and the recursion depth used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylEstimate {
    pub value: HalfPlanePoint,
    pub est_error: f64,
    pub depth: usize,
}

fn validate(z: Complex64, opts: &WeylOptions) -> Result<()> {
    if !(z.im > 0.0 && z.re.is_finite() && z.im.is_finite()) {
        return Err(invalid(format!("spectral parameter {z} must lie in the upper half-plane")));
    }
    if !(opts.tol > 0.0) || opts.initial_depth == 0 || opts.depth_cap < opts.initial_depth {
        return Err(invalid("bad Weyl recursion options"));
    }
    Ok(())
}

/// `-u_1/u_0` for the solution of `u_{n+1} + u_{n-1} + w_n u_n = z u_n`
/// that is square-summable at `+infinity`, where `w_n = site(n)` for `n >= 1`.
///
/// Runs `m_{n-1} = -1/(z - w_n + m_n)` down from depth `N` with seeds `i`
/// and `2i`, doubling `N` until the two results agree.
pub fn half_line_m(
    z: Complex64,
    site: impl Fn(i64) -> f64,
    opts: &WeylOptions,
) -> Result<WeylEstimate> {
    validate(z, opts)?;
    let mut depth = opts.initial_depth;
    loop {
        let mut ma = Complex64::new(0.0, 1.0);
        let mut mb = Complex64::new(0.0, 2.0);
        for n in (1..=depth as i64).rev() {
            let w = z - site(n);
            ma = -(w + ma).inv();
            mb = -(w + mb).inv();
        }
        let spread = (ma - mb).norm();
        if spread <= opts.tol * ma.norm().max(1.0) {
            let value = HalfPlanePoint::new(ma).map_err(|_| Error::NoConvergence {
                depth_cap: opts.depth_cap,
                spread,
            })?;
            return Ok(WeylEstimate {
                value,
                est_error: spread,
                depth,
            });
        }
        if depth >= opts.depth_cap {
            return Err(Error::NoConvergence {
                depth_cap: opts.depth_cap,
                spread,
            });
        }
        depth = (depth * 2).min(opts.depth_cap);
    }
}

/// `m^+(z) = -u^+_1/u^+_0` at phase `theta`.
pub fn m_plus(z: Complex64, v: &Potential, orbit: Orbit, theta: f64, opts: &WeylOptions) -> Result<WeylEstimate> {
    half_line_m(z, |n| v.value(orbit.phase(theta, n)), opts)
}

/// `m^-(z) = u^-_1/u^-_0`, with `u^-` square-summable at `-infinity`.
///
/// Computed as `z - v(theta) + g`, where `g = -u^-_{-1}/u^-_0` is the
/// half-line function of the reflected sequence `v(theta - n alpha)`.
pub fn m_minus(z: Complex64, v: &Potential, orbit: Orbit, theta: f64, opts: &WeylOptions) -> Result<WeylEstimate> {
    let g = half_line_m(z, |n| v.value(orbit.phase(theta, -n)), opts)?;
    let m = z - v.value(orbit.phase(theta, 0)) + g.value.value();
    Ok(WeylEstimate {
        value: HalfPlanePoint::new(m)?,
        est_error: g.est_error,
        depth: g.depth,
    })
}

/// `M = (m^+ m^- - 1)/(m^+ + m^-)`.
///
/// With `m^- = u^-_1/u^-_0` this is `G(0,0) + G(1,1)`, the sum of the
/// diagonal resolvent entries at sites 0 and 1.
pub fn m_function(m_plus: HalfPlanePoint, m_minus: HalfPlanePoint) -> Result<HalfPlanePoint> {
    let (a, b) = (m_plus.value(), m_minus.value());
    HalfPlanePoint::new((a * b - 1.0) / (a + b))
}

/// `m^+`, `m^-` and `M` at one spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MTriple {
    pub z: Complex64,
    pub m_plus: HalfPlanePoint,
    pub m_minus: HalfPlanePoint,
    pub big_m: HalfPlanePoint,
    pub est_error: f64,
    pub depth: usize,
}

pub fn m_triple(z: Complex64, v: &Potential, orbit: Orbit, theta: f64, opts: &WeylOptions) -> Result<MTriple> {
    let (p, m) = rayon::join(
        || m_plus(z, v, orbit, theta, opts),
        || m_minus(z, v, orbit, theta, opts),
    );
    let (p, m) = (p?, m?);
    let big_m = m_function(p.value, m.value)?;
    // first-order propagation of the two seed spreads through M
    let (a, b) = (p.value.value(), m.value.value());
    let s = (a + b).norm_sqr();
    let da = (b * b + 1.0).norm() / s;
    let db = (a * a + 1.0).norm() / s;
    Ok(MTriple {
        z,
        m_plus: p.value,
        m_minus: m.value,
        big_m,
        est_error: da * p.est_error + db * m.est_error,
        depth: p.depth.max(m.depth),
    })
}

/// `phi(z) = (1 + |z|^2) / (2 Im z)`, the hyperbolic distance-like
/// quantity `cosh d(z, i)`.
pub fn phi(z: HalfPlanePoint) -> f64 {
    (1.0 + z.value().norm_sqr()) / (2.0 * z.im())
}

/// `psi(z) = phi + sqrt(phi^2 - 1) = sup_beta |z_beta|`.
pub fn psi(z: HalfPlanePoint) -> f64 {
    let p = phi(z).max(1.0);
    p + ((p - 1.0) * (p + 1.0)).sqrt()
}

/// A point of the extended complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Projective {
    Finite(Complex64),
    Infinity,
}

impl Projective {
    /// `|w|`, or `+infinity` at the pole.
    pub fn abs(&self) -> f64 {
        match self {
            Projective::Finite(w) => w.norm(),
            Projective::Infinity => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<Complex64> {
        match self {
            Projective::Finite(w) => Some(*w),
            Projective::Infinity => None,
        }
    }
}

/// `z_beta = R_{-beta/2pi} . z = (cos(b) z + sin(b)) / (-sin(b) z + cos(b))`.
pub fn rotate_beta(z: Complex64, beta: f64) -> Projective {
    let (s, c) = beta.sin_cos();
    let den = -s * z + c;
    if den == Complex64::new(0.0, 0.0) {
        Projective::Infinity
    } else {
        Projective::Finite((c * z + s) / den)
    }
}

/// Finite-box resolvent `(H_box - z)^{-1} e_source` on sites `lo..=hi` with
/// Dirichlet boundary conditions, by tridiagonal elimination. Entry `j`
/// is the value at site `lo + j`.
pub fn box_resolvent_column(
    z: Complex64,
    v: &Potential,
    orbit: Orbit,
    theta: f64,
    lo: i64,
    hi: i64,
    source: i64,
) -> Result<Vec<Complex64>> {
    if hi < lo || source < lo || source > hi {
        return Err(invalid("box must contain the source site"));
    }
    let n = (hi - lo + 1) as usize;
    let diag: Vec<Complex64> = (0..n)
        .map(|j| v.value(orbit.phase(theta, lo + j as i64)) - z)
        .collect();
    // forward sweep for a symmetric tridiagonal with unit off-diagonals
    let mut cprime = vec![Complex64::new(0.0, 0.0); n];
    let mut dprime = vec![Complex64::new(0.0, 0.0); n];
    let src = (source - lo) as usize;
    for j in 0..n {
        let rhs = if j == src { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        let (denom, prev_d) = if j == 0 {
            (diag[0], Complex64::new(0.0, 0.0))
        } else {
            (diag[j] - cprime[j - 1], dprime[j - 1])
        };
        cprime[j] = denom.inv();
        dprime[j] = (rhs - prev_d) / denom;
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    x[n - 1] = dprime[n - 1];
    for j in (0..n - 1).rev() {
        x[j] = dprime[j] - cprime[j] * x[j + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::{Frequency, Precision};

    fn golden() -> Orbit {
        Orbit::new(&Frequency::golden(30, Precision::Extended).unwrap())
    }

    #[test]
    fn free_m_at_i() {
        let m = m_plus(Complex64::new(0.0, 1.0), &Potential::free(), golden(), 0.0, &WeylOptions::with_tol(1e-12)).unwrap();
        let expected = Complex64::new(0.0, (5f64.sqrt() - 1.0) / 2.0);
        assert!((m.value.value() - expected).norm() < 1e-11);
    }

    #[test]
    fn free_m_solves_quadratic() {
        let z = Complex64::new(0.7, 0.05);
        let m = m_plus(z, &Potential::free(), golden(), 0.3, &WeylOptions::with_tol(1e-12)).unwrap().value.value();
        assert!((m * m + z * m + 1.0).norm() < 1e-10);
    }

    #[test]
    fn free_reflection() {
        let z = Complex64::new(-0.4, 0.2);
        let opts = WeylOptions::with_tol(1e-12);
        let p = m_plus(z, &Potential::free(), golden(), 0.0, &opts).unwrap().value.value();
        let m = m_minus(z, &Potential::free(), golden(), 0.0, &opts).unwrap().value.value();
        assert!((m + p.inv()).norm() < 1e-10);
    }

    #[test]
    fn pole_maps_to_infinity() {
        assert_eq!(Projective::Infinity.abs(), f64::INFINITY);
        let beta = 0.9f64;
        let z = Complex64::new(beta.cos() / beta.sin(), 0.0);
        assert!(rotate_beta(z, beta).abs() > 1e14);
        let w = rotate_beta(Complex64::new(0.3, 0.7), std::f64::consts::PI).finite().unwrap();
        assert!((w - Complex64::new(0.3, 0.7)).norm() < 1e-15);
    }

    #[test]
    fn psi_of_two_i() {
        let z = HalfPlanePoint::new(Complex64::new(0.0, 2.0)).unwrap();
        assert!((psi(z) - 2.0).abs() < 1e-15);
        let sup = (0..720)
            .map(|j| rotate_beta(z.value(), j as f64 * std::f64::consts::PI / 720.0).abs())
            .fold(0.0, f64::max);
        assert!((2.0 * (1.0 - 1e-3)..=2.0 + 1e-12).contains(&sup));
    }

    #[test]
    fn rejects_real_axis() {
        assert!(HalfPlanePoint::new(Complex64::new(1.0, 0.0)).is_err());
        let r = m_plus(Complex64::new(0.5, 0.0), &Potential::free(), golden(), 0.0, &WeylOptions::default());
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn depth_cap_reports_no_convergence() {
        let opts = WeylOptions {
            tol: 1e-12,
            initial_depth: 8,
            depth_cap: 64,
        };
        let r = m_plus(Complex64::new(0.3, 1e-6), &Potential::amo(0.5).unwrap(), golden(), 0.0, &opts);
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }
}
