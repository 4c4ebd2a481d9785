//! Real-analytic one-frequency potentials.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arithmetic::Frequency;
use crate::error::{invalid, Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// A real-valued potential `v` on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialRepr", into = "PotentialRepr")]
pub enum Potential {
    /// Almost Mathieu: `2 lambda cos(2 pi x)`.
    Amo { lambda: f64 },
    /// Trigonometric polynomial `sum_k c_k e^{2 pi i k x}` with `c_{-k} = conj(c_k)`.
    /// Only `k >= 0` is stored.
    TrigPoly { modes: BTreeMap<i64, Complex64> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
enum PotentialRepr {
    Amo { lambda: f64 },
    Trigpoly { coeffs: Vec<(i64, f64, f64)> },
}

impl TryFrom<PotentialRepr> for Potential {
    type Error = Error;

    fn try_from(r: PotentialRepr) -> Result<Self> {
        match r {
            PotentialRepr::Amo { lambda } => Potential::amo(lambda),
            PotentialRepr::Trigpoly { coeffs } => Potential::trig_poly(
                &coeffs
                    .into_iter()
                    .map(|(k, re, im)| (k, Complex64::new(re, im)))
                    .collect::<Vec<_>>(),
            ),
        }
    }
}

impl From<Potential> for PotentialRepr {
    fn from(p: Potential) -> Self {
        match p {
            Potential::Amo { lambda } => PotentialRepr::Amo { lambda },
            Potential::TrigPoly { .. } => PotentialRepr::Trigpoly {
                coeffs: p
                    .coefficients()
                    .into_iter()
                    .map(|(k, c)| (k, c.re, c.im))
                    .collect(),
            },
        }
    }
}

impl Potential {
    pub fn amo(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(invalid("lambda must be finite"));
        }
        Ok(Potential::Amo { lambda })
    }

    /// The zero potential.
    pub fn free() -> Self {
        Potential::TrigPoly {
            modes: BTreeMap::new(),
        }
    }

    /// Builds a trigonometric polynomial from `(k, c_k)` pairs. A missing
    /// `c_{-k}` is filled in as `conj(c_k)`; an inconsistent pair is rejected.
    pub fn trig_poly(coeffs: &[(i64, Complex64)]) -> Result<Self> {
        let mut full: BTreeMap<i64, Complex64> = BTreeMap::new();
        for &(k, c) in coeffs {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(invalid("coefficients must be finite"));
            }
            if full.insert(k, c).is_some() {
                return Err(invalid(format!("mode {k} given twice")));
            }
        }
        let mut modes = BTreeMap::new();
        for (&k, &c) in &full {
            if k < 0 {
                if !full.contains_key(&-k) {
                    modes.insert(-k, c.conj());
                }
                continue;
            }
            if k == 0 && c.im.abs() > SYMMETRY_TOL * (1.0 + c.re.abs()) {
                return Err(invalid("mode 0 must be real for a real potential"));
            }
            if let Some(m) = full.get(&-k) {
                if k > 0 && (m.conj() - c).norm() > SYMMETRY_TOL * (1.0 + c.norm()) {
                    return Err(invalid(format!(
                        "modes {k} and {} are not conjugate; the potential would not be real",
                        -k
                    )));
                }
            }
            let c = if k == 0 { Complex64::new(c.re, 0.0) } else { c };
            modes.insert(k, c);
        }
        modes.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        Ok(Potential::TrigPoly { modes })
    }

    /// All nonzero Fourier coefficients, `k` ascending.
    pub fn coefficients(&self) -> Vec<(i64, Complex64)> {
        match self {
            Potential::Amo { lambda } => {
                if *lambda == 0.0 {
                    Vec::new()
                } else {
                    let c = Complex64::new(*lambda, 0.0);
                    vec![(-1, c), (1, c)]
                }
            }
            Potential::TrigPoly { modes } => {
                let mut out: Vec<(i64, Complex64)> = modes
                    .iter()
                    .filter(|(&k, _)| k > 0)
                    .map(|(&k, &c)| (-k, c.conj()))
                    .collect();
                out.reverse();
                out.extend(modes.iter().map(|(&k, &c)| (k, c)));
                out
            }
        }
    }

    /// `v(x)` on the real line.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Amo { lambda } => 2.0 * lambda * (2.0 * PI * x).cos(),
            Potential::TrigPoly { modes } => {
                let mut s = 0.0;
                for (&k, &c) in modes {
                    if k == 0 {
                        s += c.re;
                    } else {
                        let (sn, cs) = (2.0 * PI * k as f64 * x).sin_cos();
                        s += 2.0 * (c.re * cs - c.im * sn);
                    }
                }
                s
            }
        }
    }

    /// The holomorphic extension `v(z)`.
    pub fn value_complex(&self, z: Complex64) -> Complex64 {
        self.coefficients()
            .into_iter()
            .map(|(k, c)| c * (Complex64::new(0.0, 2.0 * PI * k as f64) * z).exp())
            .sum()
    }

    /// `sum_k |c_k| e^{2 pi eps |k|}`, a bound for `sup |v|` on the strip `|Im z| < eps`.
    pub fn band_norm(&self, eps: f64) -> f64 {
        self.coefficients()
            .into_iter()
            .map(|(k, c)| c.norm() * (2.0 * PI * eps * k.abs() as f64).exp())
            .sum()
    }

    /// Bound for `sup |v|` on the real line.
    pub fn sup_bound(&self) -> f64 {
        self.band_norm(0.0)
    }

    /// `x -> v(-x)`.
    pub fn reflected(&self) -> Potential {
        match self {
            Potential::Amo { .. } => self.clone(),
            Potential::TrigPoly { modes } => Potential::TrigPoly {
                modes: modes.iter().map(|(&k, &c)| (k, c.conj())).collect(),
            },
        }
    }

    /// `x -> e - v(x)`, the diagonal entry of the transfer matrix at energy `e`.
    pub fn energy_symbol(&self, e: f64) -> Potential {
        let mut modes: BTreeMap<i64, Complex64> = self
            .coefficients()
            .into_iter()
            .filter(|&(k, _)| k >= 0)
            .map(|(k, c)| (k, -c))
            .collect();
        *modes.entry(0).or_insert(Complex64::new(0.0, 0.0)) += e;
        modes.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        Potential::TrigPoly { modes }
    }

    pub fn is_free(&self) -> bool {
        self.coefficients().is_empty()
    }
}

/// Orbit `x + n alpha mod 1` with the frequency split as `hi + lo`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orbit {
    hi: f64,
    lo: f64,
}

impl Orbit {
    pub fn new(freq: &Frequency) -> Self {
        let (hi, lo) = freq.alpha_parts();
        Orbit { hi, lo }
    }

    /// For a frequency known only to double precision.
    pub fn from_f64(alpha: f64) -> Self {
        Orbit { hi: alpha, lo: 0.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.hi
    }

    /// `frac(x + n alpha)`, with `n alpha` formed exactly before reduction.
    #[inline]
    pub fn phase(&self, x: f64, n: i64) -> f64 {
        let nf = n as f64;
        let p = nf * self.hi;
        let e = nf.mul_add(self.hi, -p);
        let t = p - p.floor();
        let r = t + (x + (e + nf * self.lo));
        r - r.floor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::Precision;

    #[test]
    fn amo_json_round_trip() {
        let p: Potential = serde_json::from_str(r#"{"variant":"amo","lambda":0.5}"#).unwrap();
        assert_eq!(p, Potential::Amo { lambda: 0.5 });
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"variant":"amo","lambda":0.5}"#);
    }

    #[test]
    fn trigpoly_fills_conjugates() {
        let p: Potential =
            serde_json::from_str(r#"{"variant":"trigpoly","coeffs":[[1,0.5,0.25],[0,0.1,0]]}"#)
                .unwrap();
        let c = p.coefficients();
        assert_eq!(c.len(), 3);
        assert_eq!(c[0], (-1, Complex64::new(0.5, -0.25)));
        let x = 0.137;
        let direct = 0.1 + 2.0 * (0.5 * (2.0 * PI * x).cos() - 0.25 * (2.0 * PI * x).sin());
        assert!((p.value(x) - direct).abs() < 1e-15);
        assert!((p.value_complex(x.into()).re - direct).abs() < 1e-14);
    }

    #[test]
    fn non_real_trigpoly_rejected() {
        let r: std::result::Result<Potential, _> =
            serde_json::from_str(r#"{"variant":"trigpoly","coeffs":[[1,0.5,0],[-1,0.2,0]]}"#);
        assert!(r.is_err());
    }

    #[test]
    fn amo_matches_trigpoly() {
        let a = Potential::amo(0.7).unwrap();
        let t = Potential::trig_poly(&[(1, Complex64::new(0.7, 0.0))]).unwrap();
        for i in 0..20 {
            let x = i as f64 / 20.0 + 0.013;
            assert!((a.value(x) - t.value(x)).abs() < 1e-14);
        }
        assert!((a.band_norm(0.1) - 1.4 * (0.2 * PI).exp()).abs() < 1e-14);
    }

    #[test]
    fn energy_symbol_shifts() {
        let p = Potential::amo(0.5).unwrap();
        let s = p.energy_symbol(3.0);
        assert!((s.value(0.2) - (3.0 - p.value(0.2))).abs() < 1e-14);
    }

    #[test]
    fn orbit_phase_tracks_extended_value() {
        let f = Frequency::golden(10, Precision::Extended).unwrap();
        let o = Orbit::new(&f);
        for &n in &[1i64, 1000, 123_456_789, -98_765_432] {
            let exact = f.orbit_point(0.25, n);
            let d = (o.phase(0.25, n) - exact).abs();
            assert!(d.min(1.0 - d) < 1e-15, "n = {n}");
        }
    }
}
