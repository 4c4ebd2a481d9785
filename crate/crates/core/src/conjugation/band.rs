//! Analytic functions on a band `|Im x| < eps`, stored as finite Fourier
//! series, and 2x2 matrices of them.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::Mat2;
use crate::potential::Potential;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative threshold below which weighted modes are dropped by [`BandFunction::truncated`].
pub const TRUNCATION_REL: f64 = 1e-16;

/// Relative size of transform rounding in interpolated coefficients.
pub const NOISE_REL: f64 = 4.0 * f64::EPSILON;

#[inline]
fn mode_exp(k: i64, x: Complex64) -> Complex64 {
    (Complex64::new(0.0, 2.0 * PI * k as f64) * x).exp()
}

/// `e^{2 pi i k t}` with `k t` reduced before the exponential.
#[inline]
fn mode_phase(k: i64, t: f64) -> Complex64 {
    let p = k as f64 * t;
    let e = (k as f64).mul_add(t, -p);
    let r = (p - p.round()) + e;
    Complex64::from_polar(1.0, 2.0 * PI * r)
}

/// `f(x) = sum_k c_k e^{2 pi i k x}` with finitely many modes.
#[derive(Debug, Clone, PartialEq)]
pub struct BandFunction {
    coeffs: BTreeMap<i64, Complex64>,
    band: f64,
}

impl BandFunction {
    pub fn new(coeffs: BTreeMap<i64, Complex64>, band: f64) -> Result<Self> {
        if !(band.is_finite() && band > 0.0) {
            return Err(invalid("band must be positive and finite"));
        }
        if coeffs.values().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(invalid("coefficients must be finite"));
        }
        let mut f = BandFunction { coeffs, band };
        f.coeffs.retain(|_, c| *c != ZERO);
        Ok(f)
    }

    pub fn zero(band: f64) -> Result<Self> {
        Self::new(BTreeMap::new(), band)
    }

    pub fn constant(c: Complex64, band: f64) -> Result<Self> {
        Self::new(BTreeMap::from([(0, c)]), band)
    }

    /// `c e^{2 pi i k x}`.
    pub fn monomial(k: i64, c: Complex64, band: f64) -> Result<Self> {
        Self::new(BTreeMap::from([(k, c)]), band)
    }

    pub fn from_potential(v: &Potential, band: f64) -> Result<Self> {
        Self::new(v.coefficients().into_iter().collect(), band)
    }

    pub fn coeffs(&self) -> &BTreeMap<i64, Complex64> {
        &self.coeffs
    }

    pub fn band(&self) -> f64 {
        self.band
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        self.coeffs.get(&k).copied().unwrap_or(ZERO)
    }

    /// Largest `|k|` carried.
    pub fn degree(&self) -> i64 {
        self.coeffs.keys().map(|k| k.abs()).max().unwrap_or(0)
    }

    /// Majorant `sum_k |c_k| e^{2 pi eps |k|}`, which dominates `sup |f|` on the band.
    pub fn norm(&self) -> f64 {
        self.norm_at(self.band)
    }

    pub fn norm_at(&self, eps: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(&k, c)| c.norm() * (2.0 * PI * eps * k.abs() as f64).exp())
            .sum()
    }

    /// Largest `|f|` over `points` equally spaced samples on each boundary line `Im x = ±band`.
    pub fn sup_on_grid(&self, points: usize) -> f64 {
        let mut m: f64 = 0.0;
        for s in [-1.0, 1.0] {
            for j in 0..points {
                let z = Complex64::new(j as f64 / points as f64, s * self.band);
                m = m.max(self.eval(z).norm());
            }
        }
        m
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().map(|(&k, &c)| c * mode_exp(k, z)).sum()
    }

    pub fn eval_real(&self, x: f64) -> Complex64 {
        self.coeffs.iter().map(|(&k, &c)| c * mode_phase(k, x)).sum()
    }

    /// `sup_k |c_{-k} - conj(c_k)|`; zero exactly when `f` is real on the real line.
    pub fn real_asymmetry(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(&k, &c)| (self.coeff(-k) - c.conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `x -> f(x + t)`.
    pub fn shift(&self, t: f64) -> Self {
        BandFunction {
            coeffs: self
                .coeffs
                .iter()
                .map(|(&k, &c)| (k, c * mode_phase(k, t)))
                .collect(),
            band: self.band,
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.values_mut().for_each(|c| *c *= s);
        out.coeffs.retain(|_, c| *c != ZERO);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&k, &c) in &other.coeffs {
            *out.coeffs.entry(k).or_insert(ZERO) += c;
        }
        out.coeffs.retain(|_, c| *c != ZERO);
        out.band = self.band.min(other.band);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Product by convolution of coefficients.
    pub fn mul(&self, other: &Self) -> Self {
        let mut coeffs = BTreeMap::new();
        for (&k, &a) in &self.coeffs {
            for (&l, &b) in &other.coeffs {
                *coeffs.entry(k + l).or_insert(ZERO) += a * b;
            }
        }
        coeffs.retain(|_, c| *c != ZERO);
        BandFunction {
            coeffs,
            band: self.band.min(other.band),
        }
    }

    /// Drops modes with `|c_k| e^{2 pi eps |k|} < rel * ||f||_eps`.
    pub fn truncated(&self, rel: f64) -> Self {
        let cut = rel * self.norm();
        let band = self.band;
        BandFunction {
            coeffs: self
                .coeffs
                .iter()
                .filter(|(&k, c)| c.norm() * (2.0 * PI * band * k.abs() as f64).exp() >= cut)
                .map(|(&k, &c)| (k, c))
                .collect(),
            band,
        }
    }

    /// Values at `x_j = j / n`, aliasing modes with `|k| >= n / 2`.
    pub fn sample(&self, n: usize) -> Vec<Complex64> {
        let mut buf = vec![ZERO; n];
        for (&k, &c) in &self.coeffs {
            buf[k.rem_euclid(n as i64) as usize] += c;
        }
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        buf
    }

    /// Interpolates samples at `x_j = j / n`. The Nyquist mode of an even
    /// grid is discarded, so real samples give a real function. Coefficients
    /// below `NOISE_REL * sum |c_k|` are transform rounding and are dropped;
    /// left in, the band weights `e^{2 pi eps |k|}` would amplify them.
    pub fn from_samples(samples: &[Complex64], band: f64) -> Result<Self> {
        let raw = raw_coefficients(samples)?;
        let cut = NOISE_REL * raw.iter().map(|(_, c)| c.norm()).sum::<f64>();
        Self::new(raw.into_iter().filter(|(_, c)| c.norm() >= cut).collect(), band)
    }

    /// As [`BandFunction::from_samples`] with an absolute floor, for samples
    /// whose rounding is set by a larger computation than their own size.
    pub fn from_samples_floor(samples: &[Complex64], band: f64, floor: f64) -> Result<Self> {
        let raw = raw_coefficients(samples)?;
        Self::new(raw.into_iter().filter(|(_, c)| c.norm() >= floor).collect(), band)
    }

    /// Real-valued potential with coefficients `c_k` for `k >= 0`, after
    /// symmetrizing and dropping the imaginary part of the mean.
    pub fn to_potential(&self) -> Result<Potential> {
        let mut modes: Vec<(i64, Complex64)> = Vec::new();
        for k in 0..=self.degree() {
            let c = (self.coeff(k) + self.coeff(-k).conj()) * 0.5;
            let c = if k == 0 { Complex64::new(c.re, 0.0) } else { c };
            if c != ZERO {
                modes.push((k, c));
            }
        }
        Potential::trig_poly(&modes)
    }

    pub(crate) fn to_triples(&self) -> Vec<(i64, f64, f64)> {
        self.coeffs.iter().map(|(&k, c)| (k, c.re, c.im)).collect()
    }

    pub(crate) fn from_triples(t: &[(i64, f64, f64)], band: f64) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for &(k, re, im) in t {
            if coeffs.insert(k, Complex64::new(re, im)).is_some() {
                return Err(invalid(format!("mode {k} given twice")));
            }
        }
        Self::new(coeffs, band)
    }
}

fn raw_coefficients(samples: &[Complex64]) -> Result<Vec<(i64, Complex64)>> {
    let n = samples.len();
    if n == 0 {
        return Err(invalid("no samples"));
    }
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = (n as i64 - 1) / 2;
    Ok((-half..=half)
        .map(|k| (k, buf[k.rem_euclid(n as i64) as usize] / n as f64))
        .collect())
}

/// A 2x2 matrix of band functions, row-major `[a, b, c, d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatFunctionRepr", into = "MatFunctionRepr")]
pub struct MatFunction {
    pub entries: [BandFunction; 4],
}

#[derive(Serialize, Deserialize)]
struct MatFunctionRepr {
    band: f64,
    entries: [Vec<(i64, f64, f64)>; 4],
}

impl TryFrom<MatFunctionRepr> for MatFunction {
    type Error = crate::Error;

    fn try_from(r: MatFunctionRepr) -> Result<Self> {
        let [a, b, c, d] = &r.entries;
        Ok(MatFunction {
            entries: [
                BandFunction::from_triples(a, r.band)?,
                BandFunction::from_triples(b, r.band)?,
                BandFunction::from_triples(c, r.band)?,
                BandFunction::from_triples(d, r.band)?,
            ],
        })
    }
}

impl From<MatFunction> for MatFunctionRepr {
    fn from(m: MatFunction) -> Self {
        MatFunctionRepr {
            band: m.band(),
            entries: [
                m.entries[0].to_triples(),
                m.entries[1].to_triples(),
                m.entries[2].to_triples(),
                m.entries[3].to_triples(),
            ],
        }
    }
}

impl MatFunction {
    pub fn new(a: BandFunction, b: BandFunction, c: BandFunction, d: BandFunction) -> Self {
        MatFunction {
            entries: [a, b, c, d],
        }
    }

    pub fn constant(m: &Mat2, band: f64) -> Result<Self> {
        Ok(Self::new(
            BandFunction::constant(m.a, band)?,
            BandFunction::constant(m.b, band)?,
            BandFunction::constant(m.c, band)?,
            BandFunction::constant(m.d, band)?,
        ))
    }

    pub fn identity(band: f64) -> Result<Self> {
        Self::constant(&Mat2::identity(), band)
    }

    /// `[[v, -1], [1, 0]]`.
    pub fn schrodinger(v: &BandFunction) -> Result<Self> {
        let band = v.band();
        Ok(Self::new(
            v.clone(),
            BandFunction::constant((-1.0).into(), band)?,
            BandFunction::constant(1.0.into(), band)?,
            BandFunction::zero(band)?,
        ))
    }

    /// Interpolates `f` sampled at `n` equally spaced real points.
    pub fn from_fn(n: usize, band: f64, f: impl Fn(f64) -> Mat2) -> Result<Self> {
        let vals: Vec<Mat2> = (0..n).map(|j| f(j as f64 / n as f64)).collect();
        Self::from_grid(&vals, band)
    }

    /// Interpolates grid values, with one rounding floor for all four
    /// entries set by the largest.
    pub fn from_grid(vals: &[Mat2], band: f64) -> Result<Self> {
        let col = |g: fn(&Mat2) -> Complex64| vals.iter().map(g).collect::<Vec<_>>();
        let cols = [col(|m| m.a), col(|m| m.b), col(|m| m.c), col(|m| m.d)];
        let scale = cols
            .iter()
            .map(|c| raw_coefficients(c).map(|r| r.iter().map(|(_, z)| z.norm()).sum::<f64>()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let floor = NOISE_REL * scale;
        let [a, b, c, d] = &cols;
        Ok(Self::new(
            BandFunction::from_samples_floor(a, band, floor)?,
            BandFunction::from_samples_floor(b, band, floor)?,
            BandFunction::from_samples_floor(c, band, floor)?,
            BandFunction::from_samples_floor(d, band, floor)?,
        ))
    }

    pub fn band(&self) -> f64 {
        self.entries.iter().map(|e| e.band()).fold(f64::INFINITY, f64::min)
    }

    pub fn eval(&self, z: Complex64) -> Mat2 {
        let [a, b, c, d] = &self.entries;
        Mat2::new(a.eval(z), b.eval(z), c.eval(z), d.eval(z))
    }

    pub fn eval_real(&self, x: f64) -> Mat2 {
        let [a, b, c, d] = &self.entries;
        Mat2::new(a.eval_real(x), b.eval_real(x), c.eval_real(x), d.eval_real(x))
    }

    pub fn sample(&self, n: usize) -> Vec<Mat2> {
        let s: Vec<Vec<Complex64>> = self.entries.iter().map(|e| e.sample(n)).collect();
        (0..n)
            .map(|j| Mat2::new(s[0][j], s[1][j], s[2][j], s[3][j]))
            .collect()
    }

    /// Frobenius norm of the entry majorants. Dominates `sup ||M||` on the
    /// band and is submultiplicative.
    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn shift(&self, t: f64) -> Self {
        MatFunction {
            entries: self.entries.clone().map(|e| e.shift(t)),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let [a, b, c, d] = &self.entries;
        let [e, f, g, h] = &other.entries;
        Self::new(
            a.mul(e).add(&b.mul(g)),
            a.mul(f).add(&b.mul(h)),
            c.mul(e).add(&d.mul(g)),
            c.mul(f).add(&d.mul(h)),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (o, e) in out.entries.iter_mut().zip(&other.entries) {
            *o = o.sub(e);
        }
        out
    }

    pub fn truncated(&self, rel: f64) -> Self {
        MatFunction {
            entries: self.entries.clone().map(|e| e.truncated(rel)),
        }
    }

    /// Largest `|det M(x) - 1|` over `n` equally spaced real points.
    pub fn det_defect(&self, n: usize) -> f64 {
        (0..n)
            .map(|j| (self.eval_real(j as f64 / n as f64).det_recomputed() - 1.0).norm())
            .fold(0.0, f64::max)
    }

    /// Largest operator norm over `n` equally spaced real points.
    pub fn sup_norm_on_grid(&self, n: usize) -> f64 {
        (0..n)
            .map(|j| self.eval_real(j as f64 / n as f64).norm())
            .fold(0.0, f64::max)
    }
}
