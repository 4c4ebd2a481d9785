//! Frequencies, continued fractions and resonance sets.
//!
//! Continued-fraction expansions run in double-double arithmetic by
//! default (about 106 bits). Setting `QUASISPEC_PRECISION=double` rounds
//! the frequency to an `f64` and expands it in plain double precision.

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{invalid, Error, Result};

/// Working precision for frequency arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Double,
    #[default]
    Extended,
}

impl Precision {
    pub const ENV_VAR: &'static str = "QUASISPEC_PRECISION";

    /// Reads `QUASISPEC_PRECISION`; unset means extended.
    pub fn from_env() -> Result<Self> {
        match std::env::var(Self::ENV_VAR) {
            Ok(s) => s.parse(),
            Err(_) => Ok(Precision::Extended),
        }
    }

    fn unit_roundoff(self) -> f64 {
        match self {
            Precision::Double => f64::EPSILON / 2.0,
            Precision::Extended => 2f64.powi(-106),
        }
    }

    /// Remainders below this are treated as exact zeros.
    fn rational_threshold(self) -> f64 {
        match self {
            Precision::Double => 2f64.powi(-30),
            Precision::Extended => 2f64.powi(-60),
        }
    }

    /// Smallest distance on the torus that the representation resolves.
    pub fn floor(self) -> f64 {
        match self {
            Precision::Double => 1e-16,
            Precision::Extended => 1e-30,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Double => "double",
            Precision::Extended => "extended",
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "double" | "f64" => Ok(Precision::Double),
            "extended" | "double-double" | "dd" => Ok(Precision::Extended),
            other => Err(invalid(format!(
                "unknown precision '{other}' (expected 'double' or 'extended')"
            ))),
        }
    }
}

/// Distance from `x` to the nearest integer.
pub fn torus_norm(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Double-double quotient by long division with two correction steps.
/// (`TwoFloat`'s own division drops the low-order residual and is only
/// accurate to about 1e-17.)
pub fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

fn dd_frac(x: TwoFloat) -> TwoFloat {
    let f = x - x.floor();
    // floor of a value just below an integer can round the difference to 1
    if f >= TwoFloat::from(1.0) {
        f - TwoFloat::from(1.0)
    } else {
        f
    }
}

fn dd_torus_norm(x: TwoFloat) -> f64 {
    let f = dd_frac(x);
    let g = TwoFloat::from(1.0) - f;
    let m = if f < g { f } else { g };
    f64::from(m).abs()
}

/// Parses a decimal literal such as `0.6180339887498948482` to double-double.
pub fn parse_decimal(s: &str) -> Result<TwoFloat> {
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((a, b)) => (a, b),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(invalid(format!("'{s}' is not a decimal number")));
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(invalid(format!("'{s}' is not a decimal number")));
    }
    let mut value = TwoFloat::from(0.0);
    for b in int_part.bytes() {
        value = value * TwoFloat::from(10.0) + TwoFloat::from(f64::from(b - b'0'));
    }
    // 15-digit chunks are exact in f64, and each 10^-15j is one correctly
    // rounded double-double division.
    let chunk_scale = TwoFloat::from(1e15);
    let mut scale = TwoFloat::from(1.0);
    let digits = frac_part.as_bytes();
    for chunk in digits.chunks(15) {
        let mut c = 0u64;
        for &b in chunk {
            c = c * 10 + u64::from(b - b'0');
        }
        let pad = 15 - chunk.len();
        let c = c * 10u64.pow(pad as u32);
        scale = dd_div(scale, chunk_scale);
        value += TwoFloat::from(c as f64) * scale;
    }
    Ok(if neg { -value } else { value })
}

/// Renders `x` in `[0, 1)` with `digits` decimals.
fn dd_to_decimal(x: TwoFloat, digits: usize) -> String {
    let mut out = String::from("0.");
    let mut r = dd_frac(x);
    for _ in 0..digits {
        r *= TwoFloat::from(10.0);
        let d = f64::from(r.floor()).clamp(0.0, 9.0);
        out.push(char::from(b'0' + d as u8));
        r -= TwoFloat::from(d);
    }
    out
}

/// A frequency `alpha` in (0,1) with its continued-fraction data.
#[derive(Debug, Clone, PartialEq)]
pub struct Frequency {
    value: TwoFloat,
    cf_terms: Vec<u64>,
    convergents: Vec<(u64, u64)>,
    precision: Precision,
}

/// Serialized form of a [`Frequency`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRecord {
    pub value_decimal_string: String,
    pub cf_terms: Vec<u64>,
    pub convergents: Vec<[u64; 2]>,
}

impl Frequency {
    /// Expands `value` (reduced mod 1) to `depth` partial quotients.
    pub fn expand(value: TwoFloat, depth: usize, precision: Precision) -> Result<Self> {
        if depth == 0 {
            return Err(invalid("continued-fraction depth must be at least 1"));
        }
        let value = match precision {
            Precision::Extended => dd_frac(value),
            Precision::Double => TwoFloat::from(f64::from(dd_frac(value))),
        };
        let (cf_terms, convergents) = match precision {
            Precision::Extended => expand_cf(value, depth, precision)?,
            Precision::Double => expand_cf(f64::from(value), depth, precision)?,
        };
        Ok(Frequency {
            value,
            cf_terms,
            convergents,
            precision,
        })
    }

    /// The golden mean `(sqrt 5 - 1)/2`.
    pub fn golden(depth: usize, precision: Precision) -> Result<Self> {
        let v = (TwoFloat::from(5.0).sqrt() - TwoFloat::from(1.0)) * 0.5;
        Self::expand(v, depth, precision)
    }

    /// The silver mean `sqrt 2 - 1`.
    pub fn silver(depth: usize, precision: Precision) -> Result<Self> {
        let v = TwoFloat::from(2.0).sqrt() - TwoFloat::from(1.0);
        Self::expand(v, depth, precision)
    }

    pub fn from_decimal(s: &str, depth: usize, precision: Precision) -> Result<Self> {
        let v = parse_decimal(s)?;
        Self::expand(v, depth, precision)
    }

    /// `[0; a_1, ..., a_m, 1, 1, 1, ...]`: the given prefix followed by a
    /// golden-mean tail, so the result is irrational.
    pub fn from_cf_prefix(prefix: &[u64], depth: usize, precision: Precision) -> Result<Self> {
        if prefix.contains(&0) {
            return Err(invalid("partial quotients must be positive"));
        }
        let golden_tail = (TwoFloat::from(5.0).sqrt() - TwoFloat::from(1.0)) * 0.5;
        let mut x = golden_tail;
        for &a in prefix.iter().rev() {
            x = dd_div(TwoFloat::from(1.0), TwoFloat::from(a as f64) + x);
        }
        Self::expand(x, depth.max(prefix.len()), precision)
    }

    /// Parses a preset name (`golden`, `silver`), a decimal literal, or a
    /// term list `cf:a1,a2,...`.
    pub fn parse(spec: &str, depth: usize, precision: Precision) -> Result<Self> {
        let s = spec.trim();
        match s.to_ascii_lowercase().as_str() {
            "golden" => return Self::golden(depth, precision),
            "silver" => return Self::silver(depth, precision),
            _ => {}
        }
        if let Some(list) = s.strip_prefix("cf:") {
            let terms = list
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<u64>()
                        .map_err(|_| invalid(format!("bad partial quotient '{t}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::from_cf_prefix(&terms, depth, precision);
        }
        Self::from_decimal(s, depth, precision)
    }

    /// `alpha` rounded to double precision.
    pub fn alpha(&self) -> f64 {
        f64::from(self.value)
    }

    /// `(hi, lo)` with `alpha = hi + lo` to working precision.
    pub fn alpha_parts(&self) -> (f64, f64) {
        (self.value.hi(), self.value.lo())
    }

    pub fn value(&self) -> TwoFloat {
        self.value
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn cf_terms(&self) -> &[u64] {
        &self.cf_terms
    }

    /// `(p_n, q_n)` for `n = 1..=depth`.
    pub fn convergents(&self) -> &[(u64, u64)] {
        &self.convergents
    }

    pub fn denominators(&self) -> Vec<u64> {
        self.convergents.iter().map(|&(_, q)| q).collect()
    }

    /// `||k alpha||`, evaluated at working precision.
    pub fn multiple_norm(&self, k: i64) -> f64 {
        dd_torus_norm(TwoFloat::from(k) * self.value)
    }

    /// `||2 theta - k alpha||`.
    pub fn resonance_distance(&self, theta: f64, k: i64) -> f64 {
        let two_theta = TwoFloat::from(2.0) * TwoFloat::from(theta);
        dd_torus_norm(two_theta - TwoFloat::from(k) * self.value)
    }

    /// `frac(x + n alpha)` at working precision.
    pub fn orbit_point(&self, x: f64, n: i64) -> f64 {
        f64::from(dd_frac(TwoFloat::from(x) + TwoFloat::from(n) * self.value))
    }

    /// `max_{n >= 2} ln q_{n+1} / ln q_n` over the stored convergents.
    pub fn diophantine_score(&self) -> Result<f64> {
        let q = self.denominators();
        let scores: Vec<f64> = q
            .windows(2)
            .skip(1)
            .filter(|w| w[0] > 1)
            .map(|w| (w[1] as f64).ln() / (w[0] as f64).ln())
            .collect();
        if scores.is_empty() {
            return Err(invalid(
                "need at least three convergents to score the frequency",
            ));
        }
        Ok(scores.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn to_record(&self) -> FrequencyRecord {
        FrequencyRecord {
            value_decimal_string: dd_to_decimal(self.value, 30),
            cf_terms: self.cf_terms.clone(),
            convergents: self.convergents.iter().map(|&(p, q)| [p, q]).collect(),
        }
    }
}

trait CfScalar: Copy + PartialOrd {
    fn recip(self) -> Self;
    fn floor_f64(self) -> f64;
    fn sub_int(self, a: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl CfScalar for f64 {
    fn recip(self) -> Self {
        1.0 / self
    }
    fn floor_f64(self) -> f64 {
        self.floor()
    }
    fn sub_int(self, a: f64) -> Self {
        self - a
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl CfScalar for TwoFloat {
    fn recip(self) -> Self {
        dd_div(TwoFloat::from(1.0), self)
    }
    fn floor_f64(self) -> f64 {
        f64::from(self.floor())
    }
    fn sub_int(self, a: f64) -> Self {
        self - TwoFloat::from(a)
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

type CfData = (Vec<u64>, Vec<(u64, u64)>);

fn expand_cf<T: CfScalar>(value: T, depth: usize, precision: Precision) -> Result<CfData> {
    let u = precision.unit_roundoff();
    let mut x = value;
    if x.to_f64() <= precision.rational_threshold() {
        return Err(Error::RationalDetected { depth: 0 });
    }
    // running bound on the absolute error of the remainder
    let mut err = u * x.to_f64();
    let mut terms = Vec::with_capacity(depth);
    let mut convergents = Vec::with_capacity(depth);
    let (mut p_prev, mut q_prev) = (1u64, 0u64);
    let (mut p, mut q) = (0u64, 1u64);
    for n in 1..=depth {
        let xf = x.to_f64();
        let y = x.recip();
        let a = y.floor_f64();
        if a < 1.0 || a > 2f64.powi(53) {
            return Err(Error::PrecisionExhausted { depth: n, q });
        }
        let a_int = a as u64;
        let p_next = a_int
            .checked_mul(p)
            .and_then(|v| v.checked_add(p_prev))
            .ok_or(Error::PrecisionExhausted { depth: n, q })?;
        let q_next = a_int
            .checked_mul(q)
            .and_then(|v| v.checked_add(q_prev))
            .ok_or(Error::PrecisionExhausted { depth: n, q })?;
        if q_next > 1u64 << 50 {
            return Err(Error::PrecisionExhausted { depth: n, q: q_next });
        }
        terms.push(a_int);
        convergents.push((p_next, q_next));
        (p_prev, q_prev, p, q) = (p, q, p_next, q_next);
        x = y.sub_int(a);
        err = err / (xf * xf) + 2.0 * u * y.to_f64();
        let rem = x.to_f64();
        if rem <= precision.rational_threshold() {
            return Err(Error::RationalDetected { depth: n });
        }
        if n < depth && err > 1e-3 * rem {
            return Err(Error::PrecisionExhausted { depth: n + 1, q });
        }
    }
    Ok((terms, convergents))
}

/// Indices `n_j` with `||2 theta - n_j alpha|| <= exp(-|n_j| eps0)` that are
/// minimal among all `|j| <= |n_j|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSet {
    pub theta: f64,
    pub eps0: f64,
    pub scan_limit: u64,
    /// Ordered by `|n|`; `0` is always first.
    pub indices: Vec<i64>,
    /// `||2 theta - n_j alpha||` for each index.
    pub distances: Vec<f64>,
}

/// Scans `|k| <= scan_limit`. Ties in the minimality comparison go to the
/// smaller `|k|`, then to positive `k`.
pub fn resonances(freq: &Frequency, theta: f64, eps0: f64, scan_limit: u64) -> Result<ResonanceSet> {
    if !(eps0 > 0.0 && eps0.is_finite()) {
        return Err(invalid("eps0 must be positive"));
    }
    if !theta.is_finite() {
        return Err(invalid("theta must be finite"));
    }
    if scan_limit > i64::MAX as u64 / 4 {
        return Err(invalid("scan limit too large"));
    }
    let d0 = freq.resonance_distance(theta, 0);
    let mut indices = vec![0i64];
    let mut distances = vec![d0];
    // minimum over |j| < m
    let mut running_min = d0;
    for m in 1..=scan_limit as i64 {
        let dp = freq.resonance_distance(theta, m);
        let dm = freq.resonance_distance(theta, -m);
        let bound = (-(m as f64) * eps0).exp();
        if dp < running_min && dp <= dm && dp <= bound {
            indices.push(m);
            distances.push(dp);
        } else if dm < running_min && dm < dp && dm <= bound {
            indices.push(-m);
            distances.push(dm);
        }
        running_min = running_min.min(dp).min(dm);
    }
    Ok(ResonanceSet {
        theta,
        eps0,
        scan_limit,
        indices,
        distances,
    })
}

/// One entry of the resonance-repulsion table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepulsionRecord {
    pub j: usize,
    pub n_j: i64,
    /// `|n_{j+1}|`, or `None` when no further resonance lies in the scan range.
    pub next_abs: Option<u64>,
    /// `||2 theta - n_j alpha||`, clamped below by the precision floor.
    pub gap: f64,
}

/// Pairs `(|n_{j+1}|, ||2 theta - n_j alpha||)`; empty for a single resonance.
pub fn resonance_repulsion_check(rs: &ResonanceSet, freq: &Frequency) -> Vec<RepulsionRecord> {
    if rs.indices.len() < 2 {
        return Vec::new();
    }
    let floor = freq.precision().floor();
    rs.indices
        .iter()
        .enumerate()
        .map(|(j, &n)| RepulsionRecord {
            j,
            n_j: n,
            next_abs: rs.indices.get(j + 1).map(|m| m.unsigned_abs()),
            gap: freq.resonance_distance(rs.theta, n).max(floor),
        })
        .collect()
}
