//! 2x2 complex matrices with a tracked determinant.

use num_complex::Complex64;
use std::ops::Mul;

/// A 2x2 complex matrix `[[a, b], [c, d]]`.
///
/// The determinant of products is tracked multiplicatively alongside the
/// entries, so drift between the tracked and recomputed value measures the
/// accumulated rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
    det: Complex64,
}

impl Mat2 {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Mat2 {
            a,
            b,
            c,
            d,
            det: a * d - b * c,
        }
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::new(a.into(), b.into(), c.into(), d.into())
    }

    pub fn identity() -> Self {
        Self::real(1.0, 0.0, 0.0, 1.0)
    }

    /// Transfer matrix `[[z - v, -1], [1, 0]]`.
    pub fn transfer(z: Complex64, v: f64) -> Self {
        Mat2 {
            a: z - v,
            b: Complex64::new(-1.0, 0.0),
            c: Complex64::new(1.0, 0.0),
            d: Complex64::new(0.0, 0.0),
            det: Complex64::new(1.0, 0.0),
        }
    }

    /// Rotation by angle `2 pi t`.
    pub fn rotation(t: f64) -> Self {
        let (s, c) = (2.0 * std::f64::consts::PI * t).sin_cos();
        Mat2 {
            det: Complex64::new(1.0, 0.0),
            ..Self::real(c, -s, s, c)
        }
    }

    /// Tracked determinant.
    pub fn det(&self) -> Complex64 {
        self.det
    }

    pub fn det_recomputed(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn det_drift(&self) -> f64 {
        (self.det - self.det_recomputed()).norm()
    }

    pub fn trace(&self) -> Complex64 {
        self.a + self.d
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr() + self.c.norm_sqr() + self.d.norm_sqr()
    }

    /// Largest singular value.
    pub fn norm(&self) -> f64 {
        let f = self.frobenius_sq();
        let dd = self.det_recomputed().norm();
        let disc = ((f - 2.0 * dd) * (f + 2.0 * dd)).max(0.0).sqrt();
        ((f + disc) / 2.0).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Mat2 {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
            d: self.d * s,
            det: self.det * (s * s),
        }
    }

    /// Adjugate, which is the inverse for unimodular matrices.
    pub fn adjugate(&self) -> Self {
        Mat2 {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
            det: self.det,
        }
    }

    pub fn inverse(&self) -> Self {
        let r = self.det_recomputed().inv();
        let adj = self.adjugate();
        Mat2 {
            a: adj.a * r,
            b: adj.b * r,
            c: adj.c * r,
            d: adj.d * r,
            det: r,
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Mat2 {
            a: self.a.conj(),
            b: self.c.conj(),
            c: self.b.conj(),
            d: self.d.conj(),
            det: self.det.conj(),
        }
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    pub fn sub(&self, other: &Mat2) -> Mat2 {
        Mat2::new(
            self.a - other.a,
            self.b - other.b,
            self.c - other.c,
            self.d - other.d,
        )
    }

    pub fn add(&self, other: &Mat2) -> Mat2 {
        Mat2::new(
            self.a + other.a,
            self.b + other.b,
            self.c + other.c,
            self.d + other.d,
        )
    }

    pub fn is_finite(&self) -> bool {
        [self.a, self.b, self.c, self.d]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, o: Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
            det: self.det * o.det,
        }
    }
}

/// A matrix stored as `exp(log_scale) * mat` with `mat` of unit norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledMat {
    pub mat: Mat2,
    pub log_scale: f64,
}

impl ScaledMat {
    pub fn identity() -> Self {
        ScaledMat {
            mat: Mat2::identity(),
            log_scale: 0.0,
        }
    }

    pub fn from_mat(m: Mat2) -> Self {
        let mut s = ScaledMat {
            mat: m,
            log_scale: 0.0,
        };
        s.renormalize();
        s
    }

    pub fn renormalize(&mut self) {
        let n = self.mat.norm();
        if n > 0.0 && n.is_finite() {
            self.mat = self.mat.scale(1.0 / n);
            self.log_scale += n.ln();
        }
    }

    /// `ln ||M||`.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + self.mat.norm().ln()
    }

    /// Determinant recomputed from the entries.
    pub fn det(&self) -> Complex64 {
        self.mat.det_recomputed() * (2.0 * self.log_scale).exp()
    }

    /// The represented matrix; overflows for large `log_scale`.
    pub fn to_mat(&self) -> Mat2 {
        self.mat.scale(self.log_scale.exp())
    }
}

/// Real 2x2 matrix stored row-major, used on hot real-energy paths.
pub type Real2 = [[f64; 2]; 2];

pub fn real2_mul(x: &Real2, y: &Real2) -> Real2 {
    [
        [
            x[0][0] * y[0][0] + x[0][1] * y[1][0],
            x[0][0] * y[0][1] + x[0][1] * y[1][1],
        ],
        [
            x[1][0] * y[0][0] + x[1][1] * y[1][0],
            x[1][0] * y[0][1] + x[1][1] * y[1][1],
        ],
    ]
}

/// Largest singular value of a real 2x2 matrix.
pub fn real2_norm(m: &Real2) -> f64 {
    let f = m[0][0].powi(2) + m[0][1].powi(2) + m[1][0].powi(2) + m[1][1].powi(2);
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).abs();
    let disc = ((f - 2.0 * det) * (f + 2.0 * det)).max(0.0).sqrt();
    ((f + disc) / 2.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn norm_of_diagonal() {
        let m = Mat2::real(3.0, 0.0, 0.0, -0.5);
        assert!((m.norm() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn norm_matches_power_iteration() {
        let m = Mat2::new(c(1.0, 2.0), c(-0.5, 0.1), c(0.3, -1.0), c(2.0, 0.0));
        let h = m.adjoint() * m;
        let mut v = [c(1.0, 0.0), c(0.3, 0.2)];
        for _ in 0..200 {
            let w = h.apply(v);
            let n = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
            v = [w[0] / n, w[1] / n];
        }
        let w = m.apply(v);
        let sigma = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
        assert!((sigma - m.norm()).abs() < 1e-12);
    }

    #[test]
    fn tracked_det_is_multiplicative() {
        let x = Mat2::new(c(1.0, 2.0), c(-0.5, 0.1), c(0.3, -1.0), c(2.0, 0.0));
        let y = Mat2::transfer(c(0.4, 0.1), 1.3);
        let p = x * y * x.inverse();
        assert!((p.det() - c(1.0, 0.0)).norm() < 1e-14);
        assert!(p.det_drift() < 1e-13);
    }

    #[test]
    fn scaled_round_trip() {
        let m = Mat2::real(4.0, 1.0, 2.0, 1.0);
        let s = ScaledMat::from_mat(m);
        assert!((s.mat.norm() - 1.0).abs() < 1e-15);
        let back = s.to_mat();
        assert!(back.sub(&m).norm() < 1e-14);
        assert!((s.det() - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn rotation_is_orthogonal() {
        let r = Mat2::rotation(0.3);
        assert!((r.norm() - 1.0).abs() < 1e-15);
        assert!((r * r.adjoint()).sub(&Mat2::identity()).norm() < 1e-15);
    }
}
