//! Minimal 2x2 complex matrix algebra used for single-qubit gates.

use std::ops::Mul;

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major 2x2 complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    /// `exp(-i θ σz / 2)`
    pub fn rz(theta: f64) -> Self {
        Mat2([
            [C64::from_polar(1.0, -theta / 2.0), ZERO],
            [ZERO, C64::from_polar(1.0, theta / 2.0)],
        ])
    }

    /// `exp(-i θ σy / 2)`
    pub fn ry(theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Mat2([[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]])
    }

    /// `exp(-i θ σx / 2)`
    pub fn rx(theta: f64) -> Self {
        Self::r_equatorial(theta, 0.0)
    }

    /// Rotation by `theta` about the equatorial axis `cos(phi) x + sin(phi) y`.
    pub fn r_equatorial(theta: f64, phi: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        let off = C64::new(0.0, -s);
        Mat2([
            [C64::new(c, 0.0), off * C64::from_polar(1.0, -phi)],
            [off * C64::from_polar(1.0, phi), C64::new(c, 0.0)],
        ])
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn scale(&self, z: C64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * z, m[0][1] * z], [m[1][0] * z, m[1][1] * z]])
    }

    pub fn frobenius_distance(&self, other: &Mat2) -> f64 {
        let mut acc = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                acc += (self.0[r][c] - other.0[r][c]).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Max-entry deviation of `U U†` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let p = *self * self.dagger();
        let id = Mat2::identity();
        let mut err: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                err = err.max((p.0[r][c] - id.0[r][c]).norm());
            }
        }
        err
    }

    /// `min_φ ‖self − e^{iφ} other‖_F`
    pub fn distance_up_to_phase(&self, other: &Mat2) -> f64 {
        let mut ov = ZERO;
        for r in 0..2 {
            for c in 0..2 {
                ov += other.0[r][c].conj() * self.0[r][c];
            }
        }
        let phase = if ov.norm() > 0.0 { ov / ov.norm() } else { ONE };
        self.frobenius_distance(&other.scale(phase))
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Mat2(out)
    }
}
