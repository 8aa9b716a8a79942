// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

//! Real 2×2 matrices and their exponential in closed form.

use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn transpose(&self) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// uᵀ M v
    pub fn bilinear(&self, u: [f64; 2], v: [f64; 2]) -> f64 {
        let w = self.apply(v);
        u[0] * w[0] + u[1] * w[1]
    }

    pub fn scale(&self, k: f64) -> Mat2 {
        let m = &self.0;
        Mat2([[k * m[0][0], k * m[0][1]], [k * m[1][0], k * m[1][1]]])
    }

    /// q² = ((a − d)/2)² + bc: the eigenvalues are tr/2 ± q.
    pub fn half_gap_squared(&self) -> f64 {
        let m = &self.0;
        let h = 0.5 * (m[0][0] - m[1][1]);
        h * h + m[0][1] * m[1][0]
    }

    /// exp(M t) via M = sI + B with B² = q² I:
    /// exp(M t) = e^{st} [cosh(qt) I + (sinh(qt)/q) B],
    /// continued to cos/sin for q² < 0 and evaluated by its Taylor series
    /// near q² t² = 0, so the defective (equal-eigenvalue) case needs no
    /// special treatment and the result is continuous across it.
    pub fn exp(&self, t: f64) -> Mat2 {
        let s = 0.5 * self.trace();
        let b = *self - Mat2::IDENTITY.scale(s);
        let q2 = self.half_gap_squared();
        let (even, odd) = exp_kernels(s, q2, t);
        Mat2::IDENTITY.scale(even) + b.scale(odd)
    }
}

/// Returns `(e^{st} cosh(qt), e^{st} sinh(qt)/q)` for q² of either sign.
pub(crate) fn exp_kernels(s: f64, q2: f64, t: f64) -> (f64, f64) {
    let u = q2 * t * t;
    if u.abs() < 1e-2 {
        let even = 1.0
            + u / 2.0 * (1.0 + u / 12.0 * (1.0 + u / 30.0 * (1.0 + u / 56.0 * (1.0 + u / 90.0))));
        let odd = 1.0
            + u / 6.0 * (1.0 + u / 20.0 * (1.0 + u / 42.0 * (1.0 + u / 72.0 * (1.0 + u / 110.0))));
        let decay = (s * t).exp();
        (decay * even, decay * t * odd)
    } else if q2 > 0.0 {
        let q = q2.sqrt();
        let fast = ((s + q) * t).exp();
        let slow = ((s - q) * t).exp();
        (0.5 * (fast + slow), 0.5 * (fast - slow) / q)
    } else {
        let w = (-q2).sqrt();
        let decay = (s * t).exp();
        let (sin, cos) = (w * t).sin_cos();
        (decay * cos, decay * sin / w)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + o.scale(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Scaling and squaring with a long Taylor series, independent of the
    /// closed form.
    fn exp_reference(m: Mat2, t: f64) -> Mat2 {
        let squarings = 12;
        let a = m.scale(t / f64::from(1 << squarings));
        let mut term = Mat2::IDENTITY;
        let mut sum = Mat2::IDENTITY;
        for k in 1..30 {
            term = (term * a).scale(1.0 / k as f64);
            sum = sum + term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    fn max_diff(a: Mat2, b: Mat2) -> f64 {
        let mut d = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((a.0[i][j] - b.0[i][j]).abs());
            }
        }
        d
    }

    #[test]
    fn exp_of_zero_time_is_identity() {
        let m = Mat2([[-1.0, 0.3], [0.2, -0.5]]);
        assert_eq!(m.exp(0.0), Mat2::IDENTITY);
    }

    #[test]
    fn defective_matrix_uses_linear_limit() {
        // eigenvalue -1 twice, one eigenvector
        let m = Mat2([[-1.0, 1.0], [0.0, -1.0]]);
        let e = m.exp(2.0);
        let d = (-2.0f64).exp();
        assert!(max_diff(e, Mat2([[d, 2.0 * d], [0.0, d]])) < 1e-15);
    }

    #[test]
    fn rotation_with_damping() {
        let (g, w, t) = (0.7, 1.3, 2.1);
        let m = Mat2([[-g, w], [-w, -g]]);
        let e = m.exp(t);
        let d = (-g * t).exp();
        let expected = Mat2([
            [d * (w * t).cos(), d * (w * t).sin()],
            [-d * (w * t).sin(), d * (w * t).cos()],
        ]);
        assert!(max_diff(e, expected) < 1e-15);
    }

    proptest! {
        #[test]
        fn closed_form_matches_series(
            a in -3.0..0.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64, d in -3.0..0.0f64, t in 0.0..5.0f64,
        ) {
            let m = Mat2([[a, b], [c, d]]);
            let reference = exp_reference(m, t);
            let scale = max_diff(reference, Mat2::ZERO).max(1.0);
            prop_assert!(max_diff(m.exp(t), reference) < 1e-12 * scale);
        }

        #[test]
        fn continuous_across_branch_switch(eps in -1e-6..1e-6f64, t in 0.1..5.0f64) {
            let m = Mat2([[-1.0, 1.0], [eps, -1.0]]);
            prop_assert!(max_diff(m.exp(t), exp_reference(m, t)) < 1e-12);
        }
    }
}
