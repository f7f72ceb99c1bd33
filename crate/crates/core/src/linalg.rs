//! Small dense complex matrices: 2×2 gate algebra and fixed-size helpers.

use crate::math::{self, C64};

/// Row-major 2×2 complex matrix.
pub type Mat2 = [[C64; 2]; 2];

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub const IDENTITY: Mat2 = [[ONE, ZERO], [ZERO, ONE]];

pub fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

pub fn adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

pub fn det(a: &Mat2) -> C64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn scale(a: &Mat2, s: C64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

pub fn rx(theta: f64) -> Mat2 {
    let (c, s) = (math::cos(theta / 2.0), math::sin(theta / 2.0));
    [[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]]
}

pub fn ry(theta: f64) -> Mat2 {
    let (c, s) = (math::cos(theta / 2.0), math::sin(theta / 2.0));
    [[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]]
}

pub fn rz(theta: f64) -> Mat2 {
    [[math::cis(-theta / 2.0), ZERO], [ZERO, math::cis(theta / 2.0)]]
}

pub fn phase(theta: f64) -> Mat2 {
    [[ONE, ZERO], [ZERO, math::cis(theta)]]
}

/// Largest entrywise deviation between `a` and `b` after removing the
/// global phase that best aligns them.
pub fn distance_up_to_phase(a: &Mat2, b: &Mat2) -> f64 {
    // Phase from the inner product tr(b†a).
    let mut ip = ZERO;
    for r in 0..2 {
        for c in 0..2 {
            ip += b[r][c].conj() * a[r][c];
        }
    }
    let ph = if ip.norm() < 1e-300 { ONE } else { ip / ip.norm() };
    let mut worst: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            worst = worst.max((a[r][c] - b[r][c] * ph).norm());
        }
    }
    worst
}

/// Deviation of `a†a` from the identity.
pub fn unitarity_error(a: &Mat2) -> f64 {
    let p = mul(&adjoint(a), a);
    let mut worst: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            worst = worst.max((p[r][c] - IDENTITY[r][c]).norm());
        }
    }
    worst
}

/// ZYZ Euler angles: `u = e^{iφ}·Rz(α)·Ry(β)·Rz(γ)`, returned as `(α, β, γ, φ)`.
pub fn zyz_angles(u: &Mat2) -> (f64, f64, f64, f64) {
    // Strip the determinant phase so the matrix is in SU(2).
    let d = det(u);
    let half = math::atan2(d.im, d.re) / 2.0;
    let v = scale(u, math::cis(-half));
    // v = [[e^{-i(α+γ)/2} cos(β/2), -e^{-i(α-γ)/2} sin(β/2)],
    //      [e^{ i(α-γ)/2} sin(β/2),  e^{ i(α+γ)/2} cos(β/2)]]
    let beta = 2.0 * math::atan2(v[1][0].norm(), v[0][0].norm());
    let sum = if v[1][1].norm() > 1e-12 { 2.0 * v[1][1].arg() } else { 0.0 };
    let diff = if v[1][0].norm() > 1e-12 { 2.0 * v[1][0].arg() } else { 0.0 };
    let alpha = (sum + diff) / 2.0;
    let gamma = (sum - diff) / 2.0;
    (alpha, beta, gamma, half)
}
