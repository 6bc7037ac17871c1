//! Scalar interface reconstructions: fifth-order WENO with Jiang–Shu
//! weights and the minmod limiter.

/// Default regularization of the WENO weights.
pub const DEFAULT_WENO_EPSILON: f64 = 1e-6;

const IDEAL: [f64; 3] = [0.1, 0.6, 0.3];

/// Fifth-order WENO value at the right face of the central cell of
/// `f = (f_{j-2}, …, f_{j+2})`.
#[inline]
pub fn weno5_left(f: &[f64; 5], epsilon: f64) -> f64 {
    let [a, b, c, d, e] = *f;

    let q0 = (2.0 * a - 7.0 * b + 11.0 * c) / 6.0;
    let q1 = (-b + 5.0 * c + 2.0 * d) / 6.0;
    let q2 = (2.0 * c + 5.0 * d - e) / 6.0;

    let s0 = 13.0 / 12.0 * (a - 2.0 * b + c).powi(2) + 0.25 * (a - 4.0 * b + 3.0 * c).powi(2);
    let s1 = 13.0 / 12.0 * (b - 2.0 * c + d).powi(2) + 0.25 * (b - d).powi(2);
    let s2 = 13.0 / 12.0 * (c - 2.0 * d + e).powi(2) + 0.25 * (3.0 * c - 4.0 * d + e).powi(2);

    let w0 = IDEAL[0] / (epsilon + s0).powi(2);
    let w1 = IDEAL[1] / (epsilon + s1).powi(2);
    let w2 = IDEAL[2] / (epsilon + s2).powi(2);
    let sum = w0 + w1 + w2;
    if !sum.is_finite() {
        // epsilon = 0 with vanishing indicators: keep only the smooth stencils.
        let mask = [s0 == 0.0, s1 == 0.0, s2 == 0.0].map(|z| if z { 1.0 } else { 0.0 });
        let total = IDEAL[0] * mask[0] + IDEAL[1] * mask[1] + IDEAL[2] * mask[2];
        return (IDEAL[0] * mask[0] * q0 + IDEAL[1] * mask[1] * q1 + IDEAL[2] * mask[2] * q2) / total;
    }
    (w0 * q0 + w1 * q1 + w2 * q2) / sum
}

/// Mirror of [`weno5_left`]: value at the left face of the central cell,
/// `weno5_right(x) = weno5_left(reverse(x))`.
#[inline]
pub fn weno5_right(f: &[f64; 5], epsilon: f64) -> f64 {
    weno5_left(&[f[4], f[3], f[2], f[1], f[0]], epsilon)
}

/// `minmod(a, b) = (sign a + sign b)/2 · min(|a|, |b|)`.
#[inline]
pub fn minmod(a: f64, b: f64) -> f64 {
    let sign = |x: f64| {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    0.5 * (sign(a) + sign(b)) * a.abs().min(b.abs())
}
