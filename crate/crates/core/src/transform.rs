//! The conserved-variable map `w = W(c) = c + (1-ε)/ε · q(c)` and its inverse.
//!
//! `W_i(c) = c_i (1 + η_i / φ(bᵀc))`. For a fixed `p = φ(bᵀc)` the map is
//! diagonal, so inverting `W` reduces to finding the scalar `p(w)`, the
//! unique root in `[1, φ(bᵀw)]` of
//!
//! ```text
//! S_w(p) = Σ_i b_i w_i / (p + η_i) - φ⁻¹(p) / p
//! ```
//!
//! after which `c_i = p w_i / (p + η_i)`.
//!
//! Negative entries (which the high-order fluxes can produce near steep
//! fronts) are handled by evaluating `φ` on the positive part, `bᵀc⁺`; the
//! extension is continuous and keeps `forward` and `inverse` mutually
//! inverse.

use crate::error::{Error, Result};
use crate::isotherm::IsothermModel;

/// Maximum iterations of the safeguarded Newton solve for `p(w)`.
pub const SOLVE_P_MAX_ITER: usize = 200;
/// Step tolerance relative to `max(1, p)`.
const SOLVE_P_STEP_TOL: f64 = 1e-14;
/// Residual tolerance relative to `1 + Σ b_i w_i`.
const SOLVE_P_RESIDUAL_TOL: f64 = 1e-13;

/// Building blocks of the Jacobian `W'(c) = diag(v) + B Aᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianParts {
    /// `v_i = 1 + η_i / φ(d)`
    pub v: Vec<f64>,
    /// `A_i = b_i φ'(d)`
    pub a: Vec<f64>,
    /// `B_i = -c_i η_i / φ(d)²`
    pub b: Vec<f64>,
    /// `γ_i = A_i B_i`
    pub gamma: Vec<f64>,
    /// `d = bᵀc`
    pub d: f64,
}

impl JacobianParts {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Row-major dense `diag(v) + B Aᵀ`.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.len();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = self.b[i] * self.a[j];
            }
            m[i * n + i] += self.v[i];
        }
        m
    }

    /// `Q(λ) = 1 + Σ γ_i / (v_i - λ)`.
    pub fn secular(&self, lambda: f64) -> f64 {
        1.0 + self.gamma.iter().zip(&self.v).map(|(g, v)| g / (v - lambda)).sum::<f64>()
    }
}

/// `w = W(c)`.
pub fn forward(model: &IsothermModel, c: &[f64]) -> Result<Vec<f64>> {
    model.check_len(c.len())?;
    let mut w = vec![0.0; c.len()];
    forward_into(model, c, &mut w);
    Ok(w)
}

/// Allocation-free `W(c)`; returns `φ(bᵀc⁺)`.
#[inline]
pub fn forward_into(model: &IsothermModel, c: &[f64], w: &mut [f64]) -> f64 {
    let p = model.phi_family().value_unchecked(model.weighted_sum(c));
    for ((wi, ci), eta) in w.iter_mut().zip(c).zip(model.eta()) {
        *wi = ci * (1.0 + eta / p);
    }
    p
}

/// `S_w(p)` and `S_w'(p)`.
pub fn s_function(model: &IsothermModel, w: &[f64], p: f64) -> Result<(f64, f64)> {
    model.check_len(w.len())?;
    if !(p >= 1.0) {
        return Err(Error::Domain { what: "p", value: p });
    }
    Ok(s_eval(model, w, p))
}

#[inline]
fn s_eval(model: &IsothermModel, w: &[f64], p: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut deriv = 0.0;
    for ((bi, wi), eta) in model.b().iter().zip(w).zip(model.eta()) {
        let bw = bi * wi.max(0.0);
        let den = 1.0 / (p + eta);
        value += bw * den;
        deriv -= bw * den * den;
    }
    let (g, dg) = model.phi_family().inverse_over_p(p);
    (value - g, deriv - dg)
}

/// The unique root `p(w) ∈ [1, φ(bᵀw)]` of `S_w`.
///
/// Safeguarded Newton: starts at the bracket midpoint, keeps a sign bracket
/// and bisects whenever a Newton iterate leaves it.
pub fn solve_p(model: &IsothermModel, w: &[f64]) -> Result<f64> {
    model.check_len(w.len())?;
    solve_p_unchecked(model, w)
}

pub(crate) fn solve_p_unchecked(model: &IsothermModel, w: &[f64]) -> Result<f64> {
    let bw = model.weighted_sum(w);
    if bw == 0.0 {
        return Ok(1.0);
    }
    let mut lo = 1.0;
    let mut hi = model.phi_family().value_unchecked(bw);
    if hi <= lo {
        return Ok(1.0);
    }
    let tol = SOLVE_P_RESIDUAL_TOL * (1.0 + bw);
    let mut p = 0.5 * (lo + hi);
    let mut s = 0.0;
    for _ in 0..SOLVE_P_MAX_ITER {
        let (val, der) = s_eval(model, w, p);
        s = val;
        if val.abs() <= tol {
            // One more Newton step recovers the digits the tolerance leaves.
            let polished = p - val / der;
            return Ok(if polished >= lo.min(p) && polished <= hi.max(p) { polished } else { p });
        }
        // S_w is strictly decreasing.
        if val > 0.0 {
            lo = p;
        } else {
            hi = p;
        }
        let mut next = p - val / der;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - p).abs();
        p = next;
        if step <= SOLVE_P_STEP_TOL * p.max(1.0) || hi - lo <= SOLVE_P_STEP_TOL * hi {
            return Ok(p);
        }
    }
    Err(Error::RootNotConverged { iterations: SOLVE_P_MAX_ITER, p, residual: s })
}

/// `c = C(w) = W⁻¹(w)`.
pub fn inverse(model: &IsothermModel, w: &[f64]) -> Result<Vec<f64>> {
    model.check_len(w.len())?;
    let mut c = vec![0.0; w.len()];
    inverse_into(model, w, &mut c)?;
    Ok(c)
}

/// Allocation-free `C(w)`; returns `p(w)`.
#[inline]
pub fn inverse_into(model: &IsothermModel, w: &[f64], c: &mut [f64]) -> Result<f64> {
    let p = solve_p_unchecked(model, w)?;
    for ((ci, wi), eta) in c.iter_mut().zip(w).zip(model.eta()) {
        *ci = p * wi / (p + eta);
    }
    Ok(p)
}

/// Jacobian building blocks at a strictly positive concentration vector.
pub fn jacobian_parts(model: &IsothermModel, c: &[f64]) -> Result<JacobianParts> {
    model.check_len(c.len())?;
    if let Some(&bad) = c.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Domain { what: "concentration (must be positive)", value: bad });
    }
    let mut parts = JacobianParts {
        v: vec![0.0; c.len()],
        a: vec![0.0; c.len()],
        b: vec![0.0; c.len()],
        gamma: vec![0.0; c.len()],
        d: 0.0,
    };
    jacobian_parts_into(model, c, &mut parts);
    Ok(parts)
}

/// Fills `parts` at `c > 0` without checks or allocation.
pub(crate) fn jacobian_parts_into(model: &IsothermModel, c: &[f64], parts: &mut JacobianParts) {
    let phi = model.phi_family();
    let d = model.weighted_sum(c);
    let p = phi.value_unchecked(d);
    let dp = phi.derivative_unchecked(d);
    parts.d = d;
    for i in 0..c.len() {
        let eta = model.eta()[i];
        parts.v[i] = 1.0 + eta / p;
        parts.a[i] = model.b()[i] * dp;
        parts.b[i] = -c[i] * eta / (p * p);
        parts.gamma[i] = parts.a[i] * parts.b[i];
    }
}

/// Row-major dense `W'(c)` for any `c`, using the positive-part extension.
///
/// At `bᵀc⁺ = 0` the rank-one term vanishes (its limit is zero even where
/// `φ'` is singular).
pub fn jacobian_dense_into(model: &IsothermModel, c: &[f64], out: &mut [f64]) {
    let n = c.len();
    let phi = model.phi_family();
    let d = model.weighted_sum(c);
    let p = phi.value_unchecked(d);
    out.iter_mut().for_each(|x| *x = 0.0);
    if d > 0.0 {
        let dp = phi.derivative_unchecked(d);
        for i in 0..n {
            let bi = -c[i] * model.eta()[i] / (p * p);
            for j in 0..n {
                if c[j] > 0.0 {
                    out[i * n + j] = bi * model.b()[j] * dp;
                }
            }
        }
    }
    for i in 0..n {
        out[i * n + i] += 1.0 + model.eta()[i] / p;
    }
}
