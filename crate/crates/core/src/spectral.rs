//! Eigenstructure of `W'(c) = diag(v) + B Aᵀ` through the secular equation
//!
//! ```text
//! Q(λ) = 1 + Σ_j γ_j / (v_j - λ),   γ_j = A_j B_j < 0
//! ```
//!
//! With `v` strictly increasing, every `γ_j < 0` and `Q(1) > 0`, `Q` has
//! exactly one root in each of `(1, v_1), (v_1, v_2), …, (v_{N-1}, v_N)`,
//! these are the eigenvalues of `W'(c)`, and `(r_j)_k = B_k / (v_k - λ_j)`
//! are the matching right eigenvectors. The eigenvalues of `C'(w)` are
//! `μ_j = 1/λ_j`.
//!
//! Each root is located relative to its nearest pole (`λ = v_o + τ`), so the
//! differences `v_k - λ` entering the eigenvectors keep full relative
//! accuracy even when a root sits very close to a pole.

use crate::error::{Error, Result};
use crate::isotherm::IsothermModel;
use crate::linalg::DenseLu;
use crate::transform::{self, JacobianParts};

/// Concentrations below this value are raised to it before building
/// Jacobian parts.
pub const C_FLOOR: f64 = 1e-12;
/// Left end of the first secular bracket.
pub const LAMBDA_STAR: f64 = 1.0;
/// Iteration cap per secular root.
pub const SECULAR_MAX_ITER: usize = 60;

const EPS: f64 = f64::EPSILON;

/// A secular root stored as an offset from pole `origin`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PoleOffset {
    origin: usize,
    tau: f64,
}

impl PoleOffset {
    #[inline]
    fn lambda(&self, v: &[f64]) -> f64 {
        v[self.origin] + self.tau
    }

    /// `v_k - λ`, computed as `(v_k - v_o) - τ`.
    #[inline]
    fn delta(&self, v: &[f64], k: usize) -> f64 {
        if k == self.origin {
            -self.tau
        } else {
            (v[k] - v[self.origin]) - self.tau
        }
    }
}

/// `Q` and the pole-regularized `F(τ) = -τ Q(τ)` with its derivative, plus
/// a magnitude bound of the terms of `F` (its rounding-error scale).
#[inline]
fn eval_offset(parts: &JacobianParts, origin: usize, tau: f64) -> (f64, f64, f64, f64) {
    let v = &parts.v;
    let g = &parts.gamma;
    let mut rest = 0.0;
    let mut rest_abs = 0.0;
    let mut rest_d = 0.0;
    for k in 0..v.len() {
        if k == origin {
            continue;
        }
        let delta = (v[k] - v[origin]) - tau;
        let t = g[k] / delta;
        rest += t;
        rest_abs += t.abs();
        rest_d += t / delta;
    }
    let q = 1.0 + rest + g[origin] / (-tau);
    let f = g[origin] - tau * (1.0 + rest);
    let df = -(1.0 + rest) - tau * rest_d;
    let scale = g[origin].abs() + tau.abs() * (1.0 + rest_abs);
    (q, f, df, scale)
}

fn check_preconditions(parts: &JacobianParts) -> Result<()> {
    if parts.is_empty() {
        return Err(Error::Secular { index: 0, reason: "empty system".into() });
    }
    if let Some(k) = parts.gamma.iter().position(|&g| !(g < 0.0)) {
        return Err(Error::Secular { index: k, reason: format!("gamma_{k} = {} is not negative", parts.gamma[k]) });
    }
    if let Some(k) = parts.v.windows(2).position(|w| !(w[0] < w[1])) {
        return Err(Error::Secular { index: k, reason: "diagonal entries are not strictly increasing".into() });
    }
    if !(parts.v[0] > LAMBDA_STAR) {
        return Err(Error::Secular { index: 0, reason: "v_1 must exceed 1".into() });
    }
    Ok(())
}

/// Root `j` (zero-based) of the secular equation.
fn secular_root(parts: &JacobianParts, j: usize) -> Result<PoleOffset> {
    let v = &parts.v;
    let (origin, mut lo, mut hi) = if j == 0 {
        if !(parts.secular(LAMBDA_STAR) > 0.0) {
            return Err(Error::Secular { index: 0, reason: "Q(1) is not positive".into() });
        }
        (0, LAMBDA_STAR - v[0], 0.0)
    } else {
        let half = 0.5 * (v[j] - v[j - 1]);
        let probe = PoleOffset { origin: j - 1, tau: half };
        let (q_mid, _, _, _) = eval_offset(parts, probe.origin, probe.tau);
        if q_mid >= 0.0 {
            (j, -half, 0.0)
        } else {
            (j - 1, 0.0, half)
        }
    };

    let mut tau = 0.5 * (lo + hi);
    let mut prev_f = f64::INFINITY;
    for _ in 0..SECULAR_MAX_ITER {
        let (q, f, df, scale) = eval_offset(parts, origin, tau);
        if q == 0.0 || f.abs() <= 4.0 * EPS * scale {
            return Ok(PoleOffset { origin, tau });
        }
        // Q decreases in λ.
        if q > 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        let newton = tau - f / df;
        let next = if f.abs() <= 0.5 * prev_f && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        prev_f = f.abs();
        let step = (next - tau).abs();
        tau = next;
        if step <= 2.0 * EPS * tau.abs() || hi - lo <= 4.0 * EPS * lo.abs().max(hi.abs()) {
            return Ok(PoleOffset { origin, tau });
        }
    }
    Err(Error::Secular { index: j, reason: format!("no convergence in {SECULAR_MAX_ITER} iterations") })
}

/// All `N` roots of `Q`, ascending.
pub fn secular_roots(parts: &JacobianParts) -> Result<Vec<f64>> {
    check_preconditions(parts)?;
    (0..parts.len()).map(|j| secular_root(parts, j).map(|r| r.lambda(&parts.v))).collect()
}

/// Smallest root of `Q`, i.e. the smallest eigenvalue of `W'(c)`.
pub fn smallest_root(parts: &JacobianParts) -> Result<f64> {
    check_preconditions(parts)?;
    Ok(secular_root(parts, 0)?.lambda(&parts.v))
}

fn normalize_column(r: &mut [f64], n: usize, j: usize) -> Result<()> {
    let mut big = 0.0f64;
    for k in 0..n {
        let x = r[k * n + j];
        if x.abs() > big.abs() {
            big = x;
        }
    }
    if !(big != 0.0 && big.is_finite()) {
        return Err(Error::Secular { index: j, reason: "degenerate eigenvector".into() });
    }
    for k in 0..n {
        r[k * n + j] /= big;
    }
    Ok(())
}

/// Eigenvector matrix (row-major, column `j` is `r_j`) from given eigenvalues.
///
/// Columns are scaled to unit ∞-norm with the largest-magnitude entry
/// positive.
pub fn eigenvectors(parts: &JacobianParts, lambda: &[f64]) -> Result<Vec<f64>> {
    let n = parts.len();
    if lambda.len() != n {
        return Err(Error::Shape(format!("{} eigenvalues for a {n}x{n} system", lambda.len())));
    }
    let mut r = vec![0.0; n * n];
    for (j, &lj) in lambda.iter().enumerate() {
        for k in 0..n {
            let delta = parts.v[k] - lj;
            if delta == 0.0 {
                return Err(Error::Secular { index: j, reason: format!("eigenvalue coincides with v_{k}") });
            }
            r[k * n + j] = parts.b[k] / delta;
        }
        normalize_column(&mut r, n, j)?;
    }
    Ok(r)
}

/// Eigen-decomposition of `W'(c)` together with an LU factorization of the
/// eigenvector matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomp {
    n: usize,
    /// Eigenvalues of `W'(c)`, ascending.
    pub lambda: Vec<f64>,
    /// Eigenvalues of `C'(w)`, descending.
    pub mu: Vec<f64>,
    /// Row-major eigenvector matrix; column `j` is `r_j`.
    pub r: Vec<f64>,
    lu: DenseLu,
}

impl SpectralDecomp {
    fn empty(n: usize) -> Self {
        Self { n, lambda: vec![0.0; n], mu: vec![0.0; n], r: vec![0.0; n * n], lu: DenseLu::new(n) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Decomposition of `W'(c)` at given Jacobian parts.
    pub fn from_parts(parts: &JacobianParts) -> Result<Self> {
        let mut out = Self::empty(parts.len());
        out.fill(parts)?;
        Ok(out)
    }

    fn fill(&mut self, parts: &JacobianParts) -> Result<()> {
        check_preconditions(parts)?;
        let n = self.n;
        for j in 0..n {
            let root = secular_root(parts, j)?;
            self.lambda[j] = root.lambda(&parts.v);
            self.mu[j] = 1.0 / self.lambda[j];
            for k in 0..n {
                self.r[k * n + j] = parts.b[k] / root.delta(&parts.v, k);
            }
            normalize_column(&mut self.r, n, j)?;
        }
        self.lu.refactor(&self.r)
    }

    /// Column `j` of `R`.
    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|k| self.r[k * self.n + j]).collect()
    }

    /// `R⁻¹ x`.
    pub fn apply_r_inverse(&self, x: &[f64]) -> Vec<f64> {
        self.lu.solve(x)
    }

    /// `R y`.
    pub fn apply_r(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        crate::linalg::mat_vec(&self.r, y, &mut out);
        out
    }

    #[inline]
    pub(crate) fn apply_r_inverse_with(&self, x: &mut [f64], scratch: &mut [f64]) {
        self.lu.solve_with(x, scratch);
    }
}

/// Raises entries below [`C_FLOOR`] to the floor.
#[inline]
pub fn clamp_concentrations(c: &mut [f64]) {
    for x in c.iter_mut() {
        if !(*x >= C_FLOOR) {
            *x = C_FLOOR;
        }
    }
}

/// Reusable buffers for repeated decompositions along a grid.
#[derive(Debug, Clone)]
pub struct SpectralWorkspace {
    w_mid: Vec<f64>,
    c_mid: Vec<f64>,
    parts: JacobianParts,
    pub decomp: SpectralDecomp,
}

impl SpectralWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            w_mid: vec![0.0; n],
            c_mid: vec![0.0; n],
            parts: JacobianParts { v: vec![0.0; n], a: vec![0.0; n], b: vec![0.0; n], gamma: vec![0.0; n], d: 0.0 },
            decomp: SpectralDecomp::empty(n),
        }
    }

    /// Decomposes `W'(C(w*))` at the arithmetic mean `w*` of two states.
    pub fn decompose_at_interface(&mut self, model: &IsothermModel, w_left: &[f64], w_right: &[f64]) -> Result<()> {
        for ((m, l), r) in self.w_mid.iter_mut().zip(w_left).zip(w_right) {
            *m = 0.5 * (l + r);
        }
        transform::inverse_into(model, &self.w_mid, &mut self.c_mid)?;
        clamp_concentrations(&mut self.c_mid);
        transform::jacobian_parts_into(model, &self.c_mid, &mut self.parts);
        self.decomp.fill(&self.parts)
    }

    /// Spectral radius `μ_1` of `C'(w)`.
    pub fn spectral_radius(&mut self, model: &IsothermModel, w: &[f64]) -> Result<f64> {
        transform::inverse_into(model, w, &mut self.c_mid)?;
        clamp_concentrations(&mut self.c_mid);
        transform::jacobian_parts_into(model, &self.c_mid, &mut self.parts);
        Ok(1.0 / smallest_root(&self.parts)?)
    }
}

/// Decomposition used by characteristic fluxes at the interface between
/// two cells.
pub fn decompose_at_interface(model: &IsothermModel, w_left: &[f64], w_right: &[f64]) -> Result<SpectralDecomp> {
    model.check_len(w_left.len())?;
    model.check_len(w_right.len())?;
    let mut ws = SpectralWorkspace::new(model.n_components());
    ws.decompose_at_interface(model, w_left, w_right)?;
    Ok(ws.decomp)
}

/// Spectral radius of `C'(w)`, the largest characteristic speed divided by `u`.
pub fn spectral_radius(model: &IsothermModel, w: &[f64]) -> Result<f64> {
    model.check_len(w.len())?;
    SpectralWorkspace::new(model.n_components()).spectral_radius(model, w)
}
