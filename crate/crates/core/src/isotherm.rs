//! Generalized Langmuir isotherms `q_i(c) = a_i c_i / φ(bᵀc)`.
//!
//! The only family shipped is Tóth's, `φ(d) = (1 + d^ν)^{1/ν}` with
//! `0 < ν ≤ 1`; `ν = 1` is the multicomponent Langmuir isotherm and takes
//! the affine shortcut `φ(d) = 1 + d`.
//!
//! Components are stored internally sorted by `η_i = (1-ε)/ε · a_i`
//! ascending, which the spectral analysis of the Jacobian relies on. The
//! permutation is kept so callers can move data between user order and
//! internal order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance below 1 accepted (and clamped) by [`Phi::inverse`].
pub const P_CLAMP_TOL: f64 = 1e-12;

/// The scalar function φ of the isotherm family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Phi {
    /// Tóth: `φ(d) = (1 + d^ν)^{1/ν}`.
    Toth { nu: f64 },
}

impl Phi {
    pub fn toth(nu: f64) -> Self {
        Phi::Toth { nu }
    }

    pub fn nu(&self) -> f64 {
        match *self {
            Phi::Toth { nu } => nu,
        }
    }

    #[inline]
    fn is_langmuir(&self) -> bool {
        self.nu() == 1.0
    }

    /// φ(d) without domain checks. Requires `d ≥ 0`.
    #[inline]
    pub fn value_unchecked(&self, d: f64) -> f64 {
        let nu = self.nu();
        if self.is_langmuir() {
            1.0 + d
        } else if d == 0.0 {
            1.0
        } else {
            (1.0 + d.powf(nu)).powf(1.0 / nu)
        }
    }

    /// φ'(d) without domain checks. Requires `d > 0` (or `ν = 1`).
    #[inline]
    pub fn derivative_unchecked(&self, d: f64) -> f64 {
        let nu = self.nu();
        if self.is_langmuir() {
            1.0
        } else {
            let dn = d.powf(nu);
            (1.0 + dn).powf(1.0 / nu - 1.0) * dn / d
        }
    }

    /// φ⁻¹(p) without domain checks. Values of `p` below 1 are clamped to 1.
    #[inline]
    pub fn inverse_unchecked(&self, p: f64) -> f64 {
        let nu = self.nu();
        let p = p.max(1.0);
        if self.is_langmuir() {
            p - 1.0
        } else {
            (p.powf(nu) - 1.0).powf(1.0 / nu)
        }
    }

    /// `φ⁻¹(p)/p` and its derivative with respect to `p`, for `p > 1`.
    ///
    /// The derivative equals `(φ(c) - cφ'(c)) / (φ(c)² φ'(c))` with
    /// `c = φ⁻¹(p)`, which is positive under the isotherm hypotheses.
    #[inline]
    pub(crate) fn inverse_over_p(&self, p: f64) -> (f64, f64) {
        let nu = self.nu();
        if self.is_langmuir() {
            // (p - 1)/p = 1 - 1/p
            (1.0 - 1.0 / p, 1.0 / (p * p))
        } else {
            let pn = p.powf(nu);
            let base = (pn - 1.0).max(0.0);
            let g = base.powf(1.0 / nu);
            // (φ⁻¹)'(p) = (p^ν - 1)^{1/ν - 1} p^{ν - 1}
            let dg = if base > 0.0 { g / base * pn / p } else { 0.0 };
            (g / p, dg / p - g / (p * p))
        }
    }

    pub fn value(&self, d: f64) -> Result<f64> {
        if !(d >= 0.0) {
            return Err(Error::Domain { what: "phi argument", value: d });
        }
        Ok(self.value_unchecked(d))
    }

    pub fn derivative(&self, d: f64) -> Result<f64> {
        if self.is_langmuir() && d >= 0.0 {
            return Ok(1.0);
        }
        if !(d > 0.0) {
            return Err(Error::Domain { what: "phi' argument", value: d });
        }
        Ok(self.derivative_unchecked(d))
    }

    pub fn inverse(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0 - P_CLAMP_TOL) {
            return Err(Error::Domain { what: "phi inverse argument", value: p });
        }
        Ok(self.inverse_unchecked(p))
    }

    fn check(&self) -> Result<()> {
        let nu = self.nu();
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::InvalidModel(format!("Toth heterogeneity nu = {nu} must lie in (0, 1]")));
        }
        Ok(())
    }
}

/// Isotherm parameters with derived `η`, stored in ascending-`η` order.
#[derive(Debug, Clone, PartialEq)]
pub struct IsothermModel {
    a: Vec<f64>,
    b: Vec<f64>,
    eta: Vec<f64>,
    porosity: f64,
    phi: Phi,
    /// `order[k]` is the user index of internal component `k`.
    order: Vec<usize>,
}

impl IsothermModel {
    /// Builds a model from user-ordered parameters.
    ///
    /// Components are reordered by ascending `η`; equal `η` values are
    /// rejected.
    pub fn new(a: &[f64], b: &[f64], porosity: f64, phi: Phi) -> Result<Self> {
        let report = validate_parameters(a, b, porosity, phi);
        if let Some(v) = report.violations.first() {
            return Err(Error::InvalidModel(v.to_string()));
        }
        let ratio = (1.0 - porosity) / porosity;
        let eta_user: Vec<f64> = a.iter().map(|ai| ratio * ai).collect();
        let mut order: Vec<usize> = (0..a.len()).collect();
        order.sort_by(|&i, &j| eta_user[i].total_cmp(&eta_user[j]));
        Ok(Self {
            a: order.iter().map(|&k| a[k]).collect(),
            b: order.iter().map(|&k| b[k]).collect(),
            eta: order.iter().map(|&k| eta_user[k]).collect(),
            porosity,
            phi,
            order,
        })
    }

    /// Tóth model shorthand.
    pub fn toth(a: &[f64], b: &[f64], porosity: f64, nu: f64) -> Result<Self> {
        Self::new(a, b, porosity, Phi::toth(nu))
    }

    #[inline]
    pub fn n_components(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn porosity(&self) -> f64 {
        self.porosity
    }

    pub fn phi_family(&self) -> Phi {
        self.phi
    }

    pub fn nu(&self) -> f64 {
        self.phi.nu()
    }

    /// Internal-to-user index map.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Parameters `a` in user order.
    pub fn user_a(&self) -> Vec<f64> {
        self.to_user(&self.a)
    }

    /// Parameters `b` in user order.
    pub fn user_b(&self) -> Vec<f64> {
        self.to_user(&self.b)
    }

    /// Permutes a user-ordered component vector into internal order.
    pub fn to_internal(&self, user: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&k| user[k]).collect()
    }

    /// Permutes an internally ordered component vector back to user order.
    pub fn to_user(&self, internal: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; internal.len()];
        for (k, &u) in self.order.iter().enumerate() {
            out[u] = internal[k];
        }
        out
    }

    pub fn phi(&self, d: f64) -> Result<f64> {
        self.phi.value(d)
    }

    pub fn phi_prime(&self, d: f64) -> Result<f64> {
        self.phi.derivative(d)
    }

    pub fn phi_inverse(&self, p: f64) -> Result<f64> {
        self.phi.inverse(p)
    }

    /// `bᵀc` over the positive part of `c`.
    #[inline]
    pub fn weighted_sum(&self, c: &[f64]) -> f64 {
        self.b.iter().zip(c).map(|(b, c)| b * c.max(0.0)).sum()
    }

    /// Solid-phase loadings `q_i = a_i c_i / φ(bᵀc)`.
    pub fn adsorption_q(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.check_len(c.len())?;
        if let Some(&bad) = c.iter().find(|&&x| !(x >= 0.0)) {
            return Err(Error::Domain { what: "concentration", value: bad });
        }
        let p = self.phi.value_unchecked(self.weighted_sum(c));
        Ok(self.a.iter().zip(c).map(|(a, c)| a * c / p).collect())
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_components() {
            return Err(Error::Shape(format!("expected {} components, got {len}", self.n_components())));
        }
        Ok(())
    }

    /// Re-checks the isotherm hypotheses for this model.
    pub fn validate(&self) -> ValidationReport {
        validate_parameters(&self.a, &self.b, self.porosity, self.phi)
    }
}

/// A failed hypothesis check.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Parameter(String),
    PhiNotIncreasing { d: f64, derivative: f64 },
    RatioNotIncreasing { d: f64, value: f64 },
    EtaNotDistinct { first: usize, second: usize, eta: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Parameter(msg) => write!(f, "{msg}"),
            Violation::PhiNotIncreasing { d, derivative } => {
                write!(f, "phi'({d:e}) = {derivative:e} is not positive")
            }
            Violation::RatioNotIncreasing { d, value } => {
                write!(f, "phi(d) - d phi'(d) = {value:e} is not positive at d = {d:e}")
            }
            Violation::EtaNotDistinct { first, second, eta } => {
                write!(f, "components {first} and {second} share eta = {eta}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub samples: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples per decade of the hypothesis scan on `[1e-6, 1e6]`.
const SAMPLES_PER_DECADE: usize = 20;

/// Checks parameter domains, the hypotheses `φ' > 0` and `(d/φ)' > 0` on a
/// log grid, and distinctness of `η`.
pub fn validate_parameters(a: &[f64], b: &[f64], porosity: f64, phi: Phi) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = a.len();
    if n == 0 {
        report.violations.push(Violation::Parameter("at least one component is required".into()));
    }
    if b.len() != n {
        report.violations.push(Violation::Parameter(format!("a has {n} entries but b has {}", b.len())));
    }
    if let Some(x) = a.iter().chain(b).find(|&&x| !(x > 0.0 && x.is_finite())) {
        report.violations.push(Violation::Parameter(format!("isotherm coefficients must be positive, got {x}")));
    }
    if !(porosity > 0.0 && porosity <= 1.0) {
        report.violations.push(Violation::Parameter(format!("porosity {porosity} must lie in (0, 1]")));
    }
    if let Err(e) = phi.check() {
        report.violations.push(Violation::Parameter(e.to_string()));
    }
    if !report.violations.is_empty() {
        return report;
    }

    let decades = 12;
    let count = decades * SAMPLES_PER_DECADE + 1;
    for k in 0..count {
        let d = 10f64.powf(-6.0 + k as f64 / SAMPLES_PER_DECADE as f64);
        let dp = phi.derivative_unchecked(d);
        if !(dp > 0.0) {
            report.violations.push(Violation::PhiNotIncreasing { d, derivative: dp });
        }
        let r = phi.value_unchecked(d) - d * dp;
        if !(r > 0.0) {
            report.violations.push(Violation::RatioNotIncreasing { d, value: r });
        }
    }
    report.samples = count;

    let ratio = (1.0 - porosity) / porosity;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    for w in idx.windows(2) {
        let (e0, e1) = (ratio * a[w[0]], ratio * a[w[1]]);
        if !(e1 > e0) {
            report.violations.push(Violation::EtaNotDistinct {
                first: w[0].min(w[1]),
                second: w[0].max(w[1]),
                eta: e0,
            });
        }
    }
    if porosity == 1.0 {
        report.violations.push(Violation::Parameter("porosity 1 gives eta = 0 (no adsorption)".into()));
    }
    report
}
