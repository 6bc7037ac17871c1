//! Interface numerical fluxes for the six convective discretizations.
//!
//! Interfaces are numbered `0..=m`; interface `k` sits at `z = k Δz`
//! between cells `k - 1` and `k`. Interface 0 carries the inlet flux
//! `u c_inj(t)` and interface `m` the upwind outflow `f(w_{m-1})`; interior
//! stencils reaching past the column see two ghost cells per side filled by
//! constant extrapolation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::isotherm::IsothermModel;
use crate::reconstruct::{minmod, weno5_left, weno5_right};
use crate::spectral::SpectralWorkspace;
use crate::transform;

const GHOSTS: usize = 2;

/// Convective discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    /// Characteristic-wise WENO5 upwind.
    #[serde(rename = "CHR-UPW")]
    ChrUpw,
    /// First-order upwind.
    #[serde(rename = "COMP-UPW1")]
    CompUpw1,
    /// Component-wise WENO5 upwind.
    #[serde(rename = "COMP-UPW5")]
    CompUpw5,
    /// Component-wise WENO5 with global Lax–Friedrichs splitting.
    #[serde(rename = "COMP-GLF")]
    CompGlf,
    /// Characteristic-wise WENO5 with global Lax–Friedrichs splitting.
    #[serde(rename = "CHR-GLF")]
    ChrGlf,
    /// Second-order MUSCL with the minmod limiter.
    #[serde(rename = "MUSCL")]
    Muscl,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::ChrUpw,
        SchemeKind::CompUpw1,
        SchemeKind::CompUpw5,
        SchemeKind::CompGlf,
        SchemeKind::ChrGlf,
        SchemeKind::Muscl,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::ChrUpw => "CHR-UPW",
            SchemeKind::CompUpw1 => "COMP-UPW1",
            SchemeKind::CompUpw5 => "COMP-UPW5",
            SchemeKind::CompGlf => "COMP-GLF",
            SchemeKind::ChrGlf => "CHR-GLF",
            SchemeKind::Muscl => "MUSCL",
        }
    }

    /// Whether the scheme projects onto local characteristic fields.
    pub fn is_characteristic(&self) -> bool {
        matches!(self, SchemeKind::ChrUpw | SchemeKind::ChrGlf)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_uppercase();
        SchemeKind::ALL.iter().copied().find(|k| k.name() == wanted).ok_or_else(|| {
            let names: Vec<_> = SchemeKind::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown scheme '{s}'; expected one of {}", names.join(", ")))
        })
    }
}

/// Constant injection over `[start, end)`; `end = None` means forever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionPulse {
    pub start: f64,
    pub end: Option<f64>,
    pub concentrations: Vec<f64>,
}

impl InjectionPulse {
    fn contains(&self, t: f64) -> bool {
        t >= self.start && self.end.is_none_or(|e| t < e)
    }
}

/// Inlet concentrations as a function of time; zero outside every pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionSchedule {
    n: usize,
    pulses: Vec<InjectionPulse>,
}

impl InjectionSchedule {
    pub fn none(n: usize) -> Self {
        Self { n, pulses: Vec::new() }
    }

    pub fn new(n: usize, mut pulses: Vec<InjectionPulse>) -> Result<Self> {
        for p in &pulses {
            if p.concentrations.len() != n {
                return Err(Error::Config(format!(
                    "injection pulse has {} concentrations, expected {n}",
                    p.concentrations.len()
                )));
            }
            if p.concentrations.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
                return Err(Error::Config("injected concentrations must be nonnegative".into()));
            }
            if !(p.start >= 0.0) || p.end.is_some_and(|e| !(e > p.start)) {
                return Err(Error::Config(format!("invalid injection interval [{}, {:?})", p.start, p.end)));
            }
        }
        pulses.sort_by(|a, b| a.start.total_cmp(&b.start));
        for pair in pulses.windows(2) {
            if pair[0].end.is_none_or(|e| e > pair[1].start) {
                return Err(Error::Config("injection intervals overlap".into()));
            }
        }
        Ok(Self { n, pulses })
    }

    pub fn n_components(&self) -> usize {
        self.n
    }

    pub fn pulses(&self) -> &[InjectionPulse] {
        &self.pulses
    }

    pub fn at_into(&self, t: f64, out: &mut [f64]) {
        match self.pulses.iter().find(|p| p.contains(t)) {
            Some(p) => out.copy_from_slice(&p.concentrations),
            None => out.iter_mut().for_each(|x| *x = 0.0),
        }
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.at_into(t, &mut out);
        out
    }

    /// Times where the inlet concentration switches.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.pulses.iter().flat_map(|p| std::iter::once(p.start).chain(p.end)).collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Same schedule with concentrations permuted into the model's internal order.
    pub fn to_internal(&self, model: &IsothermModel) -> Self {
        Self {
            n: self.n,
            pulses: self
                .pulses
                .iter()
                .map(|p| InjectionPulse { concentrations: model.to_internal(&p.concentrations), ..p.clone() })
                .collect(),
        }
    }
}

/// `f(w) = u C(w)`.
pub fn physical_flux(model: &IsothermModel, u: f64, w: &[f64]) -> Result<Vec<f64>> {
    let mut c = transform::inverse(model, w)?;
    c.iter_mut().for_each(|x| *x *= u);
    Ok(c)
}

/// Per-call parameters of a flux evaluation.
#[derive(Debug, Clone, Copy)]
pub struct FluxParams<'a> {
    pub scheme: SchemeKind,
    pub u: f64,
    /// Lax–Friedrichs viscosity; `u` bounds every characteristic speed.
    pub alpha: f64,
    pub weno_epsilon: f64,
    /// Inlet concentrations at the evaluation time.
    pub c_inj: &'a [f64],
}

/// Reusable buffers for interface flux evaluation on a fixed grid.
#[derive(Debug, Clone)]
pub struct FluxEvaluator {
    n: usize,
    m: usize,
    ext_w: Vec<f64>,
    ext_f: Vec<f64>,
    proj_f: Vec<f64>,
    proj_w: Vec<f64>,
    recon: Vec<f64>,
    scratch: Vec<f64>,
    state: Vec<f64>,
    conc: Vec<f64>,
    spectral: SpectralWorkspace,
}

impl FluxEvaluator {
    pub fn new(n: usize, m: usize) -> Self {
        let ext = (m + 2 * GHOSTS) * n;
        Self {
            n,
            m,
            ext_w: vec![0.0; ext],
            ext_f: vec![0.0; ext],
            proj_f: vec![0.0; 6 * n],
            proj_w: vec![0.0; 6 * n],
            recon: vec![0.0; n],
            scratch: vec![0.0; n],
            state: vec![0.0; n],
            conc: vec![0.0; n],
            spectral: SpectralWorkspace::new(n),
        }
    }

    /// Fills the `(m + 1) × N` interface fluxes (interface-major) into `out`.
    ///
    /// `c`, when given, must equal `C(w)` cell by cell and saves the inverse
    /// transforms.
    pub fn evaluate(
        &mut self,
        model: &IsothermModel,
        params: &FluxParams<'_>,
        w: &Field,
        c: Option<&Field>,
        out: &mut [f64],
    ) -> Result<()> {
        let (n, m) = (self.n, self.m);
        if w.n_components() != n || w.n_cells() != m || out.len() != (m + 1) * n {
            return Err(Error::Shape("flux evaluator size does not match the grid".into()));
        }
        let u = params.u;

        // Cells with constant-extrapolation ghosts.
        for j in 0..m {
            let e = (j + GHOSTS) * n;
            self.ext_w[e..e + n].copy_from_slice(w.cell(j));
            match c {
                Some(c) => {
                    for (f, ci) in self.ext_f[e..e + n].iter_mut().zip(c.cell(j)) {
                        *f = u * ci;
                    }
                }
                None => {
                    transform::inverse_into(model, w.cell(j), &mut self.ext_f[e..e + n])?;
                    self.ext_f[e..e + n].iter_mut().for_each(|x| *x *= u);
                }
            }
        }
        for g in 0..GHOSTS {
            let (first, last) = (GHOSTS * n, (m + GHOSTS - 1) * n);
            let (lo, hi) = (g * n, (m + GHOSTS + g) * n);
            self.ext_w.copy_within(first..first + n, lo);
            self.ext_f.copy_within(first..first + n, lo);
            self.ext_w.copy_within(last..last + n, hi);
            self.ext_f.copy_within(last..last + n, hi);
        }

        for (o, ci) in out[..n].iter_mut().zip(params.c_inj) {
            *o = u * ci;
        }
        let last = (m + GHOSTS - 1) * n;
        out[m * n..].copy_from_slice(&self.ext_f[last..last + n]);

        for k in 1..m {
            // Left cell j = k - 1 sits at ext index k + 1.
            let dst = &mut out[k * n..(k + 1) * n];
            match params.scheme {
                SchemeKind::CompUpw1 => {
                    dst.copy_from_slice(&self.ext_f[(k + 1) * n..(k + 2) * n]);
                }
                SchemeKind::CompUpw5 => {
                    for (i, d) in dst.iter_mut().enumerate() {
                        *d = weno5_left(&stencil(&self.ext_f, n, k - 1, i), params.weno_epsilon);
                    }
                }
                SchemeKind::CompGlf => {
                    let a = params.alpha;
                    for (i, d) in dst.iter_mut().enumerate() {
                        let plus = split(&self.ext_f, &self.ext_w, n, k - 1, i, a);
                        let minus = split(&self.ext_f, &self.ext_w, n, k, i, -a);
                        *d = weno5_left(&plus, params.weno_epsilon) + weno5_right(&minus, params.weno_epsilon);
                    }
                }
                SchemeKind::Muscl => {
                    let (j0, j1, j2) = (k, k + 1, k + 2);
                    for i in 0..n {
                        let (wm, w0, wp) = (self.ext_w[j0 * n + i], self.ext_w[j1 * n + i], self.ext_w[j2 * n + i]);
                        self.state[i] = w0 + 0.5 * minmod(w0 - wm, wp - w0);
                    }
                    transform::inverse_into(model, &self.state, &mut self.conc)?;
                    for (d, ci) in dst.iter_mut().zip(&self.conc) {
                        *d = u * ci;
                    }
                }
                SchemeKind::ChrUpw | SchemeKind::ChrGlf => {
                    let (wl, wr) = (&self.ext_w[(k + 1) * n..(k + 2) * n], &self.ext_w[(k + 2) * n..(k + 3) * n]);
                    self.spectral.decompose_at_interface(model, wl, wr)?;
                    let decomp = &self.spectral.decomp;
                    let glf = params.scheme == SchemeKind::ChrGlf;
                    let width = if glf { 6 } else { 5 };
                    for s in 0..width {
                        let e = (k - 1 + s) * n;
                        let pf = &mut self.proj_f[s * n..(s + 1) * n];
                        pf.copy_from_slice(&self.ext_f[e..e + n]);
                        decomp.apply_r_inverse_with(pf, &mut self.scratch);
                        if glf {
                            let pw = &mut self.proj_w[s * n..(s + 1) * n];
                            pw.copy_from_slice(&self.ext_w[e..e + n]);
                            decomp.apply_r_inverse_with(pw, &mut self.scratch);
                        }
                    }
                    for l in 0..n {
                        self.recon[l] = if glf {
                            let a = params.alpha;
                            let plus = split(&self.proj_f, &self.proj_w, n, 0, l, a);
                            let minus = split(&self.proj_f, &self.proj_w, n, 1, l, -a);
                            weno5_left(&plus, params.weno_epsilon) + weno5_right(&minus, params.weno_epsilon)
                        } else {
                            weno5_left(&stencil(&self.proj_f, n, 0, l), params.weno_epsilon)
                        };
                    }
                    crate::linalg::mat_vec(&decomp.r, &self.recon, dst);
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn stencil(values: &[f64], n: usize, first: usize, i: usize) -> [f64; 5] {
    std::array::from_fn(|s| values[(first + s) * n + i])
}

/// `½(f ± α w)` over five consecutive cells.
#[inline]
fn split(f: &[f64], w: &[f64], n: usize, first: usize, i: usize, signed_alpha: f64) -> [f64; 5] {
    std::array::from_fn(|s| {
        let e = (first + s) * n + i;
        0.5 * (f[e] + signed_alpha * w[e])
    })
}

/// One-shot interface fluxes; see [`FluxEvaluator::evaluate`].
#[allow(clippy::too_many_arguments)]
pub fn interface_fluxes(
    scheme: SchemeKind,
    model: &IsothermModel,
    u: f64,
    alpha: f64,
    w: &Field,
    schedule: &InjectionSchedule,
    t: f64,
    weno_epsilon: f64,
) -> Result<Vec<f64>> {
    let c_inj = schedule.at(t);
    let params = FluxParams { scheme, u, alpha, weno_epsilon, c_inj: &c_inj };
    let mut out = vec![0.0; (w.n_cells() + 1) * w.n_components()];
    FluxEvaluator::new(w.n_components(), w.n_cells()).evaluate(model, &params, w, None, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruct::DEFAULT_WENO_EPSILON;
    use approx::assert_relative_eq;

    fn three(nu: f64) -> IsothermModel {
        IsothermModel::toth(&[4.0, 5.0, 6.0], &[4.0, 5.0, 1.0], 0.5, nu).unwrap()
    }

    #[test]
    fn scheme_names_round_trip() {
        for k in SchemeKind::ALL {
            assert_eq!(k.name().parse::<SchemeKind>().unwrap(), k);
        }
        let err = "WENO".parse::<SchemeKind>().unwrap_err().to_string();
        assert!(err.contains("CHR-UPW") && err.contains("MUSCL"));
    }

    #[test]
    fn physical_flux_examples() {
        let m = IsothermModel::toth(&[4.0], &[4.0], 0.5, 1.0).unwrap();
        assert_eq!(physical_flux(&m, 0.2, &[0.0]).unwrap(), vec![0.0]);
        assert_relative_eq!(physical_flux(&m, 0.2, &[1.8]).unwrap()[0], 0.2, max_relative = 1e-13);
        let m3 = three(0.8);
        let w = [0.5, 2.0, 1.0];
        let f = physical_flux(&m3, 0.2, &w).unwrap();
        for i in 0..3 {
            assert!(f[i] >= 0.0 && f[i] <= 0.2 * w[i]);
        }
    }

    #[test]
    fn schedule_evaluation() {
        let s = InjectionSchedule::new(
            3,
            vec![
                InjectionPulse { start: 0.0, end: Some(0.1), concentrations: vec![1.0, 1.0, 0.0] },
                InjectionPulse { start: 0.1, end: None, concentrations: vec![0.0, 0.0, 1.0] },
            ],
        )
        .unwrap();
        assert_eq!(s.at(0.05), vec![1.0, 1.0, 0.0]);
        assert_eq!(s.at(0.1), vec![0.0, 0.0, 1.0]);
        assert_eq!(s.at(50.0), vec![0.0, 0.0, 1.0]);
        assert_eq!(s.breakpoints(), vec![0.0, 0.1]);
        assert!(InjectionSchedule::new(
            1,
            vec![
                InjectionPulse { start: 0.0, end: Some(0.2), concentrations: vec![1.0] },
                InjectionPulse { start: 0.1, end: None, concentrations: vec![1.0] },
            ],
        )
        .is_err());
        assert_eq!(InjectionSchedule::none(2).at(1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn constant_state_is_consistent_for_every_scheme() {
        let model = three(0.9);
        let wbar = transform::forward(&model, &[0.3, 0.2, 0.4]).unwrap();
        let f = physical_flux(&model, 0.2, &wbar).unwrap();
        let m = 12;
        let w = Field::from_fn(3, m, |i, _| wbar[i]);
        for scheme in SchemeKind::ALL {
            let fl =
                interface_fluxes(scheme, &model, 0.2, 0.2, &w, &InjectionSchedule::none(3), 0.0, DEFAULT_WENO_EPSILON)
                    .unwrap();
            assert_eq!(&fl[..3], &[0.0; 3]);
            for k in 1..=m {
                for i in 0..3 {
                    assert_relative_eq!(fl[k * 3 + i], f[i], max_relative = 1e-13);
                }
            }
        }
    }

    #[test]
    fn inlet_flux_follows_schedule() {
        let model = three(1.0);
        let s = InjectionSchedule::new(
            3,
            vec![InjectionPulse { start: 0.0, end: Some(0.1), concentrations: vec![1.0, 1.0, 0.0] }],
        )
        .unwrap();
        let w = Field::zeros(3, 8);
        let fl = interface_fluxes(SchemeKind::ChrUpw, &model, 0.2, 0.2, &w, &s, 0.05, DEFAULT_WENO_EPSILON).unwrap();
        assert_eq!(&fl[..3], &[0.2, 0.2, 0.0]);
    }
}
