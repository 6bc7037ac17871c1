//! Experiment presets, reference-grid errors, convergence orders and the
//! profile measurements used to compare schemes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{accurate_sum, Field};
use crate::flux::{InjectionPulse, InjectionSchedule, SchemeKind};
use crate::isotherm::IsothermModel;
use crate::stepper::{InitialCondition, RunOutput, SimulationConfig, Simulator, Snapshot};

/// Default fraction of the largest per-entry errors discarded by
/// [`trimmed_l1_error`].
pub const DEFAULT_TRIM_FRACTION: f64 = 0.02;

/// Reference grid used for all error measurements.
pub const REFERENCE_CELLS: usize = 25600;

/// Which variable an error study compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorVariable {
    /// Conserved variables `w`.
    #[default]
    #[serde(alias = "w")]
    Conserved,
    /// Liquid-phase concentrations `c = C(w)`.
    #[serde(alias = "c")]
    Concentration,
}

impl ErrorVariable {
    pub fn select<'a>(&self, snapshot: &'a Snapshot) -> &'a Field {
        match self {
            ErrorVariable::Conserved => &snapshot.w,
            ErrorVariable::Concentration => &snapshot.c,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ErrorVariable::Conserved => "w",
            ErrorVariable::Concentration => "c",
        }
    }
}

/// One row of an error study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub scheme: SchemeKind,
    pub nu: f64,
    pub d_a: f64,
    pub t_final: f64,
    pub m: usize,
    pub variable: ErrorVariable,
    pub e_m: f64,
    pub e_m_trimmed: f64,
    /// Order against the `2m` row of the same study, if present.
    pub theta_m: Option<f64>,
    pub wall_seconds: f64,
    pub steps: usize,
}

/// Block averages of `ratio = m_ref / m` consecutive reference cells.
pub fn restrict_reference(reference: &Field, m: usize) -> Result<Field> {
    let m_ref = reference.n_cells();
    if m == 0 || !m_ref.is_multiple_of(m) {
        return Err(Error::Shape(format!("target grid {m} does not divide the reference grid {m_ref}")));
    }
    let ratio = m_ref / m;
    let n = reference.n_components();
    let mut out = Field::zeros(n, m);
    for j in 0..m {
        for i in 0..n {
            let s = accurate_sum((0..ratio).map(|k| reference.get(i, j * ratio + k)));
            out.set(i, j, s / ratio as f64);
        }
    }
    Ok(out)
}

fn check_pair(sol: &Field, reference: &Field) -> Result<()> {
    if sol.n_components() != reference.n_components() || sol.n_cells() != reference.n_cells() {
        return Err(Error::Shape(format!(
            "solution {}x{} vs reference {}x{}",
            sol.n_components(),
            sol.n_cells(),
            reference.n_components(),
            reference.n_cells()
        )));
    }
    Ok(())
}

/// `e_m = (1/m) Σ_i Σ_j |w̃_ij - w_ij|`.
pub fn l1_error(sol: &Field, reference: &Field) -> Result<f64> {
    check_pair(sol, reference)?;
    let s = accurate_sum(sol.as_slice().iter().zip(reference.as_slice()).map(|(a, b)| (a - b).abs()));
    Ok(s / sol.n_cells() as f64)
}

/// [`l1_error`] after dropping the `⌈fraction · N m⌉` largest entries; the
/// `1/m` normalization is kept.
pub fn trimmed_l1_error(sol: &Field, reference: &Field, fraction: f64) -> Result<f64> {
    check_pair(sol, reference)?;
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!("trim fraction {fraction} must lie in [0, 1)")));
    }
    let mut diffs: Vec<f64> = sol.as_slice().iter().zip(reference.as_slice()).map(|(a, b)| (a - b).abs()).collect();
    diffs.sort_by(f64::total_cmp);
    let drop = (fraction * diffs.len() as f64).ceil() as usize;
    let keep = diffs.len().saturating_sub(drop);
    Ok(accurate_sum(diffs[..keep].iter().copied()) / sol.n_cells() as f64)
}

/// `θ = log₂(e_m / e_2m)`.
pub fn convergence_order(e_m: f64, e_2m: f64) -> Result<f64> {
    if !(e_m > 0.0) {
        return Err(Error::Domain { what: "coarse-grid error", value: e_m });
    }
    if !(e_2m > 0.0) {
        return Err(Error::Domain { what: "fine-grid error", value: e_2m });
    }
    Ok((e_m / e_2m).log2())
}

/// Fills `theta_m` for every row that has a `2m` partner with the same
/// scheme, `ν` and `D_a`.
pub fn fill_orders(reports: &mut [ErrorReport]) {
    let snapshot: Vec<ErrorReport> = reports.to_vec();
    for r in reports.iter_mut() {
        r.theta_m = snapshot
            .iter()
            .find(|o| {
                o.scheme == r.scheme && o.variable == r.variable && o.nu == r.nu && o.d_a == r.d_a && o.m == 2 * r.m
            })
            .and_then(|o| convergence_order(r.e_m, o.e_m).ok());
    }
}

/// Model parameters and run settings of a numbered experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub id: u8,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub porosity: f64,
    pub nu: f64,
    pub model: IsothermModel,
    /// Injection and initial data are stored in the model's internal order.
    pub config: SimulationConfig,
}

impl Preset {
    /// Rebuilds the model with heterogeneity `nu`.
    pub fn with_nu(mut self, nu: f64) -> Result<Self> {
        let model = IsothermModel::toth(&self.a, &self.b, self.porosity, nu)?;
        if model.order() != self.model.order() {
            return Err(Error::InvalidModel("component order changed with nu".into()));
        }
        self.model = model;
        self.nu = nu;
        Ok(self)
    }

    pub fn with_scheme(mut self, scheme: SchemeKind) -> Self {
        self.config.scheme = scheme;
        self
    }

    pub fn with_cells(mut self, m: usize) -> Self {
        self.config.m = m;
        self
    }

    pub fn with_dispersion(mut self, d_a: f64) -> Self {
        self.config.d_a = d_a;
        self
    }

    /// Sets the final time and drops output times beyond it.
    pub fn with_final_time(mut self, t: f64) -> Self {
        self.config.t_final = t;
        self.config.output_times.retain(|&s| s <= t);
        self
    }

    pub fn run(&self) -> Result<RunOutput> {
        Simulator::new(&self.model, &self.config)?.run()
    }
}

const PRESET_A: [f64; 3] = [4.0, 5.0, 6.0];
const PRESET_POROSITY: f64 = 0.5;
const PRESET_U: f64 = 0.2;

/// Experiments 1–3: two-component pulse on `[0, 0.1)` displaced by
/// component 3 at `c3` from `t = 0.1`, clean bed. Experiment 4: smooth
/// Gaussian initial data, no injection.
pub fn experiment_preset(id: u8) -> Result<Preset> {
    let (b, nu, d_a, scheme, t_final, outputs, c3) = match id {
        1 => ([4.0, 5.0, 1.0], 1.0, 0.0, SchemeKind::ChrUpw, 11.0, vec![1.0, 4.0, 8.0, 11.0], 1.0),
        2 => ([4.0, 5.0, 1.0], 0.9, 0.0, SchemeKind::ChrUpw, 16.0, vec![1.0, 8.0, 16.0], 0.5),
        3 => ([4.0, 5.0, 1.0], 0.9, 0.0, SchemeKind::ChrUpw, 16.0, vec![1.0, 8.0, 16.0], 0.1),
        4 => ([1.0, 1.0, 1.0], 1.0, 1e-4, SchemeKind::CompUpw5, 0.5, vec![0.5], 0.0),
        _ => return Err(Error::Config(format!("unknown experiment {id}; expected 1, 2, 3 or 4"))),
    };
    let model = IsothermModel::toth(&PRESET_A, &b, PRESET_POROSITY, nu)?;
    let mut config = SimulationConfig::new(scheme, 3, 800);
    config.u = PRESET_U;
    config.d_a = d_a;
    config.t_final = t_final;
    config.output_times = outputs;
    if id == 4 {
        config.initial = InitialCondition::Gaussian {
            amplitudes: vec![1.0, 2.0, 3.0],
            center: 0.5,
            sharpness: 100.0,
            cell_average: false,
        };
    } else {
        config.injection = InjectionSchedule::new(
            3,
            vec![
                InjectionPulse { start: 0.0, end: Some(0.1), concentrations: vec![1.0, 1.0, 0.0] },
                InjectionPulse { start: 0.1, end: None, concentrations: vec![0.0, 0.0, c3] },
            ],
        )?;
    }
    config.injection = config.injection.to_internal(&model);
    config.initial = config.initial.to_internal(&model);
    Ok(Preset { id, a: PRESET_A.to_vec(), b: b.to_vec(), porosity: PRESET_POROSITY, nu, model, config })
}

/// Runs `preset` once per `(scheme, m)` and compares the final `variable`
/// with `reference` (same variable, block-restricted). Failed entries are
/// returned as errors without stopping the sweep; orders are filled for
/// consecutive successful grids.
pub fn efficiency_sweep(
    schemes: &[SchemeKind],
    grids: &[usize],
    preset: &Preset,
    variable: ErrorVariable,
    reference: &Field,
) -> Vec<Result<ErrorReport>> {
    let mut out: Vec<Result<ErrorReport>> = Vec::new();
    for &scheme in schemes {
        for &m in grids {
            out.push(sweep_entry(preset, scheme, m, variable, reference));
        }
    }
    let mut ok: Vec<ErrorReport> = out.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    fill_orders(&mut ok);
    let mut filled = ok.into_iter();
    for r in out.iter_mut() {
        if r.is_ok() {
            *r = Ok(filled.next().expect("same number of successful rows"));
        }
    }
    out
}

/// One `(scheme, m)` entry of [`efficiency_sweep`]; `theta_m` is left empty.
pub fn sweep_entry(
    preset: &Preset,
    scheme: SchemeKind,
    m: usize,
    variable: ErrorVariable,
    reference: &Field,
) -> Result<ErrorReport> {
    let p = preset.clone().with_scheme(scheme).with_cells(m);
    let run = p.run()?;
    let restricted = restrict_reference(reference, m)?;
    let w = variable.select(run.final_snapshot());
    Ok(ErrorReport {
        scheme,
        nu: p.nu,
        d_a: p.config.d_a,
        t_final: p.config.t_final,
        m,
        variable,
        e_m: l1_error(w, &restricted)?,
        e_m_trimmed: trimmed_l1_error(w, &restricted, DEFAULT_TRIM_FRACTION)?,
        theta_m: None,
        wall_seconds: run.stats.wall_seconds,
        steps: run.stats.steps,
    })
}

/// Amount by which `profile` exceeds `level` (zero if it never does).
pub fn overshoot(profile: &[f64], level: f64) -> f64 {
    profile.iter().fold(0.0f64, |acc, &v| acc.max(v - level))
}

/// Position where `profile` falls through `threshold` for the last time,
/// scanning left to right, linearly interpolated between cell centers.
fn last_crossing(z: &[f64], profile: &[f64], threshold: f64) -> Option<f64> {
    let j = profile.iter().rposition(|&v| v >= threshold)?;
    if j + 1 == profile.len() {
        return Some(z[j]);
    }
    let (v0, v1) = (profile[j], profile[j + 1]);
    let s = if v0 == v1 { 0.0 } else { (v0 - threshold) / (v0 - v1) };
    Some(z[j] + s * (z[j + 1] - z[j]))
}

/// Width of the leading (largest `z`) front between the levels `lo·level`
/// and `hi·level`.
pub fn leading_front_width(z: &[f64], profile: &[f64], level: f64, lo: f64, hi: f64) -> Option<f64> {
    let z_hi = last_crossing(z, profile, hi * level)?;
    let z_lo = last_crossing(z, profile, lo * level)?;
    Some(z_lo - z_hi)
}

/// Largest `z` at which `profile` still reaches half its maximum.
pub fn front_position(z: &[f64], profile: &[f64]) -> Option<f64> {
    let max = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return None;
    }
    last_crossing(z, profile, 0.5 * max)
}

/// Extent of the cells where `profile ≥ threshold`.
fn support_width(z: &[f64], profile: &[f64], threshold: f64) -> f64 {
    let first = profile.iter().position(|&v| v >= threshold);
    let last = profile.iter().rposition(|&v| v >= threshold);
    match (first, last) {
        (Some(a), Some(b)) => {
            let dz = if z.len() > 1 { z[1] - z[0] } else { 1.0 };
            z[b] - z[a] + dz
        }
        _ => 0.0,
    }
}

/// Total variation in excess of a single rise and fall, relative to the
/// peak: zero for a profile that increases to its maximum and then
/// decreases, positive once ripples appear.
pub fn oscillation_excess(profile: &[f64]) -> f64 {
    let (Some(&first), Some(&last)) = (profile.first(), profile.last()) else {
        return 0.0;
    };
    let peak = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak <= 0.0 {
        return 0.0;
    }
    let tv: f64 = profile.windows(2).map(|p| (p[1] - p[0]).abs()).sum();
    (tv - (2.0 * peak - first - last)) / peak
}

/// Ratio of the band width at 95% of the peak to the width at 5%: close
/// to 1 for a rectangular pulse, small for a triangular or smeared one.
pub fn rectangularity(z: &[f64], profile: &[f64]) -> f64 {
    let max = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return 0.0;
    }
    let outer = support_width(z, profile, 0.05 * max);
    if outer == 0.0 {
        return 0.0;
    }
    support_width(z, profile, 0.95 * max) / outer
}

/// Pure-component band levels of an isotachic train behind a displacer
/// at concentration `c_disp` with parameters `(a_d, b_d)`, for `ν = 1`.
///
/// All bands travel with the displacer: `η_k / (1 + b_k c_k) = η_d / (1 + b_d c_d)`.
pub fn isotachic_levels(eta: &[f64], b: &[f64], eta_disp: f64, b_disp: f64, c_disp: f64) -> Vec<f64> {
    let slope = eta_disp / (1.0 + b_disp * c_disp);
    eta.iter().zip(b).map(|(&e, &bk)| ((e / slope - 1.0) / bk).max(0.0)).collect()
}
