//! Method-of-lines semi-discretization and the IMEX midpoint integrator.
//!
//! One step of size `Δt` from `wⁿ`:
//!
//! ```text
//! w^{n+½} = wⁿ + Δt/2 (L(wⁿ, tₙ) + D(w^{n+½}))          (implicit in D)
//! w^{n+1} = wⁿ + Δt   (L(w^{n+½}, t_{n+½}) + D(w^{n+½}))  (explicit)
//! ```
//!
//! with `L` the flux-difference convective operator and
//! `D(w) = D_a C*(w) 𝒜` the Neumann Laplacian applied to concentrations.
//! The implicit stage is solved for `c^{n+½}` by Newton's method on
//! `W*(c) - (D_a Δt/2) c𝒜 = G`, each iteration being a block-tridiagonal
//! solve with `N × N` blocks.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{accurate_sum, Field};
use crate::flux::{FluxEvaluator, FluxParams, InjectionSchedule, SchemeKind};
use crate::isotherm::IsothermModel;
use crate::linalg::{BlockSolver, BlockTridiagonal};
use crate::reconstruct::DEFAULT_WENO_EPSILON;
use crate::spectral::SpectralWorkspace;
use crate::transform;

/// Cell-centered state on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub t: f64,
    pub w: Field,
}

impl GridState {
    pub fn new(w: Field) -> Self {
        Self { t: 0.0, w }
    }

    pub fn n_cells(&self) -> usize {
        self.w.n_cells()
    }

    pub fn dz(&self) -> f64 {
        1.0 / self.n_cells() as f64
    }

    pub fn z_centers(&self) -> Vec<f64> {
        cell_centers(self.n_cells())
    }

    /// `Σ_j w_{i,j} Δz` per component.
    pub fn mass(&self) -> Vec<f64> {
        column_mass(&self.w)
    }
}

/// `z_j = (j + ½) Δz`, zero-based.
pub fn cell_centers(m: usize) -> Vec<f64> {
    let dz = 1.0 / m as f64;
    (0..m).map(|j| (j as f64 + 0.5) * dz).collect()
}

fn column_mass(w: &Field) -> Vec<f64> {
    let dz = 1.0 / w.n_cells() as f64;
    (0..w.n_components()).map(|i| accurate_sum((0..w.n_cells()).map(|j| w.get(i, j))) * dz).collect()
}

/// Tridiagonal Neumann Laplacian `𝒜`, scaled by `1/Δz²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacianOperator {
    m: usize,
    inv_dz2: f64,
}

impl LaplacianOperator {
    pub fn new(m: usize) -> Self {
        let m_f = m as f64;
        Self { m, inv_dz2: m_f * m_f }
    }

    /// `(𝒜_{j,j-1}, 𝒜_{j,j}, 𝒜_{j,j+1})`; absent neighbours are zero.
    #[inline]
    pub fn row(&self, j: usize) -> (f64, f64, f64) {
        let s = self.inv_dz2;
        if self.m == 1 {
            return (0.0, 0.0, 0.0);
        }
        if j == 0 {
            (0.0, -s, s)
        } else if j + 1 == self.m {
            (s, -s, 0.0)
        } else {
            (s, -2.0 * s, s)
        }
    }

    /// Row-major dense `m × m` matrix.
    pub fn dense(&self) -> Vec<f64> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for j in 0..m {
            let (l, d, u) = self.row(j);
            a[j * m + j] = d;
            if j > 0 {
                a[j * m + j - 1] = l;
            }
            if j + 1 < m {
                a[j * m + j + 1] = u;
            }
        }
        a
    }

    /// `out = c 𝒜` for every component (𝒜 is symmetric).
    pub fn apply(&self, c: &Field, out: &mut Field) {
        let n = c.n_components();
        for j in 0..self.m {
            let (l, d, u) = self.row(j);
            for i in 0..n {
                let mut v = d * c.get(i, j);
                if j > 0 {
                    v += l * c.get(i, j - 1);
                }
                if j + 1 < self.m {
                    v += u * c.get(i, j + 1);
                }
                out.set(i, j, v);
            }
        }
    }
}

/// Nodes and weights on `[-1, 1]`.
const GAUSS_LEGENDRE_5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// How the column is filled at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `w ≡ 0`.
    Clean,
    /// `w_i(z) = amplitude_i exp(-sharpness (z - center)²)`, sampled at cell
    /// centers or, with `cell_average`, averaged over each cell.
    Gaussian {
        amplitudes: Vec<f64>,
        center: f64,
        sharpness: f64,
        #[serde(default)]
        cell_average: bool,
    },
    /// Explicit conserved values.
    Values(Field),
}

impl InitialCondition {
    pub fn build(&self, n: usize, m: usize) -> Result<Field> {
        match self {
            InitialCondition::Clean => Ok(Field::zeros(n, m)),
            InitialCondition::Gaussian { amplitudes, center, sharpness, cell_average } => {
                if amplitudes.len() != n {
                    return Err(Error::Config(format!("{} Gaussian amplitudes for {n} components", amplitudes.len())));
                }
                let z = cell_centers(m);
                let half = 0.5 / m as f64;
                let profile = |x: f64| (-sharpness * (x - center).powi(2)).exp();
                let shape: Vec<f64> = if *cell_average {
                    z.iter()
                        .map(|&zc| GAUSS_LEGENDRE_5.iter().map(|&(x, wt)| 0.5 * wt * profile(zc + half * x)).sum())
                        .collect()
                } else {
                    z.iter().map(|&zc| profile(zc)).collect()
                };
                Ok(Field::from_fn(n, m, |i, j| amplitudes[i] * shape[j]))
            }
            InitialCondition::Values(f) => {
                if f.n_components() != n || f.n_cells() != m {
                    return Err(Error::Shape("initial field does not match the grid".into()));
                }
                Ok(f.clone())
            }
        }
    }

    /// Same condition with components permuted into the model's internal order.
    pub fn to_internal(&self, model: &IsothermModel) -> Self {
        match self {
            InitialCondition::Clean => InitialCondition::Clean,
            InitialCondition::Gaussian { amplitudes, center, sharpness, cell_average } => InitialCondition::Gaussian {
                amplitudes: model.to_internal(amplitudes),
                center: *center,
                sharpness: *sharpness,
                cell_average: *cell_average,
            },
            InitialCondition::Values(f) => {
                let n = f.n_components();
                let mut out = Field::zeros(n, f.n_cells());
                for j in 0..f.n_cells() {
                    out.cell_mut(j).copy_from_slice(&model.to_internal(f.cell(j)));
                }
                InitialCondition::Values(out)
            }
        }
    }
}

/// Everything a run needs besides the isotherm model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub scheme: SchemeKind,
    /// Interstitial velocity `u > 0`.
    pub u: f64,
    /// Apparent dispersion `D_a ≥ 0`.
    pub d_a: f64,
    /// CFL factor `K ∈ (0, 1]`.
    pub cfl: f64,
    pub m: usize,
    pub t_final: f64,
    pub output_times: Vec<f64>,
    pub injection: InjectionSchedule,
    pub initial: InitialCondition,
    /// Newton residual tolerance, relative to `1 + ‖G‖∞`.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub weno_epsilon: f64,
}

impl SimulationConfig {
    pub fn new(scheme: SchemeKind, n: usize, m: usize) -> Self {
        Self {
            scheme,
            u: 0.2,
            d_a: 0.0,
            cfl: 0.8,
            m,
            t_final: 0.0,
            output_times: Vec::new(),
            injection: InjectionSchedule::none(n),
            initial: InitialCondition::Clean,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            weno_epsilon: DEFAULT_WENO_EPSILON,
        }
    }

    pub fn validate(&self, model: &IsothermModel) -> Result<()> {
        let n = model.n_components();
        if !(self.u > 0.0 && self.u.is_finite()) {
            return Err(Error::Config(format!("velocity u = {} must be positive", self.u)));
        }
        if !(self.d_a >= 0.0 && self.d_a.is_finite()) {
            return Err(Error::Config(format!("dispersion D_a = {} must be nonnegative", self.d_a)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("CFL factor K = {} must lie in (0, 1]", self.cfl)));
        }
        if self.m == 0 {
            return Err(Error::Config("grid needs at least one cell".into()));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("final time {} must be nonnegative", self.t_final)));
        }
        if let Some(t) = self.output_times.iter().find(|&&t| !(t >= 0.0 && t <= self.t_final)) {
            return Err(Error::Config(format!("output time {t} is outside [0, {}]", self.t_final)));
        }
        if self.injection.n_components() != n {
            return Err(Error::Config("injection schedule has the wrong number of components".into()));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::Config("Newton tolerance and iteration cap must be positive".into()));
        }
        if !(self.weno_epsilon > 0.0) {
            return Err(Error::Config("WENO epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Bookkeeping for one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub t_start: f64,
    pub dt: f64,
    pub newton_iterations: usize,
    /// Inlet and outlet fluxes of the midpoint stage.
    pub flux_in: Vec<f64>,
    pub flux_out: Vec<f64>,
    /// `|ΔM - Δt (f_in - f_out)|₁ / scale`.
    pub mass_residual: f64,
}

/// Aggregate statistics of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub newton_iterations_max: usize,
    pub max_mass_residual: f64,
    pub initial_mass: Vec<f64>,
    pub final_mass: Vec<f64>,
    pub total_inflow: Vec<f64>,
    pub total_outflow: Vec<f64>,
    /// `|M_T - M_0 - (in - out)|₁ / max(|M|₁, |in|₁ + |out|₁)`.
    pub ledger_residual: f64,
    pub min_w: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub w: Field,
    pub c: Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub snapshots: Vec<Snapshot>,
    pub stats: RunStats,
}

impl RunOutput {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("a run always records its final state")
    }

    pub fn at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| (s.t - t).abs() <= 1e-12 * t.max(1.0))
    }
}

/// Solver with all buffers for one grid.
pub struct Simulator<'a> {
    model: &'a IsothermModel,
    config: &'a SimulationConfig,
    n: usize,
    m: usize,
    laplacian: LaplacianOperator,
    flux: FluxEvaluator,
    fluxes: Vec<f64>,
    c_inj: Vec<f64>,
    spectral: SpectralWorkspace,
    c_now: Field,
    c_half: Field,
    w_half: Field,
    rhs: Field,
    lap: Field,
    residual: Vec<f64>,
    jac: BlockTridiagonal,
    block: BlockSolver,
    dense: Vec<f64>,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a IsothermModel, config: &'a SimulationConfig) -> Result<Self> {
        config.validate(model)?;
        let (n, m) = (model.n_components(), config.m);
        Ok(Self {
            model,
            config,
            n,
            m,
            laplacian: LaplacianOperator::new(m),
            flux: FluxEvaluator::new(n, m),
            fluxes: vec![0.0; (m + 1) * n],
            c_inj: vec![0.0; n],
            spectral: SpectralWorkspace::new(n),
            c_now: Field::zeros(n, m),
            c_half: Field::zeros(n, m),
            w_half: Field::zeros(n, m),
            rhs: Field::zeros(n, m),
            lap: Field::zeros(n, m),
            residual: vec![0.0; n * m],
            jac: BlockTridiagonal::zeros(n, m),
            block: BlockSolver::new(n, m),
            dense: vec![0.0; n * n],
        })
    }

    pub fn initial_state(&self) -> Result<GridState> {
        Ok(GridState::new(self.config.initial.build(self.n, self.m)?))
    }

    pub fn laplacian(&self) -> &LaplacianOperator {
        &self.laplacian
    }

    fn check_state(&self, state: &GridState) -> Result<()> {
        if state.w.n_components() != self.n || state.w.n_cells() != self.m {
            return Err(Error::Shape("state does not match the simulator grid".into()));
        }
        Ok(())
    }

    fn concentrations_into(model: &IsothermModel, w: &Field, c: &mut Field) -> Result<()> {
        for j in 0..w.n_cells() {
            transform::inverse_into(model, w.cell(j), c.cell_mut(j))?;
        }
        Ok(())
    }

    /// Interface fluxes into `self.fluxes`.
    fn fill_fluxes(&mut self, w: &Field, c: Option<&Field>, t: f64) -> Result<()> {
        // Characteristic Lax-Friedrichs splitting uses the same local speed
        // bound as the step size, so α Δt / Δz stays at K.
        let alpha = if self.config.scheme == SchemeKind::ChrGlf {
            self.config.u * self.characteristic_bound(w, t)?
        } else {
            self.config.u
        };
        self.config.injection.at_into(t, &mut self.c_inj);
        let params = FluxParams {
            scheme: self.config.scheme,
            u: self.config.u,
            alpha,
            weno_epsilon: self.config.weno_epsilon,
            c_inj: &self.c_inj,
        };
        self.flux.evaluate(self.model, &params, w, c, &mut self.fluxes)
    }

    /// `L_j = -(f̂_{j+½} - f̂_{j-½}) / Δz` from the stored fluxes.
    fn flux_divergence_into(&self, out: &mut Field) {
        let n = self.n;
        let inv_dz = self.m as f64;
        for j in 0..self.m {
            let cell = out.cell_mut(j);
            for i in 0..n {
                cell[i] = -(self.fluxes[(j + 1) * n + i] - self.fluxes[j * n + i]) * inv_dz;
            }
        }
    }

    /// Convective operator `L(w, t)`.
    pub fn convective_operator(&mut self, state: &GridState) -> Result<Field> {
        self.check_state(state)?;
        self.fill_fluxes(&state.w, None, state.t)?;
        let mut out = Field::zeros(self.n, self.m);
        self.flux_divergence_into(&mut out);
        Ok(out)
    }

    /// Interface fluxes `(m + 1) × N` for `state`.
    pub fn interface_fluxes(&mut self, state: &GridState) -> Result<Vec<f64>> {
        self.check_state(state)?;
        self.fill_fluxes(&state.w, None, state.t)?;
        Ok(self.fluxes.clone())
    }

    /// Diffusion operator `D_a C*(w) 𝒜`.
    pub fn diffusion_operator(&mut self, state: &GridState) -> Result<Field> {
        self.check_state(state)?;
        let mut out = Field::zeros(self.n, self.m);
        if self.config.d_a == 0.0 {
            return Ok(out);
        }
        Self::concentrations_into(self.model, &state.w, &mut self.c_now)?;
        self.laplacian.apply(&self.c_now, &mut out);
        out.as_mut_slice().iter_mut().for_each(|x| *x *= self.config.d_a);
        Ok(out)
    }

    /// Largest admissible step `K Δz / (u ρ)`; `ρ = 1` for component-wise
    /// schemes and `max_j μ_1(w_j)` for characteristic ones.
    pub fn stable_dt(&mut self, state: &GridState) -> Result<f64> {
        self.check_state(state)?;
        let dz = state.dz();
        let rho =
            if self.config.scheme.is_characteristic() { self.characteristic_bound(&state.w, state.t)? } else { 1.0 };
        Ok(self.config.cfl * dz / (self.config.u * rho))
    }

    /// `max μ_1` over all cells and the state injected at time `t`, which
    /// enters the column through the inlet during the step.
    pub fn characteristic_bound(&mut self, w: &Field, t: f64) -> Result<f64> {
        let mut rho = 0.0f64;
        for j in 0..w.n_cells() {
            rho = rho.max(self.spectral.spectral_radius(self.model, w.cell(j))?);
        }
        self.config.injection.at_into(t, &mut self.c_inj);
        if self.c_inj.iter().any(|&c| c > 0.0) {
            let w_inj = transform::forward(self.model, &self.c_inj)?;
            rho = rho.max(self.spectral.spectral_radius(self.model, &w_inj)?);
        }
        Ok(rho)
    }

    /// Solves `W*(c) - (D_a Δt/2) c𝒜 = G` for `c`, starting from `guess`.
    /// Returns the number of Newton iterations.
    pub fn implicit_stage(&mut self, g: &Field, guess: &Field, dt: f64, c: &mut Field) -> Result<usize> {
        if g.n_cells() != self.m || g.n_components() != self.n {
            return Err(Error::Shape("implicit stage right-hand side does not match the grid".into()));
        }
        g.same_shape(guess)?;
        g.same_shape(c)?;
        let (n, m) = (self.n, self.m);
        if self.config.d_a == 0.0 {
            for j in 0..m {
                transform::inverse_into(self.model, g.cell(j), c.cell_mut(j))?;
            }
            return Ok(0);
        }
        let kappa = 0.5 * self.config.d_a * dt;
        let tol = self.config.newton_tol * (1.0 + g.max_abs());
        c.as_mut_slice().copy_from_slice(guess.as_slice());
        let mut w_cell = vec![0.0; n];
        let mut worst = (0.0f64, 0usize);
        for iter in 0..=self.config.newton_max_iter {
            // F(c) = W*(c) - κ c𝒜 - G
            self.laplacian.apply(c, &mut self.lap);
            worst = (0.0, 0);
            for j in 0..m {
                transform::forward_into(self.model, c.cell(j), &mut w_cell);
                for i in 0..n {
                    let r = w_cell[i] - kappa * self.lap.get(i, j) - g.get(i, j);
                    self.residual[j * n + i] = -r;
                    if r.abs() > worst.0 {
                        worst = (r.abs(), j);
                    }
                }
            }
            if worst.0 <= tol {
                return Ok(iter);
            }
            if iter == self.config.newton_max_iter || !worst.0.is_finite() {
                break;
            }
            for j in 0..m {
                let (lo, diag, up) = self.laplacian.row(j);
                transform::jacobian_dense_into(self.model, c.cell(j), &mut self.dense);
                let block = self.jac.diag_block_mut(j);
                block.copy_from_slice(&self.dense);
                for i in 0..n {
                    block[i * n + i] -= kappa * diag;
                }
                if j + 1 < m {
                    let ub = self.jac.upper_block_mut(j);
                    ub.iter_mut().for_each(|x| *x = 0.0);
                    for i in 0..n {
                        ub[i * n + i] = -kappa * up;
                    }
                }
                if j > 0 {
                    let lb = self.jac.lower_block_mut(j - 1);
                    lb.iter_mut().for_each(|x| *x = 0.0);
                    for i in 0..n {
                        lb[i * n + i] = -kappa * lo;
                    }
                }
            }
            self.block.solve(&self.jac, &mut self.residual)?;
            for (ci, d) in c.as_mut_slice().iter_mut().zip(&self.residual) {
                *ci += d;
            }
        }
        Err(Error::NewtonNotConverged { iterations: self.config.newton_max_iter, residual: worst.0, cell: worst.1 })
    }

    /// Advances `state` by `dt`.
    pub fn imex_step(&mut self, state: &mut GridState, dt: f64) -> Result<StepReport> {
        self.check_state(state)?;
        let (n, m) = (self.n, self.m);
        let t0 = state.t;
        let mass_before = state.mass();

        let mut c_now = std::mem::replace(&mut self.c_now, Field::zeros(0, 0));
        let mut c_half = std::mem::replace(&mut self.c_half, Field::zeros(0, 0));
        let mut w_half = std::mem::replace(&mut self.w_half, Field::zeros(0, 0));
        let mut rhs = std::mem::replace(&mut self.rhs, Field::zeros(0, 0));

        let result = (|| -> Result<(usize, Vec<f64>, Vec<f64>)> {
            Self::concentrations_into(self.model, &state.w, &mut c_now)?;
            self.fill_fluxes(&state.w, Some(&c_now), t0)?;
            self.flux_divergence_into(&mut rhs);
            for (g, w) in rhs.as_mut_slice().iter_mut().zip(state.w.as_slice()) {
                *g = w + 0.5 * dt * *g;
            }
            let iterations = self.implicit_stage(&rhs, &c_now, dt, &mut c_half)?;
            for j in 0..m {
                transform::forward_into(self.model, c_half.cell(j), w_half.cell_mut(j));
            }

            self.fill_fluxes(&w_half, Some(&c_half), t0 + 0.5 * dt)?;
            let flux_in = self.fluxes[..n].to_vec();
            let flux_out = self.fluxes[m * n..].to_vec();
            self.flux_divergence_into(&mut rhs);
            if self.config.d_a > 0.0 {
                self.laplacian.apply(&c_half, &mut self.lap);
                for (r, l) in rhs.as_mut_slice().iter_mut().zip(self.lap.as_slice()) {
                    *r += self.config.d_a * l;
                }
            }
            for (w, r) in state.w.as_mut_slice().iter_mut().zip(rhs.as_slice()) {
                *w += dt * r;
            }
            Ok((iterations, flux_in, flux_out))
        })();

        self.c_now = c_now;
        self.c_half = c_half;
        self.w_half = w_half;
        self.rhs = rhs;
        let (newton_iterations, flux_in, flux_out) = result?;

        state.t = t0 + dt;
        let mass_after = state.mass();
        let mut defect = 0.0;
        let mut scale_mass = 0.0f64;
        let mut scale_flux = 0.0;
        for i in 0..n {
            let change = mass_after[i] - mass_before[i];
            defect += (change - dt * (flux_in[i] - flux_out[i])).abs();
            scale_mass += mass_before[i].abs().max(mass_after[i].abs());
            scale_flux += dt * (flux_in[i].abs() + flux_out[i].abs());
        }
        let scale = scale_mass.max(scale_flux);
        let mass_residual = if scale > 0.0 { defect / scale } else { defect };
        Ok(StepReport { t_start: t0, dt, newton_iterations, flux_in, flux_out, mass_residual })
    }

    /// Integrates to `t_final`, landing exactly on injection switches and
    /// output times. `observer` sees every accepted step.
    pub fn run_with(&mut self, mut observer: impl FnMut(&GridState, &StepReport)) -> Result<RunOutput> {
        let cfg = self.config;
        let mut state = self.initial_state()?;
        let mut outputs: Vec<f64> = cfg.output_times.clone();
        outputs.push(cfg.t_final);
        outputs.sort_by(f64::total_cmp);
        outputs.dedup();
        let mut stops: Vec<f64> = outputs.clone();
        stops.extend(cfg.injection.breakpoints().into_iter().filter(|&t| t > 0.0 && t < cfg.t_final));
        stops.retain(|&t| t > 0.0);
        stops.sort_by(f64::total_cmp);
        stops.dedup();

        let mut stats = RunStats {
            dt_min: f64::INFINITY,
            dt_max: 0.0,
            initial_mass: state.mass(),
            total_inflow: vec![0.0; self.n],
            total_outflow: vec![0.0; self.n],
            min_w: state.w.min(),
            ..RunStats::default()
        };
        let mut snapshots = Vec::new();
        let mut record = |state: &GridState, sim: &mut Self| -> Result<()> {
            let mut c = Field::zeros(sim.n, sim.m);
            Self::concentrations_into(sim.model, &state.w, &mut c)?;
            snapshots.push(Snapshot { t: state.t, w: state.w.clone(), c });
            Ok(())
        };
        if outputs.first() == Some(&0.0) {
            record(&state, self)?;
        }

        let started = Instant::now();
        let mut warned_negative = false;
        for &stop in &stops {
            while state.t < stop {
                let mut dt = self.stable_dt(&state)?;
                let landing = state.t + dt >= stop - 1e-9 * dt;
                if landing {
                    dt = stop - state.t;
                }
                let report = self.imex_step(&mut state, dt)?;
                if landing {
                    state.t = stop;
                }
                stats.steps += 1;
                stats.dt_min = stats.dt_min.min(dt);
                stats.dt_max = stats.dt_max.max(dt);
                stats.newton_iterations_max = stats.newton_iterations_max.max(report.newton_iterations);
                stats.max_mass_residual = stats.max_mass_residual.max(report.mass_residual);
                for i in 0..self.n {
                    stats.total_inflow[i] += dt * report.flux_in[i];
                    stats.total_outflow[i] += dt * report.flux_out[i];
                }
                let wmin = state.w.min();
                if wmin < stats.min_w {
                    stats.min_w = wmin;
                }
                if wmin < -1e-8 && !warned_negative {
                    log::warn!("negative conserved value {wmin:e} at t = {}", state.t);
                    warned_negative = true;
                }
                observer(&state, &report);
            }
            if outputs.contains(&stop) {
                stats.wall_seconds += started.elapsed().as_secs_f64();
                record(&state, self)?;
            }
        }
        stats.wall_seconds = started.elapsed().as_secs_f64();
        if stats.steps == 0 {
            stats.dt_min = 0.0;
        }
        stats.final_mass = state.mass();
        let mut defect = 0.0;
        let mut scale = 0.0f64;
        for i in 0..self.n {
            let net = stats.total_inflow[i] - stats.total_outflow[i];
            defect += (stats.final_mass[i] - stats.initial_mass[i] - net).abs();
            scale += stats.initial_mass[i].abs().max(stats.final_mass[i].abs())
                + stats.total_inflow[i].abs()
                + stats.total_outflow[i].abs();
        }
        stats.ledger_residual = if scale > 0.0 { defect / scale } else { defect };
        Ok(RunOutput { snapshots, stats })
    }

    pub fn run(&mut self) -> Result<RunOutput> {
        self.run_with(|_, _| {})
    }
}

/// Runs `config` on `model` from its initial condition.
pub fn run(config: &SimulationConfig, model: &IsothermModel) -> Result<RunOutput> {
    Simulator::new(model, config)?.run()
}
