//! Configuration, dispatch and artifact writers for the `chroma` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Parser;
use serde::{Deserialize, Serialize};

use edchrom::harness::{self, ErrorReport, ErrorVariable, Preset};
use edchrom::stepper::{RunOutput, RunStats};
use edchrom::{InitialCondition, InjectionPulse, InjectionSchedule, IsothermModel, SchemeKind, SimulationConfig};

/// Grids of the standard error study.
pub const DEFAULT_GRIDS: [usize; 5] = [100, 200, 400, 800, 1600];

#[derive(Debug, Clone, Parser)]
#[command(name = "chroma", version, about = "Equilibrium-dispersive chromatography solver")]
pub struct Cli {
    /// Configuration file (TOML, or a previous manifest.json).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from a numbered experiment preset.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub experiment: Option<u8>,
    /// Flux scheme: CHR-UPW, COMP-UPW1, COMP-UPW5, COMP-GLF, CHR-GLF or MUSCL.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Number of cells.
    #[arg(long)]
    pub m: Option<usize>,
    /// Reference grid for error studies.
    #[arg(long)]
    pub mref: Option<usize>,
    /// Tóth heterogeneity parameter.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Apparent dispersion coefficient.
    #[arg(long = "Da")]
    pub d_a: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    pub t_final: Option<f64>,
    /// CFL factor.
    #[arg(long = "K")]
    pub cfl: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Error study on experiment 4 printed in the published table layout.
    #[arg(long)]
    pub table1: bool,
    /// Error-vs-runtime sweep against a reference run.
    #[arg(long)]
    pub sweep: bool,
    /// Worker threads for sweep entries.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Run everything on one thread.
    #[arg(long)]
    pub single_thread: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsothermSection {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub porosity: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    #[serde(default)]
    pub scheme: Option<SchemeKind>,
    #[serde(default = "default_u")]
    pub u: f64,
    #[serde(default)]
    pub d_a: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub m: usize,
    pub t_final: f64,
    #[serde(default)]
    pub output_times: Vec<f64>,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default = "default_weno_epsilon")]
    pub weno_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub start: f64,
    #[serde(default)]
    pub end: Option<f64>,
    pub concentrations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessSection {
    #[serde(default = "default_mref")]
    pub m_ref: usize,
    #[serde(default = "default_grids")]
    pub grids: Vec<usize>,
    #[serde(default)]
    pub schemes: Vec<SchemeKind>,
    #[serde(default = "default_variable")]
    pub variable: ErrorVariable,
    #[serde(default)]
    pub reference_scheme: Option<SchemeKind>,
}

impl Default for HarnessSection {
    fn default() -> Self {
        Self {
            m_ref: default_mref(),
            grids: default_grids(),
            schemes: Vec::new(),
            variable: default_variable(),
            reference_scheme: None,
        }
    }
}

/// Complete, self-contained run description. Components are in the order
/// the user gave them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiment: Option<u8>,
    pub isotherm: IsothermSection,
    pub stepper: StepperSection,
    #[serde(default)]
    pub injection: Vec<PulseSection>,
    #[serde(default = "default_initial")]
    pub initial: InitialCondition,
    #[serde(default)]
    pub harness: HarnessSection,
}

fn default_u() -> f64 {
    0.2
}
fn default_cfl() -> f64 {
    0.8
}
fn default_newton_tol() -> f64 {
    1e-12
}
fn default_newton_max_iter() -> usize {
    50
}
fn default_weno_epsilon() -> f64 {
    edchrom::reconstruct::DEFAULT_WENO_EPSILON
}
fn default_mref() -> usize {
    harness::REFERENCE_CELLS
}
fn default_grids() -> Vec<usize> {
    DEFAULT_GRIDS.to_vec()
}
fn default_variable() -> ErrorVariable {
    ErrorVariable::Concentration
}
fn default_initial() -> InitialCondition {
    InitialCondition::Clean
}

impl RunConfig {
    /// Echo of a preset in user component order.
    pub fn from_preset(p: &Preset) -> Self {
        let model = &p.model;
        let injection = p
            .config
            .injection
            .pulses()
            .iter()
            .map(|q| PulseSection { start: q.start, end: q.end, concentrations: model.to_user(&q.concentrations) })
            .collect();
        let initial = match &p.config.initial {
            InitialCondition::Gaussian { amplitudes, center, sharpness, cell_average } => InitialCondition::Gaussian {
                amplitudes: model.to_user(amplitudes),
                center: *center,
                sharpness: *sharpness,
                cell_average: *cell_average,
            },
            other => other.clone(),
        };
        let c = &p.config;
        RunConfig {
            experiment: Some(p.id),
            isotherm: IsothermSection { a: p.a.clone(), b: p.b.clone(), porosity: p.porosity, nu: p.nu },
            stepper: StepperSection {
                scheme: Some(c.scheme),
                u: c.u,
                d_a: c.d_a,
                cfl: c.cfl,
                m: c.m,
                t_final: c.t_final,
                output_times: c.output_times.clone(),
                newton_tol: c.newton_tol,
                newton_max_iter: c.newton_max_iter,
                weno_epsilon: c.weno_epsilon,
            },
            injection,
            initial,
            harness: HarnessSection {
                reference_scheme: Some(if p.id == 4 { SchemeKind::CompUpw5 } else { SchemeKind::ChrUpw }),
                ..HarnessSection::default()
            },
        }
    }

    /// Parses TOML, or JSON when the text is a manifest written by this tool.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value =
                serde_json::from_str(text).with_context(|| format!("{}: invalid JSON", path.display()))?;
            let cfg = manifest.get("config").cloned().unwrap_or(manifest);
            return serde_json::from_value(cfg).with_context(|| format!("{}: invalid configuration", path.display()));
        }
        toml::from_str(text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    pub fn scheme(&self) -> Result<SchemeKind> {
        self.stepper.scheme.ok_or_else(|| {
            let names: Vec<_> = SchemeKind::ALL.iter().map(|k| k.name()).collect();
            anyhow::anyhow!("no scheme given; expected one of {}", names.join(", "))
        })
    }

    pub fn model(&self) -> Result<IsothermModel> {
        let s = &self.isotherm;
        Ok(IsothermModel::toth(&s.a, &s.b, s.porosity, s.nu)?)
    }

    /// Solver configuration in the model's internal component order.
    pub fn simulation(&self, model: &IsothermModel) -> Result<SimulationConfig> {
        let n = model.n_components();
        let s = &self.stepper;
        let pulses = self
            .injection
            .iter()
            .map(|p| InjectionPulse { start: p.start, end: p.end, concentrations: p.concentrations.clone() })
            .collect();
        let mut cfg = SimulationConfig::new(self.scheme()?, n, s.m);
        cfg.u = s.u;
        cfg.d_a = s.d_a;
        cfg.cfl = s.cfl;
        cfg.t_final = s.t_final;
        cfg.output_times = s.output_times.clone();
        cfg.newton_tol = s.newton_tol;
        cfg.newton_max_iter = s.newton_max_iter;
        cfg.weno_epsilon = s.weno_epsilon;
        cfg.injection = InjectionSchedule::new(n, pulses)?.to_internal(model);
        cfg.initial = self.initial.to_internal(model);
        cfg.validate(model)?;
        Ok(cfg)
    }

    pub fn preset(&self) -> Result<Preset> {
        let model = self.model()?;
        let config = self.simulation(&model)?;
        Ok(Preset {
            id: self.experiment.unwrap_or(0),
            a: self.isotherm.a.clone(),
            b: self.isotherm.b.clone(),
            porosity: self.isotherm.porosity,
            nu: self.isotherm.nu,
            model,
            config,
        })
    }
}

/// Builds the run description: file first, then the experiment preset if
/// no file was given, then individual flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, cli.experiment) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let mut cfg = RunConfig::parse(&text, path)?;
            if let Some(id) = cli.experiment {
                cfg.experiment = Some(id);
            }
            cfg
        }
        (None, Some(id)) => RunConfig::from_preset(&harness::experiment_preset(id)?),
        (None, None) if cli.table1 => RunConfig::from_preset(&harness::experiment_preset(4)?),
        (None, None) => bail!("either --config or --experiment is required"),
    };
    if let Some(name) = &cli.scheme {
        cfg.stepper.scheme = Some(name.parse::<SchemeKind>()?);
    }
    if let Some(m) = cli.m {
        cfg.stepper.m = m;
    }
    if let Some(m) = cli.mref {
        cfg.harness.m_ref = m;
    }
    if let Some(nu) = cli.nu {
        cfg.isotherm.nu = nu;
    }
    if let Some(d) = cli.d_a {
        cfg.stepper.d_a = d;
    }
    if let Some(t) = cli.t_final {
        cfg.stepper.t_final = t;
        cfg.stepper.output_times.retain(|&s| s <= t);
    }
    if let Some(k) = cli.cfl {
        cfg.stepper.cfl = k;
    }
    let model = cfg.model()?;
    cfg.simulation(&model)?;
    Ok(cfg)
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        let mut buf = ryu::Buffer::new();
        buf.format_finite(x).to_string()
    } else {
        x.to_string()
    }
}

/// `z,c1..cN,w1..wN` rows for one snapshot, components in user order.
pub fn profile_csv(model: &IsothermModel, snapshot: &edchrom::Snapshot) -> String {
    let n = model.n_components();
    let m = snapshot.w.n_cells();
    let mut out = String::from("z");
    for i in 1..=n {
        let _ = write!(out, ",c{i}");
    }
    for i in 1..=n {
        let _ = write!(out, ",w{i}");
    }
    out.push('\n');
    for (j, z) in edchrom::stepper::cell_centers(m).into_iter().enumerate() {
        out.push_str(&fmt_f64(z));
        for v in model.to_user(snapshot.c.cell(j)).into_iter().chain(model.to_user(snapshot.w.cell(j))) {
            out.push(',');
            out.push_str(&fmt_f64(v));
        }
        out.push('\n');
    }
    out
}

/// File name of the profile written for output time `t`.
pub fn profile_file_name(t: f64) -> String {
    format!("profile_t{}.csv", fmt_f64(t))
}

/// Header and one row per report; `theta_m` is empty without a `2m` partner.
pub fn errors_csv(reports: &[ErrorReport]) -> String {
    let mut out = String::from("scheme,nu,D_a,T,m,variable,e_m,e_m_trimmed,theta_m,seconds,steps\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.scheme,
            fmt_f64(r.nu),
            fmt_f64(r.d_a),
            fmt_f64(r.t_final),
            r.m,
            r.variable.name(),
            fmt_f64(r.e_m),
            fmt_f64(r.e_m_trimmed),
            r.theta_m.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.wall_seconds),
            r.steps
        );
    }
    out
}

/// `e_m × 10⁶` and `θ_m` blocks per scheme, columns `(D_a, ν)` as listed,
/// rows by increasing `m`.
pub fn table1_text(reports: &[ErrorReport], columns: &[(f64, f64)]) -> String {
    let mut schemes: Vec<SchemeKind> = Vec::new();
    for r in reports {
        if !schemes.contains(&r.scheme) {
            schemes.push(r.scheme);
        }
    }
    let mut grids: Vec<usize> = reports.iter().map(|r| r.m).collect();
    grids.sort_unstable();
    grids.dedup();
    let mut out = String::new();
    for s in schemes {
        let _ = writeln!(out, "{s}");
        let _ = write!(out, "{:>6}", "m");
        for (d_a, nu) in columns {
            let _ = write!(out, " | D_a={d_a:e} nu={nu}: e_m*1e6  theta");
        }
        out.push('\n');
        for &m in &grids {
            let _ = write!(out, "{m:>6}");
            for &(d_a, nu) in columns {
                match reports.iter().find(|r| r.scheme == s && r.m == m && r.d_a == d_a && r.nu == nu) {
                    Some(r) => {
                        let theta = r.theta_m.map(|t| format!("{t:.2}")).unwrap_or_else(|| "-".into());
                        let _ = write!(out, " | {:>24.2} {:>6}", r.e_m * 1e6, theta);
                    }
                    None => {
                        let _ = write!(out, " | {:>24} {:>6}", "", "");
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct DtSummary {
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MassLedger {
    pub initial_mass: Vec<f64>,
    pub final_mass: Vec<f64>,
    pub total_inflow: Vec<f64>,
    pub total_outflow: Vec<f64>,
    pub relative_residual: f64,
    pub max_step_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub dt: DtSummary,
    pub wall_seconds: f64,
    pub newton_iterations_max: usize,
    pub mass: MassLedger,
    pub min_w: f64,
    pub profiles: Vec<String>,
}

impl Manifest {
    pub fn new(config: RunConfig, model: &IsothermModel, stats: &RunStats, profiles: Vec<String>) -> Self {
        Manifest {
            config,
            dt: DtSummary { steps: stats.steps, dt_min: stats.dt_min, dt_max: stats.dt_max },
            wall_seconds: stats.wall_seconds,
            newton_iterations_max: stats.newton_iterations_max,
            mass: MassLedger {
                initial_mass: model.to_user(&stats.initial_mass),
                final_mass: model.to_user(&stats.final_mass),
                total_inflow: model.to_user(&stats.total_inflow),
                total_outflow: model.to_user(&stats.total_outflow),
                relative_residual: stats.ledger_residual,
                max_step_residual: stats.max_mass_residual,
            },
            min_w: stats.min_w,
            profiles,
        }
    }
}

/// Writes one profile CSV per snapshot plus `manifest.json` into `dir`.
pub fn write_run(dir: &Path, config: &RunConfig, model: &IsothermModel, run: &RunOutput) -> Result<Manifest> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut names = Vec::new();
    for snap in &run.snapshots {
        let name = profile_file_name(snap.t);
        fs::write(dir.join(&name), profile_csv(model, snap))?;
        names.push(name);
    }
    let manifest = Manifest::new(config.clone(), model, &run.stats, names);
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// Runs the configured single simulation and writes its artifacts.
pub fn run_single(config: &RunConfig, dir: &Path) -> Result<Manifest> {
    let preset = config.preset()?;
    let run = preset.run()?;
    write_run(dir, config, &preset.model, &run)
}

fn thread_pool(jobs: Option<usize>, single_thread: bool) -> Result<rayon::ThreadPool> {
    let threads = if single_thread { 1 } else { jobs.unwrap_or(0) };
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?)
}

/// Reference run, then every `(scheme, m)` entry, with orders filled in.
/// Failed entries are logged and skipped.
pub fn run_sweep(config: &RunConfig, jobs: Option<usize>, single_thread: bool) -> Result<Vec<ErrorReport>> {
    let preset = config.preset()?;
    let h = &config.harness;
    let ref_scheme = h.reference_scheme.unwrap_or(config.scheme()?);
    log::info!("reference run: {ref_scheme} on {} cells", h.m_ref);
    let reference_run = preset.clone().with_scheme(ref_scheme).with_cells(h.m_ref).run()?;
    let reference = h.variable.select(reference_run.final_snapshot()).clone();
    let schemes = if h.schemes.is_empty() { vec![config.scheme()?] } else { h.schemes.clone() };
    let entries: Vec<(SchemeKind, usize)> =
        schemes.iter().flat_map(|&s| h.grids.iter().map(move |&m| (s, m))).collect();
    let pool = thread_pool(jobs, single_thread)?;
    let results: Vec<_> = pool.install(|| {
        use rayon::prelude::*;
        entries.par_iter().map(|&(s, m)| harness::sweep_entry(&preset, s, m, h.variable, &reference)).collect()
    });
    let mut reports = Vec::new();
    for ((s, m), r) in entries.into_iter().zip(results) {
        match r {
            Ok(r) => reports.push(r),
            Err(e) => log::error!("{s} on {m} cells failed: {e}"),
        }
    }
    harness::fill_orders(&mut reports);
    Ok(reports)
}

/// The four `(D_a, ν)` columns of the experiment-4 error table.
pub const TABLE1_COLUMNS: [(f64, f64); 4] = [(1e-4, 0.95), (1e-4, 1.0), (1e-5, 0.95), (1e-5, 1.0)];

pub const TABLE1_SCHEMES: [SchemeKind; 3] = [SchemeKind::ChrUpw, SchemeKind::CompUpw5, SchemeKind::CompGlf];

/// Error study of experiment 4 over all table columns.
pub fn run_table1(base: &RunConfig, jobs: Option<usize>, single_thread: bool) -> Result<Vec<ErrorReport>> {
    let mut all = Vec::new();
    for (d_a, nu) in TABLE1_COLUMNS {
        let mut cfg = base.clone();
        cfg.stepper.d_a = d_a;
        cfg.isotherm.nu = nu;
        if cfg.harness.schemes.is_empty() {
            cfg.harness.schemes = TABLE1_SCHEMES.to_vec();
        }
        all.extend(run_sweep(&cfg, jobs, single_thread)?);
    }
    Ok(all)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepManifest {
    pub config: RunConfig,
    pub reports: Vec<ErrorReport>,
}

/// Writes `errors.csv` and `manifest.json` for an error study.
pub fn write_sweep(dir: &Path, config: &RunConfig, reports: &[ErrorReport]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    fs::write(dir.join("errors.csv"), errors_csv(reports))?;
    let manifest = SweepManifest { config: config.clone(), reports: reports.to_vec() };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

/// Entry point behind `main`.
pub fn execute(cli: &Cli) -> Result<()> {
    let mut config = resolve(cli)?;
    if cli.table1 {
        if cli.experiment.is_none() && cli.config.is_none() {
            config.experiment = Some(4);
        }
        if cli.scheme.is_none() && config.harness.schemes.is_empty() {
            config.harness.schemes = TABLE1_SCHEMES.to_vec();
        }
        let reports = run_table1(&config, cli.jobs, cli.single_thread)?;
        write_sweep(&cli.out, &config, &reports)?;
        print!("{}", table1_text(&reports, &TABLE1_COLUMNS));
    } else if cli.sweep {
        if cli.scheme.is_some() {
            config.harness.schemes = vec![config.scheme()?];
        }
        let reports = run_sweep(&config, cli.jobs, cli.single_thread)?;
        write_sweep(&cli.out, &config, &reports)?;
        print!("{}", errors_csv(&reports));
    } else {
        let manifest = run_single(&config, &cli.out)?;
        println!(
            "{} steps, {} profiles in {}, mass residual {:e}",
            manifest.dt.steps,
            manifest.profiles.len(),
            cli.out.display(),
            manifest.mass.relative_residual
        );
    }
    Ok(())
}
