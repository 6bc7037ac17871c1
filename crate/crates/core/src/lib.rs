//! Finite-volume solver for the equilibrium-dispersive chromatography
//! model with generalized Langmuir (Tóth) isotherms.
//!
//! The PDE is solved in conserved variables `w = W(c)`. Convective fluxes
//! are component-wise or characteristic-based WENO/MUSCL reconstructions,
//! time stepping is an IMEX midpoint rule with an implicit diffusion stage.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod field;
pub mod flux;
pub mod harness;
pub mod isotherm;
pub mod linalg;
pub mod reconstruct;
pub mod spectral;
pub mod stepper;
pub mod transform;

pub use error::{Error, Result};
pub use field::Field;
pub use flux::{InjectionPulse, InjectionSchedule, SchemeKind};
pub use harness::{experiment_preset, ErrorReport, Preset};
pub use isotherm::{IsothermModel, Phi};
pub use spectral::SpectralDecomp;
pub use stepper::{GridState, InitialCondition, RunOutput, RunStats, SimulationConfig, Simulator, Snapshot};
