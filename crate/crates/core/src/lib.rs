//! Characteristic (Goursat) solver for the leading-order equations of
//! colliding plane waves and thin gravitational-wave pulses, with constraint
//! monitors, closed-form oracles, background boundary data, a direct Ricci
//! residual oracle and a discrete variational check.
//!
//! Fields are the four metric potentials `M, U, V, W` on a grid in the fast
//! phase `theta` and the slow null coordinate `v`, one array per transverse
//! sample point ("slice").

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod backgrounds;
pub mod constraints;
pub mod convergence;
pub mod exact;
pub mod field;
pub mod grid;
pub mod initial_line;
pub mod ricci;
pub mod solver;
pub mod stencil;
pub mod variational;

pub use backgrounds::{BackgroundError, BackgroundSpec, BoundaryPoint, Direction};
pub use constraints::{constraint_report, jump_report, ConstraintError, ConstraintReport, JumpReport, LogGJump};
pub use exact::{ExactError, MGauge, PolarizedFamily, Profile, Quadratic, UDecomposition};
pub use field::{BoundaryData, Field, FieldError, FieldState, Fields, LineSamples, Polarization};
pub use grid::{build_grid, refine_grid, Axis, CharacteristicGrid, GridError, Slice};
pub use initial_line::{
    build_initial_line, pulse_boundary_data, DataError, InitialLineError, PulseProfile, PulseSet, PulseShape,
};
pub use ricci::{ricci_residuals, RicciError, RicciResiduals};
pub use solver::{solve_goursat, SolveResult, SolveStatus, SolverConfig, SolverError, StopLocation, StopReason};
pub use variational::{action_stationarity_check, ActionReport, PerturbationBank, VariationalError};
