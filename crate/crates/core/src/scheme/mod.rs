//! The implicit finite-volume step: equation of state, fluxes, residual,
//! Jacobian and the per-step Newton solve.

mod jacobian;
mod params;
mod residual;
mod solver;
mod state;

pub use jacobian::{assemble_jacobian, finite_difference_jacobian, JacobianPattern};
pub use params::SchemeParams;
pub use residual::{assemble_residual, diffusive_upwind_flux, upwind_flux, viscous_stress};
pub use solver::{
    advance_step, run_simulation, step_count, SolveStats, StepRecord, Stepper, Trajectory,
};
pub use state::{entropy, eos, pressure, solid_indicator_field, BoundaryData, State, Thermo};
