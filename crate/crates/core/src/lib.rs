//! Penalized finite-volume solver for the compressible Navier–Stokes–Fourier
//! system on a periodic Cartesian grid.
//!
//! A fluid region `Ω^f` is embedded in the torus; the complement is driven to
//! zero velocity and a prescribed temperature `θ_B` by `1/ε` penalty terms.
//! Each implicit step is solved by Newton's method with an analytic Jacobian.
//! After every step the discrete energy, entropy, ballistic energy and
//! renormalized continuity balances can be evaluated term by term.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the `*64`
//! and `*32` aliases below fix the scalar.
//!
//! ```
//! use penfv::{geometry::FluidShape, mesh::split_domain, scheme::*, Grid64};
//!
//! let grid = Grid64::new(2, 16, 1.0).unwrap();
//! let mask = split_domain(&grid, &FluidShape::ball(2, [0.5, 0.5, 0.0], 0.3)).unwrap();
//! let state = State::constant(&grid, 1.0, &[0.0, 0.0], 1.0).unwrap();
//! let bdata = BoundaryData::constant(&grid, 1.0, 1.0).unwrap();
//! let params = SchemeParams::with_steps(1e-3, grid.h() * grid.h());
//! let (next, _) = advance_step(&state, &params, &mask, &bdata).unwrap();
//! assert_eq!(next.rho, state.rho);
//! ```

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod geometry;
pub mod io;
pub mod mesh;
pub mod num;
pub mod ops;
pub mod problem;
pub mod scheme;
pub mod sparse;

pub use error::{Error, Result};
pub use num::Real;

pub type Grid64 = mesh::Grid<f64>;
pub type Field64 = fields::Field<f64>;
pub type State64 = scheme::State<f64>;
pub type SchemeParams64 = scheme::SchemeParams<f64>;
pub type BoundaryData64 = scheme::BoundaryData<f64>;
pub type FluidShape64 = geometry::FluidShape<f64>;
pub type Problem64 = problem::Problem<f64>;
pub type SweepSpec64 = experiments::SweepSpec<f64>;
pub type BalanceReport64 = diagnostics::BalanceReport<f64>;

pub type Grid32 = mesh::Grid<f32>;
pub type Field32 = fields::Field<f32>;
pub type State32 = scheme::State<f32>;
pub type SchemeParams32 = scheme::SchemeParams<f32>;
pub type BoundaryData32 = scheme::BoundaryData<f32>;
pub type FluidShape32 = geometry::FluidShape<f32>;
pub type Problem32 = problem::Problem<f32>;
pub type SweepSpec32 = experiments::SweepSpec<f32>;
pub type BalanceReport32 = diagnostics::BalanceReport<f32>;
