//! Outflow positivity limiting for discontinuous Galerkin solvers of 1-D
//! conservation laws, and exact interior-weight tables for common cells.
//!
//! Numerical code is generic over [`scalar::Scalar`]; the aliases below fix
//! the scalar to `f64` or `f32`.

pub mod error;
pub mod geometry;
pub mod quadrature;
pub mod scalar;
pub mod poly;
mod linalg;
pub mod weights;
pub mod riemann;
pub mod positivity;
pub mod solver;
pub mod presets;
pub mod config;
pub mod convergence;
pub mod verify;
pub mod cli;

pub use error::{Error, Result};
pub use geometry::CellKind;
pub use positivity::PositivitySet;
pub use riemann::{FluxModel, State};
pub use scalar::Scalar;
pub use solver::{BoundaryCondition, DgField, LimiterMode, Mesh1D, NumericalFlux, Solver, SolverOptions};
pub use weights::{tabulated_weight, weight_table, WeightBracket, WeightTarget};

pub type Solver64 = Solver<f64>;
pub type Solver32 = Solver<f32>;
pub type Field64 = DgField<f64>;
pub type Field32 = DgField<f32>;
pub type Options64 = SolverOptions<f64>;
pub type Options32 = SolverOptions<f32>;
pub type Model64 = FluxModel<f64>;
pub type Model32 = FluxModel<f32>;
pub type State64 = State<f64>;
pub type State32 = State<f32>;
