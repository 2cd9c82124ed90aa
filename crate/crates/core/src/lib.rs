//! Continuous Physarum dynamics for linear programs in equality form.
//!
//! For `min cᵀx` subject to `A x = b, x ≥ 0` with positive costs and full-row
//! rank `A`, every positive point `x` defines an electrical network with
//! conductances `x_j / c_j`. The dynamics `ẋ = q − x` move `x` toward the
//! electrical flow `q`; started from a feasible point they stay feasible and
//! the cost decreases to the optimum.
//!
//! Modules:
//! - [`instance`]: the LP data model, validation, network builder and JSON formats.
//! - [`linalg`]: SPD Cholesky factorization and solves.
//! - [`dynamics`]: potentials, flow, energy and the vector field.
//! - [`integrator`]: Euler/RK4 time stepping with positivity protection.
//! - [`diagnostics`]: cost, KL divergence, potential and convergence-time bounds.
//! - [`oracle`]: vertex enumeration and an independent KKT flow solve.
//! - [`mirror`]: the mirror-descent formulation on the unit simplex.

// `!(a > b)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod generate;
pub mod instance;
pub mod integrator;
pub mod linalg;
pub mod mirror;
pub mod oracle;

pub use dynamics::{derive, DerivedQuantities, PhysarumState};
pub use error::{Error, Result};
pub use instance::{LpInstance, NetworkSpec, ValidatedInstance};
pub use integrator::{integrate, IntegrationConfig, Method, TrajectoryTrace};
pub use oracle::{solve_exact, OracleSolution};
