//! Explicit piecewise-constant-argument (EPCA) discretization of impulsive
//! differential equations whose delay follows its own differential equation.
//!
//! * [`model`] holds the problem and trajectory types,
//! * [`engine`] runs the EPCA recursion,
//! * [`oracle`] is an independent RK4 reference integrator,
//! * [`analysis`] computes a-priori constants, monotonicity certificates and
//!   observed convergence orders,
//! * [`dsl`] parses and writes problem files.

pub mod analysis;
pub mod dsl;
pub mod engine;
pub mod error;
pub mod model;
pub mod oracle;
pub mod registry;
pub mod solution;

pub use engine::solve;
pub use error::{Error, Result};
pub use model::{
    ErrorRow, GronwallParams, Hints, HistoryFunction, ImpulseEvent, ImpulseNode, MeshConfig, Node, ProblemSpec,
    SolveStatus, Trajectory,
};
pub use oracle::{integrate_reference, DenseTrajectory};
pub use registry::{Integrator, IntegratorRegistry, Solved};
pub use solution::{EpcaSolution, Solution};
