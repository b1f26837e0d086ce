//! Diagnostics on top of the solver: a-priori constants, the monotonicity
//! certificate for the delayed argument and observed convergence order.

mod constants;
mod convergence;
mod gronwall;
mod monotonicity;

pub use constants::{estimate_constants, sup_g_over_box, ConstantsEstimate, Estimate, Method, DEFAULT_GRID};
pub use convergence::{
    convergence_order, error_table, fit_order, LevelError, LevelFailure, OrderEstimate, OrderStatus, ERROR_FLOOR,
};
pub use gronwall::gronwall_bound;
pub use monotonicity::{monotonicity_certificate, MonotonicityReport, Verdict};
