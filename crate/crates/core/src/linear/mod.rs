//! The piecewise-linear FLASH path for least squares.
//!
//! `delta = 0` at every step gives the Lasso path (LARS with the
//! zero-crossing modification), `delta = 1` gives Forward Selection.

mod engine;
mod path;
mod schedule;

pub use engine::{
    advance_step, direction_vector, gamma_forward_check, gamma_lasso, zero_cross_gamma, Breakpoint,
    PathState,
};
pub use path::{default_max_steps, fit_flash_path, path_coefficients_at, relaxation_point, FlashPath, TERMINATION_TOL};
pub use schedule::DeltaSchedule;
