//! FLASH: forward-lasso adaptive shrinkage.
//!
//! A family of regression paths interpolating between the Lasso and Forward
//! Selection. Each step moves the coefficients toward the least-squares fit on
//! the active set; the shrinkage `delta` in `[0, 1]` decides how far, with
//! `delta = 0` stopping where the Lasso stops and `delta = 1` going all the way.
//!
//! - [`data`]: datasets, CSV input, standardization.
//! - [`linear`]: the least-squares path engine.
//! - [`tuning`]: validation and cross-validation over `(delta, step, phi)`.
//! - [`glm`]: the predictor-corrector path for logistic regression.
//! - [`theory`]: coherence bounds and the sign-recovery experiment.
//! - [`bench`]: the simulation harness.
//! - [`cli`]: the command-line front end.

pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod glm;
pub mod linear;
pub mod theory;
pub mod tuning;
mod linalg;

pub use error::{FlashError, Result};
