//! Explicit monotone finite volume schemes for one-dimensional stochastic
//! conservation laws with degenerate fractional diffusion,
//!
//! ```text
//! du - f(u)_x dt + (-Δ)^λ [A(u)] dt = σ(u) dW,
//! ```
//!
//! together with the Monte Carlo harness used to measure their strong
//! convergence rates.

pub mod error;
pub mod experiment;
pub mod cli;
pub mod diagnostics;
pub mod flux;
pub mod function;
pub mod kernel;
pub mod mesh;
pub mod noise;
pub mod special;
pub mod stepper;

pub use error::{Error, Result};
pub use experiment::{run_error_study, RateReport, RunConfig};
pub use flux::{FluxScheme, FluxSpec};
pub use function::ScalarFn;
pub use kernel::WeightKernel;
pub use mesh::{Grid1D, LatticeFunction};
pub use noise::{BrownianPath, NoiseSpec};
pub use stepper::{Discretization, ProblemSpec, SchemeState, TimeSchedule};
