//! Transient analysis of the M|G|∞ queue observed from the start of a busy
//! period.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: adaptive quadrature, bracketed root finding, finite
//!   differences and discretised convolution.
//! * [`service_models`]: service-time laws, including the hazard-defined
//!   families whose CDFs are only known implicitly.
//! * [`transient`]: the state distribution `p₁′ₙ(t)`, its mean and variance,
//!   and the Poisson limit.
//! * [`monotonicity`]: hazard-based conditions for the mean and variance to
//!   be non-decreasing, derivative identities and the Riccati residual.
//! * [`busy_period`]: the busy-period law, closed form and convolution series.
//! * [`simulator`]: a seeded Monte Carlo oracle used to cross-check all of the
//!   above.

pub mod busy_period;
pub mod error;
pub mod monotonicity;
pub mod numerics;
pub mod service_models;
pub mod simulator;
pub mod transient;

pub use error::{Error, Result};
pub use service_models::{ModelSpec, ServiceModel};
