//! Analysis library for reliability-oriented design of friction-damped
//! cyclic structures.
//!
//! The pipeline assembles a lumped-parameter cyclic assembly with
//! underplatform friction dampers, evaluates its periodic forced response
//! by high-order harmonic balance with alternating frequency-time contact
//! evaluation, extracts amplitude-dependent modal properties (nonlinear
//! modes), builds a parametric reduced-order model on top of them, and
//! integrates the probability that a vibration-amplitude requirement is
//! met under Gaussian parameter uncertainty.

pub mod contact;
pub mod error;
pub mod fourier;
pub mod interp;
pub mod model;
pub mod nma;
pub mod presets;
pub mod time_oracle;
pub mod hbm;
pub mod linalg;

pub use contact::{ContactElement, ContactState, DofSelector, Regime};
pub use error::{CoreError, Result};
pub use fourier::HarmonicCoeffs;
