//! Asymptotic integration of perturbed fourth-order linear ODEs
//!
//! ```text
//! y⁗ + (a₃ + r₃)y‴ + (a₂ + r₂)y″ + (a₁ + r₁)y′ + (a₀ + r₀)y = 0
//! ```
//!
//! by reduction to a third-order Riccati equation for `z = y′/y − λᵢ` and a
//! Green-kernel Picard iteration for each simple real root `λᵢ`.

pub mod error;
pub mod exprlang;
pub mod greens;
pub mod grid;
pub mod hypotheses;
pub mod oracle;
pub mod picard;
pub mod problem;
pub mod quad;
pub mod report;
pub mod riccati;
pub mod spectra;
pub mod synthesis;

pub use error::{Error, Result};
