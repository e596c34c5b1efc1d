//! Numerical laboratory for one-dimensional Ornstein-Uhlenbeck-type
//! processes driven by Lévy noise,
//!
//! ```text
//! X_t = e^{-tQ} x + ∫_0^t e^{(s-t)Q} dZ_s,
//! ```
//!
//! covering exact-in-law path simulation, transition and invariant
//! characteristic functions with Fourier inversion, local-time estimation
//! from sample paths, and first-passage analysis.

pub mod error;
pub mod levy;
pub mod occupation;
pub mod ou;
pub mod passage;
pub mod quad;
pub mod rng;
pub mod spectral;

pub use error::{Error, QuadError, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
