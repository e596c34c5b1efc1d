//! The OU-type process `X_t = e^{-tQ}x + ∫_0^t e^{-(t-s)Q} dZ_s` with scalar
//! rate `Q > 0`: exact-in-law simulation on a grid, transition and invariant
//! triplets, and the numerical check of the local-time existence criterion.

mod criterion;
mod laws;
mod path;

pub use criterion::{check_existence_criterion, ExistenceVerdict};
pub use laws::{invariant_triplet, transition_triplet, InvariantLaw, TransitionLaw};
pub use path::{coarse_warning_for, simulate_path, simulate_path_with, simulate_paths, JumpMark, Piece, SamplePath, Scheme, StepConsts, Stepper};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::LevyTriplet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelSpec {
    q: f64,
    #[serde(default)]
    x0: f64,
    driver: LevyTriplet,
}

/// OU-type model: rate `Q`, start `x0` and driver `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct OuModel {
    q: f64,
    x0: f64,
    driver: LevyTriplet,
}

impl TryFrom<ModelSpec> for OuModel {
    type Error = Error;
    fn try_from(s: ModelSpec) -> Result<Self> {
        OuModel::new(s.q, s.x0, s.driver)
    }
}

impl From<OuModel> for ModelSpec {
    fn from(m: OuModel) -> Self {
        ModelSpec { q: m.q, x0: m.x0, driver: m.driver }
    }
}

impl OuModel {
    pub fn new(q: f64, x0: f64, driver: LevyTriplet) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::invalid(format!("Q must be finite and > 0, got {q}")));
        }
        if !x0.is_finite() {
            return Err(Error::invalid("x0 must be finite"));
        }
        Ok(Self { q, x0, driver })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn driver(&self) -> &LevyTriplet {
        &self.driver
    }

    /// Same model started from `x`.
    pub fn starting_at(&self, x: f64) -> Result<Self> {
        Self::new(self.q, x, self.driver.clone())
    }

    /// `min(1e-3, 0.01/Q)`.
    pub fn default_dt(&self) -> f64 {
        f64::min(1e-3, 0.01 / self.q)
    }
}
