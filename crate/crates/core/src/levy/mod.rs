//! The driving Lévy process `Z`, described by its generating triplet
//! `(b, σ, ρ)` with exponent
//!
//! ```text
//! E e^{iθZ_t} = e^{-tψ(θ)},
//! ψ(θ) = ibθ + σ²θ²/2 − ∫ (e^{iθu} − 1 − iθu/(1+u²)) ρ(du).
//! ```
//!
//! Under this convention the deterministic drift of `Z` is `−b`.

mod jumps;
mod log_moment;
mod psi_density;
mod sampler;
mod stable;

pub use jumps::{
    CustomDensity, IntegrabilityFlags, JumpKind, JumpLaw, JumpMeasure, LevelDensity, SupportSign,
};
pub use log_moment::{log_moment_finite, LogMoment, LogMomentStatus};
pub use sampler::{IncrementParts, IncrementSampler, Truncation, DEFAULT_MAX_JUMP_RATE};
pub use stable::{sample_stable, StableConstants};

pub(crate) use jumps::{default_quad, Derived};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Carrier for `ψ(θ)` and characteristic-function values.
pub type ComplexValue = Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TripletSpec {
    #[serde(default)]
    drift: f64,
    #[serde(default)]
    sigma: f64,
    #[serde(default = "JumpMeasure::none")]
    jumps: JumpMeasure,
}

/// Generating triplet `(b, σ, ρ)` of the driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TripletSpec", into = "TripletSpec")]
pub struct LevyTriplet {
    drift: f64,
    sigma: f64,
    jumps: JumpMeasure,
}

impl TryFrom<TripletSpec> for LevyTriplet {
    type Error = Error;
    fn try_from(s: TripletSpec) -> Result<Self> {
        LevyTriplet::new(s.drift, s.sigma, s.jumps)
    }
}

impl From<LevyTriplet> for TripletSpec {
    fn from(t: LevyTriplet) -> Self {
        TripletSpec { drift: t.drift, sigma: t.sigma, jumps: t.jumps }
    }
}

impl LevyTriplet {
    /// Build a triplet. The all-zero triplet is allowed and describes the
    /// zero process; use [`LevyTriplet::zero`] to make that intent explicit.
    pub fn new(drift: f64, sigma: f64, jumps: JumpMeasure) -> Result<Self> {
        if !drift.is_finite() {
            return Err(Error::invalid("drift must be finite"));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid("sigma must be finite and >= 0"));
        }
        Ok(Self { drift, sigma, jumps })
    }

    pub fn zero() -> Self {
        Self { drift: 0.0, sigma: 0.0, jumps: JumpMeasure::none() }
    }

    pub fn gaussian(drift: f64, sigma: f64) -> Result<Self> {
        Self::new(drift, sigma, JumpMeasure::none())
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn jumps(&self) -> &JumpMeasure {
        &self.jumps
    }

    pub fn is_zero(&self) -> bool {
        self.drift == 0.0 && self.sigma == 0.0 && self.jumps.is_none()
    }

    /// The characteristic exponent ψ(θ).
    pub fn psi(&self, theta: f64) -> Result<ComplexValue> {
        if !theta.is_finite() {
            return Err(Error::invalid("θ must be finite"));
        }
        if theta == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let base = Complex64::new(0.5 * self.sigma * self.sigma * theta * theta, self.drift * theta);
        Ok(base + self.jump_psi(theta)?)
    }

    fn jump_psi(&self, theta: f64) -> Result<Complex64> {
        match (self.jumps.kind(), self.jumps.derived()) {
            (JumpKind::None, _) => Ok(Complex64::new(0.0, 0.0)),
            (JumpKind::CompoundPoisson { rate, law }, Derived::Poisson { centering }) => {
                let phi = law.cf(theta);
                Ok(-(phi - 1.0 - Complex64::new(0.0, theta * centering)) * *rate)
            }
            (JumpKind::Stable { .. }, Derived::Stable(c)) => Ok(c.psi(theta)),
            (JumpKind::Density(_), _) => {
                let mut total = Complex64::new(0.0, 0.0);
                let mut err = 0.0;
                for (positive, sign) in [(true, 1.0), (false, -1.0)] {
                    if let Some(d) = self.jumps.side_density(positive) {
                        let (v, e) = psi_density::side_integral(theta, sign, d)?;
                        total += v;
                        err += e;
                    }
                }
                if err > 10.0 * psi_density::PSI_ABS_TOL {
                    return Err(crate::error::QuadError::NotConverged {
                        achieved: err,
                        requested: psi_density::PSI_ABS_TOL,
                    }
                    .into());
                }
                Ok(-total)
            }
            _ => unreachable!("derived constants always match the jump kind"),
        }
    }

    /// `log E e^{uZ_1}` for `u >= 0`. Defined for drivers without positive
    /// jumps, where it is finite for every `u >= 0`.
    pub fn laplace_exponent(&self, u: f64) -> Result<f64> {
        if self.jumps.support_sign().allows_positive() && !self.jumps.is_none() {
            return Err(Error::refused(
                "non-positive jumps",
                "the Laplace exponent E e^{uZ} is only used for drivers without positive jumps",
            ));
        }
        let base = -self.drift * u + 0.5 * self.sigma * self.sigma * u * u;
        let jump = match (self.jumps.kind(), self.jumps.derived()) {
            (JumpKind::None, _) => 0.0,
            (JumpKind::CompoundPoisson { rate, law }, Derived::Poisson { centering }) => {
                let m = law.mgf(u).ok_or_else(|| Error::Numerical(format!("jump mgf infinite at {u}")))?;
                rate * (m - 1.0 - u * centering)
            }
            (JumpKind::Stable { .. }, Derived::Stable(c)) => c
                .laplace_exponent(u)
                .ok_or_else(|| Error::Numerical("stable Laplace exponent undefined".into()))?,
            (JumpKind::Density(_), _) => self.jumps.integrate(
                |z| {
                    let x = u * z;
                    x.exp_m1() - x / (1.0 + z * z)
                },
                &[-1.0],
            )?,
            _ => unreachable!(),
        };
        Ok(base + jump)
    }

    /// Drift in the truncated-compensator convention,
    /// `γ = −b + ∫ u (1{|u|≤1} − 1/(1+u²)) ρ(du)`, so that
    /// `E e^{iθZ_1} = exp{iγθ − σ²θ²/2 + ∫ (e^{iθu} − 1 − iθu 1{|u|≤1}) ρ(du)}`.
    pub fn truncated_drift(&self) -> Result<f64> {
        let corr = self.jumps.integrate(
            |u| {
                let c = u / (1.0 + u * u);
                if u.abs() <= 1.0 {
                    u - c
                } else {
                    -c
                }
            },
            &[-1.0, 1.0],
        )?;
        Ok(-self.drift + corr)
    }

    /// `E Z_1` when the jumps have a finite first moment.
    pub fn mean(&self) -> Result<Option<f64>> {
        match self.jumps.kind() {
            JumpKind::Stable { index, .. } if *index <= 1.0 => return Ok(None),
            JumpKind::Density(LevelDensity::LogTail { .. }) => return Ok(None),
            JumpKind::Density(LevelDensity::PowerLaw { exponent, upper: None, .. }) if *exponent <= 2.0 => {
                return Ok(None)
            }
            _ => {}
        }
        let corr = self.jumps.integrate(|u| u - u / (1.0 + u * u), &[-1.0, 1.0])?;
        Ok(Some(-self.drift + corr))
    }

    /// Net drift of a finite-variation driver: `Z_t = drift·t + σW_t + Σ jumps`.
    /// `None` when the small jumps are not absolutely summable.
    pub fn net_drift(&self) -> Result<Option<f64>> {
        if !self.small_jumps_finite_variation()? {
            return Ok(None);
        }
        let comp = self.jumps.integrate(|u| u / (1.0 + u * u), &[-1.0, 1.0])?;
        Ok(Some(-self.drift - comp))
    }

    /// `∫_{|z|<=1} |z| ρ(dz) < ∞`.
    pub fn small_jumps_finite_variation(&self) -> Result<bool> {
        Ok(match self.jumps.kind() {
            JumpKind::None | JumpKind::CompoundPoisson { .. } => true,
            JumpKind::Stable { index, .. } => *index < 1.0,
            JumpKind::Density(_) => {
                match self.jumps.integrate_with(|u| if u.abs() <= 1.0 { u.abs() } else { 0.0 }, &[-1.0, 1.0], &default_quad()) {
                    Ok(v) => v.is_finite(),
                    Err(_) => false,
                }
            }
        })
    }

    /// Same triplet with `b` chosen so the net drift equals `net`.
    pub fn with_net_drift(&self, net: f64) -> Result<Self> {
        let comp = match self.net_drift()? {
            Some(d) => -d - self.drift,
            None => return Err(Error::invalid("net drift is undefined for infinite-variation jumps")),
        };
        Self::new(-net - comp, self.sigma, self.jumps.clone())
    }

    /// Second moment of the jump measure, `∫ z² ρ(dz)` (may be infinite).
    pub fn jump_second_moment(&self) -> Result<f64> {
        match self.jumps.kind() {
            JumpKind::None => Ok(0.0),
            JumpKind::Stable { .. } | JumpKind::Density(LevelDensity::LogTail { .. }) => Ok(f64::INFINITY),
            JumpKind::Density(LevelDensity::PowerLaw { exponent, upper: None, .. }) if *exponent <= 3.0 => {
                Ok(f64::INFINITY)
            }
            _ => self.jumps.integrate(|z| z * z, &[-1.0, 1.0]),
        }
    }

    /// Draw `Z_dt`. Builds a fresh sampler; reuse an [`IncrementSampler`]
    /// for repeated draws.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<f64> {
        let s = IncrementSampler::new(self)?;
        s.sample(dt, rng)
    }
}

/// Free-function form of [`LevyTriplet::psi`].
pub fn evaluate_psi(triplet: &LevyTriplet, theta: f64) -> Result<ComplexValue> {
    triplet.psi(theta)
}
