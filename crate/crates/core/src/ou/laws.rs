//! Generating triplets of the transition law `P(t,x,·)` and of the
//! invariant law `F`, in the truncated-compensator form
//! `φ(θ) = exp{ibθ − σ²θ²/2 + ∫(e^{iθz} − 1 − iθz 1{|z|≤1}) ν(dz)}`.

use serde::Serialize;

use super::OuModel;
use crate::error::{Error, Result};
use crate::levy::{log_moment_finite, JumpKind, JumpLaw, LevyTriplet, LogMoment, LogMomentStatus};
use crate::quad::Quadrature;

fn s_quad() -> Quadrature {
    Quadrature::new(1e-10, 1e-9).with_max_segments(4000)
}

/// Horizon `t` or `∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Horizon {
    Finite(f64),
    Infinite,
}

impl Horizon {
    /// `e^{-tQ}`
    fn decay(self, q: f64) -> f64 {
        match self {
            Horizon::Finite(t) => (-t * q).exp(),
            Horizon::Infinite => 0.0,
        }
    }
}

/// `∫ ρ(dz) ∫_0^t e^{-sQ} z (1{e^{-sQ}|z| ≤ 1} − 1{|z| ≤ 1}) ds`: the
/// indicator correction of the location.
fn indicator_correction(driver: &LevyTriplet, q: f64, h: Horizon) -> Result<f64> {
    let jumps = driver.jumps();
    let e = h.decay(q);
    if let Horizon::Infinite = h {
        let up = jumps.mass(1.0, f64::INFINITY)?;
        let down = jumps.mass(f64::NEG_INFINITY, -1.0)?;
        return Ok((up - down) / q);
    }
    let edge = 1.0 / e;
    let f = |z: f64| {
        let r = z.abs();
        if r <= 1.0 || r >= edge {
            0.0
        } else {
            (z.signum() - z * e) / q
        }
    };
    jumps.integrate(f, &symmetric_breaks(edge))
}

/// Breakpoints `±1, ±4, ±16, …` up to `±edge`, so that quadrature over a
/// very long range still resolves mass near `|z| = 1`.
fn symmetric_breaks(edge: f64) -> Vec<f64> {
    let mut up = vec![1.0];
    let mut r = 4.0;
    while r < edge && r.is_finite() {
        up.push(r);
        r *= 4.0;
    }
    if edge.is_finite() {
        up.push(edge);
    }
    let mut all: Vec<f64> = up.iter().rev().map(|r| -r).collect();
    all.extend(up);
    all
}

/// `ρ_t((lo, hi]) = ∫_0^t ρ(e^{sQ}(lo, hi]) ds`.
fn mapped_mass(driver: &LevyTriplet, q: f64, h: Horizon, lo: f64, hi: f64) -> Result<f64> {
    if !(lo.is_finite() || hi.is_finite()) || hi <= lo {
        return if hi <= lo { Ok(0.0) } else { Err(Error::invalid("interval must have a finite end")) };
    }
    let jumps = driver.jumps();
    match jumps.kind() {
        JumpKind::None => return Ok(0.0),
        JumpKind::CompoundPoisson { rate, law: JumpLaw::Point { value } } => {
            return Ok(rate * point_time(*value, q, h, lo, hi));
        }
        JumpKind::Stable { index, .. } if lo >= 0.0 || hi < 0.0 => {
            if lo == 0.0 || hi == 0.0 {
                return Ok(f64::INFINITY);
            }
            // ρ(e^{sQ}E) = e^{-βsQ} ρ(E)
            let base = jumps.mass(lo, hi)?;
            let w = match h {
                Horizon::Finite(t) => -(-index * t * q).exp_m1() / (index * q),
                Horizon::Infinite => 1.0 / (index * q),
            };
            return Ok(base * w);
        }
        JumpKind::CompoundPoisson { .. } => {}
        _ => {
            if (lo < 0.0 && hi >= 0.0) || lo == 0.0 {
                return Ok(f64::INFINITY);
            }
        }
    }
    let g = |s: f64| {
        let k = (s * q).exp();
        jumps.mass(lo * k, hi * k).unwrap_or(f64::NAN)
    };
    let est = match h {
        Horizon::Finite(t) => s_quad().integrate(g, 0.0, t)?,
        Horizon::Infinite => s_quad().integrate_to_infinity(g, 0.0)?,
    };
    Ok(est.value)
}

/// Lebesgue measure of `{s ∈ [0,t] : e^{-sQ} v ∈ (lo, hi]}`.
fn point_time(v: f64, q: f64, h: Horizon, lo: f64, hi: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let (v, lo, hi) = if v > 0.0 { (v, lo, hi) } else { (-v, -hi, -lo) };
    // for negative v the interval flips to [−hi, −lo); endpoints have measure zero in s
    if hi <= 0.0 {
        return 0.0;
    }
    let start = ((v / hi).ln() / q).max(0.0);
    let end_e = if lo <= 0.0 { f64::INFINITY } else { (v / lo).ln() / q };
    let end = match h {
        Horizon::Finite(t) => end_e.min(t),
        Horizon::Infinite => end_e,
    };
    (end - start).max(0.0)
}

/// Triplet `(b_{t,x}, σ_t², ρ_t)` of `P(t, x, ·)`.
#[derive(Debug, Clone, Serialize)]
pub struct TransitionLaw {
    pub t: f64,
    pub from: f64,
    pub location: f64,
    pub gaussian_variance: f64,
    #[serde(skip)]
    q: f64,
    #[serde(skip)]
    driver: LevyTriplet,
}

impl TransitionLaw {
    /// `ρ_t((lo, hi])`; infinite for intervals touching 0 under an
    /// infinite jump measure.
    pub fn jump_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        mapped_mass(&self.driver, self.q, Horizon::Finite(self.t), lo, hi)
    }

    /// `E X_t` when the jumps have a first moment:
    /// `b_{t,x} + ∫_{|w|>1} w ρ_t(dw)`.
    pub fn mean(&self) -> Result<Option<f64>> {
        if self.driver.mean()?.is_none() {
            return Ok(None);
        }
        let e = (-self.t * self.q).exp();
        let q = self.q;
        let f = |z: f64| {
            let r = z.abs();
            if r <= 1.0 {
                0.0
            } else {
                z * (1.0 - f64::max(1.0 / r, e)) / q
            }
        };
        let big = self.driver.jumps().integrate(f, &symmetric_breaks(1.0 / e))?;
        Ok(Some(self.location + big))
    }

    /// `Var X_t = σ_t² + ∫ w² ρ_t(dw)`.
    pub fn variance(&self) -> Result<Option<f64>> {
        let m2 = self.driver.jump_second_moment()?;
        if !m2.is_finite() {
            return Ok(None);
        }
        let w = -(-2.0 * self.t * self.q).exp_m1() / (2.0 * self.q);
        Ok(Some(self.gaussian_variance + m2 * w))
    }
}

pub fn transition_triplet(model: &OuModel, t: f64) -> Result<TransitionLaw> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid(format!("t must be positive, got {t}")));
    }
    let q = model.q();
    let driver = model.driver();
    let e = (-t * q).exp();
    let gamma = driver.truncated_drift()?;
    let location = e * model.x0() + gamma * (-(-t * q).exp_m1()) / q + indicator_correction(driver, q, Horizon::Finite(t))?;
    let gaussian_variance = driver.sigma().powi(2) * (-(-2.0 * t * q).exp_m1()) / (2.0 * q);
    Ok(TransitionLaw { t, from: model.x0(), location, gaussian_variance, q, driver: driver.clone() })
}

/// Triplet `(b_∞, σ_∞², ρ_∞)` of the invariant law, when it exists.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantComponents {
    pub location: f64,
    pub gaussian_variance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantLaw {
    pub status: LogMomentStatus,
    pub log_moment: LogMoment,
    /// Present only when the log-moment condition holds.
    pub components: Option<InvariantComponents>,
    #[serde(skip)]
    q: f64,
    #[serde(skip)]
    driver: LevyTriplet,
}

impl InvariantLaw {
    pub fn exists(&self) -> bool {
        self.status == LogMomentStatus::Finite
    }

    fn require(&self) -> Result<&InvariantComponents> {
        self.components.as_ref().ok_or_else(|| match self.status {
            LogMomentStatus::Infinite => Error::refused(
                "log-moment condition",
                "∫_{|z|>1} log|z| ρ(dz) = ∞, so the process has no invariant distribution",
            ),
            _ => Error::refused("log-moment condition", "the log-moment condition could not be decided numerically"),
        })
    }

    pub fn location(&self) -> Result<f64> {
        Ok(self.require()?.location)
    }

    pub fn gaussian_variance(&self) -> Result<f64> {
        Ok(self.require()?.gaussian_variance)
    }

    /// `ρ_∞((lo, hi]) = ∫_0^∞ ρ(e^{sQ}(lo, hi]) ds`.
    pub fn jump_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        self.require()?;
        mapped_mass(&self.driver, self.q, Horizon::Infinite, lo, hi)
    }

    /// `E Z_1 / Q` when the jumps have a first moment.
    pub fn mean(&self) -> Result<Option<f64>> {
        self.require()?;
        Ok(self.driver.mean()?.map(|m| m / self.q))
    }

    pub fn variance(&self) -> Result<Option<f64>> {
        let c = self.require()?;
        let m2 = self.driver.jump_second_moment()?;
        Ok(m2.is_finite().then(|| c.gaussian_variance + m2 / (2.0 * self.q)))
    }
}

pub fn invariant_triplet(model: &OuModel) -> Result<InvariantLaw> {
    let q = model.q();
    let driver = model.driver();
    let log_moment = log_moment_finite(driver.jumps())?;
    let components = if log_moment.is_finite() {
        let location = driver.truncated_drift()? / q + indicator_correction(driver, q, Horizon::Infinite)?;
        Some(InvariantComponents { location, gaussian_variance: driver.sigma().powi(2) / (2.0 * q) })
    } else {
        None
    };
    Ok(InvariantLaw { status: log_moment.status, log_moment, components, q, driver: driver.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{JumpMeasure, LevelDensity, SupportSign};

    fn model(driver: LevyTriplet) -> OuModel {
        OuModel::new(1.0, 0.0, driver).unwrap()
    }

    #[test]
    fn gaussian_variance_closed_form() {
        let m = OuModel::new(1.0, 0.0, LevyTriplet::gaussian(0.0, 1.0).unwrap()).unwrap();
        let tl = transition_triplet(&m, 2.0).unwrap();
        assert!((tl.gaussian_variance - 0.5 * (1.0 - (-4.0f64).exp())).abs() < 1e-15);
        let far = transition_triplet(&m, 50.0).unwrap();
        let inv = invariant_triplet(&m).unwrap();
        assert!((far.gaussian_variance - inv.gaussian_variance().unwrap()).abs() < 1e-8);
        assert!((inv.gaussian_variance().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn standard_normal_invariant() {
        let m = model(LevyTriplet::gaussian(0.0, 2f64.sqrt()).unwrap());
        let inv = invariant_triplet(&m).unwrap();
        assert!((inv.gaussian_variance().unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(inv.location().unwrap(), 0.0);
    }

    #[test]
    fn zero_jumps_have_zero_mass() {
        let m = model(LevyTriplet::gaussian(0.3, 1.0).unwrap());
        let tl = transition_triplet(&m, 1.0).unwrap();
        assert_eq!(tl.jump_mass(-5.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn unit_jumps_mapped_interval() {
        for lambda in [0.5, 2.0] {
            let j = JumpMeasure::compound_poisson(lambda, JumpLaw::Point { value: 1.0 }).unwrap();
            let m = model(LevyTriplet::new(0.0, 0.0, j).unwrap());
            let tl = transition_triplet(&m, 1.0).unwrap();
            let v = tl.jump_mass((-1.0f64).exp(), 1.0).unwrap();
            assert!((v - lambda).abs() < 1e-14, "{v}");
        }
    }

    #[test]
    fn point_mass_matches_quadrature_of_smeared_law() {
        // narrow uniform law around 1 approaches the point formula
        let j = JumpMeasure::compound_poisson(1.0, JumpLaw::Uniform { low: 0.999_999, high: 1.000_001 }).unwrap();
        let m = model(LevyTriplet::new(0.0, 0.0, j).unwrap());
        let tl = transition_triplet(&m, 2.0).unwrap();
        let v = tl.jump_mass(0.3, 0.8).unwrap();
        let exact = (1.0f64 / 0.3).ln().min(2.0) - (1.0f64 / 0.8).ln();
        assert!((v - exact).abs() < 1e-5, "{v} vs {exact}");
    }

    #[test]
    fn mean_matches_driver_mean() {
        let j = JumpMeasure::compound_poisson(1.5, JumpLaw::Exponential { rate: 0.4 }).unwrap();
        let m = OuModel::new(0.7, 1.3, LevyTriplet::new(0.2, 0.5, j).unwrap()).unwrap();
        let tl = transition_triplet(&m, 1.7).unwrap();
        let ez = m.driver().mean().unwrap().unwrap();
        let e = (-1.7f64 * 0.7).exp();
        let oracle = e * 1.3 + (1.0 - e) / 0.7 * ez;
        assert!((tl.mean().unwrap().unwrap() - oracle).abs() < 1e-9);
        let inv = invariant_triplet(&m).unwrap();
        assert!((inv.mean().unwrap().unwrap() - ez / 0.7).abs() < 1e-9);
    }

    #[test]
    fn log_squared_tail_has_no_invariant_law() {
        let j = JumpMeasure::density(LevelDensity::LogTail { coef: 1.0 }, SupportSign::PositiveOnly).unwrap();
        let m = model(LevyTriplet::new(0.0, 0.0, j).unwrap());
        let inv = invariant_triplet(&m).unwrap();
        assert!(!inv.exists());
        assert!(inv.location().unwrap_err().is_refusal());
    }

    #[test]
    fn zero_driver_invariant_is_degenerate() {
        let inv = invariant_triplet(&model(LevyTriplet::zero())).unwrap();
        assert!(inv.exists());
        assert_eq!(inv.location().unwrap(), 0.0);
        assert_eq!(inv.gaussian_variance().unwrap(), 0.0);
        assert_eq!(inv.jump_mass(0.5, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn stable_mass_scales_analytically() {
        let m = model(LevyTriplet::new(0.0, 0.0, JumpMeasure::stable(1.5, 1.0, 0.0).unwrap()).unwrap());
        let tl = transition_triplet(&m, 0.8).unwrap();
        let direct = s_quad()
            .integrate(|s: f64| m.driver().jumps().mass(0.5 * s.exp(), 2.0 * s.exp()).unwrap(), 0.0, 0.8)
            .unwrap()
            .value;
        assert!((tl.jump_mass(0.5, 2.0).unwrap() - direct).abs() < 1e-9);
    }
}
