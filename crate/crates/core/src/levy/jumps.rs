//! Jump measures ρ of the driving Lévy process.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::stable::StableConstants;
use crate::error::{Error, Result};
use crate::quad::Quadrature;

/// Which half-lines carry jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum SupportSign {
    TwoSided,
    PositiveOnly,
    NegativeOnly,
}

impl SupportSign {
    pub fn allows_positive(self) -> bool {
        !matches!(self, SupportSign::NegativeOnly)
    }

    pub fn allows_negative(self) -> bool {
        !matches!(self, SupportSign::PositiveOnly)
    }

    /// True when every jump permitted by `inner` is also permitted by `self`.
    pub fn contains(self, inner: SupportSign) -> bool {
        (self.allows_positive() || !inner.allows_positive()) && (self.allows_negative() || !inner.allows_negative())
    }
}

/// Named jump-size distribution of a compound Poisson driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum JumpLaw {
    /// Every jump has the same size.
    Point { value: f64 },
    /// Positive exponential jumps with the given rate (mean `1/rate`).
    Exponential { rate: f64 },
    /// Negative exponential jumps: `-E` with `E ~ Exp(rate)`.
    NegExponential { rate: f64 },
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
}

impl JumpLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpLaw::Point { value } => {
                if value == 0.0 {
                    return Err(Error::invalid("jump law puts mass on 0 (point at 0)"));
                }
                value.is_finite()
            }
            JumpLaw::Exponential { rate } | JumpLaw::NegExponential { rate } => rate.is_finite() && rate > 0.0,
            JumpLaw::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            JumpLaw::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad jump law parameters: {self:?}")))
        }
    }

    /// Smallest support sign containing the law's support.
    pub fn natural_sign(&self) -> SupportSign {
        let (lo, hi) = self.support();
        if lo >= 0.0 {
            SupportSign::PositiveOnly
        } else if hi <= 0.0 {
            SupportSign::NegativeOnly
        } else {
            SupportSign::TwoSided
        }
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            JumpLaw::Point { value } => (value, value),
            JumpLaw::Exponential { .. } => (0.0, f64::INFINITY),
            JumpLaw::NegExponential { .. } => (f64::NEG_INFINITY, 0.0),
            JumpLaw::Uniform { low, high } => (low, high),
            JumpLaw::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, JumpLaw::Point { .. })
    }

    pub fn cf(&self, theta: f64) -> Complex64 {
        let i = Complex64::i();
        match *self {
            JumpLaw::Point { value } => (i * theta * value).exp(),
            JumpLaw::Exponential { rate } => Complex64::new(rate, 0.0) / Complex64::new(rate, -theta),
            JumpLaw::NegExponential { rate } => Complex64::new(rate, 0.0) / Complex64::new(rate, theta),
            JumpLaw::Uniform { low, high } => {
                let x = 0.5 * theta * (high - low);
                let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
                (i * theta * 0.5 * (low + high)).exp() * sinc
            }
            JumpLaw::Normal { mean, sd } => Complex64::new(-0.5 * sd * sd * theta * theta, theta * mean).exp(),
        }
    }

    /// `E e^{uJ}` for real `u`, when finite.
    pub fn mgf(&self, u: f64) -> Option<f64> {
        match *self {
            JumpLaw::Point { value } => Some((u * value).exp()),
            JumpLaw::Exponential { rate } => (u < rate).then(|| rate / (rate - u)),
            JumpLaw::NegExponential { rate } => (u > -rate).then(|| rate / (rate + u)),
            JumpLaw::Uniform { low, high } => Some(if u.abs() < 1e-12 {
                1.0
            } else {
                ((u * high).exp() - (u * low).exp()) / (u * (high - low))
            }),
            JumpLaw::Normal { mean, sd } => Some((u * mean + 0.5 * sd * sd * u * u).exp()),
        }
    }

    /// `P(lo < J <= hi)`.
    pub fn prob(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            JumpLaw::Point { value } => (x >= value) as u8 as f64,
            JumpLaw::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            JumpLaw::NegExponential { rate } => {
                if x >= 0.0 {
                    1.0
                } else {
                    (rate * x).exp()
                }
            }
            JumpLaw::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            JumpLaw::Normal { mean, sd } => 0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2)),
        }
    }

    fn density(&self, z: f64) -> f64 {
        match *self {
            JumpLaw::Point { .. } => 0.0,
            JumpLaw::Exponential { rate } => {
                if z < 0.0 {
                    0.0
                } else {
                    rate * (-rate * z).exp()
                }
            }
            JumpLaw::NegExponential { rate } => {
                if z > 0.0 {
                    0.0
                } else {
                    rate * (rate * z).exp()
                }
            }
            JumpLaw::Uniform { low, high } => {
                if z < low || z > high {
                    0.0
                } else {
                    1.0 / (high - low)
                }
            }
            JumpLaw::Normal { mean, sd } => {
                let u = (z - mean) / sd;
                (-0.5 * u * u).exp() / (sd * (2.0 * PI).sqrt())
            }
        }
    }

    /// `E f(J)`, integrating the law density with breakpoints where `f` has kinks.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64], quad: &Quadrature) -> Result<f64> {
        if let JumpLaw::Point { value } = *self {
            return Ok(f(value));
        }
        let (lo, hi) = self.support();
        let mut pts = breaks.to_vec();
        if let JumpLaw::Normal { mean, sd } = *self {
            pts.extend([mean - 3.0 * sd, mean, mean + 3.0 * sd]);
        }
        let e = quad.integrate_range(|z| f(z) * self.density(z), lo, hi, &pts)?;
        Ok(e.value)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Point { value } => value,
            JumpLaw::Exponential { rate } => Exp::new(rate).unwrap().sample(rng),
            JumpLaw::NegExponential { rate } => -Exp::new(rate).unwrap().sample(rng),
            JumpLaw::Uniform { low, high } => rng.random_range(low..high),
            JumpLaw::Normal { mean, sd } => Normal::new(mean, sd).unwrap().sample(rng),
        }
    }
}

/// Declared integrability properties of a user-supplied level density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IntegrabilityFlags {
    /// `∫_{|z|<=1} z² h(z) dz < ∞`
    pub small_jumps_square_integrable: bool,
    /// `∫_{|z|>1} h(z) dz < ∞`
    pub large_jumps_finite_mass: bool,
}

/// A level density given as a closure; not serialisable.
#[derive(Clone)]
pub struct CustomDensity {
    pub h: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Support `(lower, upper)` in |z|.
    pub lower: f64,
    pub upper: f64,
    pub declared: IntegrabilityFlags,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("declared", &self.declared)
            .finish_non_exhaustive()
    }
}

impl PartialEq for CustomDensity {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.h, &other.h)
            && self.lower == other.lower
            && self.upper == other.upper
            && self.declared == other.declared
    }
}

/// Level density `h(|z|)` of an absolutely continuous jump measure. The same
/// profile is used on every side allowed by the support sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LevelDensity {
    /// `coef · |z|^{-exponent}` on `lower < |z| < upper`.
    PowerLaw {
        coef: f64,
        exponent: f64,
        #[serde(default)]
        lower: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<f64>,
    },
    /// `coef / (|z| ln²|z|)` on `|z| > e`.
    LogTail { coef: f64 },
    /// `coef · e^{-decay |z|} |z|^{-1-index}` on `|z| > 0`.
    Tempered { coef: f64, index: f64, decay: f64 },
    #[serde(skip)]
    Custom(CustomDensity),
}

impl LevelDensity {
    /// Support `(lower, upper)` in |z|.
    pub fn support(&self) -> (f64, f64) {
        match self {
            LevelDensity::PowerLaw { lower, upper, .. } => (*lower, upper.unwrap_or(f64::INFINITY)),
            LevelDensity::LogTail { .. } => (E, f64::INFINITY),
            LevelDensity::Tempered { .. } => (0.0, f64::INFINITY),
            LevelDensity::Custom(c) => (c.lower, c.upper),
        }
    }

    /// Density at level `|z| = r > 0`.
    pub fn eval(&self, r: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(r > lo && r < hi) {
            return 0.0;
        }
        match self {
            LevelDensity::PowerLaw { coef, exponent, .. } => coef * r.powf(-exponent),
            LevelDensity::LogTail { coef } => {
                let l = r.ln();
                coef / (r * l * l)
            }
            LevelDensity::Tempered { coef, index, decay } => coef * (-decay * r).exp() * r.powf(-1.0 - index),
            LevelDensity::Custom(c) => (c.h)(r),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            LevelDensity::PowerLaw { coef, exponent, lower, upper } => {
                if !(coef.is_finite() && *coef > 0.0 && exponent.is_finite() && *lower >= 0.0) {
                    return Err(Error::invalid("power-law density needs coef > 0, lower >= 0"));
                }
                if let Some(u) = upper {
                    if !(*u > *lower) {
                        return Err(Error::invalid("power-law density needs upper > lower"));
                    }
                }
                if *lower < 1.0 && *exponent >= 3.0 {
                    return Err(Error::invalid("power-law density violates ∫ z² h < ∞ near 0 (exponent >= 3)"));
                }
                if upper.is_none() && *exponent <= 1.0 {
                    return Err(Error::invalid("power-law density has infinite mass at infinity (exponent <= 1)"));
                }
                Ok(())
            }
            LevelDensity::LogTail { coef } => {
                if coef.is_finite() && *coef > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("log-tail density needs coef > 0"))
                }
            }
            LevelDensity::Tempered { coef, index, decay } => {
                if coef.is_finite() && *coef > 0.0 && *index > 0.0 && *index < 2.0 && *decay > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("tempered density needs coef > 0, index in (0,2), decay > 0"))
                }
            }
            LevelDensity::Custom(c) => {
                if !(c.lower >= 0.0 && c.upper > c.lower) {
                    return Err(Error::invalid("custom density support must satisfy 0 <= lower < upper"));
                }
                if !(c.declared.small_jumps_square_integrable && c.declared.large_jumps_finite_mass) {
                    return Err(Error::invalid("custom density must declare ∫(1 ∧ z²) h < ∞"));
                }
                spot_check_integrability(self)
            }
        }
    }
}

fn spot_check_integrability(h: &LevelDensity) -> Result<()> {
    let (lo, hi) = h.support();
    let quad = Quadrature::new(1e-9, 1e-7).with_max_segments(4000);
    let small = if lo < 1.0 {
        quad.integrate(|r| r * r * h.eval(r), lo, hi.min(1.0))
            .map_err(|e| Error::invalid(format!("custom density: ∫ z² h over |z|<=1 failed ({e})")))?
            .value
    } else {
        0.0
    };
    let large = if hi > 1.0 {
        quad.integrate_range(|r| h.eval(r), lo.max(1.0), hi, &[])
            .map_err(|e| Error::invalid(format!("custom density: ∫ h over |z|>1 failed ({e})")))?
            .value
    } else {
        0.0
    };
    if small.is_finite() && large.is_finite() && small >= 0.0 && large >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("custom density failed the integrability spot check"))
    }
}

/// Kind of jump measure, serialised as `{ kind = "...", params = { ... } }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum JumpKind {
    None,
    CompoundPoisson {
        rate: f64,
        law: JumpLaw,
    },
    /// α-stable jumps in the 1-parameterisation: `index ∈ (0,2)`,
    /// `scale > 0`, `skew ∈ [-1, 1]`.
    Stable {
        index: f64,
        scale: f64,
        skew: f64,
    },
    Density(LevelDensity),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct JumpMeasureSpec {
    #[serde(flatten)]
    kind: JumpKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support_sign: Option<SupportSign>,
}

/// Per-kind constants computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Derived {
    None,
    /// Compound Poisson: `E[J / (1 + J²)]`.
    Poisson { centering: f64 },
    Stable(StableConstants),
    Density,
}

/// Lévy measure ρ with ρ({0}) = 0 and ∫(1 ∧ z²) ρ(dz) < ∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JumpMeasureSpec", into = "JumpMeasureSpec")]
pub struct JumpMeasure {
    kind: JumpKind,
    support_sign: SupportSign,
    derived: Derived,
}

impl TryFrom<JumpMeasureSpec> for JumpMeasure {
    type Error = Error;
    fn try_from(spec: JumpMeasureSpec) -> Result<Self> {
        JumpMeasure::new(spec.kind, spec.support_sign)
    }
}

impl From<JumpMeasure> for JumpMeasureSpec {
    fn from(m: JumpMeasure) -> Self {
        JumpMeasureSpec { kind: m.kind, support_sign: Some(m.support_sign) }
    }
}

pub(crate) fn default_quad() -> Quadrature {
    Quadrature::new(1e-11, 1e-11).with_max_segments(4000)
}

impl JumpMeasure {
    /// Validate a kind and support sign. When `support_sign` is omitted the
    /// kind's natural support is used.
    pub fn new(kind: JumpKind, support_sign: Option<SupportSign>) -> Result<Self> {
        let natural = match &kind {
            JumpKind::None => SupportSign::TwoSided,
            JumpKind::CompoundPoisson { rate, law } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::invalid("compound Poisson rate must be positive"));
                }
                law.validate()?;
                law.natural_sign()
            }
            JumpKind::Stable { index, scale, skew } => {
                if !(*index > 0.0 && *index < 2.0) {
                    return Err(Error::invalid("stable index must lie in (0, 2)"));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::invalid("stable scale must be positive"));
                }
                if !(-1.0..=1.0).contains(skew) {
                    return Err(Error::invalid("stable skew must lie in [-1, 1]"));
                }
                if *skew == 1.0 {
                    SupportSign::PositiveOnly
                } else if *skew == -1.0 {
                    SupportSign::NegativeOnly
                } else {
                    SupportSign::TwoSided
                }
            }
            JumpKind::Density(h) => {
                h.validate()?;
                support_sign.unwrap_or(SupportSign::TwoSided)
            }
        };
        let support_sign = support_sign.unwrap_or(natural);
        if !support_sign.contains(natural) {
            return Err(Error::invalid(format!(
                "declared support sign {support_sign:?} is inconsistent with the jump parameters ({natural:?})"
            )));
        }
        let derived = match &kind {
            JumpKind::None => Derived::None,
            JumpKind::CompoundPoisson { law, .. } => {
                let c = law.expect(|z| z / (1.0 + z * z), &[-1.0, 1.0], &default_quad())?;
                Derived::Poisson { centering: c }
            }
            JumpKind::Stable { index, scale, skew } => Derived::Stable(StableConstants::new(*index, *scale, *skew)),
            JumpKind::Density(_) => Derived::Density,
        };
        Ok(Self { kind, support_sign, derived })
    }

    pub fn none() -> Self {
        Self { kind: JumpKind::None, support_sign: SupportSign::TwoSided, derived: Derived::None }
    }

    pub fn compound_poisson(rate: f64, law: JumpLaw) -> Result<Self> {
        Self::new(JumpKind::CompoundPoisson { rate, law }, None)
    }

    pub fn stable(index: f64, scale: f64, skew: f64) -> Result<Self> {
        Self::new(JumpKind::Stable { index, scale, skew }, None)
    }

    pub fn density(h: LevelDensity, sign: SupportSign) -> Result<Self> {
        Self::new(JumpKind::Density(h), Some(sign))
    }

    pub fn kind(&self) -> &JumpKind {
        &self.kind
    }

    pub fn support_sign(&self) -> SupportSign {
        self.support_sign
    }

    pub(crate) fn derived(&self) -> &Derived {
        &self.derived
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, JumpKind::None)
    }

    /// Total mass ρ(R \ {0}) (infinite for stable and most densities).
    pub fn total_mass(&self) -> f64 {
        match &self.kind {
            JumpKind::None => 0.0,
            JumpKind::CompoundPoisson { rate, .. } => *rate,
            _ => self.mass(f64::NEG_INFINITY, 0.0).unwrap_or(f64::INFINITY)
                + self.mass(0.0, f64::INFINITY).unwrap_or(f64::INFINITY),
        }
    }

    /// Positive-side level density (magnitude), for absolutely continuous kinds.
    pub(crate) fn side_density(&self, positive: bool) -> Option<SideDensity<'_>> {
        let allowed = if positive { self.support_sign.allows_positive() } else { self.support_sign.allows_negative() };
        if !allowed {
            return None;
        }
        match (&self.kind, &self.derived) {
            (JumpKind::Stable { index, .. }, Derived::Stable(c)) => {
                let coef = if positive { c.c_plus } else { c.c_minus };
                (coef > 0.0).then_some(SideDensity::Power { coef, exponent: 1.0 + index })
            }
            (JumpKind::Density(h), _) => Some(SideDensity::Level(h)),
            _ => None,
        }
    }

    /// `ρ((lo, hi])`. Intervals touching 0 may have infinite mass.
    pub fn mass(&self, lo: f64, hi: f64) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        match &self.kind {
            JumpKind::None => Ok(0.0),
            JumpKind::CompoundPoisson { rate, law } => Ok(rate * law.prob(lo, hi)),
            _ => {
                let mut total = 0.0;
                for positive in [true, false] {
                    let (a, b) = if positive { (lo.max(0.0), hi.max(0.0)) } else { ((-hi).max(0.0), (-lo).max(0.0)) };
                    if b <= a {
                        continue;
                    }
                    if let Some(d) = self.side_density(positive) {
                        total += d.mass(a, b)?;
                    }
                }
                Ok(total)
            }
        }
    }

    /// `∫ f(z) ρ(dz)`. `breaks` lists points where `f` is not smooth.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<f64> {
        self.integrate_with(f, breaks, &default_quad())
    }

    pub(crate) fn integrate_with<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64], quad: &Quadrature) -> Result<f64> {
        match &self.kind {
            JumpKind::None => Ok(0.0),
            JumpKind::CompoundPoisson { rate, law } => Ok(rate * law.expect(&f, breaks, quad)?),
            _ => {
                let mut total = 0.0;
                for positive in [true, false] {
                    let Some(d) = self.side_density(positive) else { continue };
                    let s = if positive { 1.0 } else { -1.0 };
                    let side_breaks: Vec<f64> =
                        breaks.iter().map(|b| b * s).filter(|b| *b > 0.0).chain([1.0]).collect();
                    let (lo, hi) = d.support();
                    let e = quad.integrate_range(|r| f(s * r) * d.eval(r), lo, hi, &side_breaks)?;
                    total += e.value;
                }
                Ok(total)
            }
        }
    }
}

/// One side of an absolutely continuous jump measure, as a function of |z|.
#[derive(Debug, Clone, Copy)]
pub(crate) enum SideDensity<'a> {
    Power { coef: f64, exponent: f64 },
    Level(&'a LevelDensity),
}

impl SideDensity<'_> {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            SideDensity::Power { coef, exponent } => {
                if r > 0.0 {
                    coef * r.powf(-exponent)
                } else {
                    0.0
                }
            }
            SideDensity::Level(h) => h.eval(r),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            SideDensity::Power { .. } => (0.0, f64::INFINITY),
            SideDensity::Level(h) => h.support(),
        }
    }

    /// Mass on `(a, b)` in |z|.
    pub fn mass(&self, a: f64, b: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        let (a, b) = (a.max(lo), b.min(hi));
        if b <= a {
            return Ok(0.0);
        }
        match self {
            SideDensity::Power { coef, exponent } => Ok(power_mass(*coef, *exponent, a, b)),
            SideDensity::Level(LevelDensity::PowerLaw { coef, exponent, .. }) => Ok(power_mass(*coef, *exponent, a, b)),
            SideDensity::Level(LevelDensity::LogTail { coef }) => {
                let inv = |x: f64| if x.is_finite() { 1.0 / x.ln() } else { 0.0 };
                Ok(coef * (inv(a) - inv(b)))
            }
            SideDensity::Level(h) => {
                if a == 0.0 {
                    return Ok(f64::INFINITY);
                }
                Ok(default_quad().integrate_range(|r| h.eval(r), a, b, &[1.0])?.value)
            }
        }
    }
}

fn power_mass(coef: f64, p: f64, a: f64, b: f64) -> f64 {
    if (p - 1.0).abs() < 1e-14 {
        return coef * (b / a).ln();
    }
    let q = 1.0 - p;
    let pw = |x: f64| {
        if x == 0.0 {
            if q > 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else if x.is_infinite() {
            if q < 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            x.powf(q)
        }
    };
    coef * (pw(b) - pw(a)) / q
}
