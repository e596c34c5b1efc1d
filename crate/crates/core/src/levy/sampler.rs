//! Exact (or truncated, for density-specified jumps) increment sampling.
//!
//! A jump measure given by a density is split at a threshold δ: jumps with
//! |z| ≥ δ form a compound Poisson process sampled exactly, jumps below δ
//! are replaced by a Gaussian with the same mean and variance.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::Serialize;

use super::jumps::{default_quad, Derived, JumpKind, JumpLaw, LevelDensity, SideDensity};
use super::stable::StableConstants;
use super::LevyTriplet;
use crate::error::{Error, Result};
use crate::quad::Quadrature;

/// Ceiling on the intensity of simulated jumps (per unit time) for
/// density-specified measures.
pub const DEFAULT_MAX_JUMP_RATE: f64 = 1e4;

/// Share of the small-jump variance that may be moved into the Gaussian part.
const VARIANCE_SHARE: f64 = 1e-6;

/// Truncation used for a density-specified jump measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Truncation {
    pub delta: f64,
    /// Variance rate of the jumps below δ, simulated as Gaussian.
    pub small_jump_variance: f64,
    /// Intensity of the jumps at or above δ.
    pub big_jump_rate: f64,
    /// `small_jump_variance / ∫_{|z|≤1} z² ρ(dz)`.
    pub variance_share: f64,
}

#[derive(Debug, Clone)]
enum SideSampler {
    Power { exponent: f64, a: f64, b: f64 },
    LogTail { a: f64 },
    Table { z: Vec<f64>, cdf: Vec<f64> },
}

impl SideSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match *self {
            SideSampler::Power { exponent, a, b, .. } => {
                let q = 1.0 - exponent;
                if q.abs() < 1e-14 {
                    a * (b / a).powf(u)
                } else {
                    let (pa, pb) = (a.powf(q), if b.is_finite() { b.powf(q) } else { 0.0 });
                    (pa + u * (pb - pa)).powf(1.0 / q)
                }
            }
            SideSampler::LogTail { a } => (a.ln() / (1.0 - u)).exp(),
            SideSampler::Table { ref z, ref cdf } => {
                let target = u * cdf[cdf.len() - 1];
                let k = cdf.partition_point(|&c| c < target).clamp(1, cdf.len() - 1);
                let (c0, c1) = (cdf[k - 1], cdf[k]);
                let w = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
                z[k - 1] + w * (z[k] - z[k - 1])
            }
        }
    }
}

#[derive(Debug, Clone)]
enum JumpSource {
    Law(JumpLaw),
    Sides(Vec<(f64, f64, SideSampler)>),
}

/// Sampler for increments of a fixed driver.
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    drift_rate: f64,
    gauss_var_rate: f64,
    jump_rate: f64,
    source: Option<JumpSource>,
    stable: Option<StableConstants>,
    truncation: Option<Truncation>,
}

/// An increment split into its continuous part and the list of jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementParts {
    pub continuous: f64,
    pub jumps: Vec<f64>,
}

impl IncrementParts {
    pub fn total(&self) -> f64 {
        self.continuous + self.jumps.iter().sum::<f64>()
    }
}

impl IncrementSampler {
    pub fn new(triplet: &LevyTriplet) -> Result<Self> {
        Self::with_max_rate(triplet, DEFAULT_MAX_JUMP_RATE)
    }

    pub fn with_max_rate(triplet: &LevyTriplet, max_rate: f64) -> Result<Self> {
        let mut s = Self {
            drift_rate: -triplet.drift(),
            gauss_var_rate: triplet.sigma() * triplet.sigma(),
            jump_rate: 0.0,
            source: None,
            stable: None,
            truncation: None,
        };
        let jumps = triplet.jumps();
        match (jumps.kind(), jumps.derived()) {
            (JumpKind::None, _) => {}
            (JumpKind::CompoundPoisson { rate, law }, Derived::Poisson { centering }) => {
                s.drift_rate -= rate * centering;
                s.jump_rate = *rate;
                s.source = Some(JumpSource::Law(law.clone()));
            }
            (JumpKind::Stable { .. }, Derived::Stable(c)) => s.stable = Some(*c),
            (JumpKind::Density(_), _) => {
                let sides: Vec<(f64, SideDensity<'_>)> = [(true, 1.0), (false, -1.0)]
                    .into_iter()
                    .filter_map(|(p, sg)| jumps.side_density(p).map(|d| (sg, d)))
                    .collect();
                let plan = truncate(&sides, max_rate)?;
                s.gauss_var_rate += plan.truncation.small_jump_variance;
                s.drift_rate += plan.small_mean - plan.big_centering;
                s.jump_rate = plan.truncation.big_jump_rate;
                s.source = Some(JumpSource::Sides(plan.sides));
                s.truncation = Some(plan.truncation);
            }
            _ => unreachable!(),
        }
        Ok(s)
    }

    pub fn truncation(&self) -> Option<Truncation> {
        self.truncation
    }

    pub fn drift_rate(&self) -> f64 {
        self.drift_rate
    }

    pub fn gaussian_variance_rate(&self) -> f64 {
        self.gauss_var_rate
    }

    pub fn jump_rate(&self) -> f64 {
        self.jump_rate
    }

    pub fn stable(&self) -> Option<&StableConstants> {
        self.stable.as_ref()
    }

    /// One jump from the compound Poisson component.
    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.source {
            Some(JumpSource::Law(l)) => l.sample(rng),
            Some(JumpSource::Sides(sides)) => {
                let total: f64 = sides.iter().map(|s| s.1).sum();
                let mut u = rng.random::<f64>() * total;
                for (sign, mass, sampler) in sides {
                    if u < *mass {
                        return sign * sampler.sample(rng);
                    }
                    u -= mass;
                }
                let (sign, _, sampler) = sides.last().expect("non-empty sides");
                sign * sampler.sample(rng)
            }
            None => 0.0,
        }
    }

    /// Number of jumps in a window of length `dt`.
    pub fn sample_jump_count<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> usize {
        let mean = self.jump_rate * dt;
        if mean <= 0.0 {
            return 0;
        }
        let p: f64 = Poisson::new(mean).expect("positive Poisson mean").sample(rng);
        p as usize
    }

    pub fn sample_parts<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<IncrementParts> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt must be positive"));
        }
        let mut continuous = self.drift_rate * dt;
        if self.gauss_var_rate > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            continuous += (self.gauss_var_rate * dt).sqrt() * z;
        }
        if let Some(c) = &self.stable {
            continuous += c.sample_increment(dt, rng);
        }
        let n = self.sample_jump_count(dt, rng);
        let jumps = (0..n).map(|_| self.sample_jump(rng)).collect();
        Ok(IncrementParts { continuous, jumps })
    }

    /// Draw `Z_dt`.
    pub fn sample<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<f64> {
        Ok(self.sample_parts(dt, rng)?.total())
    }
}

struct TruncationPlan {
    truncation: Truncation,
    small_mean: f64,
    big_centering: f64,
    sides: Vec<(f64, f64, SideSampler)>,
}

fn quad() -> Quadrature {
    default_quad()
}

/// `∫_{lo}^{hi} g(r) d(r) dr` on one side (in |z|).
fn side_moment(d: &SideDensity<'_>, g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let (a, b) = d.support();
    let (lo, hi) = (lo.max(a), hi.min(b));
    if hi <= lo {
        return Ok(0.0);
    }
    Ok(quad().integrate_range(|r| g(r) * d.eval(r), lo, hi, &[1.0])?.value)
}

fn small_variance(sides: &[(f64, SideDensity<'_>)], delta: f64) -> Result<f64> {
    let mut v = 0.0;
    for (_, d) in sides {
        v += match d {
            SideDensity::Power { coef, exponent } => power_moment(*coef, 2.0 - exponent, 0.0, delta),
            SideDensity::Level(LevelDensity::PowerLaw { coef, exponent, lower, upper }) => {
                power_moment(*coef, 2.0 - exponent, *lower, delta.min(upper.unwrap_or(f64::INFINITY)))
            }
            _ => side_moment(d, |r| r * r, 0.0, delta)?,
        };
    }
    Ok(v)
}

/// `coef ∫_a^b r^{k} dr` for `k > -1` or `a > 0`.
fn power_moment(coef: f64, k: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if (k + 1.0).abs() < 1e-14 {
        return coef * (b / a).ln();
    }
    let pw = |x: f64| if x == 0.0 { 0.0 } else { x.powf(k + 1.0) };
    coef * (pw(b) - pw(a)) / (k + 1.0)
}

fn big_rate(sides: &[(f64, SideDensity<'_>)], delta: f64) -> Result<f64> {
    let mut r = 0.0;
    for (_, d) in sides {
        r += d.mass(delta, f64::INFINITY)?;
    }
    Ok(r)
}

/// Bisection in log-scale for the point where a monotone function crosses `target`.
fn log_bisect(mut lo: f64, mut hi: f64, mut above: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    for _ in 0..80 {
        let mid = (lo * hi).sqrt();
        if above(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi / lo < 1.0 + 1e-10 {
            break;
        }
    }
    Ok(hi)
}

fn truncate(sides: &[(f64, SideDensity<'_>)], max_rate: f64) -> Result<TruncationPlan> {
    let lower = sides.iter().map(|(_, d)| d.support().0).fold(f64::INFINITY, f64::min);
    let v1 = small_variance(sides, 1.0)?;
    let delta = if lower > 0.0 || v1 == 0.0 {
        lower.max(f64::MIN_POSITIVE)
    } else {
        // smallest δ with small-jump variance ≥ share·v1 is where truncation error is acceptable
        let by_variance = log_bisect(1e-300, 1.0, |d| Ok(small_variance(sides, d)? >= VARIANCE_SHARE * v1))?;
        let by_rate = log_bisect(1e-300, 1.0, |d| Ok(big_rate(sides, d)? <= max_rate))?;
        by_variance.max(by_rate)
    };
    let small_var = if lower > 0.0 { 0.0 } else { small_variance(sides, delta)? };
    let mut small_mean = 0.0;
    let mut big_centering = 0.0;
    let mut samplers = Vec::new();
    for (sign, d) in sides {
        if lower == 0.0 {
            small_mean += sign * side_moment(d, |r| r * r * r / (1.0 + r * r), 0.0, delta)?;
        }
        big_centering += sign * side_moment(d, |r| r / (1.0 + r * r), delta, f64::INFINITY)?;
        let mass = d.mass(delta, f64::INFINITY)?;
        if mass > 0.0 {
            samplers.push((*sign, mass, side_sampler(d, delta)?));
        }
    }
    let rate: f64 = samplers.iter().map(|s| s.1).sum();
    if !rate.is_finite() {
        return Err(Error::invalid("density jump measure has infinite mass above the truncation level"));
    }
    Ok(TruncationPlan {
        truncation: Truncation {
            delta,
            small_jump_variance: small_var,
            big_jump_rate: rate,
            variance_share: if v1 > 0.0 { small_var / v1 } else { 0.0 },
        },
        small_mean,
        big_centering,
        sides: samplers,
    })
}

fn side_sampler(d: &SideDensity<'_>, delta: f64) -> Result<SideSampler> {
    let (lo, hi) = d.support();
    let a = delta.max(lo);
    Ok(match d {
        SideDensity::Power { exponent, .. } => SideSampler::Power { exponent: *exponent, a, b: hi },
        SideDensity::Level(LevelDensity::PowerLaw { exponent, .. }) => {
            SideSampler::Power { exponent: *exponent, a, b: hi }
        }
        SideDensity::Level(LevelDensity::LogTail { .. }) => SideSampler::LogTail { a },
        SideDensity::Level(_) => {
            let total = d.mass(a, hi)?;
            let mut top = if hi.is_finite() { hi } else { 2.0 * a.max(1.0) };
            while hi.is_infinite() && d.mass(top, hi)? > 1e-12 * total {
                top *= 2.0;
                if top > 1e12 {
                    return Err(Error::Numerical("jump density tail too heavy to tabulate".into()));
                }
            }
            let n = 2000;
            let z: Vec<f64> = (0..=n).map(|k| a * (top / a).powf(k as f64 / n as f64)).collect();
            let mut cdf = Vec::with_capacity(z.len());
            cdf.push(0.0);
            let q = Quadrature::new(1e-14, 1e-10);
            for w in z.windows(2) {
                let m = q.integrate(|r| d.eval(r), w[0], w[1])?.value;
                cdf.push(cdf.last().unwrap() + m);
            }
            SideSampler::Table { z, cdf }
        }
    })
}
