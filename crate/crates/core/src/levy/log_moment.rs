//! The log-moment condition `∫_{|z|>1} log|z| ρ(dz) < ∞`, which decides
//! whether the OU-type process has an invariant law.

use serde::Serialize;

use super::jumps::{default_quad, JumpKind, JumpLaw, JumpMeasure, SideDensity};
use crate::error::Result;
use crate::quad::Quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogMomentStatus {
    Finite,
    Infinite,
    /// Tail behaviour could not be classified numerically.
    Undetermined,
}

/// Verdict plus a diagnostic: the integral for finite verdicts, the partial
/// integral up to the last examined level otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogMoment {
    pub status: LogMomentStatus,
    pub value: f64,
    /// Fitted log-log slope of the block increments (density kinds only).
    pub tail_slope: Option<f64>,
}

impl LogMoment {
    pub fn is_finite(&self) -> bool {
        self.status == LogMomentStatus::Finite
    }

    fn finite(value: f64) -> Self {
        Self { status: LogMomentStatus::Finite, value, tail_slope: None }
    }
}

/// Number of unit blocks `w ∈ [k, k+1)` (with `|z| = e^w`) examined.
const BLOCKS: usize = 400;

pub fn log_moment_finite(jumps: &JumpMeasure) -> Result<LogMoment> {
    match jumps.kind() {
        JumpKind::None => Ok(LogMoment::finite(0.0)),
        JumpKind::CompoundPoisson { rate, law } => {
            let v = match *law {
                JumpLaw::Point { value } => {
                    if value.abs() > 1.0 {
                        value.abs().ln()
                    } else {
                        0.0
                    }
                }
                _ => law.expect(|z| if z.abs() > 1.0 { z.abs().ln() } else { 0.0 }, &[-1.0, 1.0], &default_quad())?,
            };
            Ok(LogMoment::finite(rate * v))
        }
        JumpKind::Stable { index, .. } => {
            // c ∫_1^∞ ln z · z^{-1-β} dz = c / β²
            let total = jumps.mass(1.0, f64::INFINITY)? + jumps.mass(f64::NEG_INFINITY, -1.0)?;
            // mass above 1 is c/β, so c/β² = mass/β
            Ok(LogMoment::finite(total / index))
        }
        JumpKind::Density(_) => {
            let mut value = 0.0;
            let mut status = LogMomentStatus::Finite;
            let mut slope = None;
            for positive in [true, false] {
                let Some(d) = jumps.side_density(positive) else { continue };
                let side = density_tail(d)?;
                value += side.value;
                slope = match (slope, side.tail_slope) {
                    (Some(a), Some(b)) => Some(f64::max(a, b)),
                    (a, b) => a.or(b),
                };
                status = match (status, side.status) {
                    (LogMomentStatus::Infinite, _) | (_, LogMomentStatus::Infinite) => LogMomentStatus::Infinite,
                    (LogMomentStatus::Undetermined, _) | (_, LogMomentStatus::Undetermined) => {
                        LogMomentStatus::Undetermined
                    }
                    _ => LogMomentStatus::Finite,
                };
            }
            Ok(LogMoment { status, value, tail_slope: slope })
        }
    }
}

/// Integrate `ln r · h(r)` over unit blocks in `w = ln r` and classify the
/// decay of the block increments.
fn density_tail(d: SideDensity<'_>) -> Result<LogMoment> {
    let (lo, hi) = d.support();
    let start = lo.max(1.0).ln();
    let end = if hi.is_finite() { hi.ln() } else { start + BLOCKS as f64 };
    if end <= start {
        return Ok(LogMoment::finite(0.0));
    }
    let quad = Quadrature::new(1e-300, 1e-7);
    let g = |w: f64| {
        let r = w.exp();
        let hr = d.eval(r);
        // values this small lose precision; treat as exhausted tail
        let v = if hr < 1e-280 { 0.0 } else { w * hr * r };
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut blocks = Vec::with_capacity(BLOCKS);
    let mut w = start;
    while w < end {
        let next = (w + 1.0).min(end);
        blocks.push(quad.integrate(g, w, next)?.value);
        w = next;
    }
    let value: f64 = blocks.iter().sum();
    if hi.is_finite() {
        return Ok(LogMoment::finite(value));
    }
    // Fit ln(increment) against ln(block index) over the far half.
    let pts: Vec<(f64, f64)> = blocks
        .iter()
        .enumerate()
        .skip(BLOCKS / 2)
        .filter(|(_, v)| **v > 0.0)
        .map(|(k, v)| (((k + 1) as f64).ln(), v.ln()))
        .collect();
    if pts.len() < BLOCKS / 4 {
        // increments underflowed: faster than any power of the block index
        return Ok(LogMoment { status: LogMomentStatus::Finite, value, tail_slope: Some(f64::NEG_INFINITY) });
    }
    let slope = fit_slope(&pts);
    let status = if slope < -1.5 {
        LogMomentStatus::Finite
    } else if slope > -1.15 {
        LogMomentStatus::Infinite
    } else {
        LogMomentStatus::Undetermined
    };
    Ok(LogMoment { status, value, tail_slope: Some(slope) })
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{LevelDensity, SupportSign};

    #[test]
    fn none_is_finite_zero() {
        let v = log_moment_finite(&JumpMeasure::none()).unwrap();
        assert!(v.is_finite());
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn cubic_tail_is_finite() {
        let h = LevelDensity::PowerLaw { coef: 1.0, exponent: 3.0, lower: 1.0, upper: None };
        let m = JumpMeasure::density(h, SupportSign::PositiveOnly).unwrap();
        let v = log_moment_finite(&m).unwrap();
        assert_eq!(v.status, LogMomentStatus::Finite);
        // ∫_1^∞ ln z · z^{-3} dz = 1/4
        assert!((v.value - 0.25).abs() < 1e-9);
    }

    #[test]
    fn log_squared_tail_diverges() {
        let m = JumpMeasure::density(LevelDensity::LogTail { coef: 1.0 }, SupportSign::PositiveOnly).unwrap();
        let v = log_moment_finite(&m).unwrap();
        assert_eq!(v.status, LogMomentStatus::Infinite);
    }

    #[test]
    fn log_cubed_tail_is_borderline() {
        // ln z · 1/(z ln³ z): block increments decay like k^{-2}
        use crate::levy::{CustomDensity, IntegrabilityFlags};
        use std::sync::Arc;
        let c = CustomDensity {
            h: Arc::new(|r: f64| 1.0 / (r * r.ln().powi(3))),
            lower: std::f64::consts::E,
            upper: f64::INFINITY,
            declared: IntegrabilityFlags { small_jumps_square_integrable: true, large_jumps_finite_mass: true },
        };
        let m = JumpMeasure::density(LevelDensity::Custom(c), SupportSign::PositiveOnly).unwrap();
        let v = log_moment_finite(&m).unwrap();
        assert_eq!(v.status, LogMomentStatus::Finite);
    }

    #[test]
    fn stable_value() {
        let m = JumpMeasure::stable(1.0, 1.0, 0.0).unwrap();
        // c = 1/π per side, two sides, ∫_1^∞ ln z z^{-2} = 1
        let v = log_moment_finite(&m).unwrap();
        assert!((v.value - 2.0 / std::f64::consts::PI).abs() < 1e-14);
    }
}
