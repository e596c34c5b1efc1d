//! Adaptive Gauss–Kronrod quadrature (21-point rule, global bisection).
//!
//! Works for any value type that forms a vector space over `f64` with a
//! norm, so the same driver integrates real and complex integrands.

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

use crate::error::QuadError;

/// Values that can be integrated.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_351_996,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];

// Gauss weights attached to XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_36,
    0.295_524_224_714_752_87,
];

/// Result of an integration together with its error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

fn kronrod<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> Segment<T> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kron = fc * WGK[10];
    let mut gauss = T::zero();
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(centre - dx) + f(centre + dx);
        kron = kron + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).magnitude();
    Segment { a, b, value, error }
}

/// Adaptive integrator configuration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, max_segments: 2000 }
    }
}

impl Quadrature {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }

    pub fn with_max_segments(mut self, n: usize) -> Self {
        self.max_segments = n;
        self
    }

    /// Integrate `f` over the finite interval `[a, b]`.
    pub fn integrate<T, F>(&self, mut f: F, a: f64, b: f64) -> Result<Estimate<T>, QuadError>
    where
        T: QuadValue,
        F: FnMut(f64) -> T,
    {
        if a == b {
            return Ok(Estimate { value: T::zero(), error: 0.0, evaluations: 0 });
        }
        if !(a.is_finite() && b.is_finite()) {
            return Err(QuadError::BadInterval { a, b });
        }
        let mut segments = vec![kronrod(&mut f, a, b)];
        let mut evaluations = 21;
        loop {
            let mut total = T::zero();
            let mut err = 0.0;
            let mut worst = 0;
            for (i, s) in segments.iter().enumerate() {
                total = total + s.value;
                err += s.error;
                if s.error > segments[worst].error {
                    worst = i;
                }
            }
            if !total.magnitude().is_finite() || !err.is_finite() {
                return Err(QuadError::NonFinite);
            }
            let target = self.abs_tol.max(self.rel_tol * total.magnitude());
            if err <= target {
                return Ok(Estimate { value: total, error: err, evaluations });
            }
            let s = segments[worst];
            let mid = 0.5 * (s.a + s.b);
            if segments.len() >= self.max_segments || mid <= s.a || mid >= s.b {
                return Err(QuadError::NotConverged { achieved: err, requested: target });
            }
            segments[worst] = kronrod(&mut f, s.a, mid);
            segments.push(kronrod(&mut f, mid, s.b));
            evaluations += 42;
        }
    }

    /// Integrate over `[a, ∞)` through the map `x = a + u / (1 - u)`.
    pub fn integrate_to_infinity<T, F>(&self, mut f: F, a: f64) -> Result<Estimate<T>, QuadError>
    where
        T: QuadValue,
        F: FnMut(f64) -> T,
    {
        self.integrate(
            |u: f64| {
                let one_minus = 1.0 - u;
                let x = a + u / one_minus;
                let jac = 1.0 / (one_minus * one_minus);
                let v = f(x);
                if jac.is_finite() && v.magnitude() != 0.0 {
                    v * jac
                } else {
                    T::zero()
                }
            },
            0.0,
            1.0,
        )
    }

    /// Integrate over consecutive breakpoints, splitting the absolute
    /// tolerance evenly across pieces.
    pub fn integrate_pieces<T, F>(&self, mut f: F, points: &[f64]) -> Result<Estimate<T>, QuadError>
    where
        T: QuadValue,
        F: FnMut(f64) -> T,
    {
        let pieces = points.len().saturating_sub(1).max(1);
        let sub = Quadrature { abs_tol: self.abs_tol / pieces as f64, ..*self };
        let mut out = Estimate { value: T::zero(), error: 0.0, evaluations: 0 };
        for w in points.windows(2) {
            let e = sub.integrate(&mut f, w[0], w[1])?;
            out.value = out.value + e.value;
            out.error += e.error;
            out.evaluations += e.evaluations;
        }
        Ok(out)
    }
}

impl Quadrature {
    /// Integrate over `(lo, hi)`, either end possibly infinite, split at the
    /// given interior breakpoints.
    pub fn integrate_range<T, F>(
        &self,
        mut f: F,
        lo: f64,
        hi: f64,
        breaks: &[f64],
    ) -> Result<Estimate<T>, QuadError>
    where
        T: QuadValue,
        F: FnMut(f64) -> T,
    {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(QuadError::BadInterval { a: lo, b: hi });
        }
        let mut pts: Vec<f64> = breaks.iter().copied().filter(|&p| p > lo && p < hi && p.is_finite()).collect();
        if lo.is_finite() {
            pts.push(lo);
        }
        if hi.is_finite() {
            pts.push(hi);
        }
        if pts.is_empty() {
            pts.push(0.0);
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let pieces = pts.len() + 1;
        let sub = Quadrature { abs_tol: self.abs_tol / pieces as f64, ..*self };
        let mut out = sub.integrate_pieces(&mut f, &pts)?;
        if lo == f64::NEG_INFINITY {
            let left = pts[0];
            let e = sub.integrate_to_infinity(|x: f64| f(2.0 * left - x), left)?;
            out.value = out.value + e.value;
            out.error += e.error;
            out.evaluations += e.evaluations;
        }
        if hi == f64::INFINITY {
            let e = sub.integrate_to_infinity(&mut f, *pts.last().unwrap())?;
            out.value = out.value + e.value;
            out.error += e.error;
            out.evaluations += e.evaluations;
        }
        Ok(out)
    }
}

/// Shorthand for a real integral with the default tolerances.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64, QuadError> {
    Quadrature::default().integrate(f, a, b).map(|e| e.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = Quadrature::default();
        let e = q.integrate(|x: f64| x.powi(7) - 3.0 * x * x, -1.0, 2.0).unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((e.value - exact).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        let q = Quadrature::new(1e-10, 1e-10).with_max_segments(5000);
        let e = q.integrate(|x: f64| x.powf(-0.5), 0.0, 1.0).unwrap();
        assert!((e.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn semi_infinite_gaussian() {
        let q = Quadrature::default();
        let e = q.integrate_to_infinity(|x: f64| (-x * x).exp(), 0.0).unwrap();
        assert!((e.value - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn complex_integrand() {
        let q = Quadrature::default();
        let e = q
            .integrate(|x: f64| Complex64::new(0.0, x).exp(), 0.0, std::f64::consts::PI)
            .unwrap();
        assert!((e.value - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn divergent_integral_reports_failure() {
        let q = Quadrature::new(1e-12, 1e-12).with_max_segments(50);
        let r = q.integrate(|x: f64| 1.0 / x, 0.0, 1.0);
        assert!(r.is_err());
    }
}
