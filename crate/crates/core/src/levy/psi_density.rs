//! Characteristic exponent of an absolutely continuous jump measure by
//! oscillatory quadrature.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::jumps::SideDensity;
use crate::error::{Error, Result};
use crate::quad::Quadrature;

/// Absolute tolerance for the jump part of the exponent.
pub const PSI_ABS_TOL: f64 = 1e-9;

const MAX_PANELS: usize = 20_000;

/// `e^{iθz} − 1 − iθz/(1+z²)` without cancellation for small `θz`.
pub(crate) fn compensated_kernel(theta: f64, z: f64) -> Complex64 {
    let x = theta * z;
    let half = (0.5 * x).sin();
    let re = -2.0 * half * half;
    let im = if x.abs() < 1e-3 {
        let z2 = z * z;
        // sin x − x/(1+z²) = x (z²/(1+z²) − x²/6 + x⁴/120)
        x * (z2 / (1.0 + z2) - x * x / 6.0 + x.powi(4) / 120.0)
    } else {
        x.sin() - x / (1.0 + z * z)
    };
    Complex64::new(re, im)
}

/// `∫_{lo}^{hi} (e^{iθsz} − 1 − iθsz/(1+z²)) d(z) dz` over one side, where
/// `s = ±1` orients the side. Returns the value and the error bound.
pub(crate) fn side_integral(theta: f64, sign: f64, d: SideDensity<'_>) -> Result<(Complex64, f64)> {
    let th = theta * sign;
    let (lo, hi) = d.support();
    let quad = Quadrature::new(PSI_ABS_TOL / 8.0, 1e-12).with_max_segments(4000);
    let integrand = |z: f64| compensated_kernel(th, z) * d.eval(z);
    let period = PI / th.abs();

    // Body: [lo, min(hi, 1)] with oscillation breakpoints, then the tail.
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let split = 1.0f64.max(lo);
    if lo < split {
        let top = hi.min(split);
        let mut pts = vec![lo];
        let mut p = lo + period;
        while p < top && pts.len() < MAX_PANELS {
            pts.push(p);
            p += period;
        }
        pts.push(top);
        let e = quad.integrate_pieces(integrand, &pts)?;
        total += e.value;
        err += e.error;
    }
    if hi <= split {
        return Ok((total, err));
    }

    // Tail [split, hi): oscillatory panels up to a cut U, then an
    // integration-by-parts remainder for e^{iθz} and direct quadrature of the
    // non-oscillatory compensator terms.
    let h = |z: f64| d.eval(z);
    let remainder_ok = |u: f64| {
        let step = 1e-3 * u;
        let d2 = (h(u + step) - 2.0 * h(u) + h(u - step)) / (step * step);
        d2.abs() / th.abs().powi(3) < PSI_ABS_TOL / 10.0
    };
    let mut cut = split + 8.0 * period;
    if hi.is_finite() {
        cut = hi;
    } else {
        while !remainder_ok(cut) {
            cut *= 2.0;
            if (cut - split) / period > MAX_PANELS as f64 {
                return Err(Error::Numerical(format!(
                    "exponent quadrature at θ = {theta}: tail needs more than {MAX_PANELS} oscillation panels"
                )));
            }
        }
    }
    let mut pts = vec![split];
    let mut p = split + period;
    while p < cut {
        pts.push(p);
        p += period;
    }
    pts.push(cut);
    let e = quad.integrate_pieces(integrand, &pts)?;
    total += e.value;
    err += e.error;
    if hi.is_finite() {
        return Ok((total, err));
    }
    let step = 1e-3 * cut;
    let h0 = h(cut);
    let h1 = (h(cut + step) - h(cut - step)) / (2.0 * step);
    let i = Complex64::i();
    let phase = (i * th * cut).exp();
    let osc = phase * (-h0 / (i * th) + h1 / ((i * th) * (i * th)));
    let tail_mass = quad.integrate_to_infinity(h, cut)?;
    let tail_comp = quad.integrate_to_infinity(|z: f64| z / (1.0 + z * z) * h(z), cut)?;
    total += osc - tail_mass.value - i * th * tail_comp.value;
    err += tail_mass.error + th.abs() * tail_comp.error + PSI_ABS_TOL / 10.0;
    Ok((total, err))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_series_matches_direct() {
        for &(t, z) in &[(1e-4, 0.5), (2.0, 1e-4), (0.3, 2e-3)] {
            let k = compensated_kernel(t, z);
            let x: f64 = t * z;
            let direct_im = x.sin() - x / (1.0 + z * z);
            assert!((k.im - direct_im).abs() < 1e-15);
        }
    }
}
