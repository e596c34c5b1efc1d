//! α-stable jumps in the 1-parameterisation.
//!
//! A stable law with index β, scale s and skew κ has Lévy density
//! `c₊ z^{-1-β}` on z > 0 and `c₋ |z|^{-1-β}` on z < 0, with
//! `c₊ + c₋ = s^β / (−Γ(−β) cos(πβ/2))` (β ≠ 1) or `2s/π` (β = 1) and
//! `κ = (c₊ − c₋)/(c₊ + c₋)`.
//!
//! Re-centering from the `u/(1+u²)` compensator used by the exponent to
//! the native stable compensator shifts the location by `m`, see
//! [`StableConstants::shift`].

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use statrs::function::gamma::gamma;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableConstants {
    pub index: f64,
    pub scale: f64,
    pub skew: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    /// Location shift so that `Z_1 = S + shift` with `S ~ S_β(scale, skew, 0)`.
    pub shift: f64,
}

/// `−Γ(−β) cos(πβ/2)`, positive on (0,1) ∪ (1,2).
fn mass_factor(beta: f64) -> f64 {
    let g = if beta < 1.0 {
        gamma(1.0 - beta) / (-beta)
    } else {
        gamma(2.0 - beta) / ((-beta) * (1.0 - beta))
    };
    -g * (FRAC_PI_2 * beta).cos()
}

fn is_cauchy(beta: f64) -> bool {
    (beta - 1.0).abs() < 1e-12
}

impl StableConstants {
    pub fn new(index: f64, scale: f64, skew: f64) -> Self {
        let total = if is_cauchy(index) { 2.0 * scale / PI } else { scale.powf(index) / mass_factor(index) };
        let c_plus = 0.5 * total * (1.0 + skew);
        let c_minus = 0.5 * total * (1.0 - skew);
        let diff = c_plus - c_minus;
        let shift = if is_cauchy(index) {
            diff * (1.0 - EULER_GAMMA)
        } else if index > 1.0 {
            diff * FRAC_PI_2 / (FRAC_PI_2 * (3.0 - index)).sin()
        } else {
            -diff * FRAC_PI_2 / (FRAC_PI_2 * (1.0 - index)).sin()
        };
        Self { index, scale, skew, c_plus, c_minus, shift }
    }

    pub fn is_cauchy(&self) -> bool {
        is_cauchy(self.index)
    }

    /// Exponent contribution `−∫(e^{iθu} − 1 − iθu/(1+u²)) ρ(du)` in closed form.
    pub fn psi(&self, theta: f64) -> Complex64 {
        if theta == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let a = theta.abs();
        let sg = theta.signum();
        let base = if self.is_cauchy() {
            Complex64::new(self.scale * a, self.scale * self.skew * (2.0 / PI) * theta * a.ln())
        } else {
            let sb = self.scale.powf(self.index) * a.powf(self.index);
            Complex64::new(sb, -sb * self.skew * sg * (FRAC_PI_2 * self.index).tan())
        };
        base - Complex64::new(0.0, theta * self.shift)
    }

    /// `log E e^{uZ_1}` for `u >= 0`, finite only for skew = −1.
    pub fn laplace_exponent(&self, u: f64) -> Option<f64> {
        if self.skew != -1.0 {
            return None;
        }
        if u == 0.0 {
            return Some(0.0);
        }
        let core = if self.is_cauchy() {
            (2.0 / PI) * self.scale * u * u.ln()
        } else {
            -(self.scale * u).powf(self.index) / (FRAC_PI_2 * self.index).cos()
        };
        Some(core + self.shift * u)
    }

    /// Scale and location of `∫_0^dt e^{-(dt-s)Q} dZ_s` restricted to the
    /// stable part: a stable law with the same index and skew.
    pub fn ou_increment_law(&self, q: f64, dt: f64) -> (f64, f64) {
        let a = -(-q * dt).exp_m1() / q;
        if self.is_cauchy() {
            let b = (1.0 - (-q * dt).exp() * (1.0 + q * dt)) / (q * q);
            let scale = self.scale * a;
            let loc = self.shift * a + self.scale * self.skew * (2.0 / PI) * q * b;
            (scale, loc)
        } else {
            let beta = self.index;
            let factor = -(-beta * q * dt).exp_m1() / (beta * q);
            (self.scale * factor.powf(1.0 / beta), self.shift * a)
        }
    }

    /// Draw `Z_dt` for the stable part alone.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        let scale = if self.is_cauchy() { self.scale * dt } else { self.scale * dt.powf(1.0 / self.index) };
        sample_stable(self.index, scale, self.skew, rng) + self.shift * dt
    }
}

/// Chambers–Mallows–Stuck draw from `S_β(scale, skew, 0)`.
pub fn sample_stable<R: Rng + ?Sized>(beta: f64, scale: f64, skew: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w = -(1.0 - rng.random::<f64>()).ln();
    if is_cauchy(beta) {
        let p = FRAC_PI_2 + skew * v;
        let x = (2.0 / PI) * (p * v.tan() - skew * ((FRAC_PI_2 * w * v.cos()) / p).ln());
        scale * x + (2.0 / PI) * skew * scale * scale.ln()
    } else {
        let t = skew * (FRAC_PI_2 * beta).tan();
        let b = t.atan() / beta;
        let s = (1.0 + t * t).powf(0.5 / beta);
        let x = s * (beta * (v + b)).sin() / v.cos().powf(1.0 / beta)
            * ((v - beta * (v + b)).cos() / w).powf((1.0 - beta) / beta);
        scale * x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_mass_coefficients() {
        let c = StableConstants::new(1.0, 1.0, 0.0);
        assert!((c.c_plus - 1.0 / PI).abs() < 1e-15);
        assert!((c.c_minus - 1.0 / PI).abs() < 1e-15);
        assert_eq!(c.shift, 0.0);
    }

    #[test]
    fn symmetric_psi_is_real_power() {
        let c = StableConstants::new(1.5, 2.0, 0.0);
        let p = c.psi(0.7);
        assert!((p.re - (2.0f64 * 0.7).powf(1.5)).abs() < 1e-13);
        assert!(p.im.abs() < 1e-13);
    }

    #[test]
    fn one_sided_has_no_opposite_mass() {
        let c = StableConstants::new(0.5, 1.0, 1.0);
        assert_eq!(c.c_minus, 0.0);
        assert!(c.c_plus > 0.0);
    }
}
