//! Characteristic functions of the transition and invariant laws,
//!
//! ```text
//! φ_{P(t,x,·)}(θ) = exp{i x e^{-tQ} θ − ∫_0^t ψ(e^{-sQ}θ) ds},
//! φ_F(θ)          = exp{−∫_0^∞ ψ(e^{-sQ}θ) ds},
//! ```
//!
//! and their inversion to densities by a trapezoidal Fourier sum.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ou::{invariant_triplet, OuModel};
use crate::quad::Quadrature;

/// Decay threshold for `|φ|` on the outer tenth of the grid.
pub const DECAY_THRESHOLD: f64 = 1e-8;
/// Largest number of non-negative nodes an adaptive grid may use.
pub const MAX_NODES: usize = 1 << 16;

const NODE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum LawTag {
    Transition { t: f64, x: f64 },
    Invariant,
}

/// Symmetric uniform grid `θ_j = jΔ`, `j = −n..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaGrid {
    pub spacing: f64,
    pub half_count: usize,
}

impl ThetaGrid {
    pub fn new(spacing: f64, half_count: usize) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid("θ spacing must be positive"));
        }
        Ok(Self { spacing, half_count })
    }

    /// Grid with spacing `Δ` reaching at least `cutoff`.
    pub fn with_cutoff(spacing: f64, cutoff: f64) -> Result<Self> {
        Self::new(spacing, (cutoff / spacing).ceil() as usize)
    }

    pub fn cutoff(&self) -> f64 {
        self.spacing * self.half_count as f64
    }

    pub fn len(&self) -> usize {
        2 * self.half_count + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.half_count as i64;
        (-n..=n).map(|j| j as f64 * self.spacing).collect()
    }
}

/// Characteristic-function values on a [`ThetaGrid`]. Values for `θ < 0`
/// are conjugates of those for `θ > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralGrid {
    pub grid: ThetaGrid,
    /// Values at `θ_j`, `j = 0..=n`.
    pub positive: Vec<Complex64>,
    /// Indices `j ≥ 0` where the exponent quadrature failed.
    pub flagged: Vec<usize>,
    pub tag: LawTag,
}

impl SpectralGrid {
    /// Value at `θ_j`, `j = −n..=n`.
    pub fn value(&self, j: i64) -> Complex64 {
        let v = self.positive[j.unsigned_abs() as usize];
        if j < 0 {
            v.conj()
        } else {
            v
        }
    }

    pub fn nodes(&self) -> Vec<(f64, Complex64)> {
        let n = self.grid.half_count as i64;
        (-n..=n).map(|j| (j as f64 * self.grid.spacing, self.value(j))).collect()
    }

    /// Largest `|φ|` on the outer tenth of the grid.
    pub fn outer_max(&self) -> f64 {
        let n = self.positive.len();
        let start = (n as f64 * 0.9).floor() as usize;
        self.positive[start.min(n - 1)..].iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# law={:?} spacing={} cutoff={}", self.tag, self.grid.spacing, self.grid.cutoff())?;
        writeln!(w, "theta,re,im")?;
        for (t, v) in self.nodes() {
            writeln!(w, "{t},{},{}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Evaluates one characteristic function.
#[derive(Debug, Clone)]
pub struct CfEvaluator {
    model: OuModel,
    tag: LawTag,
    quad: Quadrature,
}

impl CfEvaluator {
    pub fn transition(model: &OuModel, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::invalid(format!("t must be positive, got {t}")));
        }
        Ok(Self { model: model.clone(), tag: LawTag::Transition { t, x: model.x0() }, quad: node_quad() })
    }

    /// Refuses when the invariant law does not exist or its existence is
    /// undecided.
    pub fn invariant(model: &OuModel) -> Result<Self> {
        let inv = invariant_triplet(model)?;
        if !inv.exists() {
            return Err(Error::refused(
                "log-moment condition",
                format!("invariant law unavailable (log-moment status {:?})", inv.status),
            ));
        }
        Ok(Self { model: model.clone(), tag: LawTag::Invariant, quad: node_quad() })
    }

    pub fn tag(&self) -> LawTag {
        self.tag
    }

    /// `∫_0^t ψ(e^{-sQ}θ) ds` (t possibly infinite).
    pub fn exponent_integral(&self, theta: f64) -> Result<Complex64> {
        if theta == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let q = self.model.q();
        let driver = self.model.driver();
        let mut failure = None;
        let g = |s: f64| match driver.psi(theta * (-s * q).exp()) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                Complex64::new(f64::NAN, 0.0)
            }
        };
        let est = match self.tag {
            LawTag::Transition { t, .. } => self.quad.integrate(g, 0.0, t),
            LawTag::Invariant => self.quad.integrate_to_infinity(g, 0.0),
        };
        match (est, failure) {
            (_, Some(e)) => Err(e),
            (Ok(e), None) => Ok(e.value),
            (Err(e), None) => Err(e.into()),
        }
    }

    pub fn value(&self, theta: f64) -> Result<Complex64> {
        let shift = match self.tag {
            LawTag::Transition { t, x } => x * (-t * self.model.q()).exp() * theta,
            LawTag::Invariant => 0.0,
        };
        let e = self.exponent_integral(theta)?;
        Ok((Complex64::new(0.0, shift) - e).exp())
    }

    /// Evaluate on `θ_j`, `j = 0..=n`; failed nodes are flagged, not fatal.
    pub fn evaluate(&self, grid: ThetaGrid) -> SpectralGrid {
        let mut s = SpectralGrid { grid, positive: Vec::new(), flagged: Vec::new(), tag: self.tag };
        self.extend(&mut s, grid.half_count);
        s
    }

    fn extend(&self, s: &mut SpectralGrid, half_count: usize) {
        let start = s.positive.len();
        let dt = s.grid.spacing;
        let fresh: Vec<Result<Complex64>> =
            (start..=half_count).into_par_iter().map(|j| self.value(j as f64 * dt)).collect();
        for (k, r) in fresh.into_iter().enumerate() {
            match r {
                Ok(v) => s.positive.push(v),
                Err(_) => {
                    s.flagged.push(start + k);
                    s.positive.push(Complex64::new(f64::NAN, f64::NAN));
                }
            }
        }
        s.grid.half_count = half_count;
    }
}

fn node_quad() -> Quadrature {
    Quadrature::new(NODE_TOL / 10.0, 1e-12).with_max_segments(4000)
}

/// `φ_{P(t,x,·)}` on a grid.
pub fn transition_cf(model: &OuModel, t: f64, grid: ThetaGrid) -> Result<SpectralGrid> {
    Ok(CfEvaluator::transition(model, t)?.evaluate(grid))
}

/// `φ_F` on a grid; refuses without an invariant law.
pub fn invariant_cf(model: &OuModel, grid: ThetaGrid) -> Result<SpectralGrid> {
    Ok(CfEvaluator::invariant(model)?.evaluate(grid))
}

/// Density values on a set of points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityTable {
    pub y: Vec<f64>,
    /// Negative values clipped to zero.
    pub density: Vec<f64>,
    /// Unclipped inversion output.
    pub raw: Vec<f64>,
    /// Trapezoidal mass of the raw values over the y-points.
    pub total_mass: f64,
    /// `max(0, −min raw)`.
    pub max_negativity: f64,
    pub tag: LawTag,
    pub cutoff: f64,
    pub spacing: f64,
}

impl DensityTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# law={:?} cutoff={} spacing={}", self.tag, self.cutoff, self.spacing)?;
        writeln!(w, "# total_mass={} max_negativity={}", self.total_mass, self.max_negativity)?;
        writeln!(w, "y,density")?;
        for (y, d) in self.y.iter().zip(&self.density) {
            writeln!(w, "{y},{d}")?;
        }
        Ok(())
    }
}

/// Estimated `θ` at which `|φ|` falls below the threshold, from a power-law
/// fit of the outer half of the grid.
fn required_cutoff(s: &SpectralGrid) -> f64 {
    let n = s.positive.len();
    let pts: Vec<(f64, f64)> = (n / 2..n)
        .filter(|&j| j > 0 && s.positive[j].norm() > 0.0)
        .map(|j| ((j as f64 * s.grid.spacing).ln(), s.positive[j].norm().ln()))
        .collect();
    if pts.len() < 4 {
        return f64::INFINITY;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    if slope > -0.1 {
        return f64::INFINITY;
    }
    let cutoff = s.grid.cutoff();
    cutoff * (DECAY_THRESHOLD / s.outer_max()).powf(1.0 / slope)
}

/// Invert a grid at the points `ys` by
/// `p(y) = Δ/2π Σ_j φ(θ_j) e^{-iθ_j y}`.
pub fn invert_to_density(grid: &SpectralGrid, ys: &[f64]) -> Result<DensityTable> {
    if !grid.flagged.is_empty() {
        return Err(Error::FlaggedNodes(grid.flagged.len()));
    }
    let outer = grid.outer_max();
    if !(outer < DECAY_THRESHOLD) {
        return Err(Error::HeavyTailedCf {
            cutoff: grid.grid.cutoff(),
            threshold: DECAY_THRESHOLD,
            required: required_cutoff(grid),
        });
    }
    let d = grid.grid.spacing;
    let raw: Vec<f64> = ys
        .par_iter()
        .map(|&y| {
            // rotate e^{-iθ_j y} by recurrence, resynchronising periodically
            let step = Complex64::from_polar(1.0, -d * y);
            let mut rot = Complex64::new(1.0, 0.0);
            let mut acc = 0.0;
            for (j, v) in grid.positive.iter().enumerate().skip(1) {
                rot = if j % 64 == 0 { Complex64::from_polar(1.0, -d * y * j as f64) } else { rot * step };
                acc += (v * rot).re;
            }
            d / (2.0 * PI) * (grid.positive[0].re + 2.0 * acc)
        })
        .collect();
    let density: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let max_negativity = raw.iter().fold(0.0f64, |m, v| m.max(-v));
    let total_mass = ys.windows(2).zip(raw.windows(2)).map(|(y, p)| 0.5 * (y[1] - y[0]) * (p[0] + p[1])).sum();
    Ok(DensityTable {
        y: ys.to_vec(),
        density,
        raw,
        total_mass,
        max_negativity,
        tag: grid.tag,
        cutoff: grid.grid.cutoff(),
        spacing: d,
    })
}

/// Choose a grid for `ys` and evaluate the cf on it.
///
/// Spacing: `Δ = 2π/L` with the alias period `L` covering the y-range
/// around the law's centre plus 80 scale units. Cutoff: the smallest
/// `2^k·π/Δy` (k integer) at which `|φ|` has decayed below
/// [`DECAY_THRESHOLD`] on the outer tenth of the grid.
pub fn adaptive_grid(eval: &CfEvaluator, ys: &[f64]) -> Result<SpectralGrid> {
    if ys.is_empty() || ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("y-points must be finite and non-empty"));
    }
    let (centre, scale) = locate(eval)?;
    let reach = ys.iter().map(|y| (y - centre).abs()).fold(0.0, f64::max);
    let period = 2.0 * reach + 80.0 * scale;
    let spacing = 2.0 * PI / period;
    let dy = if ys.len() > 1 {
        ys.windows(2).map(|w| (w[1] - w[0]).abs()).filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min)
    } else {
        scale
    };
    let dy = if dy.is_finite() { dy } else { scale };
    // smallest 2^k π/Δy reaching past the half-decay point
    let base = PI / dy;
    let mut cutoff = base * 2f64.powi((1.0 / (scale * base)).log2().floor() as i32);
    let mut s = eval.evaluate(ThetaGrid::new(spacing, 0)?);
    loop {
        let n = (cutoff / spacing).ceil() as usize;
        if n > MAX_NODES {
            return Err(Error::HeavyTailedCf {
                cutoff: s.grid.cutoff(),
                threshold: DECAY_THRESHOLD,
                required: required_cutoff(&s),
            });
        }
        eval.extend(&mut s, n.max(10));
        if !s.flagged.is_empty() {
            return Err(Error::FlaggedNodes(s.flagged.len()));
        }
        if s.outer_max() < DECAY_THRESHOLD {
            return Ok(s);
        }
        cutoff *= 2.0;
    }
}

/// Centre (from the phase slope at the origin) and scale (inverse of the
/// half-decay frequency).
fn locate(eval: &CfEvaluator) -> Result<(f64, f64)> {
    let mut th = 1e-3;
    let centre = loop {
        let v = eval.value(th)?;
        if v.norm() > 0.5 || th < 1e-9 {
            break v.arg() / th;
        }
        th *= 0.1;
    };
    let mut lo = 0.0;
    let mut hi = 1e-3;
    while eval.value(hi)?.norm() > 0.5 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            // |φ| never halves: a (near-)degenerate law
            return Ok((centre, 1e-8));
        }
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if eval.value(mid)?.norm() > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((centre, 1.0 / hi))
}

/// Density of `P(t, x0, ·)` at `ys` on an adaptive grid.
pub fn transition_density(model: &OuModel, t: f64, ys: &[f64]) -> Result<DensityTable> {
    let eval = CfEvaluator::transition(model, t)?;
    invert_to_density(&adaptive_grid(&eval, ys)?, ys)
}

/// Density of the invariant law at `ys` on an adaptive grid.
pub fn invariant_density(model: &OuModel, ys: &[f64]) -> Result<DensityTable> {
    let eval = CfEvaluator::invariant(model)?;
    invert_to_density(&adaptive_grid(&eval, ys)?, ys)
}

/// `n` equally spaced points on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyTriplet;

    fn std_normal_model() -> OuModel {
        OuModel::new(1.0, 0.0, LevyTriplet::gaussian(0.0, 2f64.sqrt()).unwrap()).unwrap()
    }

    #[test]
    fn zero_node_is_one() {
        let g = invariant_cf(&std_normal_model(), ThetaGrid::new(0.1, 5).unwrap()).unwrap();
        assert_eq!(g.value(0), Complex64::new(1.0, 0.0));
        assert_eq!(g.value(-3), g.value(3).conj());
    }

    #[test]
    fn invariant_gaussian_cf() {
        let eval = CfEvaluator::invariant(&std_normal_model()).unwrap();
        for th in [0.3, 1.0, 2.5] {
            let v = eval.value(th).unwrap();
            assert!((v.re - (-0.5 * th * th as f64).exp()).abs() < 1e-12);
            assert!(v.im.abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_transition_density() {
        let m = std_normal_model().starting_at(1.0).unwrap();
        let t = 2f64.ln();
        let ys = linspace(-3.0, 4.0, 71);
        let tab = transition_density(&m, t, &ys).unwrap();
        let (mu, var) = (0.5, 0.75);
        for (y, p) in ys.iter().zip(&tab.raw) {
            let exact = (-(y - mu) * (y - mu) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
            assert!((p - exact).abs() < 1e-9, "{y}: {p} vs {exact}");
        }
    }
}
