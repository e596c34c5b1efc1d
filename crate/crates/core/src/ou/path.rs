//! Path simulation by the exact one-step recursion
//! `X_{t+h} = e^{-Qh} X_t + ∫_0^h e^{-(h-s)Q} dZ_s`.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::OuModel;
use crate::error::{Error, Result};
use crate::levy::{sample_stable, IncrementSampler, StableConstants};
use crate::rng::{SeedStreams, StreamId};

/// Time-stepping scheme. `Euler` exists only for comparison studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Exact,
    Euler,
}

/// A jump of the driver at `time`, before discounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpMark {
    pub time: f64,
    pub size: f64,
}

/// One piece of the reconstructed path inside a grid step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    /// Continuous motion, linear between the end values.
    Drift { t0: f64, t1: f64, v0: f64, v1: f64 },
    Jump { time: f64, before: f64, after: f64 },
}

/// Constants of one step of length `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConsts {
    pub h: f64,
    /// `e^{-Qh}`
    pub decay: f64,
    /// `(1 − e^{-Qh})/Q`
    pub a: f64,
    /// Standard deviation of the Gaussian part of the step noise.
    pub gauss_sd: f64,
    stable: Option<(f64, f64)>,
}

/// One-step sampler for a fixed model.
#[derive(Debug, Clone)]
pub struct Stepper {
    q: f64,
    scheme: Scheme,
    sampler: IncrementSampler,
    stable: Option<StableConstants>,
    nominal: StepConsts,
}

impl Stepper {
    pub fn new(model: &OuModel, dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        let sampler = IncrementSampler::new(model.driver())?;
        let stable = sampler.stable().copied();
        let mut s = Self { q: model.q(), scheme, sampler, stable, nominal: StepConsts::zero() };
        s.nominal = s.consts(dt);
        Ok(s)
    }

    pub fn sampler(&self) -> &IncrementSampler {
        &self.sampler
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn nominal(&self) -> &StepConsts {
        &self.nominal
    }

    pub fn consts(&self, h: f64) -> StepConsts {
        let q = self.q;
        let decay = (-q * h).exp();
        let a = -(-q * h).exp_m1() / q;
        let var = self.sampler.gaussian_variance_rate() * self.gaussian_time(h);
        let stable = self.stable.map(|c| c.ou_increment_law(q, h));
        StepConsts { h, decay, a, gauss_sd: var.sqrt(), stable }
    }

    /// `(1 − e^{-2Qh})/(2Q)`: the Gaussian variance of a step per unit
    /// variance rate (exact scheme), or `h` for Euler.
    pub fn gaussian_time(&self, h: f64) -> f64 {
        match self.scheme {
            Scheme::Exact => -(-2.0 * self.q * h).exp_m1() / (2.0 * self.q),
            Scheme::Euler => h,
        }
    }

    /// Advance `x` by one step. Jumps are appended to `marks` as
    /// `(offset in (0, h], size)`, sorted by offset.
    pub fn step<R: Rng + ?Sized>(&self, c: &StepConsts, x: f64, rng: &mut R, marks: &mut Vec<(f64, f64)>) -> f64 {
        marks.clear();
        let h = c.h;
        let mut next = match self.scheme {
            Scheme::Exact => c.decay * x + self.sampler.drift_rate() * c.a,
            Scheme::Euler => x - self.q * x * h + self.sampler.drift_rate() * h,
        };
        if c.gauss_sd > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            next += c.gauss_sd * z;
        }
        if let Some(st) = &self.stable {
            next += match (self.scheme, c.stable) {
                (Scheme::Exact, Some((scale, loc))) => sample_stable(st.index, scale, st.skew, rng) + loc,
                _ => st.sample_increment(h, rng),
            };
        }
        let n = self.sampler.sample_jump_count(h, rng);
        for _ in 0..n {
            let u = h * (1.0 - rng.random::<f64>());
            let j = self.sampler.sample_jump(rng);
            marks.push((u, j));
        }
        if n > 1 {
            marks.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        for &(u, j) in marks.iter() {
            next += match self.scheme {
                Scheme::Exact => j * (-self.q * (h - u)).exp(),
                Scheme::Euler => j,
            };
        }
        next
    }
}

impl StepConsts {
    fn zero() -> Self {
        Self { h: 0.0, decay: 1.0, a: 0.0, gauss_sd: 0.0, stable: None }
    }
}

/// A simulated path on a grid with its jump marks and provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Driver jumps, sorted by time.
    pub jumps: Vec<JumpMark>,
    /// `jumps[step_start[k]..step_start[k+1]]` fall in `(grid[k], grid[k+1]]`;
    /// empty when the path has no jumps.
    #[serde(skip)]
    step_start: Vec<usize>,
    pub stream: StreamId,
    pub dt: f64,
    pub q: f64,
    /// Standard deviation rate of the Gaussian part (including any Gaussian
    /// stand-in for small jumps).
    pub sigma: f64,
    pub scheme: Scheme,
    pub warnings: Vec<String>,
}

impl SamplePath {
    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn final_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn step_jumps(&self, k: usize) -> &[JumpMark] {
        if self.step_start.is_empty() {
            &[]
        } else {
            &self.jumps[self.step_start[k]..self.step_start[k + 1]]
        }
    }

    /// Reconstruct step `k` as linear pieces split at the jump marks. The
    /// continuous part is interpolated linearly after removing the
    /// discounted jumps from the end value.
    pub fn pieces(&self, k: usize, out: &mut Vec<Piece>) {
        out.clear();
        let (t0, t1) = (self.grid[k], self.grid[k + 1]);
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        let marks = self.step_jumps(k);
        if marks.is_empty() {
            out.push(Piece::Drift { t0, t1, v0, v1 });
            return;
        }
        let q = self.q;
        let disc = |dt: f64| if self.scheme == Scheme::Exact { (-q * dt).exp() } else { 1.0 };
        let end_cont = v1 - marks.iter().map(|m| m.size * disc(t1 - m.time)).sum::<f64>();
        let cont = |s: f64| v0 + (end_cont - v0) * (s - t0) / (t1 - t0);
        let (mut ta, mut va) = (t0, v0);
        for (j, m) in marks.iter().enumerate() {
            let before = cont(m.time) + marks[..j].iter().map(|p| p.size * disc(m.time - p.time)).sum::<f64>();
            out.push(Piece::Drift { t0: ta, t1: m.time, v0: va, v1: before });
            out.push(Piece::Jump { time: m.time, before, after: before + m.size });
            ta = m.time;
            va = before + m.size;
        }
        out.push(Piece::Drift { t0: ta, t1, v0: va, v1 });
    }

    /// CSV with `time,value` columns, preceded by `#` metadata lines.
    pub fn write_csv<W: Write>(&self, mut w: W, model_hash: &str) -> io::Result<()> {
        writeln!(w, "# seed={} stream={}", self.stream.root_seed, self.stream.stream)?;
        writeln!(w, "# dt={} q={} scheme={:?}", self.dt, self.q, self.scheme)?;
        writeln!(w, "# model_hash={model_hash}")?;
        for msg in &self.warnings {
            writeln!(w, "# warning: {msg}")?;
        }
        writeln!(w, "time,value")?;
        for (t, v) in self.grid.iter().zip(&self.values) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }

    /// Jump marks as CSV `time,size`.
    pub fn write_jumps_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,size")?;
        for m in &self.jumps {
            writeln!(w, "{},{}", m.time, m.size)?;
        }
        Ok(())
    }
}

/// Grid `0, dt, 2dt, …, horizon` (last step possibly shorter).
pub(crate) fn time_grid(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
    }
    if !(dt.is_finite() && dt > 0.0 && dt <= horizon * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("dt must lie in (0, horizon], got {dt}")));
    }
    let ratio = horizon / dt;
    let n = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) { ratio.round() } else { ratio.ceil() } as usize;
    let n = n.max(1);
    let mut grid: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    grid.push(horizon);
    Ok(grid)
}

pub fn coarse_warning_for(model: &OuModel, dt: f64) -> Option<String> {
    (dt * model.q() > 1.0).then(|| format!("dt·Q = {:.3} > 1: grid is coarse relative to the mean-reversion time", dt * model.q()))
}

/// Simulate one path with the exact scheme.
pub fn simulate_path(model: &OuModel, horizon: f64, dt: f64, stream: StreamId) -> Result<SamplePath> {
    simulate_path_with(model, horizon, dt, stream, Scheme::Exact)
}

pub fn simulate_path_with(model: &OuModel, horizon: f64, dt: f64, stream: StreamId, scheme: Scheme) -> Result<SamplePath> {
    let grid = time_grid(horizon, dt)?;
    let stepper = Stepper::new(model, dt, scheme)?;
    Ok(run(model, &stepper, grid, stream))
}

fn run(model: &OuModel, stepper: &Stepper, grid: Vec<f64>, stream: StreamId) -> SamplePath {
    let dt = stepper.nominal().h;
    let mut rng = stream.rng();
    let n = grid.len();
    let mut values = Vec::with_capacity(n);
    let mut jumps = Vec::new();
    let mut step_start = Vec::new();
    let mut tracking = false;
    let mut marks = Vec::new();
    let x0 = model.x0();
    let q = model.q();
    // Exact scheme: X_t = e^{-Qt} x0 + Y_t with Y_0 = 0, so the
    // deterministic part is exact at every grid time.
    let mut y = match stepper.scheme() {
        Scheme::Exact => 0.0,
        Scheme::Euler => x0,
    };
    values.push(x0);
    for k in 0..n - 1 {
        let h = grid[k + 1] - grid[k];
        let c = if (h - dt).abs() <= 1e-12 * dt { *stepper.nominal() } else { stepper.consts(h) };
        y = stepper.step(&c, y, &mut rng, &mut marks);
        if !marks.is_empty() && !tracking {
            tracking = true;
            step_start = vec![0; k];
        }
        if tracking {
            jumps.extend(marks.iter().map(|&(u, s)| JumpMark { time: grid[k] + u, size: s }));
            step_start.push(jumps.len());
        }
        values.push(match stepper.scheme() {
            Scheme::Exact => (-q * grid[k + 1]).exp() * x0 + y,
            Scheme::Euler => y,
        });
    }
    if tracking {
        // entries so far are step ends; prepend the start of step 0
        step_start.insert(0, 0);
    }
    let warnings = coarse_warning_for(model, dt).into_iter().collect();
    let sigma = stepper.sampler().gaussian_variance_rate().sqrt();
    SamplePath { grid, values, jumps, step_start, stream, dt, q, sigma, scheme: stepper.scheme(), warnings }
}

/// Simulate `count` paths in parallel, path `k` on stream `k` of `streams`.
/// The output does not depend on the thread count.
pub fn simulate_paths(
    model: &OuModel,
    horizon: f64,
    dt: f64,
    streams: SeedStreams,
    count: usize,
) -> Result<Vec<SamplePath>> {
    let grid = time_grid(horizon, dt)?;
    let stepper = Stepper::new(model, dt, Scheme::Exact)?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|k| run(model, &stepper, grid.clone(), streams.stream(k)))
        .collect())
}
