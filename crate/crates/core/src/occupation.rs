//! Occupation times and local-time estimates from sample paths.
//!
//! `L_ε(x,t) = (1/2ε) ∫_0^t 1{|X_s − x| < ε} ds`, with the band time of each
//! grid step computed exactly for the piecewise-linear reconstruction of
//! the path (jumps are discontinuities, never interpolated across).

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ou::{check_existence_criterion, invariant_triplet, simulate_path, OuModel, Piece, SamplePath};
use crate::rng::SeedStreams;
use crate::spectral::invariant_density;

/// Default number of ε levels.
pub const DEFAULT_LEVELS: usize = 6;
/// Relative tolerance on the last two Cauchy diagnostics.
pub const DEFAULT_TOLERANCE: f64 = 0.25;

/// Time in `(x−ε, x+ε)` of the linear motion from `(t0,v0)` to `(t1,v1)`.
fn linear_band_time(t0: f64, t1: f64, v0: f64, v1: f64, x: f64, eps: f64) -> f64 {
    let dur = t1 - t0;
    if dur <= 0.0 {
        return 0.0;
    }
    let dv = v1 - v0;
    if dv == 0.0 {
        return if (v0 - x).abs() < eps { dur } else { 0.0 };
    }
    let a = (x - eps - v0) / dv;
    let b = (x + eps - v0) / dv;
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    (hi.min(1.0) - lo.max(0.0)).max(0.0) * dur
}

/// Band time of a piece clipped to `[t0, until]`.
fn piece_band_time(p: &Piece, x: f64, eps: f64, until: f64) -> f64 {
    match *p {
        Piece::Drift { t0, t1, v0, v1 } => {
            if until >= t1 {
                linear_band_time(t0, t1, v0, v1, x, eps)
            } else if until <= t0 {
                0.0
            } else {
                let ve = v0 + (v1 - v0) * (until - t0) / (t1 - t0);
                linear_band_time(t0, until, v0, ve, x, eps)
            }
        }
        Piece::Jump { .. } => 0.0,
    }
}

/// Cumulative band times `out[e][i] = ∫_0^{times[i]} 1{|X_s − x| < eps[e]} ds`.
/// `times` must be non-decreasing and within the path horizon.
pub fn band_times(path: &SamplePath, x: f64, eps: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    if eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::invalid("ε must be positive"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("times must be non-decreasing"));
    }
    let horizon = path.horizon();
    if let Some(&t) = times.last() {
        if t > horizon * (1.0 + 1e-12) {
            return Err(Error::invalid(format!("time {t} is beyond the path horizon {horizon}")));
        }
    }
    let mut out = vec![vec![0.0; times.len()]; eps.len()];
    let mut cum = vec![0.0; eps.len()];
    let mut next = times.partition_point(|&t| t <= 0.0);
    let mut pieces = Vec::with_capacity(4);
    for k in 0..path.steps() {
        if next >= times.len() {
            break;
        }
        let t1 = path.grid[k + 1];
        path.pieces(k, &mut pieces);
        while next < times.len() && times[next] < t1 {
            let tau = times[next];
            for (e, &ep) in eps.iter().enumerate() {
                out[e][next] = cum[e] + pieces.iter().map(|p| piece_band_time(p, x, ep, tau)).sum::<f64>();
            }
            next += 1;
        }
        for (e, &ep) in eps.iter().enumerate() {
            cum[e] += pieces.iter().map(|p| piece_band_time(p, x, ep, t1)).sum::<f64>();
        }
    }
    for i in next..times.len() {
        for e in 0..eps.len() {
            out[e][i] = cum[e];
        }
    }
    Ok(out)
}

/// `∫_0^t 1{|X_s − x| < ε} ds`.
pub fn occupation_time_in_band(path: &SamplePath, x: f64, eps: f64, t: f64) -> Result<f64> {
    Ok(band_times(path, x, &[eps], &[t])?[0][0])
}

/// `∫_s^t 1{|X_u − x| < ε} du`.
pub fn occupation_time_between(path: &SamplePath, x: f64, eps: f64, s: f64, t: f64) -> Result<f64> {
    if t < s {
        return Err(Error::invalid("window end precedes its start"));
    }
    let v = band_times(path, x, &[eps], &[s, t])?;
    Ok(v[0][1] - v[0][0])
}

/// Smallest usable ε for a path: `5·dt·(Q|x0| + σ)`.
pub fn resolution_bound(path: &SamplePath) -> f64 {
    5.0 * path.dt * (path.q * path.values[0].abs() + path.sigma)
}

/// `ε_k = ε_0 2^{-k}` with `ε_0` half the stationary standard deviation
/// (or of `X_horizon` when no stationary variance exists).
pub fn default_schedule(model: &OuModel, horizon: f64) -> Result<Vec<f64>> {
    let inv = invariant_triplet(model)?;
    let var = match inv.variance() {
        Ok(Some(v)) if v > 0.0 => Some(v),
        _ => None,
    };
    let var = match var {
        Some(v) => v,
        None => crate::ou::transition_triplet(model, horizon)?.variance()?.filter(|v| *v > 0.0).unwrap_or(1.0),
    };
    let e0 = 0.5 * var.sqrt();
    Ok((0..DEFAULT_LEVELS).map(|k| e0 * 0.5f64.powi(k as i32)).collect())
}

/// `L_ε(x, t)` over an ε-schedule and a list of times, with the Cauchy
/// diagnostic `d_k = max_t |L_{ε_k} − L_{ε_{k+1}}|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationEstimate {
    pub level: f64,
    pub times: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// `estimates[k][i] = L_{ε_k}(x, times[i])`
    pub estimates: Vec<Vec<f64>>,
    pub diagnostics: Vec<f64>,
    pub tolerance: f64,
    pub converged: bool,
}

impl OccupationEstimate {
    /// Long-format CSV `epsilon,t,estimate`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# level={} converged={} tolerance={}", self.level, self.converged, self.tolerance)?;
        let diag: Vec<String> = self.diagnostics.iter().map(|d| d.to_string()).collect();
        writeln!(w, "# diagnostics={}", diag.join(";"))?;
        writeln!(w, "epsilon,t,estimate")?;
        for (e, row) in self.epsilons.iter().zip(&self.estimates) {
            for (t, v) in self.times.iter().zip(row) {
                writeln!(w, "{e},{t},{v}")?;
            }
        }
        Ok(())
    }

    /// Whether the last `n` diagnostics decrease strictly.
    pub fn diagnostics_decrease(&self, n: usize) -> bool {
        let d = &self.diagnostics;
        d.len() >= n && d[d.len() - n..].windows(2).all(|w| w[1] < w[0])
    }
}

pub fn local_time_estimate(path: &SamplePath, x: f64, times: &[f64], schedule: &[f64]) -> Result<OccupationEstimate> {
    local_time_estimate_with(path, x, times, schedule, DEFAULT_TOLERANCE)
}

pub fn local_time_estimate_with(
    path: &SamplePath,
    x: f64,
    times: &[f64],
    schedule: &[f64],
    tolerance: f64,
) -> Result<OccupationEstimate> {
    if schedule.len() < 3 {
        return Err(Error::invalid("ε-schedule needs at least three levels"));
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("ε-schedule must be strictly decreasing"));
    }
    let bound = resolution_bound(path);
    let smallest = schedule[schedule.len() - 1];
    if smallest < bound {
        return Err(Error::refused(
            "grid resolution",
            format!("smallest ε = {smallest:.3e} is below the resolution bound {bound:.3e} (5·dt·(Q|x0|+σ))"),
        ));
    }
    let bands = band_times(path, x, schedule, times)?;
    let estimates: Vec<Vec<f64>> =
        bands.iter().zip(schedule).map(|(row, e)| row.iter().map(|b| b / (2.0 * e)).collect()).collect();
    let diagnostics: Vec<f64> = estimates
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let scale = estimates[estimates.len() - 1].iter().copied().fold(0.0, f64::max);
    let n = diagnostics.len();
    let converged = scale == 0.0 || diagnostics[n - 2..].iter().all(|&d| d <= tolerance * scale);
    Ok(OccupationEstimate {
        level: x,
        times: times.to_vec(),
        epsilons: schedule.to_vec(),
        estimates,
        diagnostics,
        tolerance,
        converged,
    })
}

/// Cauchy diagnostic in `L²(P)`: `max_t (mean over paths of
/// (L_{ε_k} − L_{ε_{k+1}})²)^{1/2}` for estimates sharing level, times and
/// schedule.
pub fn l2_diagnostics(estimates: &[OccupationEstimate]) -> Result<Vec<f64>> {
    let Some(first) = estimates.first() else {
        return Err(Error::invalid("no estimates"));
    };
    if estimates.iter().any(|e| e.epsilons != first.epsilons || e.times != first.times) {
        return Err(Error::invalid("estimates must share times and ε-schedule"));
    }
    let n = estimates.len() as f64;
    let levels = first.epsilons.len();
    Ok((0..levels - 1)
        .map(|k| {
            (0..first.times.len())
                .map(|i| {
                    let ms: f64 =
                        estimates.iter().map(|e| (e.estimates[k][i] - e.estimates[k + 1][i]).powi(2)).sum::<f64>() / n;
                    ms.sqrt()
                })
                .fold(0.0, f64::max)
        })
        .collect())
}

/// `L_ε(x,t)/t` averaged over independent paths, against the invariant
/// density `f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicEstimate {
    pub level: f64,
    pub epsilon: f64,
    pub horizons: Vec<f64>,
    pub ratios: Vec<f64>,
    pub stderr: Vec<f64>,
    pub f_ref: f64,
    pub paths: usize,
}

impl ErgodicEstimate {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# level={} epsilon={} paths={}", self.level, self.epsilon, self.paths)?;
        writeln!(w, "t,ratio,stderr,f_ref")?;
        for ((t, r), s) in self.horizons.iter().zip(&self.ratios).zip(&self.stderr) {
            writeln!(w, "{t},{r},{s},{}", self.f_ref)?;
        }
        Ok(())
    }
}

/// Mean and standard error, summed in index order.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Requires the local-time existence criterion and the log-moment
/// condition; refuses otherwise.
pub fn ergodic_ratio(
    model: &OuModel,
    x: f64,
    horizons: &[f64],
    eps: f64,
    paths: usize,
    dt: Option<f64>,
    streams: SeedStreams,
) -> Result<ErgodicEstimate> {
    let verdict = check_existence_criterion(model)?;
    if !verdict.holds() {
        return Err(Error::refused(
            "local-time existence criterion",
            format!("neither σ > 0 nor a power-law lower bound on the small jumps: {verdict:?}"),
        ));
    }
    let inv = invariant_triplet(model)?;
    if !inv.exists() {
        return Err(Error::refused("log-moment condition", format!("status {:?}", inv.status)));
    }
    if paths < 2 {
        return Err(Error::invalid("need at least two paths"));
    }
    if horizons.is_empty() || horizons.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::invalid("horizons must be positive"));
    }
    let mut hs = horizons.to_vec();
    hs.sort_by(f64::total_cmp);
    let horizon = hs[hs.len() - 1];
    let dt = dt.unwrap_or_else(|| model.default_dt());
    let f_ref = invariant_density(model, &[x])?.density[0];
    let per_path: Vec<Vec<f64>> = (0..paths as u64)
        .into_par_iter()
        .map(|k| {
            let path = simulate_path(model, horizon, dt, streams.stream(k))?;
            let b = band_times(&path, x, &[eps], &hs)?;
            Ok(b[0].iter().zip(&hs).map(|(v, t)| v / (2.0 * eps * t)).collect())
        })
        .collect::<Result<_>>()?;
    let mut ratios = Vec::new();
    let mut stderr = Vec::new();
    for i in 0..hs.len() {
        let col: Vec<f64> = per_path.iter().map(|r| r[i]).collect();
        let (m, s) = mean_stderr(&col);
        ratios.push(m);
        stderr.push(s);
    }
    Ok(ErgodicEstimate { level: x, epsilon: eps, horizons: hs, ratios, stderr, f_ref, paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyTriplet;
    use crate::rng::StreamId;

    fn decay_path(x0: f64, horizon: f64, dt: f64) -> SamplePath {
        let m = OuModel::new(1.0, x0, LevyTriplet::zero()).unwrap();
        simulate_path(&m, horizon, dt, StreamId::new(1, 0)).unwrap()
    }

    #[test]
    fn constant_path_in_and_out_of_band() {
        let p = decay_path(0.0, 3.0, 0.01);
        assert!((occupation_time_in_band(&p, 0.0, 0.1, 3.0).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(occupation_time_in_band(&p, 5.0, 1.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn decay_through_level_one() {
        // X_t = 2e^{-t} crosses 1 with speed 1, so L_ε(1, t) → 1
        let p = decay_path(2.0, 2.0, 1e-4);
        for eps in [1e-2, 1e-3] {
            let l = occupation_time_in_band(&p, 1.0, eps, 2.0).unwrap() / (2.0 * eps);
            assert!((l - 1.0).abs() < 2.0 * eps, "{eps}: {l}");
        }
    }

    #[test]
    fn zero_driver_not_converged() {
        let p = decay_path(0.0, 1.0, 1e-3);
        let sched: Vec<f64> = (0..6).map(|k| 0.5 * 0.5f64.powi(k)).collect();
        let est = local_time_estimate(&p, 0.0, &[0.5, 1.0], &sched).unwrap();
        assert!(!est.converged);
        assert!((est.estimates[5][1] - 1.0 / (2.0 * sched[5])).abs() < 1e-9);
    }

    #[test]
    fn resolution_refusal() {
        let m = OuModel::new(1.0, 0.0, LevyTriplet::gaussian(0.0, 1.0).unwrap()).unwrap();
        let p = simulate_path(&m, 1.0, 0.01, StreamId::new(3, 0)).unwrap();
        let err = local_time_estimate(&p, 0.0, &[1.0], &[0.1, 0.05, 0.01]).unwrap_err();
        assert!(err.is_refusal());
    }
}
