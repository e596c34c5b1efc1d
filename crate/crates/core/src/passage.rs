//! First passage strictly above a level `a`: Monte Carlo hitting times with
//! creep/jump classification, and the Laplace transform `E e^{-θT_a}` for
//! drivers without positive jumps,
//!
//! ```text
//! E_x e^{-θT_a} = N(x)/N(a),   N(z) = ∫_0^∞ y^{θ/Q−1} exp{zy + g(y)} dy,
//! g(y) = −Q^{-1} ∫_1^y κ(u)/u du,   κ(u) = log E e^{uZ_1}.
//! ```

use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy::JumpKind;
use crate::occupation::mean_stderr;
use crate::ou::{coarse_warning_for, OuModel, Scheme, Stepper};
use crate::quad::Quadrature;
use crate::rng::SeedStreams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossedBy {
    Continuous,
    Jump,
}

/// One simulated path. Censored paths carry no time or values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassageRecord {
    pub path_id: u64,
    pub time: Option<f64>,
    /// `X_{T_a−}`
    pub pre: Option<f64>,
    /// `X_{T_a}`; equal to `a` for continuous crossings.
    pub at: Option<f64>,
    pub crossed_by: Option<CrossedBy>,
}

impl PassageRecord {
    pub fn censored(&self) -> bool {
        self.time.is_none()
    }

    pub fn overshoot(&self, a: f64) -> Option<f64> {
        self.at.map(|v| v - a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassageOptions {
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    /// Detect within-step crossings of the Gaussian part by the
    /// Brownian-bridge maximum law.
    pub bridge_correction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassageSummary {
    pub uncensored: usize,
    pub censoring_rate: f64,
    pub creep_fraction: f64,
    /// Overshoot quantiles at levels 0, .1, .25, .5, .75, .9, 1.
    pub overshoot_quantiles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassageResult {
    pub level: f64,
    pub start: f64,
    pub options: PassageOptions,
    pub records: Vec<PassageRecord>,
    pub summary: PassageSummary,
    pub warnings: Vec<String>,
}

pub const QUANTILE_LEVELS: [f64; 7] = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0];

/// Empirical quantile by linear interpolation of the sorted sample.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarise(a: f64, records: &[PassageRecord]) -> PassageSummary {
    let hit: Vec<&PassageRecord> = records.iter().filter(|r| !r.censored()).collect();
    let creep = hit.iter().filter(|r| r.crossed_by == Some(CrossedBy::Continuous)).count();
    let mut over: Vec<f64> = hit.iter().filter_map(|r| r.overshoot(a)).collect();
    over.sort_by(f64::total_cmp);
    let n = hit.len();
    PassageSummary {
        uncensored: n,
        censoring_rate: (records.len() - n) as f64 / records.len().max(1) as f64,
        creep_fraction: if n > 0 { creep as f64 / n as f64 } else { f64::NAN },
        overshoot_quantiles: QUANTILE_LEVELS.iter().map(|&p| quantile(&over, p)).collect(),
    }
}

impl PassageResult {
    /// CSV `path_id,T,pre,at,crossed_by,censored`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# level={} start={} horizon={} dt={}", self.level, self.start, self.options.horizon, self.options.dt)?;
        writeln!(w, "path_id,T,pre,at,crossed_by,censored")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let by = match r.crossed_by {
                Some(CrossedBy::Continuous) => "continuous",
                Some(CrossedBy::Jump) => "jump",
                None => "",
            };
            writeln!(w, "{},{},{},{},{},{}", r.path_id, opt(r.time), opt(r.pre), opt(r.at), by, r.censored())?;
        }
        Ok(())
    }

    /// Mean of `e^{-θT_a}` over all paths, with its standard error.
    /// Censored paths count as 0, which is low by at most `e^{-θ·horizon}`.
    pub fn laplace_mc(&self, theta: f64) -> (f64, f64) {
        let v: Vec<f64> = self.records.iter().map(|r| r.time.map_or(0.0, |t| (-theta * t).exp())).collect();
        mean_stderr(&v)
    }
}

/// Where a step first exceeds the level.
enum Crossing {
    Continuous(f64),
    Jump { time: f64, pre: f64, at: f64 },
}

/// Simulate one path until it first exceeds `a`.
fn passage_path<R: Rng + ?Sized>(
    stepper: &Stepper,
    q: f64,
    x0: f64,
    a: f64,
    opts: &PassageOptions,
    bridge_rate: f64,
    rng: &mut R,
) -> Option<Crossing> {
    let mut marks = Vec::new();
    let mut x = x0;
    let mut t = 0.0;
    let nominal = *stepper.nominal();
    while t < opts.horizon {
        let h = (opts.horizon - t).min(opts.dt);
        let c = if h == opts.dt { nominal } else { stepper.consts(h) };
        let next = stepper.step(&c, x, rng, &mut marks);
        if let Some(hit) = scan_step(stepper, q, t, h, x, next, &marks, a, opts.bridge_correction, bridge_rate, rng) {
            return Some(hit);
        }
        x = next;
        t += h;
    }
    None
}

/// Examine one step for a crossing, piece by piece.
#[allow(clippy::too_many_arguments)]
fn scan_step<R: Rng + ?Sized>(
    stepper: &Stepper,
    q: f64,
    t0: f64,
    h: f64,
    v0: f64,
    v1: f64,
    marks: &[(f64, f64)],
    a: f64,
    bridge: bool,
    bridge_rate: f64,
    rng: &mut R,
) -> Option<Crossing> {
    let exact = stepper.scheme() == Scheme::Exact;
    let disc = |d: f64| if exact { (-q * d).exp() } else { 1.0 };
    let end_cont = v1 - marks.iter().map(|&(u, j)| j * disc(h - u)).sum::<f64>();
    let cont = |s: f64| v0 + (end_cont - v0) * s / h;
    let check = |sa: f64, sb: f64, va: f64, vb: f64, rng: &mut R| -> Option<f64> {
        if vb > a {
            let w = if vb > va { (a - va) / (vb - va) } else { 0.0 };
            return Some(t0 + sa + w.clamp(0.0, 1.0) * (sb - sa));
        }
        if bridge && bridge_rate > 0.0 && sb > sa {
            let var = bridge_rate * stepper.gaussian_time(sb - sa);
            let p = (-2.0 * (a - va) * (a - vb) / var).exp();
            if rng.random::<f64>() < p {
                return Some(t0 + 0.5 * (sa + sb));
            }
        }
        None
    };
    let (mut sa, mut va) = (0.0, v0);
    for (j, &(u, size)) in marks.iter().enumerate() {
        let before = cont(u) + marks[..j].iter().map(|&(p, s)| s * disc(u - p)).sum::<f64>();
        if let Some(time) = check(sa, u, va, before, rng) {
            return Some(Crossing::Continuous(time));
        }
        let after = before + size;
        if after > a {
            return Some(Crossing::Jump { time: t0 + u, pre: before, at: after });
        }
        sa = u;
        va = after;
    }
    check(sa, h, va, v1, rng).map(Crossing::Continuous)
}

/// Monte Carlo first passage above `a > x0`. Path `k` uses stream `k`.
pub fn first_passage_mc(model: &OuModel, a: f64, opts: PassageOptions, streams: SeedStreams) -> Result<PassageResult> {
    let x0 = model.x0();
    if !(a.is_finite() && a > x0) {
        return Err(Error::invalid(format!("level a = {a} must exceed the start x0 = {x0}")));
    }
    if !(opts.horizon.is_finite() && opts.horizon > 0.0 && opts.dt > 0.0 && opts.dt <= opts.horizon) {
        return Err(Error::invalid("need 0 < dt <= horizon"));
    }
    if opts.paths == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    let stepper = Stepper::new(model, opts.dt, Scheme::Exact)?;
    let bridge_rate = stepper.sampler().gaussian_variance_rate();
    let q = model.q();
    let records: Vec<PassageRecord> = (0..opts.paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = streams.stream(k).rng();
            match passage_path(&stepper, q, x0, a, &opts, bridge_rate, &mut rng) {
                None => PassageRecord { path_id: k, time: None, pre: None, at: None, crossed_by: None },
                Some(Crossing::Continuous(t)) => PassageRecord {
                    path_id: k,
                    time: Some(t),
                    pre: Some(a),
                    at: Some(a),
                    crossed_by: Some(CrossedBy::Continuous),
                },
                Some(Crossing::Jump { time, pre, at }) => PassageRecord {
                    path_id: k,
                    time: Some(time),
                    pre: Some(pre),
                    at: Some(at),
                    crossed_by: Some(CrossedBy::Jump),
                },
            }
        })
        .collect();
    let summary = summarise(a, &records);
    let mut warnings: Vec<String> = coarse_warning_for(model, opts.dt).into_iter().collect();
    if model.driver().jumps().support_sign().allows_positive() && matches!(model.driver().jumps().kind(), JumpKind::Stable { .. }) {
        warnings.push("stable jumps are not marked; their crossings are classified as continuous".into());
    }
    Ok(PassageResult { level: a, start: x0, options: opts, records, summary, warnings })
}

/// Creep/jump statistics of a passage experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CreepJumpSummary {
    pub uncensored: usize,
    pub creep_fraction: f64,
    /// Frequency of `{X_{T_a−} < a = X_{T_a}}`: a jump landing exactly on `a`.
    pub exact_landing_frequency: f64,
    pub overshoot_quantiles: Vec<f64>,
    pub min_jump_overshoot: Option<f64>,
}

pub const MIN_UNCENSORED: usize = 100;

pub fn creep_jump_statistics(result: &PassageResult) -> Result<CreepJumpSummary> {
    let a = result.level;
    let hit: Vec<&PassageRecord> = result.records.iter().filter(|r| !r.censored()).collect();
    if hit.len() < MIN_UNCENSORED {
        return Err(Error::refused(
            "sample size",
            format!("{} uncensored paths, need at least {MIN_UNCENSORED}", hit.len()),
        ));
    }
    let landing = hit
        .iter()
        .filter(|r| r.crossed_by == Some(CrossedBy::Jump) && r.pre.is_some_and(|p| p < a) && r.at == Some(a))
        .count();
    let min_jump_overshoot = hit
        .iter()
        .filter(|r| r.crossed_by == Some(CrossedBy::Jump))
        .filter_map(|r| r.overshoot(a))
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
    Ok(CreepJumpSummary {
        uncensored: hit.len(),
        creep_fraction: result.summary.creep_fraction,
        exact_landing_frequency: landing as f64 / hit.len() as f64,
        overshoot_quantiles: result.summary.overshoot_quantiles.clone(),
        min_jump_overshoot,
    })
}

/// Per-node quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeDiagnostics {
    pub theta: f64,
    /// Upper end of the truncated integration range (in the integration variable).
    pub cut_numerator: f64,
    pub cut_denominator: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HadjievTransform {
    pub level: f64,
    pub start: f64,
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub diagnostics: Vec<NodeDiagnostics>,
}

impl HadjievTransform {
    /// Shape checks of a Laplace transform on the grid: values in (0,1],
    /// non-increasing, log-convex. Returns the violations found.
    pub fn shape_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (t, v) in self.thetas.iter().zip(&self.values) {
            if !(*v > 0.0 && *v <= 1.0 + 1e-12) {
                out.push(format!("value {v} at θ = {t} outside (0,1]"));
            }
        }
        let mut idx: Vec<usize> = (0..self.thetas.len()).collect();
        idx.sort_by(|&i, &j| self.thetas[i].total_cmp(&self.thetas[j]));
        for w in idx.windows(2) {
            if self.values[w[1]] > self.values[w[0]] * (1.0 + 1e-10) {
                out.push(format!("increase between θ = {} and θ = {}", self.thetas[w[0]], self.thetas[w[1]]));
            }
        }
        for w in idx.windows(3) {
            let (t0, t1, t2) = (self.thetas[w[0]], self.thetas[w[1]], self.thetas[w[2]]);
            let (l0, l1, l2) = (self.values[w[0]].ln(), self.values[w[1]].ln(), self.values[w[2]].ln());
            let interp = l0 + (l2 - l0) * (t1 - t0) / (t2 - t0);
            if l1 > interp + 1e-9 * (1.0 + interp.abs()) {
                out.push(format!("log-convexity fails at θ = {t1}"));
            }
        }
        out
    }

    /// CSV `theta,value,mc_value,mc_stderr`; Monte Carlo columns are left
    /// empty without a passage result.
    pub fn write_csv<W: Write>(&self, mut w: W, mc: Option<&PassageResult>) -> io::Result<()> {
        writeln!(w, "# level={} start={}", self.level, self.start)?;
        writeln!(w, "theta,value,mc_value,mc_stderr")?;
        for (t, v) in self.thetas.iter().zip(&self.values) {
            match mc {
                Some(r) => {
                    let (m, s) = r.laplace_mc(*t);
                    writeln!(w, "{t},{v},{m},{s}")?;
                }
                None => writeln!(w, "{t},{v},,")?,
            }
        }
        Ok(())
    }
}

/// `g(y)`, closed form for Gaussian drivers, quadrature of `κ(u)/u`
/// otherwise.
struct Exponent<'a> {
    model: &'a OuModel,
    gaussian: Option<(f64, f64)>,
    quad: Quadrature,
}

impl<'a> Exponent<'a> {
    fn new(model: &'a OuModel) -> Result<Self> {
        let d = model.driver();
        if !d.jumps().is_none() && d.jumps().support_sign().allows_positive() {
            return Err(Error::refused(
                "non-positive jumps",
                "the Laplace-transform formula requires a driver without positive jumps",
            ));
        }
        let gaussian = d.jumps().is_none().then(|| (d.drift(), d.sigma()));
        Ok(Self { model, gaussian, quad: Quadrature::new(1e-13, 1e-11) })
    }

    fn g(&self, y: f64) -> Result<f64> {
        let q = self.model.q();
        if let Some((b, s)) = self.gaussian {
            // κ(u) = −bu + σ²u²/2
            return Ok(b * (y - 1.0) / q - s * s * (y * y - 1.0) / (4.0 * q));
        }
        let d = self.model.driver();
        let mut fail = None;
        let f = |u: f64| {
            if u == 0.0 {
                return 0.0;
            }
            match d.laplace_exponent(u) {
                Ok(k) => k / u,
                Err(e) => {
                    fail.get_or_insert(e);
                    f64::NAN
                }
            }
        };
        let r = self.quad.integrate(f, 1.0, y);
        if let Some(e) = fail {
            return Err(e);
        }
        Ok(-r?.value / q)
    }
}

const TAIL_DROP: f64 = 36.841_361_487_904_73; // −ln 1e-16
const MAX_REACH: f64 = 1e12;

/// `ln N(z) `, with the truncation point and error estimate.
fn log_n(exp: &Exponent<'_>, theta: f64, z: f64) -> Result<(f64, f64, f64)> {
    let q = exp.model.q();
    let p = theta / q;
    // integration variable v: y = v^{1/p} when p < 1, else y = v
    let sub = p < 1.0;
    let y_of = |v: f64| if sub { v.powf(1.0 / p) } else { v };
    let ell = |v: f64| -> Result<f64> {
        let y = y_of(v);
        let base = z * y + exp.g(y)?;
        Ok(if sub { base } else { (p - 1.0) * y.ln() + base })
    };
    // Scan a geometric grid for the peak and the tail cut.
    let mut grid = Vec::new();
    let mut v = 1e-6;
    while v < 1e-3 {
        grid.push(v);
        v *= 4.0;
    }
    let mut best = f64::NEG_INFINITY;
    let mut peak_at = 0.0;
    let mut cut = None;
    let mut v = 1e-3;
    let mut pts = Vec::new();
    for &g in &grid {
        pts.push((g, ell(g)?));
    }
    while v <= MAX_REACH {
        pts.push((v, ell(v)?));
        let (vv, l) = *pts.last().expect("non-empty");
        if l > best {
            best = l;
            peak_at = vv;
        }
        // past the peak, decreasing and far below it
        if vv > peak_at && l < best - TAIL_DROP {
            let prev = pts[pts.len() - 2].1;
            if l < prev {
                cut = Some(vv);
                break;
            }
        }
        v *= 1.25;
    }
    for &(vv, l) in &pts {
        if l > best {
            best = l;
            peak_at = vv;
        }
    }
    let Some(cut) = cut else {
        return Err(Error::refused(
            "convergent Laplace integral",
            format!("integrand exp(zy + g(y)) does not decay by y = {MAX_REACH:.0e} (z = {z}, θ = {theta})"),
        ));
    };
    let mut fail = None;
    let f = |v: f64| match ell(v) {
        Ok(l) => (l - best).exp(),
        Err(e) => {
            fail.get_or_insert(e);
            f64::NAN
        }
    };
    let quad = Quadrature::new(1e-15, 1e-11).with_max_segments(4000);
    let est = quad.integrate_pieces(f, &[0.0, peak_at.min(cut), cut]);
    if let Some(e) = fail {
        return Err(e);
    }
    let est = est?;
    if !(est.value > 0.0) {
        return Err(Error::Numerical(format!("Laplace integral vanished at θ = {theta}")));
    }
    let scale = if sub { (1.0 / p).ln() } else { 0.0 };
    Ok((best + est.value.ln() + scale, cut, est.error / est.value))
}

/// `E_{x0} e^{-θT_a}` for each `θ > 0`.
pub fn hadjiev_laplace(model: &OuModel, a: f64, thetas: &[f64]) -> Result<HadjievTransform> {
    let x = model.x0();
    if !(a.is_finite() && a >= x) {
        return Err(Error::invalid(format!("level a = {a} must be at least the start x0 = {x}")));
    }
    if thetas.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::invalid("θ values must be positive"));
    }
    let exp = Exponent::new(model)?;
    let nodes: Vec<Result<(f64, NodeDiagnostics)>> = thetas
        .par_iter()
        .map(|&theta| {
            if x == a {
                let d = NodeDiagnostics { theta, cut_numerator: 0.0, cut_denominator: 0.0, error_estimate: 0.0 };
                return Ok((1.0, d));
            }
            let (ln_num, cut_n, err_n) = log_n(&exp, theta, x)?;
            let (ln_den, cut_d, err_d) = log_n(&exp, theta, a)?;
            let d = NodeDiagnostics { theta, cut_numerator: cut_n, cut_denominator: cut_d, error_estimate: err_n + err_d };
            Ok(((ln_num - ln_den).exp(), d))
        })
        .collect();
    let mut values = Vec::with_capacity(thetas.len());
    let mut diagnostics = Vec::with_capacity(thetas.len());
    for n in nodes {
        let (v, d) = n?;
        values.push(v);
        diagnostics.push(d);
    }
    Ok(HadjievTransform { level: a, start: x, thetas: thetas.to_vec(), values, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{JumpLaw, JumpMeasure, LevyTriplet};

    fn bench() -> OuModel {
        OuModel::new(1.0, 0.0, LevyTriplet::gaussian(0.0, 2f64.sqrt()).unwrap()).unwrap()
    }

    #[test]
    fn start_on_level_gives_one() {
        let m = bench().starting_at(1.0).unwrap();
        let h = hadjiev_laplace(&m, 1.0, &[0.5, 2.0]).unwrap();
        assert_eq!(h.values, vec![1.0, 1.0]);
    }

    #[test]
    fn small_theta_near_one_and_shape() {
        let thetas = [1e-3, 0.1, 0.5, 1.0, 2.0, 5.0];
        let h = hadjiev_laplace(&bench(), 1.0, &thetas).unwrap();
        assert!(h.values[0] > 0.99, "{:?}", h.values);
        assert!(h.shape_violations().is_empty(), "{:?}", h.shape_violations());
    }

    #[test]
    fn substitution_agrees_across_q_ratio() {
        // θ just below and above Q must give nearly equal values
        let m = bench();
        let h = hadjiev_laplace(&m, 1.0, &[0.999_999, 1.000_001]).unwrap();
        assert!((h.values[0] - h.values[1]).abs() < 1e-5);
    }

    #[test]
    fn positive_jumps_refused() {
        let j = JumpMeasure::compound_poisson(1.0, JumpLaw::Exponential { rate: 1.0 }).unwrap();
        let m = OuModel::new(1.0, 0.0, LevyTriplet::new(0.0, 1.0, j).unwrap()).unwrap();
        assert!(hadjiev_laplace(&m, 1.0, &[1.0]).unwrap_err().is_refusal());
    }

    #[test]
    fn drift_away_from_level_is_not_convergent() {
        // pure negative jumps with net downward drift: tail exp((z − d/Q) y) with d < 0
        let j = JumpMeasure::compound_poisson(1.0, JumpLaw::NegExponential { rate: 1.0 }).unwrap();
        let drv = LevyTriplet::new(0.0, 0.0, j).unwrap().with_net_drift(-0.5).unwrap();
        let m = OuModel::new(1.0, 0.0, drv).unwrap();
        assert!(hadjiev_laplace(&m, 1.0, &[1.0]).unwrap_err().is_refusal());
    }

    #[test]
    fn zero_driver_censors_everything() {
        let m = OuModel::new(1.0, 0.0, LevyTriplet::zero()).unwrap();
        let opts = PassageOptions { horizon: 2.0, dt: 0.01, paths: 5, bridge_correction: true };
        let r = first_passage_mc(&m, 1.0, opts, SeedStreams::new(1)).unwrap();
        assert!(r.records.iter().all(|r| r.censored()));
        assert_eq!(r.summary.censoring_rate, 1.0);
    }
}
