use oulevy::levy::{JumpLaw, JumpMeasure, LevelDensity, LevyTriplet, SupportSign};
use oulevy::ou::{invariant_triplet, simulate_path, simulate_path_with, transition_triplet, OuModel, Scheme};
use oulevy::rng::SeedStreams;
use proptest::prelude::*;

fn cp_model(x0: f64) -> OuModel {
    let j = JumpMeasure::compound_poisson(2.0, JumpLaw::Exponential { rate: 1.5 }).unwrap();
    OuModel::new(0.7, x0, LevyTriplet::new(0.4, 0.6, j).unwrap()).unwrap()
}

/// Values `X_t` from single exact steps of length `t`.
fn one_step_draws(model: &OuModel, t: f64, n: usize, seed: u64) -> Vec<f64> {
    let streams = SeedStreams::new(seed);
    (0..n as u64).map(|k| simulate_path(model, t, t, streams.stream(k)).unwrap().final_value()).collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m, v, (v / n).sqrt(), ((m4 - v * v) / n).sqrt())
}

fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn moments_match_transition_law() {
    let model = cp_model(1.5);
    for t in [0.1, 1.0, 5.0] {
        let law = transition_triplet(&model, t).unwrap();
        let xs = one_step_draws(&model, t, 40_000, 21);
        let (m, v, se_m, se_v) = mean_var(&xs);
        let em = law.mean().unwrap().unwrap();
        let ev = law.variance().unwrap().unwrap();
        assert!((m - em).abs() < 4.0 * se_m, "t={t}: mean {m} vs {em}");
        assert!((v - ev).abs() < 4.0 * se_v, "t={t}: var {v} vs {ev}");
    }
}

#[test]
fn mean_has_closed_form() {
    // E X_t = e^{-tQ} x + (1 - e^{-tQ}) E Z_1 / Q
    let model = cp_model(-0.8);
    let ez = model.driver().mean().unwrap().unwrap();
    for t in [0.2, 1.0, 7.0] {
        let e = (-t * model.q()).exp();
        let expected = e * model.x0() + (1.0 - e) * ez / model.q();
        let got = transition_triplet(&model, t).unwrap().mean().unwrap().unwrap();
        assert!((got - expected).abs() < 1e-9, "t={t}: {got} vs {expected}");
    }
}

#[test]
fn semigroup_in_law() {
    // X_2 in one exact step against two steps of length 1
    let model = cp_model(0.5);
    let n = 20_000;
    let mut one = one_step_draws(&model, 2.0, n, 5);
    let streams = SeedStreams::new(6);
    let mut two: Vec<f64> =
        (0..n as u64).map(|k| simulate_path(&model, 2.0, 1.0, streams.stream(k)).unwrap().final_value()).collect();
    let d = ks_statistic(&mut one, &mut two);
    // two-sample KS critical value at level 0.001
    let crit = 1.95 * (2.0 / n as f64).sqrt();
    assert!(d < crit, "KS {d} >= {crit}");
}

#[test]
fn zero_driver_decays_exactly() {
    let model = OuModel::new(1.3, 3.0, LevyTriplet::zero()).unwrap();
    let p = simulate_path(&model, 4.0, 0.01, SeedStreams::new(1).stream(0)).unwrap();
    for (t, x) in p.grid.iter().zip(&p.values) {
        assert!((x - 3.0 * (-1.3 * t).exp()).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn euler_scheme_is_biased_for_coarse_steps() {
    let model = OuModel::new(2.0, 1.0, LevyTriplet::zero()).unwrap();
    let exact = simulate_path_with(&model, 1.0, 0.25, SeedStreams::new(1).stream(0), Scheme::Exact).unwrap();
    let euler = simulate_path_with(&model, 1.0, 0.25, SeedStreams::new(1).stream(0), Scheme::Euler).unwrap();
    assert!((exact.final_value() - (-2.0f64).exp()).abs() < 1e-12);
    assert!((euler.final_value() - 0.5f64.powi(4)).abs() < 1e-12);
}

#[test]
fn coarse_step_is_flagged() {
    let model = cp_model(0.0);
    let p = simulate_path(&model, 10.0, 2.0, SeedStreams::new(1).stream(0)).unwrap();
    assert!(!p.warnings.is_empty());
    let p = simulate_path(&model, 10.0, 0.1, SeedStreams::new(1).stream(0)).unwrap();
    assert!(p.warnings.is_empty());
}

#[test]
fn transition_converges_to_invariant_law() {
    let model = cp_model(4.0);
    let inv = invariant_triplet(&model).unwrap();
    assert!(inv.exists());
    let law = transition_triplet(&model, 60.0).unwrap();
    assert!((law.location - inv.location().unwrap()).abs() < 1e-9, "{} vs {}", law.location, inv.location().unwrap());
    assert!((law.gaussian_variance - inv.gaussian_variance().unwrap()).abs() < 1e-12);
    assert!((law.mean().unwrap().unwrap() - inv.mean().unwrap().unwrap()).abs() < 1e-8);
    assert!((law.variance().unwrap().unwrap() - inv.variance().unwrap().unwrap()).abs() < 1e-8);
    // σ_∞² = σ²/(2Q)
    assert!((inv.gaussian_variance().unwrap() - 0.36 / 1.4).abs() < 1e-14);
}

#[test]
fn invariant_law_refused_without_log_moment() {
    let j = JumpMeasure::density(LevelDensity::LogTail { coef: 1.0 }, SupportSign::PositiveOnly).unwrap();
    let model = OuModel::new(1.0, 0.0, LevyTriplet::new(0.0, 1.0, j).unwrap()).unwrap();
    let inv = invariant_triplet(&model).unwrap();
    assert!(!inv.exists());
    assert!(inv.location().unwrap_err().is_refusal());
}

#[test]
fn model_round_trips_through_toml() {
    let model = cp_model(0.25);
    let text = toml::to_string(&model).unwrap();
    let back: OuModel = toml::from_str(&text).unwrap();
    assert_eq!(model, back);
    assert!(toml::from_str::<OuModel>("q = 0.0\n[driver]\nsigma = 1.0\n").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mapped_jump_mass_grows_with_time(
        q in 0.2..3.0f64, t1 in 0.05..3.0f64, dt in 0.01..3.0f64, lo in 0.05..2.0f64, w in 0.05..3.0f64, neg in any::<bool>()
    ) {
        let j = JumpMeasure::compound_poisson(1.0, JumpLaw::Normal { mean: 0.5, sd: 1.0 }).unwrap();
        let model = OuModel::new(q, 0.0, LevyTriplet::new(0.0, 0.0, j).unwrap()).unwrap();
        let (a, b) = if neg { (-lo - w, -lo) } else { (lo, lo + w) };
        let m1 = transition_triplet(&model, t1).unwrap().jump_mass(a, b).unwrap();
        let m2 = transition_triplet(&model, t1 + dt).unwrap().jump_mass(a, b).unwrap();
        let mi = invariant_triplet(&model).unwrap().jump_mass(a, b).unwrap();
        prop_assert!(m1 <= m2 + 1e-9);
        prop_assert!(m2 <= mi + 1e-9);
    }

    #[test]
    fn stable_mapped_mass_grows_with_time(q in 0.2..3.0f64, t1 in 0.05..3.0f64, dt in 0.01..3.0f64, lo in 0.05..2.0f64) {
        let j = JumpMeasure::stable(1.3, 1.0, 0.2).unwrap();
        let model = OuModel::new(q, 0.0, LevyTriplet::new(0.0, 0.0, j).unwrap()).unwrap();
        let m1 = transition_triplet(&model, t1).unwrap().jump_mass(lo, f64::INFINITY).unwrap();
        let m2 = transition_triplet(&model, t1 + dt).unwrap().jump_mass(lo, f64::INFINITY).unwrap();
        prop_assert!(m1 <= m2 * (1.0 + 1e-9));
    }
}

#[test]
fn jump_marks_reproduce_pure_jump_paths() {
    // no drift, no Gaussian part: every grid value is the discounted
    // previous value plus the discounted marked jumps, from step 0 on
    let j = JumpMeasure::compound_poisson(3.0, JumpLaw::Uniform { low: 0.5, high: 1.5 }).unwrap();
    let model = OuModel::new(0.9, 0.2, LevyTriplet::new(0.0, 0.0, j).unwrap().with_net_drift(0.0).unwrap()).unwrap();
    let streams = SeedStreams::new(8);
    for k in 0..20 {
        let p = simulate_path(&model, 3.0, 0.5, streams.stream(k)).unwrap();
        let total: usize = (0..p.steps()).map(|i| p.step_jumps(i).len()).sum();
        assert_eq!(total, p.jumps.len());
        for i in 0..p.steps() {
            let (t0, t1) = (p.grid[i], p.grid[i + 1]);
            let jumps: f64 = p.step_jumps(i).iter().map(|m| m.size * (-0.9 * (t1 - m.time)).exp()).sum();
            let want = p.values[i] * (-0.9 * (t1 - t0)).exp() + jumps;
            assert!((p.values[i + 1] - want).abs() < 1e-12, "path {k} step {i}");
        }
    }
}
