use oulevy::levy::{JumpLaw, JumpMeasure, LevyTriplet};
use oulevy::ou::OuModel;
use oulevy::passage::{creep_jump_statistics, first_passage_mc, hadjiev_laplace, CrossedBy, PassageOptions};
use oulevy::rng::SeedStreams;
use proptest::prelude::*;

fn opts(horizon: f64, paths: usize) -> PassageOptions {
    PassageOptions { horizon, dt: 1e-3, paths, bridge_correction: true }
}

fn gaussian(b: f64) -> OuModel {
    OuModel::new(1.0, 0.0, LevyTriplet::gaussian(b, 2f64.sqrt()).unwrap()).unwrap()
}

#[test]
fn spectrally_negative_paths_creep() {
    let j = JumpMeasure::compound_poisson(2.0, JumpLaw::NegExponential { rate: 1.0 }).unwrap();
    let model = OuModel::new(1.0, 0.0, LevyTriplet::new(-0.5, 1.0, j).unwrap()).unwrap();
    let res = first_passage_mc(&model, 0.8, opts(50.0, 2000), SeedStreams::new(3)).unwrap();
    let stats = creep_jump_statistics(&res).unwrap();
    assert!(stats.uncensored >= 1900);
    assert_eq!(stats.creep_fraction, 1.0);
    assert!(stats.overshoot_quantiles.iter().all(|q| *q == 0.0));
    assert!(res.records.iter().filter(|r| !r.censored()).all(|r| r.at == Some(0.8)));
}

#[test]
fn positive_jumps_without_drift_overshoot() {
    // from 0 with no drift and no Gaussian part, the path only rises by jumps
    let j = JumpMeasure::compound_poisson(1.0, JumpLaw::Exponential { rate: 2.0 }).unwrap();
    let driver = LevyTriplet::new(0.0, 0.0, j).unwrap().with_net_drift(0.0).unwrap();
    let model = OuModel::new(1.0, 0.0, driver).unwrap();
    let res = first_passage_mc(&model, 1.0, opts(200.0, 2000), SeedStreams::new(4)).unwrap();
    let stats = creep_jump_statistics(&res).unwrap();
    assert_eq!(stats.creep_fraction, 0.0);
    assert!(stats.min_jump_overshoot.unwrap() > 0.0);
    assert_eq!(stats.exact_landing_frequency, 0.0);
    assert!(res.records.iter().filter(|r| !r.censored()).all(|r| r.crossed_by == Some(CrossedBy::Jump)));
}

#[test]
fn censoring_decreases_with_horizon() {
    let model = gaussian(0.0);
    let mut last = 1.0;
    for h in [0.5, 2.0, 8.0] {
        let r = first_passage_mc(&model, 1.5, opts(h, 1000), SeedStreams::new(5)).unwrap();
        assert!(r.summary.censoring_rate < last, "horizon {h}");
        last = r.summary.censoring_rate;
    }
}

#[test]
fn rerun_is_identical() {
    let model = gaussian(0.3);
    let a = first_passage_mc(&model, 1.0, opts(5.0, 200), SeedStreams::new(6)).unwrap();
    let b = first_passage_mc(&model, 1.0, opts(5.0, 200), SeedStreams::new(6)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gaussian_transform_closed_form_values() {
    let h = hadjiev_laplace(&gaussian(0.0), 1.0, &[0.5, 1.0, 2.0]).unwrap();
    for (v, want) in h.values.iter().zip([0.51751, 0.36045, 0.22336]) {
        assert!((v - want).abs() < 5e-5, "{v} vs {want}");
    }
    assert!(h.shape_violations().is_empty());
}

#[test]
fn transform_matches_monte_carlo_with_drift() {
    for b in [0.5, -0.5] {
        let model = gaussian(b);
        let thetas = [0.5, 1.0, 2.0];
        let h = hadjiev_laplace(&model, 1.0, &thetas).unwrap();
        let res = first_passage_mc(&model, 1.0, opts(60.0, 4000), SeedStreams::new(7)).unwrap();
        for (t, v) in thetas.iter().zip(&h.values) {
            let (m, se) = res.laplace_mc(*t);
            assert!((m - v).abs() < 3.0 * se, "b={b} θ={t}: formula {v}, MC {m} ± {se}");
        }
    }
}

#[test]
fn transform_with_negative_jumps_matches_monte_carlo() {
    let j = JumpMeasure::compound_poisson(1.0, JumpLaw::NegExponential { rate: 2.0 }).unwrap();
    let model = OuModel::new(0.8, 0.0, LevyTriplet::new(-0.2, 1.0, j).unwrap()).unwrap();
    let thetas = [0.5, 1.5];
    let h = hadjiev_laplace(&model, 0.7, &thetas).unwrap();
    let res = first_passage_mc(&model, 0.7, opts(60.0, 4000), SeedStreams::new(8)).unwrap();
    for (t, v) in thetas.iter().zip(&h.values) {
        let (m, se) = res.laplace_mc(*t);
        assert!((m - v).abs() < 3.0 * se, "θ={t}: formula {v}, MC {m} ± {se}");
    }
}

#[test]
fn transform_refuses_positive_jumps() {
    let j = JumpMeasure::compound_poisson(1.0, JumpLaw::Exponential { rate: 2.0 }).unwrap();
    let model = OuModel::new(1.0, 0.0, LevyTriplet::new(0.0, 1.0, j).unwrap()).unwrap();
    assert!(hadjiev_laplace(&model, 1.0, &[1.0]).unwrap_err().is_refusal());
}

#[test]
fn start_at_level_gives_one() {
    let model = gaussian(0.0).starting_at(1.0).unwrap();
    let h = hadjiev_laplace(&model, 1.0, &[0.1, 3.0]).unwrap();
    assert_eq!(h.values, vec![1.0, 1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn transform_shape(b in -1.0..1.0f64, sigma in 0.5..2.0f64, q in 0.3..2.0f64, a in 0.2..2.0f64) {
        let model = OuModel::new(q, 0.0, LevyTriplet::gaussian(b, sigma).unwrap()).unwrap();
        let thetas = [0.25, 0.5, 1.0, 2.0, 4.0];
        let h = hadjiev_laplace(&model, a, &thetas).unwrap();
        prop_assert!(h.shape_violations().is_empty(), "{:?}", h.shape_violations());
    }

    #[test]
    fn transform_decreases_in_level(a1 in 0.1..1.5f64, da in 0.05..1.0f64) {
        // reaching a higher level takes longer
        let model = gaussian(0.0);
        let lo = hadjiev_laplace(&model, a1, &[1.0]).unwrap().values[0];
        let hi = hadjiev_laplace(&model, a1 + da, &[1.0]).unwrap().values[0];
        prop_assert!(hi < lo);
    }
}
