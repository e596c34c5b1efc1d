use std::f64::consts::PI;

use num_complex::Complex64;
use oulevy::levy::{IncrementSampler, JumpLaw, JumpMeasure, LevelDensity, LevyTriplet, SupportSign};
use oulevy::rng::StreamId;
use proptest::prelude::*;
use statrs::function::gamma::gamma;

const DRAWS: usize = 100_000;

/// Empirical cf of `Z_1` with per-component standard errors.
fn empirical_cf(triplet: &LevyTriplet, theta: f64, seed: u64) -> (Complex64, f64, f64) {
    // unit-time draws: a lower jump-rate cap keeps the count of big jumps small
    let s = IncrementSampler::with_max_rate(triplet, 200.0).unwrap();
    let mut rng = StreamId::new(seed, 0).rng();
    let (mut c, mut c2, mut si, mut s2) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..DRAWS {
        let z = s.sample(1.0, &mut rng).unwrap();
        let (a, b) = ((theta * z).cos(), (theta * z).sin());
        c += a;
        c2 += a * a;
        si += b;
        s2 += b * b;
    }
    let n = DRAWS as f64;
    let (mc, ms) = (c / n, si / n);
    let se_c = ((c2 / n - mc * mc) / n).sqrt();
    let se_s = ((s2 / n - ms * ms) / n).sqrt();
    (Complex64::new(mc, ms), se_c, se_s)
}

fn assert_cf_matches(triplet: &LevyTriplet, seed: u64) {
    for theta in [0.5, 1.0, 2.0] {
        let exact = (-triplet.psi(theta).unwrap()).exp();
        let (emp, se_c, se_s) = empirical_cf(triplet, theta, seed);
        assert!((emp.re - exact.re).abs() < 4.0 * se_c + 1e-3, "θ={theta}: re {} vs {}", emp.re, exact.re);
        assert!((emp.im - exact.im).abs() < 4.0 * se_s + 1e-3, "θ={theta}: im {} vs {}", emp.im, exact.im);
    }
}

#[test]
fn gaussian_plus_compound_poisson_cf() {
    let j = JumpMeasure::compound_poisson(2.0, JumpLaw::Normal { mean: 0.3, sd: 0.4 }).unwrap();
    assert_cf_matches(&LevyTriplet::new(0.2, 0.7, j).unwrap(), 1);
}

#[test]
fn exponential_jumps_cf() {
    let j = JumpMeasure::compound_poisson(1.5, JumpLaw::Exponential { rate: 2.0 }).unwrap();
    assert_cf_matches(&LevyTriplet::new(-0.4, 0.0, j).unwrap(), 2);
}

#[test]
fn skewed_stable_cf() {
    let j = JumpMeasure::stable(1.5, 0.8, 0.5).unwrap();
    assert_cf_matches(&LevyTriplet::new(0.1, 0.0, j).unwrap(), 3);
}

#[test]
fn cauchy_type_cf() {
    let j = JumpMeasure::stable(1.0, 0.6, -0.4).unwrap();
    assert_cf_matches(&LevyTriplet::new(0.0, 0.0, j).unwrap(), 4);
}

#[test]
fn tempered_density_cf() {
    let h = LevelDensity::Tempered { coef: 1.0, index: 0.7, decay: 1.5 };
    let j = JumpMeasure::density(h, SupportSign::TwoSided).unwrap();
    assert_cf_matches(&LevyTriplet::new(0.3, 0.5, j).unwrap(), 5);
}

/// Total stable Lévy-density coefficient `c₊ + c₋` for scale `s`.
fn stable_mass_coef(beta: f64, s: f64) -> f64 {
    s.powf(beta) / (-gamma(-beta) * (PI * beta / 2.0).cos())
}

#[test]
fn density_exponent_matches_stable_closed_form() {
    for (beta, skew) in [(0.6, 0.0), (1.5, 0.0), (1.5, 1.0), (0.8, 1.0)] {
        let s = 1.3;
        let total = stable_mass_coef(beta, s);
        let (coef, sign) = if skew == 0.0 { (0.5 * total, SupportSign::TwoSided) } else { (total, SupportSign::PositiveOnly) };
        let h = LevelDensity::PowerLaw { coef, exponent: 1.0 + beta, lower: 0.0, upper: None };
        let dens = LevyTriplet::new(0.0, 0.0, JumpMeasure::density(h, sign).unwrap()).unwrap();
        let stab = LevyTriplet::new(0.0, 0.0, JumpMeasure::stable(beta, s, skew).unwrap()).unwrap();
        for theta in [0.3, 1.0, 2.5, -1.7] {
            let a = dens.psi(theta).unwrap();
            let b = stab.psi(theta).unwrap();
            assert!((a - b).norm() < 1e-6, "β={beta} κ={skew} θ={theta}: {a} vs {b}");
        }
    }
}

#[test]
fn one_sided_stable_real_part() {
    // Re ψ(θ) = s^β |θ|^β for every skew
    let stab = LevyTriplet::new(0.0, 0.0, JumpMeasure::stable(1.2, 0.9, -1.0).unwrap()).unwrap();
    let p = stab.psi(1.4).unwrap();
    assert!((p.re - (0.9f64 * 1.4).powf(1.2)).abs() < 1e-12);
}

#[test]
fn negative_only_jumps_are_negative() {
    let j = JumpMeasure::compound_poisson(3.0, JumpLaw::NegExponential { rate: 1.0 }).unwrap();
    assert_eq!(j.support_sign(), SupportSign::NegativeOnly);
    let t = LevyTriplet::new(0.0, 0.0, j).unwrap();
    let s = IncrementSampler::new(&t).unwrap();
    let mut rng = StreamId::new(9, 0).rng();
    for _ in 0..10_000 {
        assert!(s.sample_jump(&mut rng) < 0.0);
    }
    let d = LevelDensity::PowerLaw { coef: 1.0, exponent: 1.5, lower: 0.0, upper: None };
    let j = JumpMeasure::density(d, SupportSign::NegativeOnly).unwrap();
    assert_eq!(j.mass(0.0, f64::INFINITY).unwrap(), 0.0);
    assert!(j.mass(f64::NEG_INFINITY, -1.0).unwrap() > 0.0);
}

#[test]
fn positive_law_rejected_under_negative_sign() {
    let k = oulevy::levy::JumpKind::CompoundPoisson { rate: 1.0, law: JumpLaw::Exponential { rate: 1.0 } };
    assert!(JumpMeasure::new(k, Some(SupportSign::NegativeOnly)).is_err());
}

#[test]
fn laplace_exponent_matches_monte_carlo() {
    let j = JumpMeasure::compound_poisson(1.0, JumpLaw::NegExponential { rate: 2.0 }).unwrap();
    let t = LevyTriplet::new(-0.3, 0.8, j).unwrap();
    let s = IncrementSampler::new(&t).unwrap();
    let mut rng = StreamId::new(17, 0).rng();
    let draws: Vec<f64> = (0..DRAWS).map(|_| s.sample(1.0, &mut rng).unwrap()).collect();
    for u in [0.5, 1.0] {
        let vals: Vec<f64> = draws.iter().map(|z| (u * z).exp()).collect();
        let n = DRAWS as f64;
        let m = vals.iter().sum::<f64>() / n;
        let se = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let exact = t.laplace_exponent(u).unwrap().exp();
        assert!((m - exact).abs() < 4.0 * se, "u={u}: {m} vs {exact} (se {se})");
    }
}

#[test]
fn laplace_exponent_refuses_positive_jumps() {
    let j = JumpMeasure::compound_poisson(1.0, JumpLaw::Exponential { rate: 2.0 }).unwrap();
    let t = LevyTriplet::new(0.0, 1.0, j).unwrap();
    assert!(t.laplace_exponent(1.0).unwrap_err().is_refusal());
}

#[test]
fn triplet_round_trips_through_toml() {
    let cases = [
        LevyTriplet::gaussian(0.5, 1.0).unwrap(),
        LevyTriplet::new(0.0, 0.0, JumpMeasure::stable(0.7, 1.0, -1.0).unwrap()).unwrap(),
        LevyTriplet::new(1.0, 0.2, JumpMeasure::compound_poisson(2.0, JumpLaw::Uniform { low: -1.0, high: 2.0 }).unwrap())
            .unwrap(),
        LevyTriplet::new(
            0.0,
            0.0,
            JumpMeasure::density(LevelDensity::LogTail { coef: 2.0 }, SupportSign::PositiveOnly).unwrap(),
        )
        .unwrap(),
    ];
    for t in cases {
        let text = toml::to_string(&t).unwrap();
        let back: LevyTriplet = toml::from_str(&text).unwrap();
        assert_eq!(t, back, "{text}");
    }
}

#[test]
fn documented_keys_parse() {
    let text = r#"
drift = 0.1
sigma = 0.5
[jumps]
kind = "stable"
support_sign = "two_sided"
params = { index = 1.5, scale = 1.0, skew = 0.0 }
"#;
    let t: LevyTriplet = toml::from_str(text).unwrap();
    assert_eq!(t.drift(), 0.1);
    assert_eq!(t.sigma(), 0.5);
}

fn triplets() -> impl Strategy<Value = LevyTriplet> {
    let gauss = (-2.0..2.0f64, 0.0..2.0f64).prop_map(|(b, s)| LevyTriplet::gaussian(b, s).unwrap());
    let cp = (-2.0..2.0f64, 0.0..1.0f64, 0.1..5.0f64, -1.0..1.0f64, 0.1..2.0f64).prop_map(|(b, s, r, m, sd)| {
        LevyTriplet::new(b, s, JumpMeasure::compound_poisson(r, JumpLaw::Normal { mean: m, sd }).unwrap()).unwrap()
    });
    let stable = (-1.0..1.0f64, 0.2..1.9f64, 0.2..2.0f64, -1.0..1.0f64).prop_map(|(b, a, s, k)| {
        LevyTriplet::new(b, 0.0, JumpMeasure::stable(a, s, k).unwrap()).unwrap()
    });
    prop_oneof![gauss, cp, stable]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponent_is_hermitian_with_nonnegative_real_part(t in triplets(), theta in -20.0..20.0f64) {
        let p = t.psi(theta).unwrap();
        let m = t.psi(-theta).unwrap();
        prop_assert!((p - m.conj()).norm() < 1e-9 * (1.0 + p.norm()));
        prop_assert!(p.re >= -1e-12);
        prop_assert_eq!(t.psi(0.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn cf_modulus_at_most_one(t in triplets(), theta in -10.0..10.0f64) {
        let v = (-t.psi(theta).unwrap()).exp();
        prop_assert!(v.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn exponent_is_additive_in_triplets(b1 in -1.0..1.0f64, b2 in -1.0..1.0f64, s1 in 0.0..1.0f64, s2 in 0.0..1.0f64, theta in -5.0..5.0f64) {
        // Z + Z' with independent Gaussian parts: σ² adds, b adds
        let a = LevyTriplet::gaussian(b1, s1).unwrap().psi(theta).unwrap();
        let b = LevyTriplet::gaussian(b2, s2).unwrap().psi(theta).unwrap();
        let c = LevyTriplet::gaussian(b1 + b2, (s1 * s1 + s2 * s2).sqrt()).unwrap().psi(theta).unwrap();
        prop_assert!((a + b - c).norm() < 1e-10);
    }
}
