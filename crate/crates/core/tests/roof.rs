mod common;

use entrocheck::arrowing::ArrowOptions;
use entrocheck::continuity::{BoundRecord, ContinuitySpec, Correction, CorrectionForm, DistanceScale};
use entrocheck::functionals::{mutual_information, MutualInformation, ReducedEntropy};
use entrocheck::qmat::{antisymmetric_state, purify, random_haar_pure, random_mixed, random_mixed_with_rank, trace_distance_norm, trial_rng};
use entrocheck::roof::{
    entanglement_of_formation, minimal_purification, mixed_convex_roof, pure_convex_roof, pure_convex_roof_with_purification,
};
use rand::Rng;

fn opts(seed: u64) -> ArrowOptions {
    ArrowOptions { restarts: 12, seed, ..ArrowOptions::default() }
}

#[test]
fn mutual_information_roof_is_twice_formation() {
    let mut rng = trial_rng(1, 0);
    for i in 0..5 {
        let rho = random_mixed_with_rank(&mut rng, &[2, 2], 2 + i % 3);
        let im = pure_convex_roof(&rho, &MutualInformation, None, &opts(i as u64)).unwrap();
        let oracle = 2.0 * common::wootters_ef(&rho);
        assert!((im.value - oracle).abs() < 2e-3, "{} vs {oracle}", im.value);
    }
}

#[test]
fn formation_of_pure_and_singlet_states() {
    let singlet = antisymmetric_state(2).unwrap();
    assert!((entanglement_of_formation(&singlet, &opts(2)).unwrap().value - 1.0).abs() < 1e-9);
    let mut rng = trial_rng(2, 0);
    let psi = random_haar_pure(&mut rng, &[2, 3]).to_density();
    let r = entanglement_of_formation(&psi, &opts(2)).unwrap();
    let sa = ReducedEntropy::subsystem_a();
    use entrocheck::Functional;
    assert!((r.value - sa.eval(&psi).as_f64()).abs() < 1e-9);
}

#[test]
fn formation_is_convex() {
    let mut rng = trial_rng(3, 0);
    for i in 0..4 {
        let a = random_mixed_with_rank(&mut rng, &[2, 2], 2);
        let b = random_haar_pure(&mut rng, &[2, 2]).to_density();
        let p: f64 = rng.random();
        let mid = a.mix(&b, 1.0 - p).unwrap();
        let [ea, eb, em] = [&a, &b, &mid].map(|r| entanglement_of_formation(r, &opts(i)).unwrap().value);
        assert!(em <= p * ea + (1.0 - p) * eb + 2e-3, "{em} > {p}*{ea} + {}*{eb}", 1.0 - p);
    }
}

#[test]
fn non_minimal_purification_gives_the_same_roof() {
    let mut rng = trial_rng(4, 0);
    let rho = random_mixed_with_rank(&mut rng, &[2, 2], 2);
    let f = ReducedEntropy::subsystem_a();
    let a = pure_convex_roof_with_purification(&minimal_purification(&rho), &f, None, &opts(4)).unwrap();
    let b = pure_convex_roof_with_purification(&purify(&rho), &f, Some(8), &opts(4)).unwrap();
    assert!((a.value - b.value).abs() < 2e-3, "{} vs {}", a.value, b.value);
    assert!((a.value - common::wootters_ef(&rho)).abs() < 1e-3);
}

#[test]
fn mixed_roof_of_antisymmetric_states_is_below_trivial_bound() {
    for d in [3usize, 4] {
        let rho = antisymmetric_state(d).unwrap();
        let expected = (2.0 * d as f64 / (d as f64 - 1.0)).log2();
        assert!((mutual_information(&rho).unwrap() - expected).abs() < 1e-10);
    }
    let rho = antisymmetric_state(3).unwrap();
    let r = mixed_convex_roof(&rho, &MutualInformation, None, &opts(5)).unwrap();
    assert!(r.value <= 3f64.log2() + 1e-9);
    let bary = r.best_ensemble.barycenter();
    assert!(trace_distance_norm(&bary, &rho).unwrap() <= 1e-9);
}

#[test]
fn formation_continuity_with_square_root_distance() {
    // |E_F(ρ) − E_F(σ)| ≤ a log d_A + η̄(a) with a = √(2ε).
    let spec = ContinuitySpec::new(1.0, Correction::new(CorrectionForm::EtaEnvelope, 1.0))
        .unwrap()
        .with_distance(DistanceScale::SqrtTwice);
    for t in 0..12u64 {
        let mut rng = trial_rng(6, t);
        let rho = random_mixed(&mut rng, &[2, 2]);
        let other = random_haar_pure(&mut rng, &[2, 2]).to_density();
        let sigma = rho.mix(&other, 0.02 + 0.2 * rng.random::<f64>()).unwrap();
        let eps = trace_distance_norm(&rho, &sigma).unwrap();
        let a = entanglement_of_formation(&rho, &opts(t)).unwrap().value;
        let b = entanglement_of_formation(&sigma, &opts(t)).unwrap().value;
        let rec = BoundRecord::new(t, 4, eps, (a - b).abs(), spec.rhs(eps, 2), 1e-3);
        assert!(!rec.violated, "{rec:?}");
    }
}
