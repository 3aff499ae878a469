use std::f64::consts::PI;

use thermlab::dynamics::evolve_exact;
use thermlab::generator::build_liouvillian;
use thermlab::linalg::C64;
use thermlab::micro::{build_bath, evolve_schrodinger, reduced_density, InterferenceSign, SingleExcitationState};
use thermlab::model::{validate_params, DecayRates, SystemParams};

/// Largest reduced-state gap between the exact bath model and the master
/// equation with the rates the grid implies.
fn compare(sign: InterferenceSign, delta: f64) -> (f64, f64) {
    let (gamma, n) = (1.0, 2000);
    let w = 2.0 * PI * gamma / 0.02;
    let bath = build_bath(gamma, gamma, sign, n, w, 0.0).unwrap();
    let window = (10.0 / gamma).min(0.5 * n as f64 / w);
    let times: Vec<f64> = (0..=40).map(|k| window * k as f64 / 40.0).collect();

    let psi0 = SingleExcitationState::from_atom(C64::new(0.8, 0.0), [C64::new(0.36, 0.0), C64::new(0.0, 0.48)], n);
    let micro = evolve_schrodinger(&bath, &psi0, delta, window, &times).unwrap();
    assert!(micro.max_norm_drift <= 1e-10, "norm drift {}", micro.max_norm_drift);
    for s in &micro.states {
        assert_eq!(s.b, psi0.b);
    }

    let rates = bath.implied_rates();
    let params = validate_params(SystemParams::new(
        1.0,
        1.0 + delta,
        DecayRates { gamma1: rates.gamma1, gamma2: rates.gamma2, gamma3: 0.0, gamma12: rates.gamma12, gamma21: rates.gamma12 },
        f64::INFINITY,
    ))
    .unwrap();
    let lindblad = evolve_exact(&build_liouvillian(&params), &reduced_density(&psi0), &times).unwrap();
    let gap = micro
        .states
        .iter()
        .zip(&lindblad.states)
        .map(|(m, l)| reduced_density(m).max_abs_diff(l))
        .fold(0.0, f64::max);
    (gap, window)
}

#[test]
fn interfering_bath_follows_master_equation() {
    for delta in [0.0, 0.3] {
        let (gap, window) = compare(InterferenceSign::Plus, delta);
        assert!(gap <= 0.05, "Δ = {delta}: gap {gap} over t ≤ {window}");
    }
}

#[test]
fn independent_bath_follows_master_equation() {
    for delta in [0.0, 0.3] {
        let (gap, window) = compare(InterferenceSign::Independent, delta);
        assert!(gap <= 0.05, "Δ = {delta}: gap {gap} over t ≤ {window}");
    }
}

#[test]
fn anti_aligned_bath_has_negative_cross_rate() {
    let bath = build_bath(1.0, 1.0, InterferenceSign::Minus, 64, 100.0, 0.0).unwrap();
    let r = bath.implied_rates();
    assert!((r.gamma12 + 1.0).abs() < 1e-12);
}
