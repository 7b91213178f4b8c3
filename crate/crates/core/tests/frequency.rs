use std::f64::consts::PI;

use freqlab::frequency::{
    build_profile, check_H_prime, check_I_prime, check_cancellations, fit_monotonicity_constant, geometric_radii,
};
use freqlab::solutions::builtin_case;
use freqlab::{Ball, BallRule, Error};

const H: f64 = 1.0 / 128.0;

#[test]
fn linear_function_closed_forms() {
    // ũ = x₁, α = 0, d = 2: H = πr⁴/4, I = πr⁴/2, N = 2.
    let sys = builtin_case("harmonic_k1").unwrap().direct_system(2, 0.5, H, 0.0).unwrap();
    let p = build_profile(&sys, &[0.0, 0.0], &[0.2, 0.3, 0.4]).unwrap();
    for rec in &p.records {
        let r = rec.integrals.r;
        assert!((rec.integrals.H / (PI * r.powi(4) / 4.0) - 1.0).abs() < 0.01);
        assert!((rec.integrals.I_form2 / (PI * r.powi(4) / 2.0) - 1.0).abs() < 0.01);
        assert!((rec.n - 2.0).abs() < 0.02 * 2.0);
    }
}

#[test]
fn degree_two_weighted_frequency() {
    let sys = builtin_case("harmonic_k2").unwrap().direct_system(2, 0.5, H, 1.0).unwrap();
    let p = build_profile(&sys, &[0.0, 0.0], &geometric_radii(0.15, 0.45, 5).unwrap()).unwrap();
    for n in p.n_values() {
        assert!((n - 8.0).abs() < 0.02 * 8.0, "N = {n}");
    }
}

#[test]
fn constant_has_zero_frequency() {
    let sys = builtin_case("constant").unwrap().direct_system(2, 0.5, H, 0.0).unwrap();
    let p = build_profile(&sys, &[0.0, 0.0], &[0.2, 0.3, 0.4]).unwrap();
    for rec in &p.records {
        assert_eq!(rec.n, 0.0);
        let r = rec.integrals.r;
        assert!((rec.integrals.H / (PI * r * r) - 1.0).abs() < 1e-3);
    }
    assert_eq!(fit_monotonicity_constant(&p, 0.0), 0.0);
}

#[test]
fn zero_field_is_rejected() {
    let sys = builtin_case("zero").unwrap().direct_system(2, 0.5, 1.0 / 32.0, 0.0).unwrap();
    assert!(matches!(build_profile(&sys, &[0.0, 0.0], &[0.2, 0.3]), Err(Error::TrivialSolution { .. })));
}

#[test]
fn derivative_identities_on_the_linear_function() {
    let sys = builtin_case("harmonic_k1").unwrap().direct_system(2, 0.5, H, 0.0).unwrap();
    let p = build_profile(&sys, &[0.0, 0.0], &geometric_radii(0.2, 0.4, 9).unwrap()).unwrap();
    assert!(check_H_prime(&p, 0.01).pass);
    let i = check_I_prime(&p, &sys, 0.02).unwrap();
    assert!(i.pass, "{i:?}");
}

#[test]
fn eigen_identities_and_cancellations() {
    let sys = builtin_case("eigen_mu2").unwrap().lifted_system(0.5625, 1.0 / 64.0, 0.0).unwrap();
    let z = [0.0, 0.0, 0.0];
    let p = build_profile(&sys, &z, &geometric_radii(0.2, 0.3, 21).unwrap()).unwrap();
    assert!(check_I_prime(&p, &sys, 0.02).unwrap().pass);
    let c = check_cancellations(&sys, &Ball::new(&z, 0.3), BallRule::Hybrid).unwrap();
    assert!(c.pass && c.lhs <= 1e-12, "{c:?}");
}

#[test]
fn harmonic_monotonicity_constant_vanishes_on_coarse_radii() {
    let sys = builtin_case("harmonic_k3").unwrap().lifted_system(0.5625, 1.0 / 64.0, 0.0).unwrap();
    let p = build_profile(&sys, &[0.0, 0.0, 0.0], &geometric_radii(0.15, 0.45, 5).unwrap()).unwrap();
    assert_eq!(fit_monotonicity_constant(&p, 0.0), 0.0);
}
