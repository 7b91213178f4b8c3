use freqlab::frequency::geometric_radii;
use freqlab::inequalities::{
    caccioppoli_check, changing_center, check_h_H_lower, check_h_H_upper, doubling_exponent, doubling_reports,
    halton_ball_points, sup_bound_check, Budgets,
};
use freqlab::solutions::{builtin_case, DEFAULT_SEED};

const H: f64 = 1.0 / 128.0;

#[test]
fn doubling_exponent_of_homogeneous_functions() {
    // H ∝ r^{d+2α+2k}.
    for (name, k) in [("harmonic_k1", 1.0), ("harmonic_k2", 2.0)] {
        for alpha in [0.0, 1.0] {
            let sys = builtin_case(name).unwrap().direct_system(2, 0.5, H, alpha).unwrap();
            let e = doubling_exponent(&sys, &[0.0, 0.0], 0.15, 0.45).unwrap();
            let want = 2.0 + 2.0 * alpha + 2.0 * k;
            assert!((e - want).abs() < 0.01 * want, "{name} α={alpha}: {e} vs {want}");
        }
    }
}

#[test]
fn doubling_reports_pass_with_default_budgets() {
    let sys = builtin_case("eigen_mu2").unwrap().lifted_system(0.5625, 1.0 / 64.0, 0.0).unwrap();
    for r in doubling_reports(&sys, &[0.0, 0.0, 0.0], 0.15, 0.45, &Budgets::default()).unwrap() {
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn discrete_mass_inequalities_hold_exactly() {
    for name in ["harmonic_k2", "eigen_mu2", "random_waves", "quartic"] {
        let sys = builtin_case(name).unwrap().lifted_system(0.5625, 1.0 / 64.0, 1.0).unwrap();
        let z = [0.0; 3];
        let z = &z[..sys.grid().dim];
        for r in geometric_radii(0.1, 0.45, 5).unwrap() {
            let up = check_h_H_upper(&sys, z, r).unwrap();
            assert!(up.pass && up.lhs <= up.rhs_without_constant, "{name} {up:?}");
            let lo = check_h_H_lower(&sys, z, r / 2.0, r).unwrap();
            assert!(lo.pass, "{name} {lo:?}");
        }
    }
}

#[test]
fn caccioppoli_constant_for_the_quartic() {
    // w = 2, ∫_{B_r}w² = 4πr², r⁻⁴∫_{B_2r}x₁⁴ = 8πr²: ratio 1/2.
    let sys = builtin_case("quartic").unwrap().lifted_system(0.5625, H, 0.0).unwrap();
    let rep = caccioppoli_check(&sys, &[0.0, 0.0], 0.25, 5.0).unwrap();
    assert!((rep.implied_constant - 0.5).abs() < 0.05 * 0.5, "{rep:?}");
}

#[test]
fn sup_bound_constant_for_a_constant() {
    // sup = 1, r^{-1}(∫_{B_2r}1)^{1/2} = 2√π.
    let sys = builtin_case("constant").unwrap().direct_system(2, 0.5, H, 0.0).unwrap();
    let rep = sup_bound_check(&sys, &[0.0, 0.0], 0.2, 2.9).unwrap();
    let want = 1.0 / (2.0 * std::f64::consts::PI.sqrt());
    assert!((rep.implied_constant - want).abs() < 0.01 * want, "{rep:?}");
}

#[test]
fn changing_center_is_deterministic() {
    let sys = builtin_case("harmonic_k1").unwrap().lifted_system(0.5625, 1.0 / 64.0, 0.0).unwrap();
    let a = changing_center(&sys, &[0.0, 0.0], 0.4, 6, DEFAULT_SEED, 6.5).unwrap();
    let b = changing_center(&sys, &[0.0, 0.0], 0.4, 6, DEFAULT_SEED, 6.5).unwrap();
    assert_eq!(a, b);
    assert!(a.pass, "{a:?}");
}

#[test]
fn halton_points_fill_the_ball() {
    let pts = halton_ball_points(3, 200, 11);
    assert_eq!(pts.len(), 200);
    assert!(pts.iter().all(|p| p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 1.0));
    let mean: f64 = pts.iter().map(|p| p[0]).sum::<f64>() / 200.0;
    assert!(mean.abs() < 0.1);
}
