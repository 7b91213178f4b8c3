use freqlab::decompose::{compute_w, residual_biharmonic, residual_second, LiftedSystem};
use freqlab::lifting::{lift_solution, lifted_grid, select_params, select_params_with_floor};
use freqlab::report::observed_order;
use freqlab::solutions::builtin_case;
use freqlab::{Expr, GridSpec, LiftParams, PotentialSpec, ScalarField};

#[test]
fn eigen_parameters() {
    let v = PotentialSpec::constant(64.0, 2);
    let p = select_params(&v);
    assert_eq!(p.lambda, 16.0);
    assert!((p.sqrt_lambda - 4.0).abs() < 1e-14);
    assert_eq!(p.alpha, 0.0);
    assert_eq!(select_params_with_floor(&v, 1.5).alpha, 1.5);
}

#[test]
fn lifted_field_is_u_times_exponential() {
    let base = GridSpec::with_spacing(1, 0.5, 1.0 / 32.0).unwrap();
    let u = ScalarField::from_expr(base.clone(), &Expr::monomial(0, 2)).unwrap();
    let p = LiftParams { lambda: 4.0, alpha: 0.0, sqrt_lambda: 2.0 };
    let lifted = lifted_grid(&base).unwrap();
    let ut = lift_solution(&u, &p, &lifted).unwrap();
    for i in (0..lifted.len()).step_by(37) {
        let z = lifted.point(i);
        let expect = z[0] * z[0] * (2.0 * z[1]).exp();
        assert!((ut.values()[i] - expect).abs() <= 1e-14 * expect.abs().max(1.0));
    }
}

#[test]
fn harmonic_lift_has_zero_w_in_the_interior() {
    // Δ is exact on quadratics, so w = Δ(x₁² − x₂²) = 0 to round-off.
    let sys = builtin_case("harmonic_k2").unwrap().lifted_system(0.5, 1.0 / 32.0, 0.0).unwrap();
    let m = sys.margin();
    let g = sys.grid();
    for i in 0..g.len() {
        if g.is_interior(i, m) {
            assert!(sys.w().values()[i].abs() < 1e-10);
        }
    }
}

#[test]
fn radius_squared_has_constant_w() {
    // Δ|x|² = 2d, λ = 0.
    let g = GridSpec::with_spacing(3, 0.5, 1.0 / 16.0).unwrap();
    let u = ScalarField::from_expr(g.clone(), &Expr::RadiusSquared).unwrap();
    let w = compute_w(&u, &LiftParams::flat(0.0));
    let c = g.flatten(&[8, 8, 8]);
    assert!((w.values()[c] - 6.0).abs() < 1e-9);
}

#[test]
fn eigen_residuals_converge_at_second_order() {
    let case = builtin_case("eigen_mu2").unwrap();
    let res: Vec<f64> = [1.0 / 32.0, 1.0 / 64.0]
        .iter()
        .map(|&h| {
            let sys = case.lifted_system(0.5, h, 0.0).unwrap();
            residual_second(&sys, 1.0).lhs
        })
        .collect();
    let order = observed_order(res[0], res[1], 2.0);
    assert!(order > 1.5, "observed order {order}");
}

#[test]
fn both_formulations_agree_on_manufactured_potential() {
    let case = builtin_case("random_waves").unwrap();
    let sys = case.lifted_system(0.5, 1.0 / 32.0, 0.0).unwrap();
    let a = residual_second(&sys, 1.0).lhs;
    let b = residual_biharmonic(sys.u(), sys.potential(), sys.params(), 1.0).unwrap().lhs;
    assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-12), "{a} vs {b}");
}

#[test]
fn lifting_rejects_mismatched_potential() {
    let base = GridSpec::with_spacing(2, 0.5, 1.0 / 16.0).unwrap();
    let u = ScalarField::from_expr(base, &Expr::monomial(0, 1)).unwrap();
    let v = PotentialSpec::zero(1);
    assert!(LiftedSystem::lift(&u, v, LiftParams::flat(0.0)).is_err());
}
