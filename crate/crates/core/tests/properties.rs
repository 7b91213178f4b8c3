use freqlab::decompose::{compute_w, LiftedSystem};
use freqlab::expr::Wave;
use freqlab::frequency::{build_profile, fit_monotonicity_constant, FrequencyProfile, ProfileRecord};
use freqlab::inequalities::doubling_exponent;
use freqlab::quadrature::{compute_integrals, WeightedIntegrals};
use freqlab::{Ball, BallRule, Expr, GridSpec, LiftParams, PotentialSpec, ScalarField};
use proptest::prelude::*;

fn waves() -> impl Strategy<Value = Expr> {
    let wave = (0.05f64..0.3, -3.0f64..3.0, -3.0f64..3.0, 0.0f64..6.28)
        .prop_map(|(a, k1, k2, phase)| Wave { amplitude: a, wavevector: vec![k1, k2], phase });
    (prop::collection::vec(wave, 1..4), 0.0f64..2.0).prop_map(|(modes, extra)| {
        let offset = modes.iter().map(|m| m.amplitude).sum::<f64>() + 0.2 + extra;
        Expr::Waves { offset, modes }
    })
}

fn grid() -> GridSpec {
    GridSpec::with_spacing(2, 0.5, 1.0 / 32.0).unwrap()
}

fn flat_system(u: &Expr, alpha: f64) -> LiftedSystem {
    let f = ScalarField::from_expr(grid(), u).unwrap();
    LiftedSystem::new(f, PotentialSpec::zero(1), LiftParams::flat(alpha)).unwrap()
}

fn synthetic_profile(ns: &[f64]) -> FrequencyProfile {
    let records = ns
        .iter()
        .enumerate()
        .map(|(i, &n)| ProfileRecord {
            integrals: WeightedIntegrals {
                r: 0.1 + 0.05 * i as f64,
                alpha: 0.0,
                H: 1.0,
                I_form1: n,
                I_form2: n,
                I1: 0.0,
                I2: 0.0,
                I3: 0.0,
                I4: 0.0,
                I5: 0.0,
                h_plain: 1.0,
            },
            n,
        })
        .collect();
    FrequencyProfile { center: [0.0; 3], dim: 2, alpha: 0.0, rule: BallRule::Hybrid, records }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn w_is_linear(u in waves(), v in waves(), a in -3.0f64..3.0, b in -3.0f64..3.0, lambda in 0.0f64..20.0) {
        let p = LiftParams { lambda, alpha: 0.0, sqrt_lambda: lambda.sqrt() };
        let fu = ScalarField::from_expr(grid(), &u).unwrap();
        let fv = ScalarField::from_expr(grid(), &v).unwrap();
        let lhs = compute_w(&fu.combine(a, &fv, b).unwrap(), &p);
        let rhs = compute_w(&fu, &p).combine(a, &compute_w(&fv, &p), b).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn frequency_is_scale_invariant(u in waves(), alpha in 0.0f64..2.0) {
        let a = flat_system(&u, alpha);
        let scaled = LiftedSystem::new(a.u().scaled(7.0), PotentialSpec::zero(1), LiftParams::flat(alpha)).unwrap();
        let radii = [0.2, 0.3, 0.4];
        let pa = build_profile(&a, &[0.0, 0.0], &radii).unwrap();
        let pb = build_profile(&scaled, &[0.0, 0.0], &radii).unwrap();
        for (x, y) in pa.records.iter().zip(&pb.records) {
            prop_assert!((x.n - y.n).abs() <= 1e-12 * (1.0 + x.n.abs()));
            prop_assert!((y.integrals.H / x.integrals.H - 49.0).abs() <= 1e-11);
        }
    }

    #[test]
    fn masses_grow_and_energy_terms_are_nonnegative(u in waves(), alpha in 0.0f64..2.0, r0 in 0.1f64..0.2) {
        let sys = flat_system(&u, alpha);
        let mut last: Option<WeightedIntegrals> = None;
        for k in 0..5 {
            let r = r0 + 0.05 * k as f64;
            let w = compute_integrals(&sys, &Ball::new(&[0.0, 0.0], r), BallRule::Hybrid).unwrap();
            prop_assert!(w.I1 >= 0.0 && w.I2 >= 0.0 && w.I3 >= 0.0 && w.I4 >= 0.0);
            if let Some(prev) = last {
                prop_assert!(w.H >= prev.H && w.h_plain >= prev.h_plain);
            }
            last = Some(w);
        }
    }

    #[test]
    fn thinning_never_raises_the_monotonicity_constant(
        ns in prop::collection::vec(-0.5f64..6.0, 4..12),
        keep in prop::collection::vec(any::<bool>(), 12),
        g in 0.0f64..3.0,
    ) {
        let full = synthetic_profile(&ns);
        let mut thinned = full.clone();
        let n = full.records.len();
        thinned.records = full
            .records
            .iter()
            .enumerate()
            .filter(|(i, _)| *i == 0 || *i == n - 1 || keep[*i])
            .map(|(_, r)| *r)
            .collect();
        prop_assert!(fit_monotonicity_constant(&thinned, g) <= fit_monotonicity_constant(&full, g));
    }

    #[test]
    fn doubling_exponents_compose(u in waves(), r1 in 0.1f64..0.15, s in 1.2f64..1.6, t in 1.2f64..1.6) {
        let sys = flat_system(&u, 0.5);
        let (r2, r3) = (r1 * s, r1 * s * t);
        let z = [0.0, 0.0];
        let e12 = doubling_exponent(&sys, &z, r1, r2).unwrap();
        let e23 = doubling_exponent(&sys, &z, r2, r3).unwrap();
        let e13 = doubling_exponent(&sys, &z, r1, r3).unwrap();
        let combined = (e12 * s.ln() + e23 * t.ln()) / (s * t).ln();
        prop_assert!((e13 - combined).abs() <= 1e-10 * (1.0 + e13.abs()));
    }
}
