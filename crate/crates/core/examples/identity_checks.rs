//! The exact identities: H′ against the finite difference of H, I′ against
//! its expansion, the two forms of I, and the four cancelling pairs.

use freqlab::frequency::{build_profile, check_H_prime, check_I_prime, check_cancellations, geometric_radii};
use freqlab::solutions::builtin_case;
use freqlab::{Ball, BallRule, CheckReport};

fn show(case: &str, r: &CheckReport) {
    println!("{case:<13} {:<14} {} mismatch = {:.3e}", r.name, if r.pass { "PASS" } else { "FAIL" }, r.lhs);
}

fn main() -> freqlab::Result<()> {
    let h = 1.0 / 128.0;
    let x1 = builtin_case("harmonic_k1")?.direct_system(2, 0.5, h, 0.0)?;
    let p = build_profile(&x1, &[0.0, 0.0], &geometric_radii(0.15, 0.45, 23)?)?;
    show("harmonic_k1", &check_H_prime(&p, 0.01));

    for name in ["eigen_mu2", "random_waves"] {
        let sys = builtin_case(name)?.lifted_system(0.5625, h, 0.0)?;
        let z = [0.0, 0.0, 0.0];
        let p = build_profile(&sys, &z, &geometric_radii(0.2, 0.3, 21)?)?;
        show(name, &check_H_prime(&p, 0.01));
        show(name, &check_I_prime(&p, &sys, 0.02)?);
        let forms = p
            .records
            .iter()
            .map(|r| (r.integrals.I_form1 - r.integrals.I_form2).abs() / r.integrals.I_form1.abs())
            .fold(0.0, f64::max);
        show(name, &CheckReport::mismatch("forms", forms, 0.01));
        show(name, &check_cancellations(&sys, &Ball::new(&z, 0.3), BallRule::Hybrid)?);
    }
    Ok(())
}
