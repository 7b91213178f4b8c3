//! N(r) for homogeneous harmonic polynomials against the closed form 2k(α+1),
//! in the plane and in space, with and without the weight.

use freqlab::frequency::{build_profile, geometric_radii};
use freqlab::solutions::builtin_case;

fn main() -> freqlab::Result<()> {
    let radii = geometric_radii(0.15, 0.45, 7)?;
    println!("{:<12} {:>3} {:>5} {:>9} {:>11}", "case", "d", "alpha", "expected", "max rel err");
    for name in ["harmonic_k1", "harmonic_k2", "harmonic_k3"] {
        let case = builtin_case(name)?;
        for dim in [2, 3] {
            for alpha in [0.0, 1.0] {
                let sys = case.direct_system(dim, 0.5, 1.0 / 128.0, alpha)?;
                let profile = build_profile(&sys, &vec![0.0; dim], &radii)?;
                let expected = case.expected_frequency(alpha).unwrap();
                let err = profile.n_values().iter().map(|n| (n - expected).abs() / expected).fold(0.0, f64::max);
                println!("{name:<12} {dim:>3} {alpha:>5} {expected:>9} {err:>11.2e}");
            }
        }
    }

    let sys = builtin_case("eigen_mu2")?.lifted_system(0.5625, 1.0 / 64.0, 0.0)?;
    let profile = build_profile(&sys, &[0.0, 0.0, 0.0], &radii)?;
    println!("\neigen_mu2 (alpha = {}):", profile.alpha);
    println!("{:>8} {:>12} {:>10}", "r", "H", "N");
    for rec in &profile.records {
        println!("{:>8.4} {:>12.4e} {:>10.4}", rec.integrals.r, rec.integrals.H, rec.n);
    }
    Ok(())
}
