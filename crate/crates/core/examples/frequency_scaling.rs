//! N(0, 1/4) for sin(μx₁)sin(μx₂) as μ grows, and the log-log slope.

use freqlab::experiment::log_log_slope;
use freqlab::frequency::build_profile;
use freqlab::solutions::CaseSpec;
use freqlab::{Expr, PotentialSpec};

fn main() -> freqlab::Result<()> {
    let mut points = Vec::new();
    for mu in [1.0, 2.0, 3.0, 4.0, 6.0] {
        let case = CaseSpec {
            name: format!("eigen_mu{mu}"),
            base_dim: 2,
            u: Expr::SinProduct { mu },
            potential: PotentialSpec::constant(4.0 * f64::powi(mu, 4), 2),
            meta: Default::default(),
        };
        let sys = case.lifted_system(0.3125, 1.0 / 128.0, 0.0)?;
        let n = build_profile(&sys, &[0.0, 0.0, 0.0], &[0.25])?.records[0].n;
        println!("mu = {mu:<4} lambda = {:<6} N = {n:.4}", sys.params().lambda);
        points.push((mu, n));
    }
    println!("slope of log N against log mu: {:.3}", log_log_slope(&points));
    Ok(())
}
