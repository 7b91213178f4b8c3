//! Lift the eigenfunction sin(2x₁)sin(2x₂) (V = 64) to three dimensions and
//! check the second-order system and the biharmonic residual.

use freqlab::decompose::{residual_biharmonic, residual_second, LiftedSystem};
use freqlab::lifting::{check_potential_shift, select_params};
use freqlab::solutions::builtin_case;
use freqlab::{GridSpec, ScalarField};

fn main() -> freqlab::Result<()> {
    let case = builtin_case("eigen_mu2")?;
    let p = select_params(&case.potential);
    println!("lambda = {}, alpha = {}, sqrt(lambda) = {}", p.lambda, p.alpha, p.sqrt_lambda);
    println!("{}", serde_json::to_string(&check_potential_shift(&case.potential, &p)).unwrap());

    for n in [16, 32, 64] {
        let h = 1.0 / n as f64;
        let base = GridSpec::with_spacing(2, 0.5, h)?;
        let u = ScalarField::from_expr(base, &case.u)?;
        let sys = LiftedSystem::lift(&u, case.potential.clone(), p)?;
        let second = residual_second(&sys, 1.0);
        let bi = residual_biharmonic(sys.u(), sys.potential(), sys.params(), 1.0)?;
        println!(
            "h = 1/{n:<3} lifted points = {:>7}  |Δw − (V − λ²/4)ũ| = {:.3e}  |Δ²ũ − Vũ| = {:.3e}",
            sys.grid().len(),
            second.lhs,
            bi.lhs
        );
    }
    Ok(())
}
