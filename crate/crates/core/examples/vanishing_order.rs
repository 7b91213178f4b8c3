//! Vanishing orders from the growth of ∫_{B_r}u², compared with the bound
//! C(‖V‖^{1/4} + ‖∇V‖ + 1).

use freqlab::frequency::geometric_radii;
use freqlab::solutions::builtin_case;
use freqlab::vanishing::{estimate_order, theorem_bound};
use freqlab::{Expr, GridSpec, ScalarField};

fn main() -> freqlab::Result<()> {
    let h = 1.0 / 256.0;
    let grid = GridSpec::with_spacing(1, 0.5, h)?;
    let radii = geometric_radii(0.05, 0.4, 7)?;
    for k in 0..4 {
        let f = ScalarField::from_expr(grid.clone(), &Expr::monomial(0, k))?;
        let e = estimate_order(&f, &[0.0], &radii)?;
        println!("x^{k}: order = {:.4} (fit residual {:.1e})", e.order, e.fit_residual);
    }

    // r_max ≤ 0.1/μ and r_min ≥ 4h force a fine local grid.
    for name in ["eigen_mu2", "eigen_mu4", "eigen_mu8"] {
        let case = builtin_case(name)?;
        let mu = case.meta.mu.unwrap();
        let r_max = 0.1 / mu;
        let h = r_max / 8.0 / 4.0;
        let grid = GridSpec::with_spacing(2, 48.0 * h, h)?;
        let f = case.base_field(&grid)?;
        let e = estimate_order(&f, &[0.0, 0.0], &geometric_radii(r_max / 8.0, r_max, 7)?)?;
        let bound = theorem_bound(&case.potential, 1.0)?;
        println!("{name}: order = {:.4}, ‖V‖^(1/4) + ‖∇V‖ + 1 = {bound:.3}", e.order);
    }
    Ok(())
}
