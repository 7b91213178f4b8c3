//! Solve Δ²u = Vu on a square with (u, Δu) given on the boundary, for a
//! manufactured variable potential, and watch the error fall at O(h²).

use freqlab::solutions::{solve_biharmonic, BoundaryData, SolveConfig};
use freqlab::{Expr, GridSpec, PotentialSpec};

fn main() -> freqlab::Result<()> {
    let exact = Expr::Poly1 { axis: 0, coeffs: vec![1.0, 0.0, 0.0, 0.0, 1.0] };
    let v = PotentialSpec::manufactured(exact.clone(), 2, 0.5)?;
    let mut last = None;
    for n in [16, 32, 64] {
        let grid = GridSpec::with_spacing(2, 0.5, 1.0 / n as f64)?;
        let cfg = SolveConfig::new(grid.clone(), BoundaryData::from_expr(&grid, &exact), v.clone());
        let out = solve_biharmonic(&cfg)?;
        let err = (0..grid.len())
            .map(|i| (out.u.values()[i] - exact.value(&grid.point(i)[..2])).abs())
            .fold(0.0, f64::max);
        let ratio = last.map_or(String::new(), |l: f64| format!("  ratio {:.2}", l / err));
        println!(
            "h = 1/{n:<3} iterations = {:>3}  discrete residual = {:.2e}  max error = {err:.3e}{ratio}",
            out.iterations, out.discrete_residual
        );
        last = Some(err);
    }
    Ok(())
}
