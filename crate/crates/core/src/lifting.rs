//! The lift ũ(x,t) = u(x)e^{√λ t} and the parameter choices λ = 2‖V‖^{1/2}, α = ‖∇V‖.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{dense_max, GridSpec, PotentialSource, PotentialSpec, ScalarField};
use crate::report::CheckReport;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftParams {
    pub lambda: f64,
    pub alpha: f64,
    pub sqrt_lambda: f64,
}

impl LiftParams {
    /// Parameters with λ = 0 and the given weight exponent.
    pub fn flat(alpha: f64) -> Self {
        Self { lambda: 0.0, alpha, sqrt_lambda: 0.0 }
    }
}

pub fn select_params(v: &PotentialSpec) -> LiftParams {
    select_params_with_floor(v, 0.0)
}

/// As [`select_params`] with α = max(‖∇V‖, alpha_floor).
pub fn select_params_with_floor(v: &PotentialSpec, alpha_floor: f64) -> LiftParams {
    let lambda = 2.0 * v.sup_norm.sqrt();
    LiftParams {
        lambda,
        alpha: v.grad_sup_norm.max(alpha_floor),
        sqrt_lambda: std::f64::consts::SQRT_2 * v.sup_norm.powf(0.25),
    }
}

/// Checks ‖V − λ²/4‖ ≤ ‖∇V‖ by dense sampling of V on the unit ball.
pub fn check_potential_shift(v: &PotentialSpec, p: &LiftParams) -> CheckReport {
    let shift = p.lambda * p.lambda / 4.0;
    let lhs = match &v.source {
        PotentialSource::Constant(c) => (c - shift).abs(),
        _ => dense_max(v.base_dim, |x| v.in_domain(x).then(|| (v.value(x) - shift, 0.0)))
            .map_or(0.0, |m| m.0),
    };
    let tol = 1e-12 * (1.0 + shift);
    CheckReport::new("potential-shift", lhs, v.grad_sup_norm + tol, 1.0)
        .with_meta_f64("lambda_sq_over_4", shift)
        .with_meta_f64("grad_sup_norm", v.grad_sup_norm)
}

/// Lifted grid: same extent and resolution, one extra (last) axis for t.
pub fn lifted_grid(base: &GridSpec) -> Result<GridSpec> {
    base.lifted()
}

pub fn lift_solution(u: &ScalarField, p: &LiftParams, lifted: &GridSpec) -> Result<ScalarField> {
    let base = u.grid();
    if lifted.dim != base.dim + 1
        || lifted.points_per_axis != base.points_per_axis
        || lifted.extent != base.extent
    {
        return Err(Error::GridMismatch(format!(
            "lifted grid (dim {}, {} points, extent {}) does not extend the base grid (dim {}, {} points, extent {})",
            lifted.dim, lifted.points_per_axis, lifted.extent, base.dim, base.points_per_axis, base.extent
        )));
    }
    let n = lifted.points_per_axis;
    let growth: Vec<f64> = (0..n).map(|j| (p.sqrt_lambda * lifted.coord(j)).exp()).collect();
    let values = u
        .values()
        .par_iter()
        .flat_map_iter(|&ub| growth.iter().map(move |g| ub * g))
        .collect();
    ScalarField::new(lifted.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    #[test]
    fn parameter_selection() {
        let p = select_params(&PotentialSpec::zero(2));
        assert_eq!((p.lambda, p.sqrt_lambda, p.alpha), (0.0, 0.0, 0.0));
        let p = select_params(&PotentialSpec::constant(1.0, 2));
        assert_eq!(p.lambda, 2.0);
        assert!((p.sqrt_lambda - 2f64.sqrt()).abs() < 1e-15);
        let p = select_params(&PotentialSpec::constant(64.0, 2));
        assert_eq!((p.lambda, p.alpha), (16.0, 0.0));
        assert!((p.sqrt_lambda * p.sqrt_lambda - p.lambda).abs() < 1e-12);
        assert_eq!(select_params_with_floor(&PotentialSpec::zero(2), 0.5).alpha, 0.5);
    }

    #[test]
    fn potential_shift_examples() {
        for v in [PotentialSpec::zero(2), PotentialSpec::constant(64.0, 2)] {
            let r = check_potential_shift(&v, &select_params(&v));
            assert_eq!(r.lhs, 0.0);
            assert!(r.pass);
        }
        let v = PotentialSpec::closed(Expr::Poly1 { axis: 0, coeffs: vec![64.0, 1.0] }, 2).unwrap();
        let r = check_potential_shift(&v, &select_params(&v));
        // λ²/4 = 65, so V − 65 reaches −2 at x₁ = −1.
        assert!((r.lhs - 2.0).abs() < 1e-12);
        assert!(!r.pass);
    }

    #[test]
    fn lift_values() {
        let base = GridSpec::new(1, 0.5, 17).unwrap();
        let u = ScalarField::from_expr(base.clone(), &Expr::Constant { value: 3.0 }).unwrap();
        let p = LiftParams { lambda: 4.0, alpha: 0.0, sqrt_lambda: 2.0 };
        let lg = lifted_grid(&base).unwrap();
        let ut = lift_solution(&u, &p, &lg).unwrap();
        let top = lg.flatten(&[3, 16]);
        assert!((ut.values()[top] - 3.0 * 1f64.exp()).abs() < 1e-12);
        assert!((3.0 * 1f64.exp() - 8.15485).abs() < 1e-5);

        let flat = lift_solution(&u, &LiftParams::flat(0.0), &lg).unwrap();
        assert!(flat.values().iter().all(|v| *v == 3.0));
        assert!(lift_solution(&u, &p, &GridSpec::new(2, 0.5, 19).unwrap()).is_err());
    }

    #[test]
    fn zero_slice_is_the_base_field() {
        let base = GridSpec::new(2, 0.5, 17).unwrap();
        let u = ScalarField::from_expr(base.clone(), &Expr::SinProduct { mu: 2.0 }).unwrap();
        let p = LiftParams { lambda: 16.0, alpha: 0.0, sqrt_lambda: 4.0 };
        let lg = lifted_grid(&base).unwrap();
        let ut = lift_solution(&u, &p, &lg).unwrap();
        let c = lg.center_index();
        for i in 0..base.len() {
            let idx = base.unflatten(i);
            assert_eq!(ut.values()[lg.flatten(&[idx[0], idx[1], c])], u.values()[i]);
        }
    }
}
