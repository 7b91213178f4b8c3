//! Vanishing order at a point from the growth of ∫_{B_r}u², and the two upper
//! bounds it is compared against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::MAX_DIM;
use crate::fields::{PotentialSpec, ScalarField};
use crate::frequency::FrequencyProfile;
use crate::lifting::LiftParams;
use crate::quadrature::{integrate_multi, Ball, BallRule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    /// Node the estimate was taken at (after snapping).
    pub point: Vec<f64>,
    pub slope: f64,
    /// (slope − d)/2 with d the field's dimension.
    pub order: f64,
    /// Root mean square of the log-mass residuals of the fit.
    pub fit_residual: f64,
    pub radii_used: Vec<f64>,
}

/// ∫_{B_r(x₀)} f² with cut-cell weights.
pub fn ball_mass(field: &ScalarField, x0: &[f64], r: f64) -> f64 {
    let (s, _) = integrate_multi::<1, _>(field.grid(), &Ball::new(x0, r), BallRule::Hybrid, |i, g| {
        [field.values()[i].powi(2) * g.fraction]
    });
    s[0]
}

/// Least-squares slope of log ∫_{B_r(x₀)} f² against log r.
pub fn estimate_order(field: &ScalarField, x0: &[f64], radii: &[f64]) -> Result<OrderEstimate> {
    let grid = field.grid();
    let d = grid.dim;
    if radii.len() < 4 {
        return Err(Error::Invalid(format!("need at least 4 radii, got {}", radii.len())));
    }
    if radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("radii must be positive and strictly increasing".into()));
    }
    let q = radii[1] / radii[0];
    if radii.windows(2).any(|w| ((w[1] / w[0]) / q - 1.0).abs() > 1e-6) {
        return Err(Error::Invalid("radii must be geometric".into()));
    }
    if x0.len() != d {
        return Err(Error::GridMismatch(format!("point has {} coordinates, field is {d}-dimensional", x0.len())));
    }
    let h = grid.spacing();
    let idx = grid
        .nearest_index(x0)
        .ok_or_else(|| Error::Invalid(format!("point {x0:?} is outside the grid")))?;
    let mut p = [0.0; MAX_DIM];
    for a in 0..d {
        p[a] = grid.coord(idx[a]);
    }
    let moved = (0..d).map(|a| (p[a] - x0[a]).powi(2)).sum::<f64>().sqrt();
    if moved > 1e-12 * h {
        log::warn!(
            "order point {x0:?} snapped to node {:?}; expect an order shift of about {:.2e}",
            &p[..d],
            moved / radii[0]
        );
    }
    let r_max = radii[radii.len() - 1];
    let clearance = r_max + 0.5 * h * (d as f64).sqrt();
    if (0..d).any(|a| p[a].abs() + clearance > grid.extent + 1e-12 * h) {
        return Err(Error::Invalid(format!("ball of radius {r_max} around {:?} leaves the grid", &p[..d])));
    }
    if radii[0] < 4.0 * h {
        log::warn!("smallest radius {} is below 4h = {}", radii[0], 4.0 * h);
    }
    let masses: Vec<f64> = radii.iter().map(|&r| ball_mass(field, &p[..d], r)).collect();
    if !(masses[0] > 0.0) {
        return Err(Error::VanishesBeyondResolution { radius: radii[0] });
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let fit_residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(OrderEstimate {
        point: p[..d].to_vec(),
        slope,
        order: (slope - d as f64) / 2.0,
        fit_residual,
        radii_used: radii.to_vec(),
    })
}

/// C(N(r_max) + ‖∇V‖ + 1)/(α+1) + 2, with N taken at the largest radius of
/// the profile.
pub fn order_from_frequency(profile: &FrequencyProfile, p: &LiftParams, grad_norm: f64, constant: f64) -> f64 {
    constant * (profile.last().n + grad_norm + 1.0) / (p.alpha + 1.0) + 2.0
}

/// C(‖V‖^{1/4} + ‖∇V‖ + 1).
pub fn theorem_bound(v: &PotentialSpec, constant: f64) -> Result<f64> {
    if !(constant > 0.0) {
        return Err(Error::Invalid(format!("constant {constant} must be positive")));
    }
    Ok(constant * (v.sup_norm.powf(0.25) + v.grad_sup_norm + 1.0))
}

/// Smallest C making every measured order fall below `theorem_bound(V, C)`.
pub fn calibrate_theorem_constant<'a>(samples: impl IntoIterator<Item = (f64, &'a PotentialSpec)>) -> f64 {
    samples
        .into_iter()
        .map(|(order, v)| order / (v.sup_norm.powf(0.25) + v.grad_sup_norm + 1.0))
        .fold(0.0, f64::max)
}

/// Smallest C making every measured order fall below `order_from_frequency`.
pub fn calibrate_frequency_constant<'a>(
    samples: impl IntoIterator<Item = (f64, &'a FrequencyProfile, &'a LiftParams, f64)>,
) -> f64 {
    samples
        .into_iter()
        .map(|(order, prof, p, g)| (order - 2.0) * (p.alpha + 1.0) / (prof.last().n + g + 1.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::fields::GridSpec;
    use crate::frequency::geometric_radii;

    #[test]
    fn theorem_bound_arithmetic() {
        assert_eq!(theorem_bound(&PotentialSpec::zero(2), 1.0).unwrap(), 1.0);
        let v = PotentialSpec::constant(64.0, 2);
        assert!((theorem_bound(&v, 1.0).unwrap() - (2.0 * 2f64.sqrt() + 1.0)).abs() < 1e-12);
        assert!(theorem_bound(&v, 0.0).is_err());
    }

    #[test]
    fn constant_field_has_order_zero() {
        let g = GridSpec::with_spacing(2, 0.5, 1.0 / 128.0).unwrap();
        let f = ScalarField::from_expr(g, &Expr::Constant { value: 3.0 }).unwrap();
        let e = estimate_order(&f, &[0.0, 0.0], &geometric_radii(0.04, 0.32, 6).unwrap()).unwrap();
        assert!(e.order.abs() < 0.01, "{e:?}");
    }

    #[test]
    fn zero_field_vanishes() {
        let g = GridSpec::with_spacing(2, 0.5, 1.0 / 64.0).unwrap();
        let f = ScalarField::zeros(g);
        let r = estimate_order(&f, &[0.0, 0.0], &geometric_radii(0.05, 0.4, 4).unwrap());
        assert!(matches!(r, Err(Error::VanishesBeyondResolution { .. })));
    }

    #[test]
    fn too_few_radii() {
        let g = GridSpec::with_spacing(2, 0.5, 1.0 / 64.0).unwrap();
        let f = ScalarField::zeros(g);
        assert!(estimate_order(&f, &[0.0, 0.0], &[0.1, 0.2, 0.4]).is_err());
    }
}
