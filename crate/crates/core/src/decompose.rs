//! The second-order pair (ũ, w) with w = Δũ − λũ/2 and its residuals.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::MAX_DIM;
use crate::fields::{GridSpec, Point, PotentialSpec, ScalarField};
use crate::lifting::{lift_solution, lifted_grid, LiftParams};
use crate::report::CheckReport;

/// ũ and w on one lifted grid together with the derived fields the
/// quadrature needs: ∇ũ, ∇w, and V, ∇V at every base node.
#[derive(Clone, Debug)]
pub struct LiftedSystem {
    u: ScalarField,
    w: ScalarField,
    grad_u: Vec<ScalarField>,
    grad_w: Vec<ScalarField>,
    params: LiftParams,
    potential: PotentialSpec,
    v_base: Vec<f64>,
    grad_v_base: Vec<Point>,
    in_domain: Vec<bool>,
}

pub fn compute_w(u_tilde: &ScalarField, p: &LiftParams) -> ScalarField {
    let lap = u_tilde.laplacian();
    lap.combine(1.0, u_tilde, -0.5 * p.lambda).expect("same grid")
}

impl LiftedSystem {
    /// Builds the system from a field already on the lifted grid. The potential
    /// lives on the first d − 1 axes.
    pub fn new(u_tilde: ScalarField, potential: PotentialSpec, params: LiftParams) -> Result<Self> {
        let grid = u_tilde.grid().clone();
        if !(2..=3).contains(&grid.dim) {
            return Err(Error::Invalid(format!("lifted dimension {} not in {{2, 3}}", grid.dim)));
        }
        if potential.base_dim != grid.dim - 1 {
            return Err(Error::GridMismatch(format!(
                "potential on dimension {} for a lifted grid of dimension {}",
                potential.base_dim, grid.dim
            )));
        }
        let base = grid.base()?;
        let nb = base.len();
        let (v_base, (grad_v_base, in_domain)): (Vec<f64>, (Vec<Point>, Vec<bool>)) = (0..nb)
            .into_par_iter()
            .map(|i| {
                let p = base.point(i);
                let x = &p[..base.dim];
                if potential.in_domain(x) {
                    (potential.value(x), (potential.gradient(x), true))
                } else {
                    (0.0, ([0.0; MAX_DIM], false))
                }
            })
            .unzip();
        let w = compute_w(&u_tilde, &params);
        let grad_u = u_tilde.gradient();
        let grad_w = w.gradient();
        Ok(Self { u: u_tilde, w, grad_u, grad_w, params, potential, v_base, grad_v_base, in_domain })
    }

    /// Lifts a base solution u(x) to ũ(x,t) = u(x)e^{√λ t} and builds the system.
    pub fn lift(u: &ScalarField, potential: PotentialSpec, params: LiftParams) -> Result<Self> {
        let lg = lifted_grid(u.grid())?;
        let ut = lift_solution(u, &params, &lg)?;
        Self::new(ut, potential, params)
    }

    pub fn grid(&self) -> &GridSpec {
        self.u.grid()
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn w(&self) -> &ScalarField {
        &self.w
    }

    pub fn grad_u(&self) -> &[ScalarField] {
        &self.grad_u
    }

    pub fn grad_w(&self) -> &[ScalarField] {
        &self.grad_w
    }

    pub fn params(&self) -> &LiftParams {
        &self.params
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    /// Boundary layers without valid ∇w.
    pub fn margin(&self) -> usize {
        self.grad_w[0].margin()
    }

    fn base_index(&self, flat: usize) -> usize {
        flat / self.grid().points_per_axis
    }

    pub fn v_at(&self, flat: usize) -> f64 {
        self.v_base[self.base_index(flat)]
    }

    /// ∇V at the node, with a zero t-component.
    pub fn grad_v_at(&self, flat: usize) -> Point {
        let mut g = self.grad_v_base[self.base_index(flat)];
        g[self.grid().dim - 1] = 0.0;
        g
    }

    pub fn in_domain(&self, flat: usize) -> bool {
        self.in_domain[self.base_index(flat)]
    }

    /// Field r = Δw − (3/2)λw − (V − λ²/4)ũ, valid two layers in.
    pub fn second_residual_field(&self) -> ScalarField {
        let lw = self.w.laplacian();
        let lam = self.params.lambda;
        let grid = self.grid().clone();
        let margin = lw.margin();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                if !lw.is_valid(i) || !self.in_domain(i) {
                    return 0.0;
                }
                let q = self.v_at(i) - lam * lam / 4.0;
                lw.values()[i] - 1.5 * lam * self.w.values()[i] - q * self.u.values()[i]
            })
            .collect();
        ScalarField::from_parts(grid, values, margin)
    }
}

fn max_abs_report(name: &str, field: &ScalarField, c_case: f64) -> CheckReport {
    let max = field.values().par_iter().map(|v| v.abs()).reduce(|| 0.0, f64::max);
    let h = field.grid().spacing();
    CheckReport::new(name, max, h * h, c_case)
        .with_meta_f64("h", h)
        .with_meta("margin", field.margin())
}

/// Max |Δw − (3/2)λw − (V − λ²/4)ũ| against the tolerance c_case·h².
pub fn residual_second(sys: &LiftedSystem, c_case: f64) -> CheckReport {
    max_abs_report("residual-second", &sys.second_residual_field(), c_case)
}

/// Field Δ(Δũ) − 2λΔũ − (V − λ²)ũ on the double interior.
pub fn biharmonic_residual_field(u_tilde: &ScalarField, v: &PotentialSpec, p: &LiftParams) -> Result<ScalarField> {
    let grid = u_tilde.grid().clone();
    if v.base_dim + 1 != grid.dim {
        return Err(Error::GridMismatch("potential dimension does not match the lifted grid".into()));
    }
    let l1 = u_tilde.laplacian();
    let l2 = l1.laplacian();
    let lam = p.lambda;
    let margin = l2.margin();
    let n = grid.points_per_axis;
    let base = grid.base()?;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if !l2.is_valid(i) {
                return 0.0;
            }
            let bp = base.point(i / n);
            let x = &bp[..base.dim];
            if !v.in_domain(x) {
                return 0.0;
            }
            l2.values()[i] - 2.0 * lam * l1.values()[i] - (v.value(x) - lam * lam) * u_tilde.values()[i]
        })
        .collect();
    Ok(ScalarField::from_parts(grid, values, margin))
}

/// Max |Δ²ũ − 2λΔũ − (V − λ²)ũ| with the composed discrete Laplacian.
pub fn residual_biharmonic(u_tilde: &ScalarField, v: &PotentialSpec, p: &LiftParams, c_case: f64) -> Result<CheckReport> {
    Ok(max_abs_report("residual-biharmonic", &biharmonic_residual_field(u_tilde, v, p)?, c_case))
}

/// Residual constant from a refinement study: the worst implied constant
/// over the measured resolutions times a safety factor.
pub fn calibrate_residual_constant(reports: &[CheckReport], safety: f64) -> f64 {
    safety * reports.iter().map(|r| r.implied_constant).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::lifting::select_params;

    fn eigen_system(h: f64) -> LiftedSystem {
        let base = GridSpec::with_spacing(2, 0.25, h).unwrap();
        let u = ScalarField::from_expr(base, &Expr::SinProduct { mu: 2.0 }).unwrap();
        let v = PotentialSpec::constant(64.0, 2);
        let p = select_params(&v);
        LiftedSystem::lift(&u, v, p).unwrap()
    }

    #[test]
    fn w_vanishes_for_harmonic_and_is_constant_for_radius_squared() {
        let g = GridSpec::new(2, 0.5, 33).unwrap();
        let u = ScalarField::from_expr(g.clone(), &Expr::Harmonic { degree: 2 }).unwrap();
        let w = compute_w(&u, &LiftParams::flat(0.0));
        assert!(w.values().iter().all(|v| v.abs() < 1e-11));

        let g3 = GridSpec::new(3, 0.5, 17).unwrap();
        let u = ScalarField::from_expr(g3.clone(), &Expr::RadiusSquared).unwrap();
        let w = compute_w(&u, &LiftParams::flat(0.0));
        for i in 0..g3.len() {
            if w.is_valid(i) {
                assert!((w.values()[i] - 6.0).abs() < 1e-10);
            }
        }
    }

    fn max_in_box(f: &ScalarField, half: f64) -> f64 {
        (0..f.grid().len())
            .filter(|&i| f.grid().point(i).iter().all(|c| c.abs() <= half + 1e-12))
            .map(|i| f.values()[i].abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn eigen_lift_has_small_w_and_residuals() {
        let coarse = eigen_system(1.0 / 32.0);
        let fine = eigen_system(1.0 / 64.0);
        let (wc, wf) = (max_in_box(coarse.w(), 0.125), max_in_box(fine.w(), 0.125));
        assert!(wf / max_in_box(fine.u(), 0.125) < 0.05);
        let order = (wc / wf).log2();
        assert!(order > 1.9, "w order {order}");

        let rc = max_in_box(&coarse.second_residual_field(), 0.125);
        let rf = max_in_box(&fine.second_residual_field(), 0.125);
        let order = crate::report::observed_order(rc, rf, 2.0);
        assert!(order > 1.9, "residual order {order}");

        let reports = [residual_second(&coarse, f64::INFINITY), residual_second(&fine, f64::INFINITY)];
        let c = calibrate_residual_constant(&reports, 2.0);
        let finer = residual_second(&eigen_system(1.0 / 128.0), c);
        assert!(finer.pass, "{finer:?}");
    }

    #[test]
    fn zero_field_has_zero_residual() {
        let base = GridSpec::new(2, 0.5, 17).unwrap();
        let u = ScalarField::zeros(base);
        let v = PotentialSpec::constant(64.0, 2);
        let sys = LiftedSystem::lift(&u, v.clone(), select_params(&v)).unwrap();
        assert_eq!(residual_second(&sys, 0.0).lhs, 0.0);
        assert!(residual_second(&sys, 0.0).pass);
        let rb = residual_biharmonic(sys.u(), &v, sys.params(), 0.0).unwrap();
        assert_eq!(rb.lhs, 0.0);
    }

    #[test]
    fn formulations_agree_to_round_off() {
        let s = eigen_system(1.0 / 32.0);
        let r2 = s.second_residual_field();
        let rb = biharmonic_residual_field(s.u(), s.potential(), s.params()).unwrap();
        // Round-off of Δ_h² is bounded by ε·‖Δ_h‖²·max|ũ| with ‖Δ_h‖ ≤ 4d/h².
        let h = s.grid().spacing();
        let op = 12.0 / (h * h);
        let scale = s.u().values().iter().fold(0.0f64, |m, v| m.max(v.abs())) * op * op;
        for i in 0..r2.values().len() {
            assert!((r2.values()[i] - rb.values()[i]).abs() <= 64.0 * f64::EPSILON * scale);
        }
    }
}
