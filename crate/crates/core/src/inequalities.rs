//! Doubling, changing-center, Caccioppoli and sup-norm estimates. Each check
//! is written as `lhs ≤ C·rhs` and reports the smallest C that works.

use serde::{Deserialize, Serialize};

use crate::decompose::LiftedSystem;
use crate::error::{Error, Result};
use crate::expr::MAX_DIM;
use crate::fields::Point;
use crate::quadrature::{compute_integrals, integrate_multi, require_resolved, validate_ball, Ball, BallRule};
use crate::report::CheckReport;

/// Pass thresholds for the implied constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub doubling_upper: f64,
    pub doubling_lower: f64,
    pub h_doubling_upper: f64,
    pub h_doubling_lower: f64,
    pub changing_center: f64,
    pub caccioppoli: f64,
    pub sup_bound: f64,
}

impl Default for Budgets {
    /// Roughly ten times the worst constant seen on the shipped cases at
    /// h = 1/64 (r₁ = 0.1, r₂ = 0.2 for doubling, r = 0.4 for changing
    /// center, r = 0.2 for the interior estimates), rounded up.
    fn default() -> Self {
        Self {
            doubling_upper: 9.0,
            doubling_lower: 8.0,
            h_doubling_upper: 2.5,
            h_doubling_lower: 3.6,
            changing_center: 6.5,
            caccioppoli: 5.0,
            sup_bound: 2.9,
        }
    }
}

fn grad_norm(sys: &LiftedSystem) -> f64 {
    sys.potential().grad_sup_norm
}

fn weighted_pair(sys: &LiftedSystem, center: &[f64], r1: f64, r2: f64) -> Result<(f64, f64, f64, f64)> {
    if !(r1 > 0.0 && r2 > r1) {
        return Err(Error::Invalid(format!("need 0 < r1 < r2 (got {r1}, {r2})")));
    }
    let ball = validate_ball(sys, &Ball::new(center, r1))?;
    let a = compute_integrals(sys, &ball, BallRule::Hybrid)?;
    let b = compute_integrals(sys, &ball.with_radius(r2), BallRule::Hybrid)?;
    if !(a.H > 0.0) {
        return Err(Error::TrivialSolution { radius: r1 });
    }
    Ok((a.H, b.H, a.I_form2 / a.H, b.I_form2 / b.H))
}

/// log(H(r₂)/H(r₁)) / log(r₂/r₁).
pub fn doubling_exponent(sys: &LiftedSystem, center: &[f64], r1: f64, r2: f64) -> Result<f64> {
    let (h1, h2, _, _) = weighted_pair(sys, center, r1, r2)?;
    Ok((h2 / h1).ln() / (r2 / r1).ln())
}

/// The upper and lower doubling bounds for H.
///
/// Upper: H(r₂) ≤ (r₂/r₁)^{d+2α+C(N(r₂)+‖∇V‖+1)/(α+1)} H(r₁), so
/// lhs = (e − d − 2α)(α+1) and rhs = N(r₂) + ‖∇V‖ + 1.
///
/// Lower: H(r₂) ≥ (r₂/r₁)^{d+2α+(N(r₁)/C−‖∇V‖−1)/(α+1)} H(r₁), so
/// lhs = N(r₁) and rhs = (e − d − 2α)(α+1) + ‖∇V‖ + 1.
pub fn doubling_reports(sys: &LiftedSystem, center: &[f64], r1: f64, r2: f64, budgets: &Budgets) -> Result<Vec<CheckReport>> {
    let (h1, h2, n1, n2) = weighted_pair(sys, center, r1, r2)?;
    let e = (h2 / h1).ln() / (r2 / r1).ln();
    let a = sys.params().alpha;
    let d = sys.grid().dim as f64;
    let g = grad_norm(sys);
    let excess = (e - d - 2.0 * a) * (a + 1.0);
    let tag = |r: CheckReport| {
        r.with_meta_f64("r1", r1)
            .with_meta_f64("r2", r2)
            .with_meta_f64("exponent", e)
            .with_meta_f64("N_r1", n1)
            .with_meta_f64("N_r2", n2)
    };
    Ok(vec![
        tag(CheckReport::new("doubling-upper", excess, n2 + g + 1.0, budgets.doubling_upper)),
        tag(CheckReport::new("doubling-lower", n1, excess + g + 1.0, budgets.doubling_lower)),
    ])
}

/// Upper doubling bound for the unweighted mass h:
/// h(r₂) ≤ (4/3)^α (2r₂/r₁)^{d+C(N(2r₂)+‖∇V‖+1)/(α+1)} h(r₁).
pub fn h_doubling(sys: &LiftedSystem, center: &[f64], r1: f64, r2: f64, budget: f64) -> Result<CheckReport> {
    let (h1, h2, n_big) = h_masses(sys, center, r1, r2, 2.0 * r2)?;
    let a = sys.params().alpha;
    let d = sys.grid().dim as f64;
    let g = grad_norm(sys);
    let e = ((h2 / h1).ln() - a * (4.0f64 / 3.0).ln()) / (2.0 * r2 / r1).ln();
    Ok(CheckReport::new("h-doubling-upper", (e - d) * (a + 1.0), n_big + g + 1.0, budget)
        .with_meta_f64("r1", r1)
        .with_meta_f64("r2", r2)
        .with_meta_f64("exponent", e)
        .with_meta_f64("N_2r2", n_big))
}

/// Lower doubling bound for h, meaningful only when r₂ > 2r₁:
/// h(r₂) ≥ (3/4)^α (r₂/(2r₁))^{d+(N(2r₁)/C−‖∇V‖−1)/(α+1)} h(r₁).
pub fn h_doubling_lower(sys: &LiftedSystem, center: &[f64], r1: f64, r2: f64, budget: f64) -> Result<Option<CheckReport>> {
    if r2 <= 2.0 * r1 {
        return Ok(None);
    }
    let (h1, h2, n_small) = h_masses(sys, center, r1, r2, 2.0 * r1)?;
    let a = sys.params().alpha;
    let d = sys.grid().dim as f64;
    let g = grad_norm(sys);
    let e = ((h2 / h1).ln() + a * (4.0f64 / 3.0).ln()) / (r2 / (2.0 * r1)).ln();
    Ok(Some(
        CheckReport::new("h-doubling-lower", n_small, (e - d) * (a + 1.0) + g + 1.0, budget)
            .with_meta_f64("r1", r1)
            .with_meta_f64("r2", r2)
            .with_meta_f64("exponent", e)
            .with_meta_f64("N_2r1", n_small),
    ))
}

fn h_masses(sys: &LiftedSystem, center: &[f64], r1: f64, r2: f64, r_freq: f64) -> Result<(f64, f64, f64)> {
    if !(r1 > 0.0 && r2 > r1) {
        return Err(Error::Invalid(format!("need 0 < r1 < r2 (got {r1}, {r2})")));
    }
    let ball = validate_ball(sys, &Ball::new(center, r1.max(r2).max(r_freq)))?;
    let a = compute_integrals(sys, &ball.with_radius(r1), BallRule::Hybrid)?;
    let b = compute_integrals(sys, &ball.with_radius(r2), BallRule::Hybrid)?;
    let f = compute_integrals(sys, &ball.with_radius(r_freq), BallRule::Hybrid)?;
    if !(a.h_plain > 0.0) {
        return Err(Error::TrivialSolution { radius: r1 });
    }
    if !(f.H > 0.0) {
        return Err(Error::TrivialSolution { radius: r_freq });
    }
    Ok((a.h_plain, b.h_plain, f.I_form2 / f.H))
}

/// H(r) ≤ r^{2α}·h(r) with both sides summed over the same nodes in the same
/// order, so the inequality holds exactly in floating point. Passes only with
/// zero violation.
#[allow(non_snake_case)]
pub fn check_h_H_upper(sys: &LiftedSystem, center: &[f64], r: f64) -> Result<CheckReport> {
    let ball = validate_ball(sys, &Ball::new(center, r))?;
    let a = sys.params().alpha;
    let scale = (r * r).powf(a);
    let (s, count) = integrate_multi::<2, _>(sys.grid(), &ball, BallRule::Nodes, |i, g| {
        let m = sys.u().values()[i].powi(2) + sys.w().values()[i].powi(2);
        [m * g.weight(a, BallRule::Nodes), m * scale * g.weight(0.0, BallRule::Nodes)]
    });
    require_resolved(sys.grid(), &ball, count)?;
    Ok(exact("h-H-upper", s[0], s[1]).with_meta_f64("r", r))
}

/// h(r) ≤ H(ρ)/(ρ²−r²)^α for r < ρ, summed over the nodes of B_ρ in one pass.
#[allow(non_snake_case)]
pub fn check_h_H_lower(sys: &LiftedSystem, center: &[f64], r: f64, rho: f64) -> Result<CheckReport> {
    if !(r > 0.0 && rho > r) {
        return Err(Error::Invalid(format!("need 0 < r < rho (got {r}, {rho})")));
    }
    let ball = validate_ball(sys, &Ball::new(center, rho))?;
    let a = sys.params().alpha;
    let gap = (rho * rho - r * r).powf(a);
    let r2 = r * r;
    let (s, count) = integrate_multi::<2, _>(sys.grid(), &ball, BallRule::Nodes, |i, g| {
        let m = sys.u().values()[i].powi(2) + sys.w().values()[i].powi(2);
        let small = f64::from(u8::from(g.inside && g.dist2 < r2));
        [m * small, m * (g.weight(a, BallRule::Nodes) / gap)]
    });
    require_resolved(sys.grid(), &ball.with_radius(r), count)?;
    Ok(exact("h-H-lower", s[0], s[1]).with_meta_f64("r", r).with_meta_f64("rho", rho))
}

fn exact(name: &str, lhs: f64, rhs: f64) -> CheckReport {
    let mut rep = CheckReport::new(name, lhs, rhs, 1.0);
    rep.pass = lhs <= rhs;
    rep.with_meta_f64("violation", (lhs - rhs).max(0.0))
}

/// Point `index` of the Halton sequence in bases 2, 3, 5.
fn halton(index: u64, axis: usize) -> f64 {
    let base = [2u64, 3, 5][axis];
    let (mut i, mut f, mut out) = (index, 1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        out += f * (i % base) as f64;
        i /= base;
    }
    out
}

/// Deterministic points of the unit ball in `dim` dimensions, drawn from the
/// Halton sequence starting after `seed` elements.
pub fn halton_ball_points(dim: usize, count: usize, seed: u64) -> Vec<Point> {
    let mut out = Vec::with_capacity(count);
    let mut k = seed + 1;
    while out.len() < count {
        let mut p = [0.0; MAX_DIM];
        for (a, pa) in p.iter_mut().enumerate().take(dim) {
            *pa = 2.0 * halton(k, a) - 1.0;
        }
        k += 1;
        if p.iter().map(|x| x * x).sum::<f64>() < 1.0 {
            out.push(p);
        }
    }
    out
}

/// N(z₁, r/8) ≤ C(‖∇V‖ + (α+1)² + N(z₀, 9r/16)) for centers z₁ in B_{r/32}(z₀)
/// on t = 0. Samples are snapped to nodes; duplicates are evaluated once and
/// samples whose ball is not valid are skipped.
pub fn changing_center(sys: &LiftedSystem, z0: &[f64], r: f64, sample_count: usize, seed: u64, budget: f64) -> Result<CheckReport> {
    if sample_count == 0 {
        return Err(Error::Invalid("sample_count must be at least 1".into()));
    }
    let grid = sys.grid();
    let d = grid.dim;
    let outer = validate_ball(sys, &Ball::new(z0, 9.0 * r / 16.0))?;
    let big = compute_integrals(sys, &outer, BallRule::Hybrid)?;
    if !(big.H > 0.0) {
        return Err(Error::TrivialSolution { radius: outer.radius });
    }
    let n0 = big.I_form2 / big.H;
    let mut centers: Vec<[usize; MAX_DIM]> = Vec::new();
    for p in halton_ball_points(d - 1, sample_count, seed) {
        let mut z = outer.center;
        for a in 0..d - 1 {
            z[a] += p[a] * r / 32.0;
        }
        if let Some(idx) = grid.nearest_index(&z) {
            if !centers.contains(&idx) {
                centers.push(idx);
            }
        }
    }
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = outer.center;
    let mut used = 0usize;
    for idx in &centers {
        let mut z = [0.0; MAX_DIM];
        for a in 0..d {
            z[a] = grid.coord(idx[a]);
        }
        let n1 = match compute_integrals(sys, &Ball::new(&z, r / 8.0), BallRule::Hybrid) {
            Ok(s) if s.H > 0.0 => s.I_form2 / s.H,
            Ok(_) => {
                log::warn!("changing center: trivial solution near {:?}, sample skipped", &z[..d]);
                continue;
            }
            Err(e) => {
                log::warn!("changing center: sample {:?} skipped ({e})", &z[..d]);
                continue;
            }
        };
        used += 1;
        if n1 > worst {
            worst = n1;
            worst_at = z;
        }
    }
    if used == 0 {
        return Err(Error::UnderResolved(format!("every changing-center sample around {:?} was skipped", &z0[..d.min(z0.len())])));
    }
    let a = sys.params().alpha;
    let rhs = grad_norm(sys) + (a + 1.0).powi(2) + n0;
    Ok(CheckReport::new("changing-center", worst, rhs, budget)
        .with_meta_f64("r", r)
        .with_meta_f64("N_outer", n0)
        .with_meta("samples_used", used)
        .with_meta("worst_center", worst_at[..d].to_vec()))
}

/// ∫_{B_r} w² ≤ C(λ²+1) r⁻⁴ ∫_{B_{2r}} ũ².
pub fn caccioppoli_check(sys: &LiftedSystem, center: &[f64], r: f64, budget: f64) -> Result<CheckReport> {
    let ball = validate_ball(sys, &Ball::new(center, 2.0 * r))?;
    let inner = crate::quadrature::mass_w(sys, &ball.with_radius(r), BallRule::Hybrid)?;
    let outer = crate::quadrature::mass_u(sys, &ball, BallRule::Hybrid)?;
    let lam = sys.params().lambda;
    Ok(CheckReport::new("caccioppoli", inner, (lam * lam + 1.0) * r.powi(-4) * outer, budget).with_meta_f64("r", r))
}

/// ‖ũ‖_{L∞(B_r)} ≤ C(λ² + 1 + ‖∇V‖^{(n+2)/4}) r^{−d/2} ‖ũ‖_{L²(B_{2r})} with n = d − 1.
pub fn sup_bound_check(sys: &LiftedSystem, center: &[f64], r: f64, budget: f64) -> Result<CheckReport> {
    let ball = validate_ball(sys, &Ball::new(center, 2.0 * r))?;
    let d = sys.grid().dim as f64;
    let n = d - 1.0;
    let sup = sys.u().sup_norm_about(&ball.center, r)?;
    let l2 = crate::quadrature::mass_u(sys, &ball, BallRule::Hybrid)?.sqrt();
    let lam = sys.params().lambda;
    let factor = lam * lam + 1.0 + grad_norm(sys).powf((n + 2.0) / 4.0);
    Ok(CheckReport::new("sup-bound", sup, factor * r.powf(-d / 2.0) * l2, budget)
        .with_meta_f64("r", r)
        .with_meta_f64("gradient_exponent", (n + 2.0) / 4.0))
}
