//! Integrals over balls: the weighted mass H, the two forms of I and its
//! terms I₁..I₅, the plain mass h, and the terms of the I′ expansion.
//!
//! Two node rules are available. [`BallRule::Nodes`] is the plain midpoint
//! rule over nodes strictly inside the ball. [`BallRule::Hybrid`] keeps that
//! rule away from the sphere; on cells the sphere cuts, ρ = r² − |z − z₀|² is
//! linearized and each node carries the exact cell average of ρ₊^β for that
//! linear ρ (the volume fraction when β = 0). Without this an unweighted
//! integral is a staircase in r, and a small fractional β converges slowly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decompose::LiftedSystem;
use crate::error::{Error, Result};
use crate::expr::MAX_DIM;
use crate::fields::{GridSpec, Point};
use crate::summation::{pairwise_sum_arrays, Pairwise};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: &[f64], radius: f64) -> Self {
        let mut c = [0.0; MAX_DIM];
        for (ci, v) in c.iter_mut().zip(center) {
            *ci = *v;
        }
        Self { center: c, radius }
    }

    pub fn at_origin(radius: f64) -> Self {
        Self { center: [0.0; MAX_DIM], radius }
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        Self { center: self.center, radius }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallRule {
    Nodes,
    #[default]
    Hybrid,
}

/// Geometry of one node relative to the ball.
#[derive(Clone, Copy, Debug)]
pub struct NodeGeom {
    /// z − z₀.
    pub offset: Point,
    pub dist2: f64,
    /// r² − |z − z₀|², clamped at 0.
    pub rho: f64,
    /// Strictly inside the ball.
    pub inside: bool,
    /// Cell volume fraction below the tangent plane (1 deep inside, 0 outside).
    pub fraction: f64,
    /// Linearization of ρ over a cell near the sphere.
    pub cut: Option<CutCell>,
}

/// Over the cell, ρ(z + δ) ≈ scale·(c − S) with S a sum of independent
/// uniforms on [0, t_i].
#[derive(Clone, Copy, Debug)]
pub struct CutCell {
    pub scale: f64,
    pub c: f64,
    pub t: [f64; MAX_DIM],
    pub k: usize,
}

impl CutCell {
    /// Cell average of ρ₊^β.
    pub fn moment(&self, beta: f64) -> f64 {
        self.scale.powf(beta) * uniform_sum_moment(self.c, &self.t[..self.k], beta)
    }
}

impl NodeGeom {
    /// Weight ρ^β under the given rule.
    #[inline]
    pub fn weight(&self, beta: f64, rule: BallRule) -> f64 {
        match rule {
            BallRule::Nodes => {
                if !self.inside {
                    0.0
                } else if beta == 0.0 {
                    1.0
                } else {
                    self.rho.powf(beta)
                }
            }
            BallRule::Hybrid => match self.cut {
                _ if beta == 0.0 => self.fraction,
                Some(cut) => cut.moment(beta),
                None if self.inside => self.rho.powf(beta),
                None => 0.0,
            },
        }
    }
}

/// E[(c − S)₊^β] for S = V₁ + … + V_k, V_i ~ U[0, t_i], by inclusion–exclusion
/// over the k-fold antiderivative x₊^{β+k}/((β+1)⋯(β+k)).
pub fn uniform_sum_moment(c: f64, t: &[f64], beta: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    let k = t.len();
    if k == 0 {
        return c.powf(beta);
    }
    let mut sum = 0.0;
    for mask in 0..(1usize << k) {
        let shift: f64 = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| t[i]).sum();
        let x = c - shift;
        if x > 0.0 {
            let term = x.powf(beta + k as f64);
            if mask.count_ones() % 2 == 0 {
                sum += term;
            } else {
                sum -= term;
            }
        }
    }
    let denom: f64 = t.iter().product::<f64>() * (1..=k).map(|j| beta + j as f64).product::<f64>();
    (sum / denom).max(0.0)
}

/// P(V₁ + … + V_k ≤ c) for independent V_i ~ U[0, t_i].
fn uniform_sum_cdf(c: f64, t: &[f64]) -> f64 {
    let total: f64 = t.iter().sum();
    if c <= 0.0 {
        return 0.0;
    }
    if c >= total {
        return 1.0;
    }
    if c > 0.5 * total {
        return 1.0 - uniform_sum_cdf(total - c, t);
    }
    match t.len() {
        1 => c / t[0],
        2 => {
            let (t1, t2) = (t[0].max(t[1]), t[0].min(t[1]));
            if c <= t2 {
                c * c / (2.0 * t1 * t2)
            } else {
                (c - 0.5 * t2) / t1
            }
        }
        _ => {
            let cube = |x: f64| if x > 0.0 { x * x * x } else { 0.0 };
            let (a, b, d) = (t[0], t[1], t[2]);
            let s = cube(c) - cube(c - a) - cube(c - b) - cube(c - d) + cube(c - a - b) + cube(c - a - d)
                + cube(c - b - d)
                - cube(c - a - b - d);
            (s / (6.0 * a * b * d)).clamp(0.0, 1.0)
        }
    }
}

/// Volume fraction of the cube of side h centered at a node that lies on the
/// inner side of the plane at signed distance `s` along the unit normal `n`.
pub fn cube_fraction(s: f64, n: &[f64], h: f64) -> f64 {
    let (t, k, half) = plane_steps(n, h);
    if s >= half {
        return 1.0;
    }
    if s <= -half {
        return 0.0;
    }
    let kept: f64 = t[..k].iter().sum();
    uniform_sum_cdf(s + 0.5 * kept, &t[..k])
}

/// Widths |n_i|·h of the uniform steps along the normal, dropping nearly
/// parallel faces (which contribute only their mean), and half the total width.
fn plane_steps(n: &[f64], h: f64) -> ([f64; MAX_DIM], usize, f64) {
    let mut t = [0.0; MAX_DIM];
    let mut k = 0;
    let mut half = 0.0;
    for ni in n {
        let ti = ni.abs() * h;
        half += 0.5 * ti;
        if ti >= 1e-3 * h {
            t[k] = ti;
            k += 1;
        }
    }
    (t, k, half)
}

/// Cut-cell data for a node at distance `dist` from the center of a ball of
/// radius r, or None when the cell is far from the sphere. ρ is linearized
/// as ρ₀ − 2|y|(n·δ), so its zero set is the plane at distance ρ₀/(2|y|).
fn cut_cell(offset: &Point, dist: f64, r: f64, h: f64, d: usize) -> Option<(CutCell, f64)> {
    if dist == 0.0 {
        return None;
    }
    let mut nrm = [0.0; MAX_DIM];
    for a in 0..d {
        nrm[a] = offset[a] / dist;
    }
    let (t, k, half) = plane_steps(&nrm[..d], h);
    let s = (r * r - dist * dist) / (2.0 * dist);
    // Far enough inside that the midpoint value is as good as the average.
    if s >= 3.0 * half || s <= -half {
        return None;
    }
    let kept: f64 = t[..k].iter().sum();
    let c = s + 0.5 * kept;
    let fraction = if s >= half { 1.0 } else { uniform_sum_cdf(c, &t[..k]) };
    Some((CutCell { scale: 2.0 * dist, c, t, k }, fraction))
}

/// Sum over the nodes near the ball of `f`, times h^d. Rows (all axes but
/// the last) are visited in lexicographic order and each is reduced
/// sequentially; row sums are combined by a fixed pairwise tree, so the
/// result does not depend on the thread count. Returns the sums and the
/// number of nodes strictly inside.
pub fn integrate_multi<const K: usize, F>(grid: &GridSpec, ball: &Ball, rule: BallRule, f: F) -> ([f64; K], usize)
where
    F: Fn(usize, &NodeGeom) -> [f64; K] + Sync,
{
    let d = grid.dim;
    let h = grid.spacing();
    let n = grid.points_per_axis;
    let r = ball.radius;
    let r2 = r * r;
    let reach = match rule {
        BallRule::Nodes => r,
        BallRule::Hybrid => {
            let half = 0.5 * h * (d as f64).sqrt();
            half + (half * half + r * r).sqrt()
        }
    };
    let reach2 = reach * reach;
    let c = ball.center;
    let ci = grid.center_index() as f64;
    let lo = |a: usize| (((c[a] - reach) / h + ci).floor().max(0.0)) as usize;
    let hi = |a: usize| (((c[a] + reach) / h + ci).ceil().min((n - 1) as f64)) as usize;

    // Enumerate candidate rows inside the bounding box, lexicographically.
    let mut rows: Vec<[usize; MAX_DIM]> = Vec::new();
    let mut idx = [0usize; MAX_DIM];
    let row_axes = d - 1;
    fn rec(a: usize, row_axes: usize, idx: &mut [usize; MAX_DIM], rows: &mut Vec<[usize; MAX_DIM]>, lo: &dyn Fn(usize) -> usize, hi: &dyn Fn(usize) -> usize) {
        if a == row_axes {
            rows.push(*idx);
            return;
        }
        for i in lo(a)..=hi(a) {
            idx[a] = i;
            rec(a + 1, row_axes, idx, rows, lo, hi);
        }
    }
    rec(0, row_axes, &mut idx, &mut rows, &lo, &hi);

    let last = d - 1;
    let partial: Vec<([f64; K], usize)> = rows
        .par_iter()
        .filter_map(|row| {
            let mut off = [0.0; MAX_DIM];
            let mut s2 = 0.0;
            for a in 0..row_axes {
                off[a] = grid.coord(row[a]) - c[a];
                s2 += off[a] * off[a];
            }
            if s2 >= reach2 {
                return None;
            }
            let span = (reach2 - s2).sqrt();
            let jlo = (((c[last] - span) / h + ci).ceil().max(0.0)) as usize;
            let jhi = (((c[last] + span) / h + ci).floor().min((n - 1) as f64)) as usize;
            if jlo > jhi {
                return None;
            }
            let base = grid.flatten(row) ;
            let mut acc = Pairwise::<K>::new();
            let mut count = 0usize;
            let mut any = false;
            for j in jlo..=jhi {
                let mut o = off;
                o[last] = grid.coord(j) - c[last];
                let dist2 = s2 + o[last] * o[last];
                if dist2 >= reach2 && rule == BallRule::Nodes {
                    continue;
                }
                let inside = dist2 < r2;
                let (cut, fraction) = match rule {
                    BallRule::Nodes => (None, f64::from(u8::from(inside))),
                    BallRule::Hybrid => match cut_cell(&o, dist2.sqrt(), r, h, d) {
                        Some((cc, f)) => (Some(cc), f),
                        None => (None, f64::from(u8::from(inside))),
                    },
                };
                if !inside && fraction == 0.0 {
                    continue;
                }
                count += usize::from(inside);
                let geom = NodeGeom { offset: o, dist2, rho: (r2 - dist2).max(0.0), inside, fraction, cut };
                acc.push(f(base + j, &geom));
                any = true;
            }
            any.then(|| (acc.finish(), count))
        })
        .collect();

    let sums: Vec<[f64; K]> = partial.iter().map(|p| p.0).collect();
    let count = partial.iter().map(|p| p.1).sum();
    let mut total = pairwise_sum_arrays(&sums);
    let vol = h.powi(d as i32);
    for t in total.iter_mut() {
        *t *= vol;
    }
    (total, count)
}

pub(crate) fn require_resolved(grid: &GridSpec, ball: &Ball, count: usize) -> Result<()> {
    if count < 1 << grid.dim {
        return Err(Error::UnderResolved(format!(
            "{count} nodes inside the ball of radius {} (need at least {})",
            ball.radius,
            1 << grid.dim
        )));
    }
    Ok(())
}

/// Midpoint rule: h^d times the sum of `integrand` over nodes with |z − z₀| < r.
pub fn integrate_ball<F>(grid: &GridSpec, ball: &Ball, integrand: F) -> Result<f64>
where
    F: Fn(usize) -> f64 + Sync,
{
    integrate_ball_weighted(grid, ball, BallRule::Nodes, 0.0, integrand)
}

/// ∫_{B_r} f·(r² − |z − z₀|²)^β under the chosen rule.
pub fn integrate_ball_weighted<F>(grid: &GridSpec, ball: &Ball, rule: BallRule, beta: f64, integrand: F) -> Result<f64>
where
    F: Fn(usize) -> f64 + Sync,
{
    let (s, count) = integrate_multi::<1, _>(grid, ball, rule, |i, g| [integrand(i) * g.weight(beta, rule)]);
    require_resolved(grid, ball, count)?;
    Ok(s[0])
}

/// Snaps the center to the nearest node and checks that the ball, its
/// stencil clearance and the potential's valid region contain every node used.
pub fn validate_ball(sys: &LiftedSystem, ball: &Ball) -> Result<Ball> {
    let grid = sys.grid();
    let d = grid.dim;
    let h = grid.spacing();
    if !(ball.radius > 0.0) {
        return Err(Error::Invalid(format!("ball radius {} must be positive", ball.radius)));
    }
    if ball.center[d - 1] != 0.0 {
        return Err(Error::Invalid("ball centers must lie on t = 0".into()));
    }
    let idx = grid
        .nearest_index(&ball.center)
        .ok_or_else(|| Error::Invalid("ball center outside the grid".into()))?;
    let mut snapped = [0.0; MAX_DIM];
    for a in 0..d {
        snapped[a] = grid.coord(idx[a]);
    }
    let moved = (0..d).map(|a| (snapped[a] - ball.center[a]).powi(2)).sum::<f64>().sqrt();
    if moved > 1e-12 * h {
        log::warn!("ball center {:?} snapped to node {:?} (moved {moved:e})", &ball.center[..d], &snapped[..d]);
    }
    let b = Ball { center: snapped, radius: ball.radius };
    let clearance = b.radius + 0.5 * h * (d as f64).sqrt() + sys.margin() as f64 * h;
    for a in 0..d {
        if b.center[a].abs() + clearance > grid.extent + 1e-12 * h {
            return Err(Error::Invalid(format!(
                "ball of radius {} at {:?} needs {} of clearance but the box half-width is {}",
                b.radius,
                &b.center[..d],
                clearance,
                grid.extent
            )));
        }
    }
    if !sys.potential().is_constant() {
        let (bad, _) = integrate_multi::<1, _>(grid, &b, BallRule::Hybrid, |i, _| [f64::from(u8::from(!sys.in_domain(i)))]);
        if bad[0] > 0.0 {
            return Err(Error::Invalid(format!(
                "ball of radius {} leaves the region where the potential is defined",
                b.radius
            )));
        }
    }
    Ok(b)
}

/// H, both forms of I with the terms I₁..I₅, and h on one ball.
#[allow(non_snake_case)]
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedIntegrals {
    pub r: f64,
    pub alpha: f64,
    pub H: f64,
    pub I_form1: f64,
    pub I_form2: f64,
    pub I1: f64,
    pub I2: f64,
    pub I3: f64,
    pub I4: f64,
    pub I5: f64,
    pub h_plain: f64,
}

struct Node {
    u: f64,
    w: f64,
    gu: Point,
    gw: Point,
    v: f64,
    gv: Point,
}

fn node(sys: &LiftedSystem, i: usize) -> Node {
    let d = sys.grid().dim;
    let mut gu = [0.0; MAX_DIM];
    let mut gw = [0.0; MAX_DIM];
    for a in 0..d {
        gu[a] = sys.grad_u()[a].values()[i];
        gw[a] = sys.grad_w()[a].values()[i];
    }
    Node { u: sys.u().values()[i], w: sys.w().values()[i], gu, gw, v: sys.v_at(i), gv: sys.grad_v_at(i) }
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn compute_integrals(sys: &LiftedSystem, ball: &Ball, rule: BallRule) -> Result<WeightedIntegrals> {
    let b = validate_ball(sys, ball)?;
    let p = *sys.params();
    let (alpha, lam) = (p.alpha, p.lambda);
    let q_shift = lam * lam / 4.0;
    let (s, count) = integrate_multi::<8, _>(sys.grid(), &b, rule, |i, g| {
        let n = node(sys, i);
        let w0 = g.weight(alpha, rule);
        let w1 = g.weight(alpha + 1.0, rule);
        let plain = g.weight(0.0, rule);
        let mass = n.u * n.u + n.w * n.w;
        let q = n.v - q_shift;
        [
            mass * w0,
            (n.u * dot(&n.gu, &g.offset) + n.w * dot(&n.gw, &g.offset)) * w0,
            dot(&n.gu, &n.gu) * w1,
            dot(&n.gw, &n.gw) * w1,
            n.u * n.u * w1,
            n.w * n.w * w1,
            (1.0 + q) * n.u * n.w * w1,
            mass * plain,
        ]
    });
    require_resolved(sys.grid(), &b, count)?;
    let (i1, i2, i3, i4, i5) = (s[2], s[3], 0.5 * lam * s[4], 1.5 * lam * s[5], s[6]);
    Ok(WeightedIntegrals {
        r: b.radius,
        alpha,
        H: s[0],
        I_form1: 2.0 * (alpha + 1.0) * s[1],
        I_form2: i1 + i2 + i3 + i4 + i5,
        I1: i1,
        I2: i2,
        I3: i3,
        I4: i4,
        I5: i5,
        h_plain: s[7],
    })
}

#[allow(non_snake_case)]
pub fn compute_H(sys: &LiftedSystem, ball: &Ball) -> Result<f64> {
    Ok(compute_integrals(sys, ball, BallRule::Hybrid)?.H)
}

#[allow(non_snake_case)]
pub fn compute_I(sys: &LiftedSystem, ball: &Ball) -> Result<WeightedIntegrals> {
    compute_integrals(sys, ball, BallRule::Hybrid)
}

pub fn compute_h(sys: &LiftedSystem, ball: &Ball) -> Result<f64> {
    Ok(compute_integrals(sys, ball, BallRule::Hybrid)?.h_plain)
}

/// ∫_{B_r} ũ² under the chosen rule.
pub fn mass_u(sys: &LiftedSystem, ball: &Ball, rule: BallRule) -> Result<f64> {
    let b = validate_ball(sys, ball)?;
    integrate_ball_weighted(sys.grid(), &b, rule, 0.0, |i| sys.u().values()[i].powi(2))
}

/// ∫_{B_r} w² under the chosen rule.
pub fn mass_w(sys: &LiftedSystem, ball: &Ball, rule: BallRule) -> Result<f64> {
    let b = validate_ball(sys, ball)?;
    integrate_ball_weighted(sys.grid(), &b, rule, 0.0, |i| sys.w().values()[i].powi(2))
}

pub const R_TERM_COUNT: usize = 27;

pub const R_TERM_NAMES: [&str; R_TERM_COUNT] = [
    "R1^1", "R1^2", "R1^3", "R1^4", "R1^5", //
    "R2^1", "R2^2", "R2^3", "R2^4", "R2^5", "R2^6", //
    "R3^1", "R3^2", "R3^3", //
    "R4^1", "R4^2", "R4^3", //
    "R5^1", "R5^2", "R5^3", "R5^4", "R5^5", "R5^6", "R5^7", "R5^8", "R5^9", "R5^10",
];

/// Index pairs (R₁⁵, R₃³), (R₁⁴, R₃²), (R₂⁶, R₄³), (R₂⁵, R₄²) that cancel exactly.
pub const CANCELLING_PAIRS: [(usize, usize); 4] = [(4, 13), (3, 12), (10, 16), (9, 15)];

pub fn r_term_index(name: &str) -> Option<usize> {
    R_TERM_NAMES.iter().position(|n| *n == name)
}

/// Every quantity on the right of the I′ expansion at one radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IPrimeTerms {
    pub r: f64,
    /// ∫(∇ũ·(z − z₀))²ρ^α.
    pub proj_u: f64,
    /// ∫(∇w·(z − z₀))²ρ^α.
    pub proj_w: f64,
    pub r_terms: Vec<f64>,
}

impl IPrimeTerms {
    /// Sum of the R-terms that do not belong to a cancelling pair.
    pub fn remaining_sum(&self) -> f64 {
        let skip: Vec<usize> = CANCELLING_PAIRS.iter().flat_map(|&(a, b)| [a, b]).collect();
        let kept: Vec<f64> = (0..R_TERM_COUNT).filter(|i| !skip.contains(i)).map(|i| self.r_terms[i]).collect();
        crate::summation::pairwise_sum(&kept)
    }
}

/// The projection integrals and all R-terms, each from its own integrand.
pub fn compute_i_prime_terms(sys: &LiftedSystem, ball: &Ball, rule: BallRule) -> Result<IPrimeTerms> {
    let b = validate_ball(sys, ball)?;
    let p = *sys.params();
    let (alpha, lam) = (p.alpha, p.lambda);
    let q_shift = lam * lam / 4.0;
    const K: usize = R_TERM_COUNT + 2;
    let (s, count) = integrate_multi::<K, _>(sys.grid(), &b, rule, |i, g| {
        let n = node(sys, i);
        let w0 = g.weight(alpha, rule);
        let w1 = g.weight(alpha + 1.0, rule);
        let w2 = g.weight(alpha + 2.0, rule);
        let q = n.v - q_shift;
        let (u, w) = (n.u, n.w);
        let guw = dot(&n.gu, &n.gw);
        let gu2 = dot(&n.gu, &n.gu);
        let gw2 = dot(&n.gw, &n.gw);
        let pu = dot(&n.gu, &g.offset);
        let pw = dot(&n.gw, &g.offset);
        [
            pu * pu * w0,
            pw * pw * w0,
            // R1
            -(w * w) * w2,
            -lam * (u * w) * w2,
            -guw * w2,
            -(lam / 2.0) * gu2 * w2,
            -(lam * lam / 4.0) * (u * u) * w2,
            // R2
            -(q * q) * (u * u) * w2,
            -3.0 * lam * q * (u * w) * w2,
            -u * dot(&n.gv, &n.gw) * w2,
            -q * guw * w2,
            -(3.0 * lam / 2.0) * gw2 * w2,
            -(9.0 * lam * lam / 4.0) * (w * w) * w2,
            // R3
            (lam / 2.0) * (u * w) * w2,
            (lam / 2.0) * gu2 * w2,
            (lam * lam / 4.0) * (u * u) * w2,
            // R4
            (3.0 * lam / 2.0) * q * (u * w) * w2,
            (3.0 * lam / 2.0) * gw2 * w2,
            (9.0 * lam * lam / 4.0) * (w * w) * w2,
            // R5
            (u * w) * dot(&n.gv, &g.offset) * w1,
            0.5 * (q * q) * (u * u) * w2,
            0.5 * q * (u * u) * w2,
            lam * q * (u * w) * w2,
            lam * (u * w) * w2,
            0.5 * q * (w * w) * w2,
            0.5 * (w * w) * w2,
            q * guw * w2,
            guw * w2,
            0.5 * (u * dot(&n.gv, &n.gw) + w * dot(&n.gv, &n.gu)) * w2,
        ]
    });
    require_resolved(sys.grid(), &b, count)?;
    let r = b.radius;
    let a = 1.0 / ((alpha + 2.0) * r);
    let r5_1 = r_term_index("R5^1").expect("name");
    let r_terms = (0..R_TERM_COUNT)
        .map(|k| if k == r5_1 { s[k + 2] / r } else { s[k + 2] * a })
        .collect();
    Ok(IPrimeTerms { r, proj_u: s[0], proj_w: s[1], r_terms })
}
