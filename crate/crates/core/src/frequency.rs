//! The frequency N = I/H along a radius sweep, the H′ and I′ identities, the
//! exact R-term cancellations and the almost-monotonicity constant.

use serde::{Deserialize, Serialize};

use crate::decompose::LiftedSystem;
use crate::error::{Error, Result};
use crate::fields::Point;
use crate::quadrature::{compute_i_prime_terms, compute_integrals, validate_ball, Ball, BallRule, WeightedIntegrals, CANCELLING_PAIRS, R_TERM_NAMES};
use crate::report::{json_f64, CheckReport};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub integrals: WeightedIntegrals,
    /// I_form2 / H.
    pub n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyProfile {
    pub center: Point,
    pub dim: usize,
    pub alpha: f64,
    pub rule: BallRule,
    pub records: Vec<ProfileRecord>,
}

impl FrequencyProfile {
    pub fn radii(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.integrals.r).collect()
    }

    pub fn n_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.n).collect()
    }

    pub fn has_negative_n(&self) -> bool {
        self.records.iter().any(|r| r.n < 0.0)
    }

    pub fn last(&self) -> &ProfileRecord {
        self.records.last().expect("profiles are nonempty")
    }
}

/// r_j = r_min·q^j with q chosen so that the last radius is r_max.
pub fn geometric_radii(r_min: f64, r_max: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 || !(r_min > 0.0 && r_max > r_min) {
        return Err(Error::Invalid(format!("need count ≥ 2 and 0 < r_min < r_max (got {count}, {r_min}, {r_max})")));
    }
    let q = (r_max / r_min).powf(1.0 / (count - 1) as f64);
    let mut radii: Vec<f64> = (0..count).map(|j| r_min * q.powi(j as i32)).collect();
    radii[count - 1] = r_max;
    Ok(radii)
}

/// Geometric radii r_min·q^j up to and including the last one not above r_max.
pub fn radii_with_ratio(r_min: f64, r_max: f64, q: f64) -> Vec<f64> {
    let mut out = vec![r_min];
    loop {
        let next = out.last().unwrap() * q;
        if next > r_max * (1.0 + 1e-12) {
            return out;
        }
        out.push(next);
    }
}

pub fn build_profile(sys: &LiftedSystem, center: &[f64], radii: &[f64]) -> Result<FrequencyProfile> {
    build_profile_with(sys, center, radii, BallRule::Hybrid)
}

pub fn build_profile_with(sys: &LiftedSystem, center: &[f64], radii: &[f64], rule: BallRule) -> Result<FrequencyProfile> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("radii must be nonempty and strictly increasing".into()));
    }
    let ball = validate_ball(sys, &Ball::new(center, radii[0]))?;
    let mut records = Vec::with_capacity(radii.len());
    for &r in radii {
        let integrals = compute_integrals(sys, &ball.with_radius(r), rule)?;
        if !(integrals.H > 0.0) {
            return Err(Error::TrivialSolution { radius: r });
        }
        let n = integrals.I_form2 / integrals.H;
        if !n.is_finite() {
            return Err(Error::Invalid(format!("frequency is not finite at radius {r}")));
        }
        records.push(ProfileRecord { integrals, n });
    }
    let profile = FrequencyProfile {
        center: ball.center,
        dim: sys.grid().dim,
        alpha: sys.params().alpha,
        rule,
        records,
    };
    if profile.has_negative_n() {
        log::warn!("negative frequency on the profile at {:?}", &ball.center[..profile.dim]);
    }
    Ok(profile)
}

/// Derivative at the middle of three nonuniformly spaced samples.
pub fn three_point_derivative(r: [f64; 3], f: [f64; 3]) -> f64 {
    let d1 = r[1] - r[0];
    let d2 = r[2] - r[1];
    -d2 / (d1 * (d1 + d2)) * f[0] + (d2 - d1) / (d1 * d2) * f[1] + d1 / (d2 * (d1 + d2)) * f[2]
}

fn relative(a: f64, b: f64) -> f64 {
    let scale = b.abs().max(a.abs());
    if scale == 0.0 { 0.0 } else { (a - b).abs() / scale }
}

/// Compares the centered difference of H with (2α+d)H/r + I/((α+1)r), where
/// I is taken from its defining integral (the first form).
#[allow(non_snake_case)]
pub fn check_H_prime(profile: &FrequencyProfile, tol: f64) -> CheckReport {
    let recs = &profile.records;
    let a = profile.alpha;
    let d = profile.dim as f64;
    let mut worst: f64 = 0.0;
    let mut at = f64::NAN;
    for j in 1..recs.len().saturating_sub(1) {
        let g = |k: usize| recs[k].integrals;
        let dh = three_point_derivative([g(j - 1).r, g(j).r, g(j + 1).r], [g(j - 1).H, g(j).H, g(j + 1).H]);
        let c = g(j);
        let rhs = (2.0 * a + d) / c.r * c.H + c.I_form1 / ((a + 1.0) * c.r);
        let m = relative(dh, rhs);
        if m > worst || at.is_nan() {
            worst = worst.max(m);
            at = c.r;
        }
    }
    let report = CheckReport::mismatch("H-prime", worst, tol).with_meta_f64("worst_radius", at);
    if recs.len() < 3 { report.failed("fewer than 3 radii") } else { report }
}

/// Compares the centered difference of I with the full right side of the I′
/// expansion: (2α+d)I/r, the two projection terms, 2(I₃+I₄+I₅)/r and every
/// R-term that does not cancel.
#[allow(non_snake_case)]
pub fn check_I_prime(profile: &FrequencyProfile, sys: &LiftedSystem, tol: f64) -> Result<CheckReport> {
    let recs = &profile.records;
    if recs.len() < 3 {
        return Ok(CheckReport::mismatch("I-prime", f64::NAN, tol).failed("fewer than 3 radii"));
    }
    let a = profile.alpha;
    let d = profile.dim as f64;
    let ball = Ball { center: profile.center, radius: recs[0].integrals.r };
    let mut worst: f64 = 0.0;
    let mut at = f64::NAN;
    for j in 1..recs.len() - 1 {
        let g = |k: usize| recs[k].integrals;
        let di = three_point_derivative(
            [g(j - 1).r, g(j).r, g(j + 1).r],
            [g(j - 1).I_form2, g(j).I_form2, g(j + 1).I_form2],
        );
        let c = g(j);
        let t = compute_i_prime_terms(sys, &ball.with_radius(c.r), profile.rule)?;
        let rhs = (2.0 * a + d) / c.r * c.I_form2
            + 4.0 * (a + 1.0) / c.r * (t.proj_u + t.proj_w)
            + 2.0 / c.r * (c.I3 + c.I4 + c.I5)
            + t.remaining_sum();
        let m = relative(di, rhs);
        if m > worst || at.is_nan() {
            worst = worst.max(m);
            at = c.r;
        }
    }
    Ok(CheckReport::mismatch("I-prime", worst, tol).with_meta_f64("worst_radius", at))
}

/// The four paired R-terms must cancel to 10⁻¹² of their magnitudes.
pub fn check_cancellations(sys: &LiftedSystem, ball: &Ball, rule: BallRule) -> Result<CheckReport> {
    let t = compute_i_prime_terms(sys, ball, rule)?;
    let mut worst: f64 = 0.0;
    let mut pairs = serde_json::Map::new();
    for &(i, j) in &CANCELLING_PAIRS {
        let (x, y) = (t.r_terms[i], t.r_terms[j]);
        let rel = (x + y).abs() / (x.abs() + y.abs() + f64::MIN_POSITIVE);
        worst = worst.max(rel);
        pairs.insert(
            format!("{}+{}", R_TERM_NAMES[i], R_TERM_NAMES[j]),
            serde_json::json!([json_f64(x), json_f64(y)]),
        );
    }
    Ok(CheckReport::mismatch("cancellations", worst, 1e-12)
        .with_meta_f64("radius", t.r)
        .with_meta("pairs", serde_json::Value::Object(pairs)))
}

/// Smallest C ≥ 0 making r ↦ e^{Cr}(N(r) + grad_norm + 1) nondecreasing on
/// the sampled radii; infinite if N + grad_norm + 1 is not positive.
pub fn fit_monotonicity_constant(profile: &FrequencyProfile, grad_norm: f64) -> f64 {
    let g: Vec<(f64, f64)> = profile.records.iter().map(|r| (r.integrals.r, r.n + grad_norm + 1.0)).collect();
    if g.iter().any(|(_, v)| !(*v > 0.0)) {
        return f64::INFINITY;
    }
    g.windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[1].0 - w[0].0))
        .fold(0.0, f64::max)
}
