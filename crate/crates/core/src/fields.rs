//! Uniform tensor grids, sampled scalar fields, finite-difference operators
//! and potentials with their sup-norm metadata.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, MAX_DIM};

pub type Point = [f64; MAX_DIM];

/// Centered box [−L, L]^dim with an odd number of nodes per axis, so the
/// origin is always a node. Flat indices are row-major with the last axis
/// fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub extent: f64,
    pub points_per_axis: usize,
}

impl GridSpec {
    pub fn new(dim: usize, extent: f64, points_per_axis: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Invalid(format!("grid dimension {dim} not in 1..=3")));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Invalid(format!("grid extent {extent} must be positive")));
        }
        if points_per_axis < 17 || points_per_axis % 2 == 0 {
            return Err(Error::Invalid(format!(
                "points_per_axis {points_per_axis} must be odd and at least 17"
            )));
        }
        Ok(Self { dim, extent, points_per_axis })
    }

    /// Grid with spacing `h`; 2L/h must be an even integer.
    pub fn with_spacing(dim: usize, extent: f64, h: f64) -> Result<Self> {
        let cells = 2.0 * extent / h;
        let n = cells.round();
        if (cells - n).abs() > 1e-9 * cells.max(1.0) || n as usize % 2 != 0 {
            return Err(Error::Invalid(format!(
                "extent {extent} is not an integer number of cells of size {h} on each side"
            )));
        }
        Self::new(dim, extent, n as usize + 1)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.points_per_axis - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center_index(&self) -> usize {
        (self.points_per_axis - 1) / 2
    }

    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - self.center_index() as f64) * self.spacing()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.points_per_axis.pow((self.dim - 1 - axis) as u32)
    }

    pub fn unflatten(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.points_per_axis;
            flat /= self.points_per_axis;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, i| acc * self.points_per_axis + i)
    }

    pub fn point(&self, flat: usize) -> Point {
        let idx = self.unflatten(flat);
        let mut p = [0.0; MAX_DIM];
        for a in 0..self.dim {
            p[a] = self.coord(idx[a]);
        }
        p
    }

    /// Index of the node nearest to `x` along each axis, if inside the box.
    pub fn nearest_index(&self, x: &[f64]) -> Option<[usize; MAX_DIM]> {
        let h = self.spacing();
        let c = self.center_index() as f64;
        let mut idx = [0; MAX_DIM];
        for a in 0..self.dim {
            let v = x.get(a).copied().unwrap_or(0.0);
            let i = (v / h + c).round();
            if !(0.0..self.points_per_axis as f64).contains(&i) {
                return None;
            }
            idx[a] = i as usize;
        }
        Some(idx)
    }

    /// True if the node lies at least `margin` nodes away from every face.
    pub fn is_interior(&self, flat: usize, margin: usize) -> bool {
        if margin == 0 {
            return true;
        }
        let idx = self.unflatten(flat);
        idx[..self.dim]
            .iter()
            .all(|&i| i >= margin && i + margin < self.points_per_axis)
    }

    /// Same box and resolution with one more axis (the lift variable t last).
    pub fn lifted(&self) -> Result<Self> {
        Self::new(self.dim + 1, self.extent, self.points_per_axis)
    }

    pub fn base(&self) -> Result<Self> {
        Self::new(self.dim - 1, self.extent, self.points_per_axis)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    /// Number of boundary layers whose values are invalid (masked).
    margin: usize,
    source: Option<String>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values, margin: 0, source: None })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values, margin: 0, source: Some("0".into()) }
    }

    pub fn from_fn<F>(grid: GridSpec, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let dim = grid.dim;
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| f(&grid.point(i)[..dim]))
            .collect();
        Self::new(grid, values)
    }

    pub fn from_expr(grid: GridSpec, expr: &Expr) -> Result<Self> {
        if expr.min_dim() > grid.dim {
            return Err(Error::GridMismatch(format!(
                "{} needs dimension {} but the grid has {}",
                expr.label(),
                expr.min_dim(),
                grid.dim
            )));
        }
        let mut f = Self::from_fn(grid, |x| expr.value(x))?;
        f.source = Some(expr.label());
        Ok(f)
    }

    pub(crate) fn from_parts(grid: GridSpec, values: Vec<f64>, margin: usize) -> Self {
        Self { grid, values, margin, source: None }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn is_valid(&self, flat: usize) -> bool {
        self.grid.is_interior(flat, self.margin)
    }

    /// a·self + b·other on the common valid region.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<ScalarField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        let margin = self.margin.max(other.margin);
        let grid = &self.grid;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| if grid.is_interior(i, margin) { a * self.values[i] + b * other.values[i] } else { 0.0 })
            .collect();
        Ok(Self::from_parts(grid.clone(), values, margin))
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        let values = self.values.iter().map(|v| c * v).collect();
        Self::from_parts(self.grid.clone(), values, self.margin)
    }

    fn stencil_map<F>(&self, extra: usize, f: F) -> ScalarField
    where
        F: Fn(usize) -> f64 + Sync,
    {
        let margin = self.margin + extra;
        let grid = &self.grid;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| if grid.is_interior(i, margin) { f(i) } else { 0.0 })
            .collect();
        Self::from_parts(grid.clone(), values, margin)
    }

    /// (2d+1)-point central-difference Laplacian; one more boundary layer is masked.
    pub fn laplacian(&self) -> ScalarField {
        let h2 = self.grid.spacing().powi(2);
        let strides: Vec<usize> = (0..self.grid.dim).map(|a| self.grid.stride(a)).collect();
        let v = &self.values;
        self.stencil_map(1, |i| {
            let mut s = 0.0;
            for &st in &strides {
                s += v[i + st] + v[i - st] - 2.0 * v[i];
            }
            s / h2
        })
    }

    /// Central-difference gradient, one component per axis.
    pub fn gradient(&self) -> Vec<ScalarField> {
        let h = self.grid.spacing();
        (0..self.grid.dim)
            .map(|a| {
                let st = self.grid.stride(a);
                let v = &self.values;
                self.stencil_map(1, |i| (v[i + st] - v[i - st]) / (2.0 * h))
            })
            .collect()
    }

    /// Forward differences (f[i+1] − f[i])/h.
    pub fn gradient_forward(&self) -> Vec<ScalarField> {
        let h = self.grid.spacing();
        (0..self.grid.dim)
            .map(|a| {
                let st = self.grid.stride(a);
                let v = &self.values;
                self.stencil_map(1, |i| (v[i + st] - v[i]) / h)
            })
            .collect()
    }

    /// Backward-difference divergence; the adjoint partner of
    /// [`ScalarField::gradient_forward`], so that
    /// `divergence_backward(f.gradient_forward())` is the compact Laplacian.
    pub fn divergence_backward(components: &[ScalarField]) -> Result<ScalarField> {
        let first = components
            .first()
            .ok_or_else(|| Error::Invalid("divergence of an empty vector field".into()))?;
        let grid = first.grid.clone();
        if components.len() != grid.dim || components.iter().any(|c| c.grid != grid) {
            return Err(Error::GridMismatch("vector field components disagree".into()));
        }
        let h = grid.spacing();
        let margin = components.iter().map(|c| c.margin).max().unwrap_or(0) + 1;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                if !grid.is_interior(i, margin) {
                    return 0.0;
                }
                components
                    .iter()
                    .enumerate()
                    .map(|(a, c)| (c.values[i] - c.values[i - grid.stride(a)]) / h)
                    .sum()
            })
            .collect();
        Ok(Self::from_parts(grid, values, margin))
    }

    /// Max |value| over valid nodes with |z| ≤ radius.
    pub fn sup_norm(&self, radius: f64) -> Result<f64> {
        self.sup_norm_about(&[0.0; MAX_DIM], radius)
    }

    pub fn sup_norm_about(&self, center: &[f64], radius: f64) -> Result<f64> {
        if radius > self.grid.extent * (self.grid.dim as f64).sqrt() {
            return Err(Error::Invalid(format!("radius {radius} exceeds the grid")));
        }
        let r2 = radius * radius;
        let dim = self.grid.dim;
        let (count, max) = (0..self.grid.len())
            .into_par_iter()
            .filter(|&i| self.is_valid(i))
            .filter(|&i| {
                let p = self.grid.point(i);
                (0..dim).map(|a| (p[a] - center[a]).powi(2)).sum::<f64>() <= r2
            })
            .map(|i| (1usize, self.values[i].abs()))
            .reduce(|| (0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1)));
        if count == 0 {
            return Err(Error::UnderResolved(format!("no valid node within radius {radius}")));
        }
        Ok(max)
    }
}

/// How V is given on the base domain.
#[derive(Clone, Debug)]
pub enum PotentialSource {
    Constant(f64),
    Closed(Expr),
    /// V = Δ²u/u where |u| ≥ floor.
    Manufactured { u: Expr, floor: f64 },
    Sampled(ScalarField),
}

/// Potential V on the base domain with declared ‖V‖_∞ and ‖∇V‖_∞ over the unit ball.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    pub source: PotentialSource,
    pub base_dim: usize,
    pub sup_norm: f64,
    pub grad_sup_norm: f64,
}

/// Dense sampling spacing used to establish norms of closed forms on B₁.
fn dense_spacing(dim: usize) -> f64 {
    match dim {
        1 => 1.0 / 4096.0,
        2 => 1.0 / 256.0,
        _ => 1.0 / 128.0,
    }
}

/// Max of (|f|, |g|) over dense nodes of B₁ where `keep` holds; None if no node is kept.
pub(crate) fn dense_max<F>(dim: usize, f: F) -> Option<(f64, f64)>
where
    F: Fn(&[f64]) -> Option<(f64, f64)> + Sync,
{
    let h = dense_spacing(dim);
    let grid = GridSpec::with_spacing(dim, 1.0, h).expect("dense grid");
    let n = grid.points_per_axis;
    let rows = grid.len() / n;
    (0..rows)
        .into_par_iter()
        .filter_map(|row| {
            let mut best: Option<(f64, f64)> = None;
            for j in 0..n {
                let p = grid.point(row * n + j);
                let x = &p[..dim];
                if x.iter().map(|v| v * v).sum::<f64>() > 1.0 {
                    continue;
                }
                if let Some((a, b)) = f(x) {
                    let cur = best.get_or_insert((0.0, 0.0));
                    cur.0 = cur.0.max(a.abs());
                    cur.1 = cur.1.max(b.abs());
                }
            }
            best
        })
        .reduce_with(|a, b| (a.0.max(b.0), a.1.max(b.1)))
}

fn norm(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl PotentialSpec {
    pub fn constant(value: f64, base_dim: usize) -> Self {
        Self {
            source: PotentialSource::Constant(value),
            base_dim,
            sup_norm: value.abs(),
            grad_sup_norm: 0.0,
        }
    }

    pub fn zero(base_dim: usize) -> Self {
        Self::constant(0.0, base_dim)
    }

    pub fn closed(expr: Expr, base_dim: usize) -> Result<Self> {
        if expr.min_dim() > base_dim {
            return Err(Error::Invalid(format!("{} needs dimension {}", expr.label(), expr.min_dim())));
        }
        let (sup, grad) = dense_max(base_dim, |x| Some((expr.value(x), norm(&expr.gradient(x)))))
            .unwrap_or((0.0, 0.0));
        Ok(Self { source: PotentialSource::Closed(expr), base_dim, sup_norm: sup, grad_sup_norm: grad })
    }

    /// V = Δ²u/u on the region |u| ≥ floor; norms are taken over that region of B₁.
    pub fn manufactured(u: Expr, base_dim: usize, floor: f64) -> Result<Self> {
        if !(floor > 0.0) {
            return Err(Error::Invalid(format!("floor {floor} must be positive")));
        }
        if u.min_dim() > base_dim {
            return Err(Error::Invalid(format!("{} needs dimension {}", u.label(), u.min_dim())));
        }
        let source = PotentialSource::Manufactured { u, floor };
        let probe = Self { source, base_dim, sup_norm: 0.0, grad_sup_norm: 0.0 };
        let (sup, grad) = dense_max(base_dim, |x| {
            probe.in_domain(x).then(|| (probe.value(x), norm(&probe.gradient(x))))
        })
        .ok_or_else(|| Error::EmptyMask(format!("|u| < {floor} everywhere on the unit ball")))?;
        Ok(Self { sup_norm: sup, grad_sup_norm: grad, ..probe })
    }

    /// Manufactured potential with the default floor 0.1·sup|u| over B₁.
    pub fn manufactured_default(u: Expr, base_dim: usize) -> Result<Self> {
        let (sup_u, _) = dense_max(base_dim, |x| Some((u.value(x), 0.0))).unwrap_or((0.0, 0.0));
        Self::manufactured(u, base_dim, 0.1 * sup_u)
    }

    /// Potential known only at the nodes of a base grid.
    pub fn sampled(field: ScalarField) -> Result<Self> {
        let base_dim = field.grid().dim;
        let grads = field.gradient();
        let mut sup: f64 = 0.0;
        let mut gsup: f64 = 0.0;
        for i in 0..field.grid().len() {
            let p = field.grid().point(i);
            if p[..base_dim].iter().map(|v| v * v).sum::<f64>() > 1.0 || !field.is_valid(i) {
                continue;
            }
            sup = sup.max(field.values()[i].abs());
            if grads[0].is_valid(i) {
                let g: Vec<f64> = grads.iter().map(|c| c.values()[i]).collect();
                gsup = gsup.max(norm(&g));
            }
        }
        Ok(Self { source: PotentialSource::Sampled(field), base_dim, sup_norm: sup, grad_sup_norm: gsup })
    }

    /// Replace the norms by declared values, which may not undercut the computed ones.
    pub fn with_declared_norms(mut self, sup_norm: f64, grad_sup_norm: f64) -> Result<Self> {
        if sup_norm < self.sup_norm || grad_sup_norm < self.grad_sup_norm {
            return Err(Error::Invalid(format!(
                "declared norms ({sup_norm}, {grad_sup_norm}) below sampled norms ({}, {})",
                self.sup_norm, self.grad_sup_norm
            )));
        }
        self.sup_norm = sup_norm;
        self.grad_sup_norm = grad_sup_norm;
        Ok(self)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.source, PotentialSource::Constant(_))
    }

    /// Whether V is defined at x (always, except outside a manufactured mask).
    pub fn in_domain(&self, x: &[f64]) -> bool {
        match &self.source {
            PotentialSource::Manufactured { u, floor } => u.value(x).abs() >= *floor,
            _ => true,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.source {
            PotentialSource::Constant(c) => *c,
            PotentialSource::Closed(e) => e.value(x),
            PotentialSource::Manufactured { u, .. } => u.bilaplacian(x) / u.value(x),
            PotentialSource::Sampled(f) => match f.grid().nearest_index(x) {
                Some(idx) => f.values()[f.grid().flatten(&idx)],
                None => f64::NAN,
            },
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Point {
        match &self.source {
            PotentialSource::Constant(_) => [0.0; MAX_DIM],
            PotentialSource::Closed(e) => e.gradient(x),
            PotentialSource::Manufactured { u, .. } => {
                let uv = u.value(x);
                let b = u.bilaplacian(x);
                let gb = u.grad_bilaplacian(x);
                let gu = u.gradient(x);
                let mut g = [0.0; MAX_DIM];
                for a in 0..MAX_DIM {
                    g[a] = (gb[a] * uv - b * gu[a]) / (uv * uv);
                }
                g
            }
            PotentialSource::Sampled(f) => {
                let mut g = [0.0; MAX_DIM];
                let Some(idx) = f.grid().nearest_index(x) else { return [f64::NAN; MAX_DIM] };
                let i = f.grid().flatten(&idx);
                if !f.grid().is_interior(i, 1) {
                    return g;
                }
                let h = f.grid().spacing();
                for (a, ga) in g.iter_mut().enumerate().take(f.grid().dim) {
                    let st = f.grid().stride(a);
                    *ga = (f.values()[i + st] - f.values()[i - st]) / (2.0 * h);
                }
                g
            }
        }
    }

    /// Sampled norms on the nodes of `grid` inside B₁ may not exceed the declared ones.
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if grid.dim != self.base_dim {
            return Err(Error::GridMismatch(format!(
                "potential on dimension {} sampled on a {}-dimensional grid",
                self.base_dim, grid.dim
            )));
        }
        if !(self.sup_norm.is_finite() && self.grad_sup_norm.is_finite()) {
            return Err(Error::Invalid("potential norms must be finite".into()));
        }
        let dim = grid.dim;
        let worst = (0..grid.len())
            .into_par_iter()
            .filter_map(|i| {
                let p = grid.point(i);
                let x = &p[..dim];
                if x.iter().map(|v| v * v).sum::<f64>() > 1.0 || !self.in_domain(x) {
                    return None;
                }
                if let PotentialSource::Sampled(f) = &self.source {
                    if !f.grid().is_interior(i, 1) {
                        return Some((self.value(x).abs(), 0.0));
                    }
                }
                Some((self.value(x).abs(), norm(&self.gradient(x))))
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
        if worst.0 > self.sup_norm || worst.1 > self.grad_sup_norm {
            return Err(Error::Invalid(format!(
                "sampled norms ({}, {}) exceed declared norms ({}, {})",
                worst.0, worst.1, self.sup_norm, self.grad_sup_norm
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(ppa: usize) -> GridSpec {
        GridSpec::new(2, 1.0, ppa).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(2, 1.0, 16).is_err());
        assert!(GridSpec::new(2, 1.0, 15).is_err());
        assert!(GridSpec::new(4, 1.0, 17).is_err());
        assert!(GridSpec::new(2, 0.0, 17).is_err());
        let g = GridSpec::with_spacing(3, 0.5, 1.0 / 64.0).unwrap();
        assert_eq!(g.points_per_axis, 65);
        assert_eq!(g.coord(32), 0.0);
        assert!(GridSpec::with_spacing(2, 0.5, 0.3).is_err());
    }

    #[test]
    fn flat_indexing_round_trips() {
        let g = GridSpec::new(3, 1.0, 17).unwrap();
        for flat in [0, 1, 17, 300, g.len() - 1] {
            assert_eq!(g.flatten(&g.unflatten(flat)), flat);
        }
        assert_eq!(g.stride(2), 1);
        assert_eq!(g.stride(0), 289);
    }

    #[test]
    fn sup_norm_examples() {
        let g = grid2(65);
        assert_eq!(ScalarField::zeros(g.clone()).sup_norm(0.5).unwrap(), 0.0);
        let x1 = ScalarField::from_expr(g.clone(), &Expr::monomial(0, 1)).unwrap();
        assert!((x1.sup_norm(0.5).unwrap() - 0.5).abs() <= g.spacing());
        let s = ScalarField::from_expr(g.clone(), &Expr::SinProduct { mu: 2.0 }).unwrap();
        let m = s.sup_norm(1.0).unwrap();
        assert!(m <= 1.0 && m >= (std::f64::consts::FRAC_PI_4.sin()).powi(2) * (1.0 - 4.0 * g.spacing()));
        assert!(matches!(x1.laplacian().laplacian().sup_norm(1e-3), Ok(_)));
        let wide = GridSpec::new(2, 0.5, 17).unwrap();
        let f = ScalarField::from_expr(wide, &Expr::Constant { value: 1.0 }).unwrap();
        assert!(matches!(f.sup_norm_about(&[0.01, 0.01, 0.0], 0.001), Err(Error::UnderResolved(_))));
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        let g = grid2(33);
        let f = ScalarField::from_expr(g.clone(), &Expr::RadiusSquared).unwrap();
        let lap = f.laplacian();
        assert_eq!(lap.margin(), 1);
        for i in 0..g.len() {
            if lap.is_valid(i) {
                assert!((lap.values()[i] - 4.0).abs() < 1e-10);
            } else {
                assert_eq!(lap.values()[i], 0.0);
            }
        }
        let c = ScalarField::from_expr(g.clone(), &Expr::Constant { value: 3.0 }).unwrap();
        assert!(c.laplacian().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_exact_on_quadratics() {
        let g = grid2(33);
        let f = ScalarField::from_expr(g.clone(), &Expr::monomial(0, 2)).unwrap();
        let gr = f.gradient();
        for i in 0..g.len() {
            if gr[0].is_valid(i) {
                let p = g.point(i);
                assert!((gr[0].values()[i] - 2.0 * p[0]).abs() < 1e-12);
                assert_eq!(gr[1].values()[i], 0.0);
            }
        }
    }

    #[test]
    fn laplacian_converges_at_second_order() {
        let e = Expr::SinProduct { mu: 2.0 };
        let err = |ppa: usize| {
            let g = grid2(ppa);
            let f = ScalarField::from_expr(g.clone(), &e).unwrap();
            let lap = f.laplacian();
            (0..g.len())
                .filter(|&i| lap.is_valid(i))
                .map(|i| (lap.values()[i] + 8.0 * f.values()[i]).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(65), err(129));
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn staggered_pair_reproduces_laplacian() {
        let g = GridSpec::new(3, 1.0, 21).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| (3.0 * x[0]).sin() + x[1] * x[2].powi(3)).unwrap();
        let div = ScalarField::divergence_backward(&f.gradient_forward()).unwrap();
        let lap = f.laplacian();
        let scale = lap.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..g.len() {
            if div.is_valid(i) {
                assert!((div.values()[i] - lap.values()[i]).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn potential_norms() {
        let v = PotentialSpec::constant(64.0, 2);
        assert_eq!((v.sup_norm, v.grad_sup_norm), (64.0, 0.0));
        let lin = PotentialSpec::closed(
            Expr::Poly1 { axis: 0, coeffs: vec![64.0, 1.0] },
            2,
        )
        .unwrap();
        assert!((lin.sup_norm - 65.0).abs() < 1e-12);
        assert!((lin.grad_sup_norm - 1.0).abs() < 1e-12);
        lin.validate(&GridSpec::with_spacing(2, 0.5, 1.0 / 64.0).unwrap()).unwrap();
    }

    #[test]
    fn manufactured_potentials() {
        let eig = PotentialSpec::manufactured(Expr::SinProduct { mu: 2.0 }, 2, 0.1).unwrap();
        for x in [[0.3, 0.2], [-0.5, 0.4], [0.7, -0.1]] {
            if eig.in_domain(&x) {
                assert!((eig.value(&x) - 64.0).abs() < 1e-9);
            }
        }
        let q = PotentialSpec::manufactured(Expr::Poly1 { axis: 0, coeffs: vec![1.0, 0.0, 0.0, 0.0, 1.0] }, 2, 0.5)
            .unwrap();
        assert!((q.sup_norm - 24.0).abs() < 1e-12);
        assert!((q.value(&[0.5, 0.0]) - 24.0 / 1.0625).abs() < 1e-12);
        let harm = PotentialSpec::manufactured(Expr::Harmonic { degree: 2 }, 2, 0.05).unwrap();
        assert_eq!(harm.sup_norm, 0.0);
        assert!(matches!(
            PotentialSpec::manufactured(Expr::Constant { value: 0.01 }, 2, 0.5),
            Err(Error::EmptyMask(_))
        ));
    }
}
