//! Δₕ²u = Vu on a square with u and Δu prescribed on the boundary.
//!
//! The unknowns are the interior values of u and v = Δu, coupled through
//!   Δₕu − v = 0,  Δₕv − Vu = 0.
//! The system is solved by restarted GMRES, right-preconditioned with the
//! exact inverse of the same system for the constant potential V̄ = mean V,
//! which the sine transform diagonalizes into 2×2 blocks.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::{GridSpec, PotentialSpec, ScalarField};

/// Values of u and Δu on the grid; only boundary nodes are read.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub u: Vec<f64>,
    pub lap_u: Vec<f64>,
}

impl BoundaryData {
    pub fn from_fn(grid: &GridSpec, u: impl Fn(&[f64]) -> f64, lap_u: impl Fn(&[f64]) -> f64) -> Self {
        let mut bu = vec![0.0; grid.len()];
        let mut bl = vec![0.0; grid.len()];
        for i in 0..grid.len() {
            if !grid.is_interior(i, 1) {
                let p = grid.point(i);
                bu[i] = u(&p[..grid.dim]);
                bl[i] = lap_u(&p[..grid.dim]);
            }
        }
        Self { u: bu, lap_u: bl }
    }

    pub fn from_expr(grid: &GridSpec, e: &Expr) -> Self {
        Self::from_fn(grid, |x| e.value(x), |x| e.laplacian(x))
    }
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub grid: GridSpec,
    pub boundary: BoundaryData,
    pub potential: PotentialSpec,
    /// Relative tolerance for the linear solve and for the residual contract.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

impl SolveConfig {
    pub fn new(grid: GridSpec, boundary: BoundaryData, potential: PotentialSpec) -> Self {
        Self { grid, boundary, potential, tolerance: 1e-12, max_iterations: 500, restart: 40 }
    }

    fn validate(&self) -> Result<()> {
        if self.grid.dim != 2 {
            return Err(Error::Invalid("the solver works on two-dimensional grids".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Invalid(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.max_iterations == 0 || self.restart == 0 {
            return Err(Error::Invalid("max_iterations and restart must be positive".into()));
        }
        if self.boundary.u.len() != self.grid.len() || self.boundary.lap_u.len() != self.grid.len() {
            return Err(Error::GridMismatch("boundary arrays do not match the grid".into()));
        }
        if self.potential.base_dim != 2 {
            return Err(Error::GridMismatch("the potential must live in two dimensions".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub u: ScalarField,
    pub iterations: usize,
    /// Relative linear residual after every GMRES step.
    pub residual_history: Vec<f64>,
    /// max |Δₕ²u − Vu| over the double interior.
    pub discrete_residual: f64,
    /// ‖Δₕ² − V‖·max|u|, the scale of that residual.
    pub residual_scale: f64,
}

struct Operator {
    m: usize,
    h2: f64,
    v: Vec<f64>,
    v_mean: f64,
    sine: Vec<f64>,
    eig: Vec<f64>,
}

impl Operator {
    fn len(&self) -> usize {
        2 * self.m * self.m
    }

    /// Dirichlet 5-point Laplacian with zero boundary values.
    fn lap0(&self, x: &[f64], out: &mut [f64]) {
        let m = self.m;
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                let mut s = -4.0 * x[k];
                if i > 0 {
                    s += x[k - m];
                }
                if i + 1 < m {
                    s += x[k + m];
                }
                if j > 0 {
                    s += x[k - 1];
                }
                if j + 1 < m {
                    s += x[k + 1];
                }
                out[k] = s / self.h2;
            }
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.m * self.m;
        let (xu, xv) = x.split_at(n);
        let (ou, ov) = out.split_at_mut(n);
        self.lap0(xu, ou);
        self.lap0(xv, ov);
        for k in 0..n {
            ou[k] -= xv[k];
            ov[k] -= self.v[k] * xu[k];
        }
    }

    /// S·X·S with S_jk = sin(π(j+1)(k+1)/(m+1)).
    fn transform(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut tmp = vec![0.0; m * m];
        for i in 0..m {
            for k in 0..m {
                let s = self.sine[i * m + k];
                let row = &x[k * m..(k + 1) * m];
                let t = &mut tmp[i * m..(i + 1) * m];
                for (tj, xj) in t.iter_mut().zip(row) {
                    *tj += s * xj;
                }
            }
        }
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let row = &tmp[i * m..(i + 1) * m];
                let col = &self.sine[j * m..(j + 1) * m];
                out[i * m + j] = row.iter().zip(col).map(|(a, b)| a * b).sum();
            }
        }
        out
    }

    /// Exact inverse of the system with V replaced by its mean.
    fn precondition(&self, r: &[f64], out: &mut [f64]) {
        let m = self.m;
        let n = m * m;
        let a = self.transform(&r[..n]);
        let b = self.transform(&r[n..]);
        let norm = (2.0 / (m + 1) as f64).powi(2);
        let mut xu = vec![0.0; n];
        let mut xv = vec![0.0; n];
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                let kappa = self.eig[i] + self.eig[j];
                let mut det = kappa * kappa - self.v_mean;
                let floor = 1e-12 * kappa * kappa;
                if det.abs() < floor {
                    det = if det < 0.0 { -floor } else { floor };
                }
                let x = (b[k] + kappa * a[k]) / det;
                xu[k] = x;
                xv[k] = kappa * x - a[k];
            }
        }
        let xu = self.transform(&xu);
        let xv = self.transform(&xv);
        for k in 0..n {
            out[k] = norm * xu[k];
            out[n + k] = norm * xv[k];
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Restarted right-preconditioned GMRES; returns the iterate, the number of
/// steps and the relative residual after each step.
fn gmres(op: &Operator, b: &[f64], tol: f64, max_iter: usize, restart: usize) -> Result<(Vec<f64>, usize, Vec<f64>)> {
    let n = op.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return Ok((x, 0, history));
    }
    let mut iters = 0;
    let mut r = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    loop {
        op.apply(&x, &mut tmp);
        for k in 0..n {
            r[k] = b[k] - tmp[k];
        }
        let beta = norm2(&r);
        if beta / bnorm <= tol {
            return Ok((x, iters, history));
        }
        if iters >= max_iter {
            return Err(Error::NoConvergence { iterations: iters, last: beta / bnorm, history });
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut z_basis: Vec<Vec<f64>> = Vec::new();
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];
        let mut converged = false;
        for j in 0..restart {
            let mut z = vec![0.0; n];
            op.precondition(&basis[j], &mut z);
            let mut w = vec![0.0; n];
            op.apply(&z, &mut w);
            z_basis.push(z);
            let mut col = vec![0.0; j + 2];
            for (i, vi) in basis.iter().enumerate() {
                let hij: f64 = w.iter().zip(vi).map(|(a, b)| a * b).sum();
                col[i] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let wn = norm2(&w);
            col[j + 1] = wn;
            for (i, &(c, s)) in cs.iter().enumerate() {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = c * a + s * bb;
                col[i + 1] = -s * a + c * bb;
            }
            let (a, bb) = (col[j], col[j + 1]);
            let rho = a.hypot(bb);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, bb / rho) };
            col[j] = rho;
            col[j + 1] = 0.0;
            cs.push((c, s));
            let gj = g[j];
            g[j] = c * gj;
            g.push(-s * gj);
            hess.push(col);
            iters += 1;
            let rel = g[j + 1].abs() / bnorm;
            history.push(rel);
            if rel <= tol || iters >= max_iter || wn == 0.0 {
                converged = true;
            }
            if converged {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let k = hess.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (l, yl) in y.iter().enumerate().take(k).skip(i + 1) {
                s -= hess[l][i] * yl;
            }
            y[i] = s / hess[i][i];
        }
        for (l, yl) in y.iter().enumerate() {
            for (xk, zk) in x.iter_mut().zip(&z_basis[l]) {
                *xk += yl * zk;
            }
        }
    }
}

pub fn solve_biharmonic(cfg: &SolveConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    let grid = &cfg.grid;
    let n = grid.points_per_axis;
    let m = n - 2;
    let h = grid.spacing();
    let h2 = h * h;
    let mut v = Vec::with_capacity(m * m);
    for i in 1..=m {
        for j in 1..=m {
            let x = [grid.coord(i), grid.coord(j)];
            if !cfg.potential.in_domain(&x) {
                return Err(Error::Invalid(format!("potential undefined at interior node {x:?}")));
            }
            v.push(cfg.potential.value(&x));
        }
    }
    let v_mean = v.iter().sum::<f64>() / v.len() as f64;
    let sine: Vec<f64> = (0..m * m)
        .map(|k| {
            let (a, b) = ((k / m + 1) as f64, (k % m + 1) as f64);
            (std::f64::consts::PI * a * b / (m + 1) as f64).sin()
        })
        .collect();
    let eig: Vec<f64> = (1..=m)
        .map(|k| -4.0 / h2 * (std::f64::consts::PI * k as f64 / (2 * (m + 1)) as f64).sin().powi(2))
        .collect();
    let op = Operator { m, h2, v, v_mean, sine, eig };

    // Known boundary values move to the right-hand side.
    let mut rhs = vec![0.0; 2 * m * m];
    let at = |i: usize, j: usize| i * n + j;
    for i in 1..=m {
        for j in 1..=m {
            let k = (i - 1) * m + (j - 1);
            for (ni, nj) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                if ni == 0 || nj == 0 || ni == n - 1 || nj == n - 1 {
                    rhs[k] -= cfg.boundary.u[at(ni, nj)] / h2;
                    rhs[m * m + k] -= cfg.boundary.lap_u[at(ni, nj)] / h2;
                }
            }
        }
    }
    let (x, iterations, residual_history) = gmres(&op, &rhs, cfg.tolerance, cfg.max_iterations, cfg.restart)?;

    let mut values = cfg.boundary.u.clone();
    for i in 1..=m {
        for j in 1..=m {
            values[at(i, j)] = x[(i - 1) * m + (j - 1)];
        }
    }
    for (i, val) in values.iter_mut().enumerate() {
        if grid.is_interior(i, 1) {
            continue;
        }
        *val = cfg.boundary.u[i];
    }
    let u = ScalarField::new(grid.clone(), values)?;
    let l2 = u.laplacian().laplacian();
    let mut discrete_residual: f64 = 0.0;
    for i in 0..grid.len() {
        if l2.is_valid(i) {
            let p = grid.point(i);
            let r = l2.values()[i] - cfg.potential.value(&p[..2]) * u.values()[i];
            discrete_residual = discrete_residual.max(r.abs());
        }
    }
    let umax = u.values().iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let residual_scale = ((8.0 / h2).powi(2) + cfg.potential.sup_norm) * umax;
    if discrete_residual > cfg.tolerance * residual_scale {
        return Err(Error::NoConvergence { iterations, last: discrete_residual / residual_scale, history: residual_history });
    }
    Ok(SolveOutcome { u, iterations, residual_history, discrete_residual, residual_scale })
}
