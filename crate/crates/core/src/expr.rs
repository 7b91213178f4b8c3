//! Closed-form scalar functions with analytic derivatives up to ∇Δ².

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const MAX_DIM: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub amplitude: f64,
    pub wavevector: Vec<f64>,
    pub phase: f64,
}

impl Wave {
    fn arg(&self, x: &[f64]) -> f64 {
        self.wavevector.iter().zip(x).map(|(k, xi)| k * xi).sum::<f64>() + self.phase
    }

    fn k2(&self) -> f64 {
        self.wavevector.iter().map(|k| k * k).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    Zero,
    Constant { value: f64 },
    /// Σ coeffs[j]·x_axis^j.
    Poly1 { axis: usize, coeffs: Vec<f64> },
    /// Re((x₁ + i x₂)^degree), harmonic in every dimension ≥ 2.
    Harmonic { degree: u32 },
    RadiusSquared,
    /// sin(μx₁)·sin(μx₂); Δ² of it is 4μ⁴ times itself.
    SinProduct { mu: f64 },
    /// offset + Σ a·cos(k·x + φ).
    Waves { offset: f64, modes: Vec<Wave> },
}

fn poly_derivative(coeffs: &[f64], order: usize) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    for _ in 0..order {
        if c.len() <= 1 {
            return vec![0.0];
        }
        c = c.iter().enumerate().skip(1).map(|(j, a)| a * j as f64).collect();
    }
    c
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

impl Expr {
    pub fn monomial(axis: usize, degree: usize) -> Self {
        let mut coeffs = vec![0.0; degree + 1];
        coeffs[degree] = 1.0;
        Expr::Poly1 { axis, coeffs }
    }

    /// Smallest point dimension the expression can be evaluated in.
    pub fn min_dim(&self) -> usize {
        match self {
            Expr::Zero | Expr::Constant { .. } | Expr::RadiusSquared => 1,
            Expr::Poly1 { axis, .. } => axis + 1,
            Expr::Harmonic { .. } | Expr::SinProduct { .. } => 2,
            Expr::Waves { modes, .. } => modes.iter().map(|m| m.wavevector.len()).max().unwrap_or(1).max(1),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Expr::Zero => true,
            Expr::Constant { value } => *value == 0.0,
            Expr::Poly1 { coeffs, .. } => coeffs.iter().all(|c| *c == 0.0),
            _ => false,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Expr::Zero => "0".into(),
            Expr::Constant { value } => format!("{value:?}"),
            Expr::Poly1 { axis, coeffs } => {
                let terms: Vec<String> = coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(j, c)| format!("{c:?}*x{}^{j}", axis + 1))
                    .collect();
                if terms.is_empty() { "0".into() } else { terms.join("+") }
            }
            Expr::Harmonic { degree } => format!("Re((x1+i*x2)^{degree})"),
            Expr::RadiusSquared => "|x|^2".into(),
            Expr::SinProduct { mu } => format!("sin({mu:?}*x1)*sin({mu:?}*x2)"),
            Expr::Waves { offset, modes } => format!("waves(offset={offset:?},modes={})", modes.len()),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Zero => 0.0,
            Expr::Constant { value } => *value,
            Expr::Poly1 { axis, coeffs } => poly_eval(coeffs, x[*axis]),
            Expr::Harmonic { degree } => Complex64::new(x[0], x[1]).powu(*degree).re,
            Expr::RadiusSquared => x.iter().map(|v| v * v).sum(),
            Expr::SinProduct { mu } => (mu * x[0]).sin() * (mu * x[1]).sin(),
            Expr::Waves { offset, modes } => offset + modes.iter().map(|m| m.amplitude * m.arg(x).cos()).sum::<f64>(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let mut g = [0.0; MAX_DIM];
        match self {
            Expr::Zero | Expr::Constant { .. } => {}
            Expr::Poly1 { axis, coeffs } => g[*axis] = poly_eval(&poly_derivative(coeffs, 1), x[*axis]),
            Expr::Harmonic { degree } => {
                if *degree > 0 {
                    let d = Complex64::new(x[0], x[1]).powu(degree - 1) * *degree as f64;
                    g[0] = d.re;
                    g[1] = -d.im;
                }
            }
            Expr::RadiusSquared => {
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi = 2.0 * xi;
                }
            }
            Expr::SinProduct { mu } => {
                let (s0, c0) = (mu * x[0]).sin_cos();
                let (s1, c1) = (mu * x[1]).sin_cos();
                g[0] = mu * c0 * s1;
                g[1] = mu * s0 * c1;
            }
            Expr::Waves { modes, .. } => {
                for m in modes {
                    let s = m.amplitude * m.arg(x).sin();
                    for (gi, k) in g.iter_mut().zip(&m.wavevector) {
                        *gi -= s * k;
                    }
                }
            }
        }
        g
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Zero | Expr::Constant { .. } | Expr::Harmonic { .. } => 0.0,
            Expr::Poly1 { axis, coeffs } => poly_eval(&poly_derivative(coeffs, 2), x[*axis]),
            Expr::RadiusSquared => 2.0 * x.len() as f64,
            Expr::SinProduct { mu } => -2.0 * mu * mu * self.value(x),
            Expr::Waves { modes, .. } => modes.iter().map(|m| -m.amplitude * m.k2() * m.arg(x).cos()).sum(),
        }
    }

    pub fn bilaplacian(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Poly1 { axis, coeffs } => poly_eval(&poly_derivative(coeffs, 4), x[*axis]),
            Expr::SinProduct { mu } => 4.0 * mu.powi(4) * self.value(x),
            Expr::Waves { modes, .. } => modes.iter().map(|m| m.amplitude * m.k2() * m.k2() * m.arg(x).cos()).sum(),
            _ => 0.0,
        }
    }

    pub fn grad_bilaplacian(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let mut g = [0.0; MAX_DIM];
        match self {
            Expr::Poly1 { axis, coeffs } => g[*axis] = poly_eval(&poly_derivative(coeffs, 5), x[*axis]),
            Expr::SinProduct { mu } => {
                let gu = self.gradient(x);
                let c = 4.0 * mu.powi(4);
                for (gi, v) in g.iter_mut().zip(gu) {
                    *gi = c * v;
                }
            }
            Expr::Waves { modes, .. } => {
                for m in modes {
                    let s = m.amplitude * m.k2() * m.k2() * m.arg(x).sin();
                    for (gi, k) in g.iter_mut().zip(&m.wavevector) {
                        *gi -= s * k;
                    }
                }
            }
            _ => {}
        }
        g
    }
}
