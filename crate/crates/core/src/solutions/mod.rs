//! Test solutions: the built-in case library, manufactured potentials and a
//! finite-difference biharmonic solver.

mod solver;

pub use solver::{solve_biharmonic, BoundaryData, SolveConfig, SolveOutcome};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decompose::LiftedSystem;
use crate::error::{Error, Result};
use crate::expr::{Expr, Wave};
use crate::fields::{GridSpec, PotentialSource, PotentialSpec, ScalarField};
use crate::lifting::{select_params_with_floor, LiftParams};

pub const BUILTIN_NAMES: [&str; 11] = [
    "zero",
    "constant",
    "harmonic_k1",
    "harmonic_k2",
    "harmonic_k3",
    "eigen_mu2",
    "eigen_mu4",
    "eigen_mu8",
    "quartic",
    "quartic_shifted",
    "random_waves",
];

/// Seed used by `random_waves` when none is given.
pub const DEFAULT_SEED: u64 = 20240611;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CaseMeta {
    /// Homogeneity degree of a harmonic polynomial case.
    pub degree: Option<u32>,
    /// Eigen-parameter μ of sin(μx₁)sin(μx₂).
    pub mu: Option<f64>,
    /// Vanishing order at the origin.
    pub expected_order: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct CaseSpec {
    pub name: String,
    pub base_dim: usize,
    pub u: Expr,
    pub potential: PotentialSpec,
    pub meta: CaseMeta,
}

fn potential_for(u: &Expr, base_dim: usize, template: &PotentialSource) -> Result<PotentialSpec> {
    Ok(match template {
        PotentialSource::Constant(c) => PotentialSpec::constant(*c, base_dim),
        PotentialSource::Closed(e) => PotentialSpec::closed(e.clone(), base_dim)?,
        PotentialSource::Manufactured { floor, .. } => PotentialSpec::manufactured(u.clone(), base_dim, *floor)?,
        PotentialSource::Sampled(_) => {
            return Err(Error::Invalid("sampled potentials cannot change dimension".into()))
        }
    })
}

impl CaseSpec {
    fn closed(name: &str, base_dim: usize, u: Expr, potential: PotentialSpec, meta: CaseMeta) -> Self {
        Self { name: name.into(), base_dim, u, potential, meta }
    }

    /// The same case on a base domain of another dimension.
    pub fn with_base_dim(&self, base_dim: usize) -> Result<Self> {
        if base_dim < self.u.min_dim() || base_dim > 2 {
            return Err(Error::Invalid(format!(
                "case {} cannot live in base dimension {base_dim} (lifted dimension must be 2 or 3)",
                self.name
            )));
        }
        let potential = potential_for(&self.u, base_dim, &self.potential.source)?;
        Ok(Self { base_dim, potential, ..self.clone() })
    }

    /// N = 2k(α+1) for homogeneous harmonic cases.
    pub fn expected_frequency(&self, alpha: f64) -> Option<f64> {
        self.meta.degree.map(|k| 2.0 * k as f64 * (alpha + 1.0))
    }

    pub fn base_grid(&self, extent: f64, h: f64) -> Result<GridSpec> {
        GridSpec::with_spacing(self.base_dim, extent, h)
    }

    pub fn base_field(&self, grid: &GridSpec) -> Result<ScalarField> {
        ScalarField::from_expr(grid.clone(), &self.u)
    }

    pub fn params(&self, alpha_floor: f64) -> LiftParams {
        select_params_with_floor(&self.potential, alpha_floor)
    }

    /// ũ = u·e^{√λ t} on the lifted grid of half-width `extent` and spacing `h`.
    pub fn lifted_system(&self, extent: f64, h: f64, alpha_floor: f64) -> Result<LiftedSystem> {
        let grid = self.base_grid(extent, h)?;
        let u = self.base_field(&grid)?;
        LiftedSystem::lift(&u, self.potential.clone(), self.params(alpha_floor))
    }

    /// The closed form evaluated directly on a `dim`-dimensional grid. Only
    /// meaningful when V ≡ 0, so that λ = 0 and the field solves Δ²ũ = 0 itself.
    pub fn direct_system(&self, dim: usize, extent: f64, h: f64, alpha: f64) -> Result<LiftedSystem> {
        if self.potential.sup_norm != 0.0 {
            return Err(Error::Invalid(format!("case {} has a nonzero potential and must be lifted", self.name)));
        }
        let grid = GridSpec::with_spacing(dim, extent, h)?;
        let u = ScalarField::from_expr(grid, &self.u)?;
        LiftedSystem::new(u, PotentialSpec::zero(dim - 1), LiftParams::flat(alpha))
    }
}

pub fn builtin_case(name: &str) -> Result<CaseSpec> {
    builtin_case_seeded(name, DEFAULT_SEED)
}

pub fn builtin_case_seeded(name: &str, seed: u64) -> Result<CaseSpec> {
    let harmonic = |k: u32| {
        let u = if k == 1 { Expr::monomial(0, 1) } else { Expr::Harmonic { degree: k } };
        let n = u.min_dim();
        let meta = CaseMeta { degree: Some(k), expected_order: Some(k as f64), ..Default::default() };
        CaseSpec::closed(name, n, u, PotentialSpec::zero(n), meta)
    };
    let eigen = |mu: f64| {
        let meta = CaseMeta { mu: Some(mu), expected_order: Some(2.0), ..Default::default() };
        CaseSpec::closed(name, 2, Expr::SinProduct { mu }, PotentialSpec::constant(4.0 * mu.powi(4), 2), meta)
    };
    Ok(match name {
        "zero" => CaseSpec::closed(name, 1, Expr::Zero, PotentialSpec::zero(1), CaseMeta::default()),
        "constant" => CaseSpec::closed(
            name,
            1,
            Expr::Constant { value: 1.0 },
            PotentialSpec::zero(1),
            CaseMeta { degree: Some(0), expected_order: Some(0.0), ..Default::default() },
        ),
        "harmonic_k1" => harmonic(1),
        "harmonic_k2" => harmonic(2),
        "harmonic_k3" => harmonic(3),
        "eigen_mu2" => eigen(2.0),
        "eigen_mu4" => eigen(4.0),
        "eigen_mu8" => eigen(8.0),
        "quartic" => CaseSpec::closed(
            name,
            1,
            Expr::monomial(0, 2),
            PotentialSpec::zero(1),
            CaseMeta { expected_order: Some(2.0), ..Default::default() },
        ),
        "quartic_shifted" => {
            let u = Expr::Poly1 { axis: 0, coeffs: vec![1.0, 0.0, 0.0, 0.0, 1.0] };
            let potential = PotentialSpec::manufactured(u.clone(), 1, 0.5)?;
            CaseSpec::closed(name, 1, u, potential, CaseMeta { expected_order: Some(0.0), ..Default::default() })
        }
        "random_waves" => random_waves(seed, 2)?,
        _ => {
            return Err(Error::UnknownCase { name: name.into(), available: BUILTIN_NAMES.join(", ") })
        }
    })
}

/// offset + Σ a·cos(k·x + φ) with offset above Σ|a|, so u ≥ 1 and
/// V = Δ²u/u is smooth everywhere.
pub fn random_waves(seed: u64, base_dim: usize) -> Result<CaseSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<Wave> = (0..3)
        .map(|_| Wave {
            amplitude: rng.gen_range(0.1..0.25),
            wavevector: (0..base_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        })
        .collect();
    let offset = 1.0 + modes.iter().map(|m| m.amplitude).sum::<f64>();
    let u = Expr::Waves { offset, modes };
    let potential = PotentialSpec::manufactured(u.clone(), base_dim, 0.5)?;
    Ok(CaseSpec {
        name: "random_waves".into(),
        base_dim,
        u,
        potential,
        meta: CaseMeta { expected_order: Some(0.0), seed: Some(seed), ..Default::default() },
    })
}

/// V = Δ²u/u where |u| ≥ floor, with the validity mask on `grid`.
pub fn manufacture_potential(u: &Expr, floor: f64, grid: &GridSpec) -> Result<(PotentialSpec, Vec<bool>)> {
    let potential = PotentialSpec::manufactured(u.clone(), grid.dim, floor)?;
    let mask: Vec<bool> = (0..grid.len()).map(|i| potential.in_domain(&grid.point(i)[..grid.dim])).collect();
    if !mask.iter().any(|m| *m) {
        return Err(Error::EmptyMask(format!("|u| < {floor} on every node of the grid")));
    }
    Ok((potential, mask))
}
