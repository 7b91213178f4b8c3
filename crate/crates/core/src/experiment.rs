//! Config-driven experiments: build or solve a case, lift it, profile the
//! frequency, run the requested checks and write the report files.
//!
//! A config is a TOML file; unknown keys are rejected. A minimal one:
//!
//! ```toml
//! checks = ["h-prime", "order"]
//! output_dir = "out/harmonic"
//!
//! [case]
//! kind = "builtin"
//! name = "harmonic_k1"
//!
//! [grid]
//! extent = 0.5625
//! resolutions = [128]
//! ```
//!
//! See the configs/ directory for every option.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decompose::{calibrate_residual_constant, residual_biharmonic, residual_second, LiftedSystem};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::{GridSpec, PotentialSpec, ScalarField};
use crate::frequency::{
    build_profile, check_H_prime, check_I_prime, check_cancellations, fit_monotonicity_constant, geometric_radii,
    FrequencyProfile,
};
use crate::inequalities::{
    caccioppoli_check, changing_center, check_h_H_lower, check_h_H_upper, doubling_reports, h_doubling,
    h_doubling_lower, sup_bound_check, Budgets,
};
use crate::lifting::{select_params_with_floor, LiftParams};
use crate::quadrature::{Ball, BallRule};
use crate::report::{json_f64, CheckReport};
use crate::solutions::{builtin_case_seeded, solve_biharmonic, BoundaryData, CaseMeta, CaseSpec, SolveConfig};
use crate::vanishing::{estimate_order, order_from_frequency, theorem_bound, OrderEstimate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Residuals,
    #[serde(alias = "H-prime")]
    HPrime,
    #[serde(alias = "I-prime")]
    IPrime,
    Cancellations,
    Monotonicity,
    Doubling,
    ChangingCenter,
    Caccioppoli,
    SupBound,
    Order,
    TheoremBound,
    FrequencyScaling,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Embedding {
    /// ũ = u·e^{√λ t} on a grid with one extra axis.
    #[default]
    Lift,
    /// The closed form evaluated directly on a `dim`-dimensional grid; V ≡ 0 only.
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    Constant { value: f64 },
    Expr { expr: Expr },
    /// V = Δ²u*/u* from the exact solution, with the given floor on |u*|.
    Manufactured { floor: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CaseConfig {
    Builtin {
        name: String,
        base_dim: Option<usize>,
    },
    Manufactured {
        u: Expr,
        base_dim: usize,
        floor: Option<f64>,
    },
    /// Solve Δ²u = Vu on the square with (u, Δu) boundary data from `exact`.
    Solve {
        exact: Expr,
        potential: PotentialConfig,
        tolerance: Option<f64>,
        max_iterations: Option<usize>,
    },
    /// sin(μx₁)sin(μx₂) with V = 4μ⁴ for each μ.
    EigenFamily {
        mus: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half-width of the box.
    pub extent: f64,
    /// Points per unit length; h = 1/resolution. Ascending for refinement studies.
    pub resolutions: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiusConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for RadiusConfig {
    fn default() -> Self {
        Self { min: 0.15, max: 0.45, count: 23 }
    }
}

/// Geometric window for the vanishing-order fit. Defaults: r_max is the
/// largest profile radius (capped at 0.1/μ for eigen cases), r_min = r_max/8.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrderWindow {
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub count: Option<usize>,
    /// Points per unit length of a local base grid used for the fit, so that
    /// r_min ≥ 4h can hold for small windows. Closed-form cases only.
    pub resolution: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub h_prime: f64,
    pub i_prime: f64,
    /// Relative gap between the two forms of I.
    pub forms: f64,
    /// Residual budget is this factor times the constant fitted on the two
    /// coarser grids (2h and 4h), plus a round-off allowance.
    pub residual_safety: f64,
    /// Used when the coarser grids are unavailable.
    pub residual_constant: Option<f64>,
    pub monotonicity: f64,
    /// Allowed relative change of the monotonicity constant between the two
    /// finest resolutions.
    pub monotonicity_refinement: f64,
    pub doubling_exponent: f64,
    pub order: f64,
    pub theorem_constant: f64,
    pub frequency_constant: f64,
    pub scaling_slope: f64,
    pub scaling_radius: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            h_prime: 0.01,
            i_prime: 0.02,
            forms: 0.01,
            residual_safety: 1.5,
            residual_constant: None,
            monotonicity: 2.0,
            monotonicity_refinement: 0.1,
            doubling_exponent: 0.01,
            order: 0.05,
            theorem_constant: 3.0,
            frequency_constant: 1.0,
            scaling_slope: 1.2,
            scaling_radius: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: CaseConfig,
    #[serde(default)]
    pub embedding: Embedding,
    /// Grid dimension for the direct embedding.
    pub dim: Option<usize>,
    /// α = max(‖∇V‖, alpha_floor) when lifting; α = alpha_floor when direct.
    #[serde(default)]
    pub alpha_floor: f64,
    pub grid: GridConfig,
    #[serde(default)]
    pub radii: RadiusConfig,
    /// Base-domain points; the lifted center is (x, 0).
    pub centers: Option<Vec<Vec<f64>>>,
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub order: OrderWindow,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub changing_center_samples: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("freqlab-out")
}

fn default_seed() -> u64 {
    crate::solutions::DEFAULT_SEED
}

fn default_samples() -> usize {
    8
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn dims(&self) -> Result<(usize, usize)> {
        let base = match &self.case {
            CaseConfig::Builtin { name, base_dim } => {
                let c = builtin_case_seeded(name, self.seed).map_err(|e| Error::Config(e.to_string()))?;
                base_dim.unwrap_or(c.base_dim)
            }
            CaseConfig::Manufactured { base_dim, .. } => *base_dim,
            CaseConfig::Solve { .. } | CaseConfig::EigenFamily { .. } => 2,
        };
        let dim = match self.embedding {
            Embedding::Lift => base + 1,
            Embedding::Direct => self.dim.ok_or_else(|| Error::Config("direct embedding needs `dim`".into()))?,
        };
        Ok((base, dim))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.checks.is_empty() {
            return bad("at least one check is required".into());
        }
        if self.grid.resolutions.is_empty() {
            return bad("grid.resolutions must be nonempty".into());
        }
        if self.grid.resolutions.windows(2).any(|w| w[1] <= w[0]) {
            return bad("grid.resolutions must be strictly ascending".into());
        }
        if !(self.grid.extent > 0.0) {
            return bad("grid.extent must be positive".into());
        }
        let r = &self.radii;
        if !(r.min > 0.0 && r.max > r.min) || r.count < 4 {
            return bad(format!("radii need 0 < min < max and count ≥ 4 (got {}, {}, {})", r.min, r.max, r.count));
        }
        let w = &self.order;
        if w.r_min.is_some_and(|r| !(r > 0.0)) || w.r_max.is_some_and(|r| !(r > 0.0)) {
            return bad("order window radii must be positive".into());
        }
        if let (Some(lo), Some(hi)) = (w.r_min, w.r_max) {
            if hi <= lo {
                return bad("order window needs r_min < r_max".into());
            }
        }
        if w.count.is_some_and(|c| c < 4) {
            return bad("order window needs count ≥ 4".into());
        }
        if w.resolution.is_some() && matches!(self.case, CaseConfig::Solve { .. }) {
            return bad("order.resolution needs a closed-form case".into());
        }
        if self.changing_center_samples == 0 {
            return bad("changing_center_samples must be at least 1".into());
        }
        if self.alpha_floor < 0.0 {
            return bad("alpha_floor must be nonnegative".into());
        }
        let (base, dim) = self.dims()?;
        if !(2..=3).contains(&dim) {
            return bad(format!("working dimension {dim} must be 2 or 3"));
        }
        if self.embedding == Embedding::Direct {
            if self.dim.is_none() {
                return bad("direct embedding needs `dim`".into());
            }
            if matches!(self.case, CaseConfig::Solve { .. } | CaseConfig::EigenFamily { .. }) {
                return bad("direct embedding applies to builtin and manufactured cases only".into());
            }
        } else if self.dim.is_some() {
            return bad("`dim` is only used with the direct embedding".into());
        }
        let want = match self.embedding {
            Embedding::Lift => base,
            Embedding::Direct => dim - 1,
        };
        for c in self.centers() {
            if c.len() != want {
                return bad(format!("center {c:?} must have {want} coordinates"));
            }
        }
        match &self.case {
            CaseConfig::EigenFamily { mus } => {
                if mus.is_empty() || mus.iter().any(|m| !(*m > 0.0)) {
                    return bad("eigen-family needs positive mus".into());
                }
            }
            _ if self.checks.contains(&CheckKind::FrequencyScaling) => {
                return bad("frequency-scaling needs an eigen-family case".into());
            }
            CaseConfig::Solve { tolerance: Some(t), .. } if !(*t > 0.0) => {
                return bad("solver tolerance must be positive".into());
            }
            _ => {}
        }
        for &res in &self.grid.resolutions {
            let h = 1.0 / res as f64;
            let cells = self.grid.extent / h;
            if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
                return bad(format!("extent {} is not a whole number of cells at resolution {res}", self.grid.extent));
            }
            let clearance = r.max + h * (0.5 * (dim as f64).sqrt() + 2.0);
            for c in self.centers() {
                let reach = c.iter().fold(0.0f64, |m, x| m.max(x.abs())) + clearance;
                if reach > self.grid.extent + 1e-12 {
                    return bad(format!(
                        "radius {} at center {c:?} does not fit the box of half-width {} at resolution {res}",
                        r.max, self.grid.extent
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.centers.clone().unwrap_or_else(|| {
            let (base, dim) = self.dims().unwrap_or((1, 2));
            let n = if self.embedding == Embedding::Direct { dim - 1 } else { base };
            vec![vec![0.0; n]]
        })
    }
}

/// Which parts of the pipeline a verb runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Run,
    Verify,
    Profile,
    Solve,
}

/// One computed profile ready for CSV and plot output.
#[derive(Clone, Debug)]
pub struct LabeledProfile {
    pub label: String,
    pub profile: FrequencyProfile,
}

#[derive(Clone, Debug, Default)]
pub struct RunResults {
    pub profiles: Vec<LabeledProfile>,
    pub checks: Vec<CheckReport>,
    /// Extra tables: file name and contents.
    pub tables: Vec<(String, String)>,
    /// Solved fields: label and field.
    pub fields: Vec<(String, ScalarField)>,
}

impl RunResults {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// One case at one resolution, built on demand.
struct Instance<'a> {
    cfg: &'a ExperimentConfig,
    label: String,
    spec: CaseSpec,
    h: f64,
    base_field: Option<ScalarField>,
    system: Option<LiftedSystem>,
    solved: Option<crate::solutions::SolveOutcome>,
}

impl<'a> Instance<'a> {
    fn new(cfg: &'a ExperimentConfig, label: String, spec: CaseSpec, h: f64) -> Self {
        Self { cfg, label, spec, h, base_field: None, system: None, solved: None }
    }

    fn params(&self) -> LiftParams {
        match self.cfg.embedding {
            Embedding::Lift => select_params_with_floor(&self.spec.potential, self.cfg.alpha_floor),
            Embedding::Direct => LiftParams::flat(self.cfg.alpha_floor),
        }
    }

    /// The field the order is measured on: u on the base grid, or the direct field.
    fn order_field(&mut self) -> Result<ScalarField> {
        if self.cfg.embedding == Embedding::Direct {
            return Ok(self.system()?.u().clone());
        }
        self.base_field()
    }

    fn base_field(&mut self) -> Result<ScalarField> {
        if let Some(f) = &self.base_field {
            return Ok(f.clone());
        }
        let field = if let CaseConfig::Solve { tolerance, max_iterations, .. } = &self.cfg.case {
            let grid = GridSpec::with_spacing(2, self.cfg.grid.extent, self.h)?;
            let mut sc = SolveConfig::new(
                grid.clone(),
                BoundaryData::from_expr(&grid, &self.spec.u),
                self.spec.potential.clone(),
            );
            if let Some(t) = tolerance {
                sc.tolerance = *t;
            }
            if let Some(m) = max_iterations {
                sc.max_iterations = *m;
            }
            let out = solve_biharmonic(&sc)?;
            let f = out.u.clone();
            self.solved = Some(out);
            f
        } else {
            self.spec.base_field(&self.spec.base_grid(self.cfg.grid.extent, self.h)?)?
        };
        self.base_field = Some(field.clone());
        Ok(field)
    }

    fn system(&mut self) -> Result<&LiftedSystem> {
        if self.system.is_none() {
            let sys = match self.cfg.embedding {
                Embedding::Lift => {
                    let u = self.base_field()?;
                    LiftedSystem::lift(&u, self.spec.potential.clone(), self.params())?
                }
                Embedding::Direct => {
                    let dim = self.cfg.dim.expect("validated");
                    self.spec.direct_system(dim, self.cfg.grid.extent, self.h, self.cfg.alpha_floor)?
                }
            };
            self.system = Some(sys);
        }
        Ok(self.system.as_ref().expect("just built"))
    }
}

fn builtin_spec(cfg: &ExperimentConfig) -> Result<Vec<CaseSpec>> {
    Ok(match &cfg.case {
        CaseConfig::Builtin { name, base_dim } => {
            let c = builtin_case_seeded(name, cfg.seed)?;
            vec![match base_dim {
                Some(b) if *b != c.base_dim => c.with_base_dim(*b)?,
                _ => c,
            }]
        }
        CaseConfig::Manufactured { u, base_dim, floor } => {
            let potential = match floor {
                Some(f) => PotentialSpec::manufactured(u.clone(), *base_dim, *f)?,
                None => PotentialSpec::manufactured_default(u.clone(), *base_dim)?,
            };
            vec![CaseSpec {
                name: format!("manufactured {}", u.label()),
                base_dim: *base_dim,
                u: u.clone(),
                potential,
                meta: CaseMeta::default(),
            }]
        }
        CaseConfig::Solve { exact, potential, .. } => {
            let v = match potential {
                PotentialConfig::Zero => PotentialSpec::zero(2),
                PotentialConfig::Constant { value } => PotentialSpec::constant(*value, 2),
                PotentialConfig::Expr { expr } => PotentialSpec::closed(expr.clone(), 2)?,
                PotentialConfig::Manufactured { floor: Some(f) } => PotentialSpec::manufactured(exact.clone(), 2, *f)?,
                PotentialConfig::Manufactured { floor: None } => PotentialSpec::manufactured_default(exact.clone(), 2)?,
            };
            vec![CaseSpec {
                name: "solve".into(),
                base_dim: 2,
                u: exact.clone(),
                potential: v,
                meta: CaseMeta::default(),
            }]
        }
        CaseConfig::EigenFamily { mus } => mus
            .iter()
            .map(|&mu| CaseSpec {
                name: format!("eigen_mu{mu}"),
                base_dim: 2,
                u: Expr::SinProduct { mu },
                potential: PotentialSpec::constant(4.0 * mu.powi(4), 2),
                meta: CaseMeta { mu: Some(mu), expected_order: Some(2.0), ..Default::default() },
            })
            .collect(),
    })
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn tag(rep: CheckReport, case: &str, h: f64, center: Option<&[f64]>) -> CheckReport {
    let rep = rep.with_meta("case", case).with_meta_f64("h", h);
    match center {
        Some(c) => rep.with_meta("center", c.iter().map(|x| json_f64(*x)).collect::<Vec<_>>()),
        None => rep,
    }
}

fn lifted_center(c: &[f64]) -> Vec<f64> {
    let mut z = c.to_vec();
    z.push(0.0);
    z
}

/// Runs the pipeline for the given verb. Work happens only as far as the
/// requested checks need it.
pub fn run_experiment(cfg: &ExperimentConfig, mode: Mode) -> Result<RunResults> {
    cfg.validate()?;
    if mode == Mode::Solve && !matches!(cfg.case, CaseConfig::Solve { .. }) {
        return Err(Error::Config("the solve verb needs a case of kind \"solve\"".into()));
    }
    let specs = builtin_spec(cfg)?;
    let mut results = RunResults::default();
    let radii = geometric_radii(cfg.radii.min, cfg.radii.max, cfg.radii.count)?;
    let centers = cfg.centers();
    let checks: Vec<CheckKind> = {
        let mut c = cfg.checks.clone();
        c.sort();
        c.dedup();
        c
    };
    let want_checks = matches!(mode, Mode::Run | Mode::Verify);
    let want_profiles = matches!(mode, Mode::Run | Mode::Profile);
    let mut scaling: Vec<(f64, f64)> = Vec::new();

    for spec in &specs {
        let mut monotonicity_runs = 0;
        for (ri, &res) in cfg.grid.resolutions.iter().enumerate() {
            let h = 1.0 / res as f64;
            let label = format!("{}_h{res}", slug(&spec.name));
            let mut inst = Instance::new(cfg, label.clone(), spec.clone(), h);

            if mode == Mode::Solve {
                inst.base_field()?;
                results.fields.push((label, inst.base_field.clone().expect("solved")));
                continue;
            }

            let needs_profile = |c: &CheckKind| {
                matches!(c, CheckKind::HPrime | CheckKind::IPrime | CheckKind::Monotonicity | CheckKind::TheoremBound)
            };
            let finest = ri + 1 == cfg.grid.resolutions.len();

            if want_checks && checks.contains(&CheckKind::Residuals) {
                results.checks.extend(residual_checks(&mut inst, cfg, finest)?);
            }

            for (ci, c) in centers.iter().enumerate() {
                let z = lifted_center(c);
                let mut profile: Option<FrequencyProfile> = None;
                if want_checks {
                    let mut order: Option<OrderEstimate> = None;
                    for check in &checks {
                        if profile.is_none() && needs_profile(check) {
                            profile = Some(build_profile(inst.system()?, &z, &radii)?);
                        }
                        let reps = run_check(*check, &mut inst, cfg, c, &z, profile.as_ref(), &mut order)?;
                        results.checks.extend(reps.into_iter().map(|r| tag(r, &spec.name, h, Some(c))));
                    }
                    if checks.contains(&CheckKind::Monotonicity) && ci == 0 {
                        monotonicity_runs += 1;
                    }
                    if checks.contains(&CheckKind::FrequencyScaling) && ci == 0 && finest {
                        let sys = inst.system()?;
                        let rec = build_profile(sys, &z, &[cfg.tolerances.scaling_radius])?;
                        scaling.push((spec.meta.mu.expect("eigen-family"), rec.records[0].n));
                    }
                }
                if want_profiles {
                    let p = match profile {
                        Some(p) => p,
                        None => build_profile(inst.system()?, &z, &radii)?,
                    };
                    results.profiles.push(LabeledProfile { label: format!("{label}_c{ci}"), profile: p });
                }
            }
        }
        if monotonicity_runs >= 2 {
            results.checks.push(monotonicity_refinement(cfg, spec, &centers[0])?);
        }
    }

    if want_checks && checks.contains(&CheckKind::FrequencyScaling) {
        let (rep, table) = frequency_scaling(&scaling, cfg.tolerances.scaling_slope, cfg.tolerances.scaling_radius);
        results.checks.push(rep);
        results.tables.push(("frequency_scaling.csv".into(), table));
    }
    Ok(results)
}

fn residual_checks(inst: &mut Instance, cfg: &ExperimentConfig, finest: bool) -> Result<Vec<CheckReport>> {
    let h = inst.h;
    let name = inst.spec.name.clone();
    let mut out = Vec::new();
    // Fit the constant on 4h and 2h.
    let mut coarse = Vec::new();
    for factor in [4.0, 2.0] {
        let mut other = Instance::new(cfg, inst.label.clone(), inst.spec.clone(), h * factor);
        let built = match other.system() {
            Ok(_) => true,
            Err(Error::Invalid(_)) | Err(Error::GridMismatch(_)) => false,
            Err(e) => return Err(e),
        };
        if built {
            let sys = other.system()?;
            coarse.push(residual_second(sys, 1.0));
            coarse.push(residual_biharmonic(sys.u(), sys.potential(), sys.params(), 1.0)?);
        }
    }
    let sys = inst.system()?;
    let d = sys.grid().dim as f64;
    let umax = sys.u().values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Round-off of two composed Laplacians, in units of h².
    let roundoff = 16.0 * f64::EPSILON * umax * (4.0 * d / (h * h)).powi(2) / (h * h);
    let budget = if coarse.len() == 4 {
        calibrate_residual_constant(&coarse, cfg.tolerances.residual_safety) + roundoff
    } else if let Some(c) = cfg.tolerances.residual_constant {
        c
    } else if !finest {
        log::warn!("residuals at h = {h} skipped: grids at 2h and 4h are too small to calibrate the constant");
        return Ok(vec![]);
    } else {
        let fail = CheckReport::mismatch("residuals", f64::NAN, 0.0)
            .failed("coarser grids unavailable and no residual_constant configured");
        return Ok(vec![tag(fail, &name, h, None)]);
    };
    for mut rep in [
        residual_second(sys, budget),
        residual_biharmonic(sys.u(), sys.potential(), sys.params(), budget)?,
    ] {
        rep = rep.with_meta_f64("roundoff_allowance", roundoff);
        out.push(tag(rep, &name, h, None));
    }
    if let Some(sol) = &inst.solved {
        let grid = sol.u.grid();
        let err = (0..grid.len())
            .map(|i| (sol.u.values()[i] - inst.spec.u.value(&grid.point(i)[..2])).abs())
            .fold(0.0, f64::max);
        let tol = match &cfg.case {
            CaseConfig::Solve { tolerance: Some(t), .. } => *t,
            _ => SolveConfig::new(grid.clone(), BoundaryData { u: vec![], lap_u: vec![] }, inst.spec.potential.clone())
                .tolerance,
        };
        let rep = CheckReport::new("solver-residual", sol.discrete_residual, sol.residual_scale, tol)
            .with_meta("iterations", sol.iterations)
            .with_meta_f64("max_error_vs_exact", err);
        out.push(tag(rep, &name, h, None));
    }
    Ok(out)
}

fn run_check(
    check: CheckKind,
    inst: &mut Instance,
    cfg: &ExperimentConfig,
    base_center: &[f64],
    z: &[f64],
    profile: Option<&FrequencyProfile>,
    order: &mut Option<OrderEstimate>,
) -> Result<Vec<CheckReport>> {
    let tol = &cfg.tolerances;
    let b = &cfg.budgets;
    let r_max = cfg.radii.max;
    let r_min = cfg.radii.min;
    let meta = inst.spec.meta.clone();
    Ok(match check {
        CheckKind::Residuals | CheckKind::FrequencyScaling => vec![],
        CheckKind::HPrime => vec![check_H_prime(profile.expect("profile"), tol.h_prime)],
        CheckKind::IPrime => {
            let p = profile.expect("profile");
            let sys = inst.system()?;
            let forms = p
                .records
                .iter()
                .map(|r| {
                    let i = &r.integrals;
                    (i.I_form1 - i.I_form2).abs() / i.I_form1.abs().max(f64::MIN_POSITIVE)
                })
                .fold(0.0, f64::max);
            let forms = if p.records.iter().all(|r| r.integrals.I_form1 == 0.0 && r.integrals.I_form2 == 0.0) {
                0.0
            } else {
                forms
            };
            vec![check_I_prime(p, sys, tol.i_prime)?, CheckReport::mismatch("forms", forms, tol.forms)]
        }
        CheckKind::Cancellations => {
            let sys = inst.system()?;
            vec![check_cancellations(sys, &Ball::new(z, r_max), BallRule::Hybrid)?]
        }
        CheckKind::Monotonicity => {
            let p = profile.expect("profile");
            let g = inst.system()?.potential().grad_sup_norm;
            let c = fit_monotonicity_constant(p, g);
            vec![CheckReport::new("monotonicity", c, 1.0, tol.monotonicity).with_meta_f64("grad_norm", g)]
        }
        CheckKind::Doubling => {
            let sys = inst.system()?;
            let mut out = doubling_reports(sys, z, r_min, r_max, b)?;
            if let Some(k) = meta.degree {
                let a = sys.params().alpha;
                let expected = sys.grid().dim as f64 + 2.0 * a + 2.0 * k as f64;
                let e = out[0].meta.get("exponent").and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
                out.push(
                    CheckReport::mismatch("doubling-exponent", ((e - expected) / expected).abs(), tol.doubling_exponent)
                        .with_meta_f64("exponent", e)
                        .with_meta_f64("expected", expected),
                );
            }
            out.push(h_doubling(sys, z, r_min / 2.0, r_max / 2.0, b.h_doubling_upper)?);
            if let Some(r) = h_doubling_lower(sys, z, r_min / 2.0, r_max / 2.0, b.h_doubling_lower)? {
                out.push(r);
            }
            out.push(check_h_H_upper(sys, z, r_max)?);
            out.push(check_h_H_lower(sys, z, r_max / 2.0, r_max)?);
            out
        }
        CheckKind::ChangingCenter => {
            let sys = inst.system()?;
            vec![changing_center(sys, z, 16.0 * r_max / 9.0, cfg.changing_center_samples, cfg.seed, b.changing_center)?]
        }
        CheckKind::Caccioppoli => vec![caccioppoli_check(inst.system()?, z, r_max / 2.0, b.caccioppoli)?],
        CheckKind::SupBound => vec![sup_bound_check(inst.system()?, z, r_max / 2.0, b.sup_bound)?],
        CheckKind::Order => {
            let est = measure_order(inst, cfg, base_center, z)?;
            let rep = match meta.expected_order {
                Some(k) => CheckReport::mismatch("order", (est.order - k).abs(), tol.order).with_meta_f64("expected", k),
                // Without a known order only the volume bound slope ≥ d is checked.
                None => CheckReport::new("order", (-0.5 - est.order).max(0.0), 1.0, tol.order),
            };
            let rep = rep
                .with_meta_f64("order", est.order)
                .with_meta_f64("slope", est.slope)
                .with_meta_f64("fit_residual", est.fit_residual);
            *order = Some(est);
            vec![rep]
        }
        CheckKind::TheoremBound => {
            let est = match order.take() {
                Some(e) => e,
                None => measure_order(inst, cfg, base_center, z)?,
            };
            let sys = inst.system()?;
            let v = sys.potential();
            let base = theorem_bound(v, 1.0)?;
            let p = profile.expect("profile");
            let params = *sys.params();
            let g = v.grad_sup_norm;
            let x = order_from_frequency(p, &params, g, 1.0) - 2.0;
            let out = vec![
                CheckReport::new("theorem-bound", est.order, base, tol.theorem_constant)
                    .with_meta_f64("order", est.order)
                    .with_meta_f64("bound", tol.theorem_constant * base),
                CheckReport::new("frequency-bound", est.order - 2.0, x, tol.frequency_constant)
                    .with_meta_f64("order", est.order)
                    .with_meta_f64("bound", order_from_frequency(p, &params, g, tol.frequency_constant))
                    .with_meta_f64("N_r_max", p.last().n),
            ];
            *order = Some(est);
            out
        }
    })
}

fn measure_order(inst: &mut Instance, cfg: &ExperimentConfig, base_center: &[f64], z: &[f64]) -> Result<OrderEstimate> {
    let w = &cfg.order;
    let hi = w.r_max.unwrap_or(match inst.spec.meta.mu {
        Some(mu) => cfg.radii.max.min(0.1 / mu),
        None => cfg.radii.max,
    });
    let lo = w.r_min.unwrap_or(hi / 8.0);
    if lo >= hi {
        return Err(Error::Config(format!("order window [{lo}, {hi}] is empty")));
    }
    let radii = geometric_radii(lo, hi, w.count.unwrap_or(7))?;
    let point = if cfg.embedding == Embedding::Direct { z } else { base_center };
    let field = match w.resolution {
        Some(res) => {
            let h = 1.0 / res as f64;
            let reach = point.iter().fold(0.0f64, |m, x| m.max(x.abs())) + hi + 2.0 * h;
            let extent = ((reach / h).ceil().max(8.0)) * h;
            let dim = if cfg.embedding == Embedding::Direct { cfg.dim.expect("validated") } else { inst.spec.base_dim };
            ScalarField::from_expr(GridSpec::with_spacing(dim, extent, h)?, &inst.spec.u)?
        }
        None => inst.order_field()?,
    };
    estimate_order(&field, point, &radii)
}

fn monotonicity_refinement(cfg: &ExperimentConfig, spec: &CaseSpec, center: &[f64]) -> Result<CheckReport> {
    let res = &cfg.grid.resolutions;
    let (coarse_res, fine_res) = (res[res.len() - 2], res[res.len() - 1]);
    let h_coarse = 1.0 / coarse_res as f64;
    // C resolves rate changes only above the quadrature noise, so compare on
    // radii at least four coarse cells apart.
    let all = geometric_radii(cfg.radii.min, cfg.radii.max, cfg.radii.count)?;
    let mut thinned = vec![all[0]];
    for &r in &all[1..] {
        if r - thinned.last().unwrap() >= 4.0 * h_coarse - 1e-12 {
            thinned.push(r);
        }
    }
    if *thinned.last().unwrap() != cfg.radii.max && thinned.len() > 1 {
        let n = thinned.len();
        thinned[n - 1] = cfg.radii.max;
    }
    let z = lifted_center(center);
    let mut cs = Vec::new();
    for r in [coarse_res, fine_res] {
        let mut inst = Instance::new(cfg, String::new(), spec.clone(), 1.0 / r as f64);
        let sys = inst.system()?;
        let p = build_profile(sys, &z, &thinned)?;
        cs.push(fit_monotonicity_constant(&p, sys.potential().grad_sup_norm));
    }
    let change = relative_change(cs[0], cs[1]);
    let rep = CheckReport::mismatch("monotonicity-refinement", change, cfg.tolerances.monotonicity_refinement)
        .with_meta_f64("C_coarse", cs[0])
        .with_meta_f64("C_fine", cs[1])
        .with_meta("radii_used", thinned.iter().map(|r| json_f64(*r)).collect::<Vec<_>>());
    Ok(tag(rep, &spec.name, 1.0 / fine_res as f64, Some(center)))
}

/// |a − b| / max(|a|, |b|), with two zeros counting as no change.
pub fn relative_change(a: f64, b: f64) -> f64 {
    if !(a.is_finite() && b.is_finite()) {
        return f64::INFINITY;
    }
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Least-squares slope of log N against log μ.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn frequency_scaling(points: &[(f64, f64)], budget: f64, radius: f64) -> (CheckReport, String) {
    let mut table = String::from("mu,N\n");
    for (mu, n) in points {
        let _ = writeln!(table, "{mu:?},{n:?}");
    }
    let slope = if points.len() >= 2 && points.iter().all(|p| p.1 > 0.0) { log_log_slope(points) } else { f64::NAN };
    let mut rep = CheckReport::mismatch("frequency-scaling", slope, budget).with_meta_f64("radius", radius);
    if points.len() < 2 {
        rep = rep.failed("need at least two values of mu");
    }
    (rep, table)
}

/// Profile CSV with the header r,H,I1,I2,I3,I4,I5,I_form1,I_form2,h,N.
pub fn profile_csv(p: &FrequencyProfile) -> String {
    let mut s = String::from("r,H,I1,I2,I3,I4,I5,I_form1,I_form2,h,N\n");
    for rec in &p.records {
        let i = &rec.integrals;
        let _ = writeln!(
            s,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            i.r, i.H, i.I1, i.I2, i.I3, i.I4, i.I5, i.I_form1, i.I_form2, i.h_plain, rec.n
        );
    }
    s
}

/// Header `dim,points_per_axis,extent` (as values), then one value per line.
pub fn field_dump(f: &ScalarField) -> String {
    let g = f.grid();
    let mut s = format!("{},{},{:?}\n", g.dim, g.points_per_axis, g.extent);
    for v in f.values() {
        let _ = writeln!(s, "{v:?}");
    }
    s
}

pub fn checks_json(checks: &[CheckReport]) -> String {
    let value: Vec<BTreeMap<&str, serde_json::Value>> = checks
        .iter()
        .map(|c| {
            let mut m = BTreeMap::new();
            m.insert("name", serde_json::Value::from(c.name.clone()));
            m.insert("lhs", json_f64(c.lhs));
            m.insert("rhs_without_constant", json_f64(c.rhs_without_constant));
            m.insert("implied_constant", json_f64(c.implied_constant));
            m.insert("pass", serde_json::Value::from(c.pass));
            m.insert("meta", serde_json::to_value(&c.meta).expect("json map"));
            m
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&value).expect("serializable");
    s.push('\n');
    s
}

/// Writes every report file into `dir` and returns the paths written, in order.
pub fn emit_reports(results: &RunResults, dir: &Path, mode: Mode) -> Result<Vec<PathBuf>> {
    if results.profiles.is_empty() && results.checks.is_empty() && results.fields.is_empty() && results.tables.is_empty() {
        return Err(Error::Invalid("nothing to report".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: &str| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    for lp in &results.profiles {
        put(format!("profile_{}.csv", lp.label), &profile_csv(&lp.profile))?;
        let mut log_h = String::from("# log_r log_H\n");
        let mut r_n = String::from("# r N\n");
        for rec in &lp.profile.records {
            let _ = writeln!(log_h, "{:?} {:?}", rec.integrals.r.ln(), rec.integrals.H.ln());
            let _ = writeln!(r_n, "{:?} {:?}", rec.integrals.r, rec.n);
        }
        put(format!("plot_logr_logH_{}.dat", lp.label), &log_h)?;
        put(format!("plot_r_N_{}.dat", lp.label), &r_n)?;
    }
    for (label, f) in &results.fields {
        put(format!("field_{label}.txt"), &field_dump(f))?;
    }
    for (name, body) in &results.tables {
        put(name.clone(), body)?;
    }
    if matches!(mode, Mode::Run | Mode::Verify) {
        put("checks.json".into(), &checks_json(&results.checks))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
checks = ["h-prime"]
[case]
kind = "builtin"
name = "harmonic_k1"
[grid]
extent = 0.5625
resolutions = [64]
"#;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.checks, vec![CheckKind::HPrime]);
        assert_eq!(cfg.centers(), vec![vec![0.0]]);
        let typo = BASE.replace("extent", "extnt");
        assert!(matches!(ExperimentConfig::from_toml(&typo), Err(Error::Config(_))));
        let alias = BASE.replace("\"h-prime\"", "\"H-prime\"");
        assert!(ExperimentConfig::from_toml(&alias).is_ok());
    }

    #[test]
    fn validation_errors() {
        let none = BASE.replace("[\"h-prime\"]", "[]");
        assert!(ExperimentConfig::from_toml(&none).is_err());
        let desc = BASE.replace("[64]", "[128, 64]");
        assert!(ExperimentConfig::from_toml(&desc).is_err());
        let big = format!("{BASE}[radii]\nmax = 0.6\n");
        assert!(ExperimentConfig::from_toml(&big).is_err());
        let scaling = BASE.replace("[\"h-prime\"]", "[\"frequency-scaling\"]");
        assert!(ExperimentConfig::from_toml(&scaling).is_err());
    }

    #[test]
    fn relative_change_conventions() {
        assert_eq!(relative_change(0.0, 0.0), 0.0);
        assert!((relative_change(1.0, 0.9) - 0.1).abs() < 1e-15);
        assert_eq!(relative_change(f64::INFINITY, 1.0), f64::INFINITY);
        assert!((log_log_slope(&[(1.0, 2.0), (2.0, 4.0), (4.0, 8.0)]) - 1.0).abs() < 1e-12);
    }
}
