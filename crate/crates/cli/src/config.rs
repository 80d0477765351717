//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use amopt_core::deposition::{BuildPlan, Geometry};
use amopt_core::fem::SimOptions;
use amopt_core::material::MaterialParams;
use amopt_core::units;
use amopt_optim::VarKind;
use anyhow::{bail, ensure, Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub material: MaterialConfig,
    pub build: BuildConfig,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Material overrides in SI units.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    /// Convection coefficient, W/(m^2 K).
    pub h: Option<f64>,
    /// Conductivity, W/(m K).
    pub conductivity: Option<f64>,
    /// Density, kg/m^3.
    pub density: Option<f64>,
    /// Specific heat, J/(kg K).
    pub specific_heat: Option<f64>,
    /// Young's modulus at `theta_0m`, MPa.
    pub youngs_modulus: Option<f64>,
    pub poisson_ratio: Option<f64>,
    /// Thermal expansion, 1/K.
    pub expansion: Option<f64>,
    pub softening_a: Option<f64>,
    pub softening_b: Option<f64>,
    pub theta_0m: Option<f64>,
    pub theta_ambient: Option<f64>,
    pub theta_deposit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    /// Wall width in mm.
    pub width: f64,
    /// Wall height in mm.
    pub height: f64,
    pub nx: usize,
    pub layers: usize,
    #[serde(default = "one")]
    pub rows_per_layer: usize,
    /// Time to print one element, s.
    pub dt_element: f64,
    #[serde(default = "half")]
    pub dwell_factor: f64,
    /// Cooling time after the last layer, s.
    #[serde(default = "cooldown")]
    pub cooldown: f64,
    /// Quarter-circle hole at the top-right corner, mm.
    pub hole_radius: Option<f64>,
}

fn one() -> usize {
    1
}
fn half() -> f64 {
    0.5
}
fn cooldown() -> f64 {
    240.0
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            width: 20.0,
            height: 10.0,
            nx: 40,
            layers: 30,
            rows_per_layer: 1,
            dt_element: 0.006,
            dwell_factor: 0.5,
            cooldown: 240.0,
            hole_radius: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    /// Top edge for a plain wall, step edge when there is a hole.
    #[default]
    Auto,
    TopEdge,
    StepEdge,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    #[serde(default)]
    pub surface: SurfaceKind,
    /// Characteristic length in mm; wall height or hole radius by default.
    pub characteristic_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "tol")]
    pub tol: f64,
    #[serde(default = "max_iterations")]
    pub max_iterations: usize,
    /// Reuse the factored tangent between iterations and steps.
    #[serde(default = "yes")]
    pub reuse_factorization: bool,
}

fn tol() -> f64 {
    1e-8
}
fn max_iterations() -> usize {
    25
}
fn yes() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: tol(),
            max_iterations: max_iterations(),
            reuse_factorization: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Gd,
    Lv,
    Bo,
}

/// Process parameter exposed to an optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    /// Convection coefficient in W/(m^2 K).
    H,
    DtElement,
    Layers,
}

impl Variable {
    pub fn kind(self) -> VarKind {
        match self {
            Variable::Layers => VarKind::Integer,
            _ => VarKind::Continuous,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::H => "h",
            Variable::DtElement => "dt_element",
            Variable::Layers => "layers",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub variables: Vec<Variable>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Start point for gradient descent and local variations.
    pub start: Option<Vec<f64>>,
    // gradient descent
    #[serde(default = "alpha0")]
    pub alpha0: f64,
    #[serde(default = "half")]
    pub rho: f64,
    #[serde(default = "eta")]
    pub eta: f64,
    #[serde(default = "hundred")]
    pub max_iterations: usize,
    // local variations
    pub tau0: Option<Vec<f64>>,
    pub tau_min: Option<Vec<f64>>,
    // bayesian optimization; corners of the box by default
    pub initial: Option<Vec<Vec<f64>>>,
    #[serde(default = "xi")]
    pub xi: f64,
    #[serde(default = "budget")]
    pub max_proposals: usize,
    #[serde(default = "grid")]
    pub grid: usize,
}

fn alpha0() -> f64 {
    1.0
}
fn eta() -> f64 {
    0.1
}
fn hundred() -> usize {
    100
}
fn xi() -> f64 {
    0.01
}
fn budget() -> usize {
    10
}
fn grid() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Convection coefficients to check, W/(m^2 K).
    #[serde(default = "h_values")]
    pub h_values: Vec<f64>,
    /// Central-difference step relative to `h`.
    #[serde(default = "rel_step")]
    pub rel_step: f64,
    #[serde(default = "rel_step")]
    pub tolerance: f64,
}

fn h_values() -> Vec<f64> {
    vec![32.0, 40.0, 50.0]
}
fn rel_step() -> f64 {
    1e-3
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            h_values: h_values(),
            rel_step: rel_step(),
            tolerance: rel_step(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "out_dir")]
    pub dir: PathBuf,
    /// Write nodal fields every this many steps.
    pub snapshot_interval: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: out_dir(),
            snapshot_interval: None,
            seed: 0,
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let plan = self.plan();
        plan.validate().context("build")?;
        self.material().validate().context("material")?;
        match (self.objective.surface, self.build.hole_radius) {
            (SurfaceKind::TopEdge, Some(_)) => bail!("objective.surface: top-edge needs a wall without a hole"),
            (SurfaceKind::StepEdge, None) => bail!("objective.surface: step-edge needs build.hole_radius"),
            _ => {}
        }
        if let Some(l) = self.objective.characteristic_length {
            ensure!(l > 0.0, "objective.characteristic_length must be positive, got {l}");
        }
        ensure!(self.solver.tol > 0.0, "solver.tol must be positive");
        ensure!(self.verify.rel_step > 0.0, "verify.rel_step must be positive");
        ensure!(
            self.verify.h_values.iter().all(|h| *h > 0.0),
            "verify.h_values must be positive"
        );
        if let Some(opt) = &self.optimizer {
            opt.validate()?;
        }
        Ok(())
    }

    pub fn material(&self) -> MaterialParams {
        let m = &self.material;
        let mut p = MaterialParams::default();
        if let Some(v) = m.h {
            p.h_conv = units::convection_from_si(v);
        }
        if let Some(v) = m.conductivity {
            p.k_cond = units::conductivity_from_si(v);
        }
        let rho = m.density.unwrap_or(1050.0);
        if m.density.is_some() {
            p.rho_0 = units::density_from_si(rho);
        }
        if m.density.is_some() || m.specific_heat.is_some() {
            p.c_bar = units::heat_capacity_from_si(rho * m.specific_heat.unwrap_or(2000.0));
        }
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut p.e_0m, m.youngs_modulus);
        set(&mut p.nu, m.poisson_ratio);
        set(&mut p.alpha, m.expansion);
        set(&mut p.a, m.softening_a);
        set(&mut p.b, m.softening_b);
        set(&mut p.theta_0m, m.theta_0m);
        set(&mut p.theta_inf, m.theta_ambient);
        set(&mut p.theta_deposit, m.theta_deposit);
        p
    }

    pub fn plan(&self) -> BuildPlan {
        let b = &self.build;
        let mut plan = BuildPlan::wall(b.width, b.height, b.nx, b.layers, b.dt_element);
        plan.ny = b.layers * b.rows_per_layer;
        plan.dwell_factor = b.dwell_factor;
        plan.cooldown = b.cooldown;
        if let Some(radius) = b.hole_radius {
            plan.geometry = Geometry::QuarterHole { radius };
        }
        plan
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            tol: self.solver.tol,
            max_iterations: self.solver.max_iterations,
            reuse_factorization: self.solver.reuse_factorization,
            ..SimOptions::default()
        }
    }

    /// Plan and material with the design variables set to `y`.
    pub fn apply(&self, vars: &[Variable], y: &[f64]) -> (BuildPlan, MaterialParams) {
        let mut plan = self.plan();
        let mut params = self.material();
        for (v, &val) in vars.iter().zip(y) {
            match v {
                Variable::H => params.h_conv = units::convection_from_si(val),
                Variable::DtElement => plan.dt_element = val,
                Variable::Layers => {
                    plan.n_layers = val.round() as usize;
                    plan.ny = plan.n_layers * self.build.rows_per_layer;
                }
            }
        }
        (plan, params)
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        let d = self.variables.len();
        ensure!(d > 0, "optimizer.variables is empty");
        ensure!(
            self.lower.len() == d && self.upper.len() == d,
            "optimizer.lower and optimizer.upper need {d} entries"
        );
        for (j, v) in self.variables.iter().enumerate() {
            if self.variables[..j].contains(v) {
                bail!("optimizer.variables lists `{}` twice", v.name());
            }
            let (lo, hi) = (self.lower[j], self.upper[j]);
            ensure!(lo < hi, "optimizer bounds for `{}`: lower {lo} must be below upper {hi}", v.name());
            ensure!(lo > 0.0, "optimizer.lower for `{}` must be positive", v.name());
            if v.kind() == VarKind::Integer {
                ensure!(
                    lo.fract() == 0.0 && hi.fract() == 0.0,
                    "optimizer bounds for integer variable `{}` must be integers",
                    v.name()
                );
            }
        }
        let points = |name: &str, ps: &[Vec<f64>]| -> Result<()> {
            for p in ps {
                ensure!(p.len() == d, "optimizer.{name} needs {d} entries per point");
                for (j, v) in self.variables.iter().enumerate() {
                    ensure!(
                        p[j] >= self.lower[j] && p[j] <= self.upper[j],
                        "optimizer.{name}: `{}` = {} lies outside [{}, {}]",
                        v.name(),
                        p[j],
                        self.lower[j],
                        self.upper[j]
                    );
                    if v.kind() == VarKind::Integer {
                        ensure!(p[j].fract() == 0.0, "optimizer.{name}: `{}` must be an integer", v.name());
                    }
                }
            }
            Ok(())
        };
        if let Some(s) = &self.start {
            points("start", std::slice::from_ref(s))?;
        }
        if let Some(init) = &self.initial {
            ensure!(!init.is_empty(), "optimizer.initial is empty");
            points("initial", init)?;
        }
        match self.algorithm {
            Algorithm::Gd => {
                ensure!(
                    self.variables == [Variable::H],
                    "gradient descent supports only variables = [\"h\"]"
                );
                ensure!(self.start.is_some(), "optimizer.start is required for gd");
            }
            Algorithm::Lv => {
                ensure!(self.start.is_some(), "optimizer.start is required for lv");
                let (t0, tm) = match (&self.tau0, &self.tau_min) {
                    (Some(a), Some(b)) => (a, b),
                    _ => bail!("optimizer.tau0 and optimizer.tau_min are required for lv"),
                };
                ensure!(t0.len() == d && tm.len() == d, "optimizer.tau0 and tau_min need {d} entries");
            }
            Algorithm::Bo => {
                ensure!(self.max_proposals > 0, "optimizer.max_proposals must be positive");
                ensure!(self.grid >= 2, "optimizer.grid must be at least 2");
            }
        }
        Ok(())
    }

    pub fn kinds(&self) -> Vec<VarKind> {
        self.variables.iter().map(|v| v.kind()).collect()
    }

    /// All `2^d` corners of the box, the first variable varying fastest.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.variables.len();
        (0..1usize << d)
            .map(|m| {
                (0..d)
                    .map(|j| if m >> j & 1 == 1 { self.upper[j] } else { self.lower[j] })
                    .collect()
            })
            .collect()
    }
}
