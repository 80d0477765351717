//! The three verbs: simulate, verify-gradient and optimize.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use amopt_core::evaluate::{evaluate_with_length, Evaluation};
use amopt_core::fem::Simulation;
use amopt_core::objective::{shape_error, ErrorSurface};
use amopt_optim::bayes::{self, BoParams};
use amopt_optim::gradient::{self, GdParams, GdStatus};
use amopt_optim::localvar::{self, LvParams};
use amopt_optim::{Bounds, EvalError};
use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Algorithm, OptimizerConfig, RunConfig, Variable};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0:#}")]
    Config(anyhow::Error),
    #[error("solver failure: {0:#}")]
    Solver(anyhow::Error),
    #[error("gradient verification failed: {0}")]
    Verification(String),
    #[error("output error: {0:#}")]
    Output(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Output(_) => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn output<T>(r: anyhow::Result<T>) -> CliResult<T> {
    r.map_err(CliError::Output)
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    let path = dir.join(name);
    output(
        File::create(&path)
            .map(BufWriter::new)
            .with_context(|| format!("creating {}", path.display())),
    )
}

fn write_toml<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<String> {
    let text = output(toml::to_string(value).context("serializing summary"))?;
    let path = dir.join(name);
    output(fs::write(&path, &text).with_context(|| format!("writing {}", path.display())))?;
    Ok(text)
}

/// Values reported by `simulate`, on standard output and in `summary.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub f: f64,
    pub elements: usize,
    pub nodes: usize,
    pub steps: usize,
    pub end_time: f64,
    pub newton_iterations: usize,
    pub max_iterations_per_step: usize,
    /// MPa.
    pub max_birth_stress: f64,
    /// K.
    pub max_final_temperature_deviation: f64,
    pub factorizations: usize,
    pub snapshots: usize,
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> CliResult<SimulationSummary> {
    output(fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())))?;
    let mut options = cfg.sim_options();
    options.check_birth_stress = true;
    options.snapshot_interval = cfg.output.snapshot_interval;
    let plan = cfg.plan();
    let mut sim = Simulation::new(&plan, &cfg.material(), options).map_err(|e| CliError::Config(e.into()))?;
    let mut surf = ErrorSurface::for_plan(&plan, &sim.mesh).map_err(|e| CliError::Config(e.into()))?;
    if let Some(l) = cfg.objective.characteristic_length {
        surf = ErrorSurface::new(surf.segments, surf.deviation, l).map_err(|e| CliError::Config(e.into()))?;
    }
    sim.run().map_err(|e| CliError::Solver(e.into()))?;
    let f = shape_error(&sim.mesh, &sim.state.u, &surf);

    if !sim.snapshots.is_empty() {
        let dir = out.join("snapshots");
        output(fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display())))?;
        for s in &sim.snapshots {
            let w = create(&dir, &format!("step_{:06}.txt", s.step))?;
            output(s.write_table(w).context("writing snapshot"))?;
        }
    }
    let s = &sim.summary;
    let summary = SimulationSummary {
        f,
        elements: sim.mesh.n_elements(),
        nodes: sim.mesh.n_nodes(),
        steps: s.steps,
        end_time: s.end_time,
        newton_iterations: s.newton_iterations,
        max_iterations_per_step: s.max_iterations_per_step,
        max_birth_stress: s.max_birth_stress,
        max_final_temperature_deviation: s.max_final_temperature_deviation,
        factorizations: s.factorizations + s.partial_factorizations,
        snapshots: sim.snapshots.len(),
    };
    let text = write_toml(out, "summary.toml", &summary)?;
    print!("{text}");
    Ok(summary)
}

/// One row of the gradient check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientRow {
    pub h: f64,
    pub f: f64,
    pub analytic: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
}

fn run(cfg: &RunConfig, vars: &[Variable], y: &[f64], gradient: bool) -> anyhow::Result<Evaluation> {
    let (plan, params) = cfg.apply(vars, y);
    evaluate_with_length(
        &plan,
        &params,
        cfg.sim_options(),
        gradient,
        cfg.objective.characteristic_length,
    )
    .map_err(|e| anyhow!("at {y:?}: {e}"))
}

pub fn verify_gradient(cfg: &RunConfig, out: &Path) -> CliResult<Vec<GradientRow>> {
    output(fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())))?;
    let vars = [Variable::H];
    let mut rows = Vec::new();
    println!("{:>10} {:>14} {:>14} {:>14} {:>10}", "h", "f", "analytic", "fd", "rel_err");
    for &h in &cfg.verify.h_values {
        let e = run(cfg, &vars, &[h], true).map_err(CliError::Solver)?;
        let analytic = e.df_dh.ok_or_else(|| CliError::Solver(anyhow!("no sensitivity computed")))?;
        let d = cfg.verify.rel_step * h;
        let fp = run(cfg, &vars, &[h + d], false).map_err(CliError::Solver)?.f;
        let fm = run(cfg, &vars, &[h - d], false).map_err(CliError::Solver)?.f;
        let fd = (fp - fm) / (2.0 * d);
        let rel_error = (analytic - fd).abs() / fd.abs().max(f64::MIN_POSITIVE);
        println!("{h:>10.4} {:>14.6e} {analytic:>14.6e} {fd:>14.6e} {rel_error:>10.2e}", e.f);
        rows.push(GradientRow {
            h,
            f: e.f,
            analytic,
            finite_difference: fd,
            rel_error,
        });
    }
    let mut w = output(csv_writer(out, "gradient_check.csv"))?;
    for r in &rows {
        output(w.serialize(r).context("writing gradient_check.csv"))?;
    }
    output(w.flush().context("writing gradient_check.csv"))?;
    let worst = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    if worst > cfg.verify.tolerance {
        return Err(CliError::Verification(format!(
            "largest relative error {worst:.3e} exceeds {:.1e}",
            cfg.verify.tolerance
        )));
    }
    Ok(rows)
}

fn csv_writer(dir: &Path, name: &str) -> anyhow::Result<csv::Writer<File>> {
    let path = dir.join(name);
    csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))
}

/// Final report of `optimize`, also written to `result.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub algorithm: String,
    pub variables: Vec<String>,
    pub y: Vec<f64>,
    pub f: f64,
    pub status: String,
    pub evaluations: usize,
    pub history: PathBuf,
}

pub fn optimize(cfg: &RunConfig, out: &Path, jobs: usize) -> CliResult<OptimizationResult> {
    let opt = cfg
        .optimizer
        .as_ref()
        .ok_or_else(|| CliError::Config(anyhow!("optimize needs an [optimizer] block")))?;
    output(fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())))?;
    let bounds = Bounds::new(opt.lower.clone(), opt.upper.clone()).map_err(|e| CliError::Config(e.into()))?;
    let result = match opt.algorithm {
        Algorithm::Gd => run_gd(cfg, opt, &bounds, out)?,
        Algorithm::Lv => run_lv(cfg, opt, &bounds, out, jobs)?,
        Algorithm::Bo => run_bo(cfg, opt, &bounds, out, jobs)?,
    };
    let text = write_toml(out, "result.toml", &result)?;
    print!("{text}");
    Ok(result)
}

fn solver_error(e: amopt_optim::Error) -> CliError {
    match e {
        amopt_optim::Error::Invalid(_) => CliError::Config(e.into()),
        amopt_optim::Error::Io(_) | amopt_optim::Error::Csv(_) => CliError::Output(e.into()),
        _ => CliError::Solver(e.into()),
    }
}

fn names(opt: &OptimizerConfig) -> Vec<String> {
    opt.variables.iter().map(|v| v.name().to_string()).collect()
}

fn run_gd(cfg: &RunConfig, opt: &OptimizerConfig, bounds: &Bounds, out: &Path) -> CliResult<OptimizationResult> {
    let params = GdParams {
        alpha0: opt.alpha0,
        rho: opt.rho,
        eta: opt.eta,
        max_iterations: opt.max_iterations,
        ..GdParams::default()
    };
    let obj = |y: &[f64]| -> Result<(f64, Vec<f64>), EvalError> {
        let e = run(cfg, &opt.variables, y, true)?;
        log::info!("gd h={:.4} f={:.6e} df/dh={:.4e}", y[0], e.f, e.df_dh.unwrap_or(f64::NAN));
        Ok((e.f, vec![e.df_dh.unwrap_or(0.0)]))
    };
    let start = opt.start.clone().expect("validated");
    let res = gradient::minimize(obj, bounds, &params, &start).map_err(solver_error)?;
    gradient::write_log(&res.log, create(out, "gd_log.csv")?).map_err(solver_error)?;
    if let GdStatus::Aborted(msg) = &res.status {
        return Err(CliError::Solver(anyhow!("{msg}")));
    }
    Ok(OptimizationResult {
        algorithm: "gd".into(),
        variables: names(opt),
        y: res.y,
        f: res.f,
        status: format!("{:?}", res.status).to_lowercase(),
        evaluations: res.evaluations,
        history: "gd_log.csv".into(),
    })
}

fn scalar_objective<'a>(
    cfg: &'a RunConfig,
    opt: &'a OptimizerConfig,
) -> impl Fn(&[f64]) -> Result<f64, EvalError> + Sync + 'a {
    move |y: &[f64]| {
        let e = run(cfg, &opt.variables, y, false)?;
        log::info!("{y:?} -> f={:.6e}", e.f);
        Ok(e.f)
    }
}

fn run_lv(
    cfg: &RunConfig,
    opt: &OptimizerConfig,
    bounds: &Bounds,
    out: &Path,
    jobs: usize,
) -> CliResult<OptimizationResult> {
    let params = LvParams {
        kinds: opt.kinds(),
        tau0: opt.tau0.clone().expect("validated"),
        tau_min: opt.tau_min.clone().expect("validated"),
        max_iterations: opt.max_iterations,
        jobs,
    };
    let start = opt.start.clone().expect("validated");
    let res = localvar::minimize(scalar_objective(cfg, opt), bounds, &params, &start).map_err(solver_error)?;
    localvar::write_probes(&res.probes, create(out, "lv_probes.csv")?).map_err(solver_error)?;
    Ok(OptimizationResult {
        algorithm: "lv".into(),
        variables: names(opt),
        y: res.y,
        f: res.f,
        status: if res.iterations < params.max_iterations { "converged" } else { "maxiterations" }.into(),
        evaluations: res.evaluations,
        history: "lv_probes.csv".into(),
    })
}

fn run_bo(
    cfg: &RunConfig,
    opt: &OptimizerConfig,
    bounds: &Bounds,
    out: &Path,
    jobs: usize,
) -> CliResult<OptimizationResult> {
    let mut params = BoParams::new(opt.kinds());
    params.acq.xi = opt.xi;
    params.acq.grid = opt.grid;
    params.acq.seed = cfg.output.seed;
    params.max_proposals = opt.max_proposals;
    params.jobs = jobs;
    let initial = opt.initial.clone().unwrap_or_else(|| opt.corners());
    let res = bayes::optimize(scalar_objective(cfg, opt), bounds, &initial, &params).map_err(solver_error)?;
    bayes::write_history(&res.history, create(out, "bo_history.csv")?).map_err(solver_error)?;
    if bounds.dim() == 2 {
        let rows = bayes::surrogate_grid(&res.surrogate, 41).map_err(solver_error)?;
        bayes::write_grid(&rows, create(out, "bo_surrogate.csv")?).map_err(solver_error)?;
    }
    Ok(OptimizationResult {
        algorithm: "bo".into(),
        variables: names(opt),
        y: res.y,
        f: res.f,
        status: if res.converged { "converged" } else { "budget" }.into(),
        evaluations: res.samples.len(),
        history: "bo_history.csv".into(),
    })
}
