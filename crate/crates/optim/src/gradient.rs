//! Projected gradient descent with Armijo backtracking.
//!
//! Each iteration steps along the normalized direction `p = -g/|g|`, clamps
//! the trial point onto the box and accepts it when
//! `f(y+) <= f(y) + eta * g.(y+ - y)`. The sufficient-decrease test uses the
//! projected step, so a step that clamps back onto the current point is
//! accepted with zero length and ends the run.

use std::io::Write;

use crate::bounds::Bounds;
use crate::error::{Error, EvalError, Result};

/// Objective returning its value and gradient.
pub trait Objective {
    fn eval(&mut self, y: &[f64]) -> std::result::Result<(f64, Vec<f64>), EvalError>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64]) -> std::result::Result<(f64, Vec<f64>), EvalError>,
{
    fn eval(&mut self, y: &[f64]) -> std::result::Result<(f64, Vec<f64>), EvalError> {
        self(y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdParams {
    pub alpha0: f64,
    /// Backtracking factor in (0, 1).
    pub rho: f64,
    /// Sufficient-decrease constant in (0, 1).
    pub eta: f64,
    pub max_iterations: usize,
    pub max_backtracks: usize,
    /// Stop once a step is shorter than `step_tol * (hi - lo)` in every component.
    pub step_tol: f64,
}

impl Default for GdParams {
    fn default() -> Self {
        GdParams {
            alpha0: 1.0,
            rho: 0.5,
            eta: 0.1,
            max_iterations: 100,
            max_backtracks: 30,
            step_tol: 1e-4,
        }
    }
}

impl GdParams {
    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !(self.alpha0 > 0.0) || !open(self.rho) || !open(self.eta) || !(self.step_tol > 0.0) {
            return Err(Error::Invalid(format!(
                "need alpha0 > 0, rho and eta in (0,1), step_tol > 0; got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GdStatus {
    /// The last step fell below the step tolerance.
    Converged,
    ZeroGradient,
    MaxIterations,
    /// The line search ran out of backtracks.
    Stalled,
    /// The objective failed after the start point; the message is kept.
    Aborted(String),
}

/// One accepted iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct GdRecord {
    pub k: usize,
    pub y: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    /// Step length that produced this iterate, 0 at the start point.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdOutcome {
    pub y: Vec<f64>,
    pub f: f64,
    pub gradient: Vec<f64>,
    pub status: GdStatus,
    pub log: Vec<GdRecord>,
    pub evaluations: usize,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimizes `obj` over `bounds` starting from the feasible point `y0`.
pub fn minimize(
    mut obj: impl Objective,
    bounds: &Bounds,
    params: &GdParams,
    y0: &[f64],
) -> Result<GdOutcome> {
    params.validate()?;
    bounds.check_point(y0, "start point")?;
    let (mut f, mut g) = obj.eval(y0).map_err(|source| Error::Evaluation {
        point: y0.to_vec(),
        source,
    })?;
    check_gradient(&g, bounds.dim())?;
    let mut y = y0.to_vec();
    let mut out = GdOutcome {
        y: y.clone(),
        f,
        gradient: g.clone(),
        status: GdStatus::MaxIterations,
        log: vec![GdRecord {
            k: 0,
            y: y.clone(),
            f,
            grad_norm: norm2(&g),
            alpha: 0.0,
        }],
        evaluations: 1,
    };

    'outer: for k in 1..=params.max_iterations {
        let gn = norm2(&g);
        if gn == 0.0 || !gn.is_finite() {
            out.status = GdStatus::ZeroGradient;
            break;
        }
        let p: Vec<f64> = g.iter().map(|v| -v / gn).collect();
        let mut alpha = params.alpha0;
        let mut backtracks = 0;
        loop {
            let trial: Vec<f64> = y.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
            let trial = bounds.clamp(&trial);
            let step: Vec<f64> = trial.iter().zip(&y).map(|(a, b)| a - b).collect();
            let small = step
                .iter()
                .enumerate()
                .all(|(j, s)| s.abs() < params.step_tol * bounds.width(j));
            if small {
                // nothing to gain from evaluating a point this close
                out.status = GdStatus::Converged;
                break 'outer;
            }
            let (ft, gt) = match obj.eval(&trial) {
                Ok(v) => v,
                Err(e) => {
                    out.status = GdStatus::Aborted(e.to_string());
                    break 'outer;
                }
            };
            out.evaluations += 1;
            check_gradient(&gt, bounds.dim())?;
            let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
            if ft <= f + params.eta * slope {
                log::debug!("gd k={k} alpha={alpha} f={ft:.6e}");
                y = trial;
                f = ft;
                g = gt;
                out.log.push(GdRecord {
                    k,
                    y: y.clone(),
                    f,
                    grad_norm: norm2(&g),
                    alpha,
                });
                break;
            }
            backtracks += 1;
            if backtracks > params.max_backtracks {
                out.status = GdStatus::Stalled;
                break 'outer;
            }
            alpha *= params.rho;
        }
    }
    out.y = y;
    out.f = f;
    out.gradient = g;
    Ok(out)
}

fn check_gradient(g: &[f64], dim: usize) -> Result<()> {
    if g.len() != dim {
        return Err(Error::Invalid(format!("gradient has {} entries, expected {dim}", g.len())));
    }
    Ok(())
}

/// Writes the iteration log as CSV: `k, y_0.., f, grad_norm, alpha`.
pub fn write_log<W: Write>(log: &[GdRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let dim = log.first().map_or(0, |r| r.y.len());
    let mut header = vec!["k".to_string()];
    header.extend((0..dim).map(|j| format!("y{j}")));
    header.extend(["f", "grad_norm", "alpha"].map(String::from));
    wr.write_record(&header)?;
    for r in log {
        let mut row = vec![r.k.to_string()];
        row.extend(r.y.iter().map(|v| v.to_string()));
        row.extend([r.f, r.grad_norm, r.alpha].map(|v| v.to_string()));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}
