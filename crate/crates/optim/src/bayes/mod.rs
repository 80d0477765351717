//! Bayesian optimization with a Gaussian-process surrogate and expected
//! improvement.
//!
//! The loop proposes the maximizer of expected improvement, evaluates it,
//! refits the surrogate and re-solves the surrogate problem. It stops once two
//! successive surrogate optima agree in position and value, or when the
//! proposal budget runs out.

pub mod gp;

use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::bounds::{Bounds, VarKind};
use crate::error::{Error, EvalError, Result};
use crate::par;
pub use gp::{GpOptions, GpSurrogate, Posterior};

/// Expected improvement of the scaled posterior over `best`, with trade-off
/// `xi`. Exactly zero when the posterior variance is zero.
pub fn expected_improvement(post: Posterior, best: f64, xi: f64) -> f64 {
    let sigma = post.std_dev();
    if sigma <= 0.0 {
        return 0.0;
    }
    let n = Normal::standard();
    let gain = post.mean - best - xi;
    let z = gain / sigma;
    (gain * n.cdf(z) + sigma * n.pdf(z)).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcqParams {
    pub xi: f64,
    /// Grid points per dimension for the inner search.
    pub grid: usize,
    /// Extra uniformly random candidates.
    pub random: usize,
    pub seed: u64,
}

impl Default for AcqParams {
    fn default() -> Self {
        AcqParams {
            xi: 0.01,
            grid: 64,
            random: 256,
            seed: 0,
        }
    }
}

/// Maximizes `score` over the unit cube: full grid, random points, then a
/// compass polish of the five best candidates.
fn maximize_unit(
    d: usize,
    acq: &AcqParams,
    rng: &mut ChaCha8Rng,
    score: impl Fn(&DVector<f64>) -> f64,
) -> (DVector<f64>, f64) {
    let m = acq.grid.max(2);
    let total = m.pow(d as u32);
    let mut cands: Vec<(DVector<f64>, f64)> = Vec::with_capacity(total + acq.random);
    for idx in 0..total {
        let mut r = idx;
        let x = DVector::from_fn(d, |_, _| {
            let i = r % m;
            r /= m;
            i as f64 / (m - 1) as f64
        });
        let s = score(&x);
        cands.push((x, s));
    }
    for _ in 0..acq.random {
        let x = DVector::from_fn(d, |_, _| rng.gen::<f64>());
        let s = score(&x);
        cands.push((x, s));
    }
    // stable sort keeps grid order among ties
    cands.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut best = cands[0].clone();
    for (x0, s0) in cands.iter().take(5) {
        let (mut x, mut s) = (x0.clone(), *s0);
        let mut step = 0.5 / (m - 1) as f64;
        while step > 1e-6 {
            let mut moved = false;
            for j in 0..d {
                for dir in [-1.0, 1.0] {
                    let mut t = x.clone();
                    t[j] = (t[j] + dir * step).clamp(0.0, 1.0);
                    let st = score(&t);
                    if st > s {
                        x = t;
                        s = st;
                        moved = true;
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if s > best.1 {
            best = (x, s);
        }
    }
    best
}

/// Rounds integer coordinates and moves a proposal that repeats a sample to
/// the nearest unsampled integer value.
fn snap(y: &[f64], kinds: &[VarKind], bounds: &Bounds, taken: &[Vec<f64>]) -> Vec<f64> {
    let y: Vec<f64> = y
        .iter()
        .zip(kinds)
        .enumerate()
        .map(|(j, (&v, k))| match k {
            VarKind::Integer => v.round().clamp(bounds.lo[j], bounds.hi[j]),
            VarKind::Continuous => v,
        })
        .collect();
    if !taken.contains(&y) {
        return y;
    }
    let ints: Vec<usize> = (0..y.len()).filter(|&j| kinds[j] == VarKind::Integer).collect();
    let span = ints.iter().map(|&j| bounds.width(j) as i64).max().unwrap_or(0);
    for off in 1..=span {
        for &j in &ints {
            for s in [-1.0, 1.0] {
                let v = y[j] + s * off as f64;
                if v < bounds.lo[j] || v > bounds.hi[j] {
                    continue;
                }
                let mut t = y.clone();
                t[j] = v;
                if !taken.contains(&t) {
                    return t;
                }
            }
        }
    }
    y
}

/// Point proposed by maximizing expected improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub y: Vec<f64>,
    /// Expected improvement at `y` after rounding.
    pub ei: f64,
    /// Set when every candidate had zero improvement and the posterior mean
    /// was maximized instead.
    pub fallback: bool,
}

pub fn propose_next(gp: &GpSurrogate, kinds: &[VarKind], acq: &AcqParams) -> Proposal {
    let bounds = gp.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(acq.seed);
    let best = gp.best_target();
    let ei = |x: &DVector<f64>| expected_improvement(gp.posterior_unit(x), best, acq.xi);
    let (x, s) = maximize_unit(bounds.dim(), acq, &mut rng, ei);
    let (x, fallback) = if s > 0.0 {
        (x, false)
    } else {
        let (x, _) = maximize_unit(bounds.dim(), acq, &mut rng, |x| gp.posterior_unit(x).mean);
        (x, true)
    };
    let y = snap(&bounds.from_unit(x.as_slice()), kinds, bounds, gp.points());
    let ei = expected_improvement(gp.posterior(&y), best, acq.xi);
    Proposal { y, ei, fallback }
}

/// Minimizer of the surrogate mean, with integer coordinates rounded.
pub fn surrogate_optimum(gp: &GpSurrogate, kinds: &[VarKind], acq: &AcqParams) -> (Vec<f64>, f64) {
    let bounds = gp.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(acq.seed ^ 0x5eed);
    let (x, _) = maximize_unit(bounds.dim(), acq, &mut rng, |x| gp.posterior_unit(x).mean);
    let y = snap(&bounds.from_unit(x.as_slice()), kinds, bounds, &[]);
    let f = gp.to_objective(gp.posterior(&y).mean);
    (y, f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoParams {
    pub kinds: Vec<VarKind>,
    pub acq: AcqParams,
    pub gp: GpOptions,
    pub max_proposals: usize,
    /// Position tolerance as a fraction of each box width.
    pub tol_y: f64,
    /// Value tolerance in scaled objective units.
    pub tol_f: f64,
    /// Worker threads for the initial design.
    pub jobs: usize,
}

impl BoParams {
    pub fn new(kinds: Vec<VarKind>) -> Self {
        BoParams {
            kinds,
            acq: AcqParams::default(),
            gp: GpOptions::default(),
            max_proposals: 20,
            tol_y: 1e-3,
            tol_f: 1e-3,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoRecord {
    pub iteration: usize,
    pub proposal: Vec<f64>,
    pub f: f64,
    /// Length scale of the surrogate that made the proposal.
    pub theta: f64,
    pub ei: f64,
    pub surrogate_optimum: Vec<f64>,
    pub surrogate_value: f64,
}

#[derive(Debug, Clone)]
pub struct BoOutcome {
    /// Best evaluated point.
    pub y: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    pub samples: Vec<(Vec<f64>, f64)>,
    pub history: Vec<BoRecord>,
    pub surrogate: GpSurrogate,
}

/// Runs the optimization loop from an initial design.
pub fn optimize<F>(obj: F, bounds: &Bounds, initial: &[Vec<f64>], params: &BoParams) -> Result<BoOutcome>
where
    F: Fn(&[f64]) -> std::result::Result<f64, EvalError> + Sync,
{
    if params.kinds.len() != bounds.dim() {
        return Err(Error::Invalid(format!("kinds need {} entries", bounds.dim())));
    }
    if initial.is_empty() {
        return Err(Error::Invalid("empty initial design".into()));
    }
    for y in initial {
        bounds.check_point(y, "initial sample")?;
    }
    let values = par::map(initial, params.jobs, |y| obj(y));
    let mut samples = Vec::with_capacity(initial.len() + params.max_proposals);
    for (y, r) in initial.iter().zip(values) {
        let f = r.map_err(|source| Error::Evaluation {
            point: y.clone(),
            source,
        })?;
        samples.push((y.clone(), f));
    }
    let mut gp = GpSurrogate::fit(bounds, &samples, &params.gp)?;
    let mut opt = surrogate_optimum(&gp, &params.kinds, &params.acq);
    let mut history = Vec::new();
    let mut converged = false;
    for k in 1..=params.max_proposals {
        let acq = AcqParams {
            seed: params.acq.seed.wrapping_add(k as u64),
            ..params.acq.clone()
        };
        let prop = propose_next(&gp, &params.kinds, &acq);
        let theta = gp.theta();
        let f = obj(&prop.y).map_err(|source| Error::Evaluation {
            point: prop.y.clone(),
            source,
        })?;
        samples.push((prop.y.clone(), f));
        gp = GpSurrogate::fit(bounds, &samples, &params.gp)?;
        let next = surrogate_optimum(&gp, &params.kinds, &params.acq);
        log::debug!("bo k={k} proposal={:?} f={f:.6e} ei={:.3e} optimum={:?}", prop.y, prop.ei, next.0);
        history.push(BoRecord {
            iteration: k,
            proposal: prop.y,
            f,
            theta,
            ei: prop.ei,
            surrogate_optimum: next.0.clone(),
            surrogate_value: next.1,
        });
        let dy = (0..bounds.dim())
            .map(|j| (next.0[j] - opt.0[j]).abs() / bounds.width(j))
            .fold(0.0, f64::max);
        let df = (gp.to_target(next.1) - gp.to_target(opt.1)).abs();
        opt = next;
        if dy < params.tol_y && df < params.tol_f {
            converged = true;
            break;
        }
    }
    let (y, f) = samples
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .expect("nonempty samples");
    Ok(BoOutcome {
        y,
        f,
        converged,
        samples,
        history,
        surrogate: gp,
    })
}

/// Writes the history as CSV: `iteration, y_0.., f, theta, ei`.
pub fn write_history<W: Write>(history: &[BoRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let dim = history.first().map_or(0, |r| r.proposal.len());
    let mut header = vec!["iteration".to_string()];
    header.extend((0..dim).map(|j| format!("y{j}")));
    header.extend(["f", "theta", "ei"].map(String::from));
    wr.write_record(&header)?;
    for r in history {
        let mut row = vec![r.iteration.to_string()];
        row.extend(r.proposal.iter().map(|v| v.to_string()));
        row.extend([r.f, r.theta, r.ei].map(|v| v.to_string()));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Posterior mean and standard deviation, in objective units, on an `n x n`
/// grid over a two-variable box: rows of `(x1, x2, mu, sigma)`.
pub fn surrogate_grid(gp: &GpSurrogate, n: usize) -> Result<Vec<[f64; 4]>> {
    let b = gp.bounds();
    if b.dim() != 2 || n < 2 {
        return Err(Error::Invalid("grid dump needs two variables and n >= 2".into()));
    }
    let scale = (gp.to_objective(0.0) - gp.to_objective(1.0)).abs();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let y = b.from_unit(&[i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64]);
            let p = gp.posterior(&y);
            rows.push([y[0], y[1], gp.to_objective(p.mean), scale * p.std_dev()]);
        }
    }
    Ok(rows)
}

pub fn write_grid<W: Write>(rows: &[[f64; 4]], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["x1", "x2", "mu", "sigma"])?;
    for r in rows {
        wr.write_record(r.map(|v| v.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}
