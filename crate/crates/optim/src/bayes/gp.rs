//! Gaussian-process regression with the squared-exponential kernel
//! `k(a, b) = exp(-|a - b|^2 / theta^2)`.
//!
//! Inputs are mapped into the unit cube and the targets are `-f`, shifted to
//! zero mean and unit variance, so the surrogate is maximized. The kernel has
//! no amplitude factor; the scaling of the targets takes its place.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::bounds::Bounds;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GpOptions {
    /// Added to the covariance diagonal.
    pub jitter: f64,
    /// Length-scale search range in unit-cube coordinates.
    pub theta_min: f64,
    pub theta_max: f64,
    /// Log-spaced grid points before the golden-section refinement.
    pub theta_grid: usize,
    /// Length scale used with fewer than two distinct samples.
    pub default_theta: f64,
}

impl Default for GpOptions {
    fn default() -> Self {
        GpOptions {
            jitter: 1e-10,
            theta_min: 1e-2,
            theta_max: 10.0,
            theta_grid: 30,
            default_theta: 0.5,
        }
    }
}

/// Posterior of the scaled, negated objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    /// Clamped at zero.
    pub variance: f64,
}

impl Posterior {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct GpSurrogate {
    bounds: Bounds,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    unit: Vec<DVector<f64>>,
    z: DVector<f64>,
    offset: f64,
    scale: f64,
    theta: f64,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

pub fn kernel(a: &DVector<f64>, b: &DVector<f64>, theta: f64) -> f64 {
    (-(a - b).norm_squared() / (theta * theta)).exp()
}

/// Drops earlier samples at a repeated point, keeping the latest value.
pub fn dedup_latest(samples: &[(Vec<f64>, f64)]) -> Vec<(Vec<f64>, f64)> {
    let mut out: Vec<(Vec<f64>, f64)> = Vec::with_capacity(samples.len());
    for (y, f) in samples {
        match out.iter_mut().find(|(p, _)| p == y) {
            Some(slot) => slot.1 = *f,
            None => out.push((y.clone(), *f)),
        }
    }
    out
}

struct Factored {
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    lml: f64,
}

fn factor(unit: &[DVector<f64>], z: &DVector<f64>, theta: f64, jitter: f64) -> Option<Factored> {
    let n = unit.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        kernel(&unit[i], &unit[j], theta) + if i == j { jitter } else { 0.0 }
    });
    let chol = Cholesky::new(k)?;
    let alpha = chol.solve(z);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    let lml = -0.5 * z.dot(&alpha) - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    lml.is_finite().then_some(Factored { chol, alpha, lml })
}

impl GpSurrogate {
    /// Fits the length scale by maximizing the log marginal likelihood.
    pub fn fit(bounds: &Bounds, samples: &[(Vec<f64>, f64)], opts: &GpOptions) -> Result<Self> {
        Self::build(bounds, samples, opts, None)
    }

    /// Fits with a fixed length scale.
    pub fn with_theta(
        bounds: &Bounds,
        samples: &[(Vec<f64>, f64)],
        theta: f64,
        opts: &GpOptions,
    ) -> Result<Self> {
        Self::build(bounds, samples, opts, Some(theta))
    }

    fn build(
        bounds: &Bounds,
        samples: &[(Vec<f64>, f64)],
        opts: &GpOptions,
        theta: Option<f64>,
    ) -> Result<Self> {
        let samples = dedup_latest(samples);
        if samples.is_empty() {
            return Err(Error::Surrogate("no samples".into()));
        }
        for (y, f) in &samples {
            if y.len() != bounds.dim() || !f.is_finite() {
                return Err(Error::Surrogate(format!("bad sample {y:?} -> {f}")));
            }
        }
        let n = samples.len();
        let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let z = DVector::from_iterator(n, values.iter().map(|v| -(v - mean) / scale));
        let unit: Vec<DVector<f64>> = samples
            .iter()
            .map(|s| DVector::from_vec(bounds.to_unit(&s.0)))
            .collect();

        let theta = match theta {
            Some(t) => t,
            None if n < 2 => opts.default_theta,
            None => search_theta(&unit, &z, opts),
        };
        if !(theta > 0.0) {
            return Err(Error::Surrogate(format!("length scale must be positive, got {theta}")));
        }
        let fac = factor(&unit, &z, theta, opts.jitter).ok_or_else(|| {
            Error::Surrogate(format!("covariance not positive definite at theta={theta}"))
        })?;
        Ok(GpSurrogate {
            bounds: bounds.clone(),
            points: samples.iter().map(|s| s.0.clone()).collect(),
            values,
            unit,
            z,
            offset: mean,
            scale,
            theta,
            jitter: opts.jitter,
            chol: fac.chol,
            alpha: fac.alpha,
        })
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// Distinct sample points in design units.
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Objective values at [`Self::points`].
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit_points(&self) -> &[DVector<f64>] {
        &self.unit
    }

    /// Scaled targets `-(f - mean) / std`.
    pub fn targets(&self) -> &DVector<f64> {
        &self.z
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        factor(&self.unit, &self.z, self.theta, self.jitter).map_or(f64::NEG_INFINITY, |f| f.lml)
    }

    /// Largest scaled target, the incumbent for expected improvement.
    pub fn best_target(&self) -> f64 {
        self.z.max()
    }

    /// Scaled target back to objective units.
    pub fn to_objective(&self, z: f64) -> f64 {
        self.offset - self.scale * z
    }

    pub fn to_target(&self, f: f64) -> f64 {
        -(f - self.offset) / self.scale
    }

    /// Posterior at a point in unit-cube coordinates.
    pub fn posterior_unit(&self, x: &DVector<f64>) -> Posterior {
        let k = DVector::from_iterator(self.unit.len(), self.unit.iter().map(|u| kernel(u, x, self.theta)));
        let mean = k.dot(&self.alpha);
        let v = self.chol.solve(&k);
        let variance = (1.0 - k.dot(&v)).max(0.0);
        Posterior { mean, variance }
    }

    /// Posterior at a point in design units.
    pub fn posterior(&self, y: &[f64]) -> Posterior {
        self.posterior_unit(&DVector::from_vec(self.bounds.to_unit(y)))
    }
}

fn search_theta(unit: &[DVector<f64>], z: &DVector<f64>, opts: &GpOptions) -> f64 {
    let lml = |lt: f64| factor(unit, z, lt.exp(), opts.jitter).map_or(f64::NEG_INFINITY, |f| f.lml);
    let (a, b) = (opts.theta_min.ln(), opts.theta_max.ln());
    let m = opts.theta_grid.max(2);
    let grid: Vec<f64> = (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&t| lml(t)).collect();
    let mut best = 0;
    for i in 1..m {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    if vals[best] == f64::NEG_INFINITY {
        return opts.default_theta;
    }
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(m - 1)]);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (lml(c), lml(d));
    for _ in 0..40 {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = lml(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = lml(d);
        }
    }
    let (t, v) = if fc >= fd { (c, fc) } else { (d, fd) };
    if v >= vals[best] {
        t.exp()
    } else {
        grid[best].exp()
    }
}
