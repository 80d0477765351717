//! Method of local variations.
//!
//! Around the current point every coordinate is probed at `y -/+ tau_j e_j`,
//! clamped onto the box. The best strictly improving probe becomes the new
//! point. When no probe improves, continuous steps are halved and integer
//! steps drop by one, but only where the step still exceeds its minimum. The
//! run ends once every step is at or below its minimum.

use std::collections::HashMap;
use std::io::Write;

use crate::bounds::{Bounds, VarKind};
use crate::error::{Error, EvalError, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct LvParams {
    pub kinds: Vec<VarKind>,
    pub tau0: Vec<f64>,
    pub tau_min: Vec<f64>,
    /// Cap on outer iterations.
    pub max_iterations: usize,
    /// Worker threads for the probes of one iteration.
    pub jobs: usize,
}

impl LvParams {
    pub fn validate(&self, bounds: &Bounds) -> Result<()> {
        let d = bounds.dim();
        if self.kinds.len() != d || self.tau0.len() != d || self.tau_min.len() != d {
            return Err(Error::Invalid(format!("kinds, tau0 and tau_min need {d} entries")));
        }
        for j in 0..d {
            let (t0, tm) = (self.tau0[j], self.tau_min[j]);
            if !(tm > 0.0 && t0 > tm) {
                return Err(Error::Invalid(format!(
                    "variable {j}: need tau0 > tau_min > 0, got {t0} and {tm}"
                )));
            }
            if self.kinds[j] == VarKind::Integer {
                let int = |v: f64| v.fract() == 0.0;
                if !int(t0) || !int(tm) || !int(bounds.lo[j]) || !int(bounds.hi[j]) {
                    return Err(Error::Invalid(format!(
                        "integer variable {j} needs integer steps and bounds"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One probe evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub iteration: usize,
    pub point: Vec<f64>,
    /// `None` when the objective failed at this point.
    pub f: Option<f64>,
    pub accepted: bool,
    /// Whether the value came from an earlier evaluation.
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LvOutcome {
    pub y: Vec<f64>,
    pub f: f64,
    pub tau: Vec<f64>,
    pub iterations: usize,
    /// Distinct objective calls, the start point included.
    pub evaluations: usize,
    pub probes: Vec<Probe>,
}

fn key(y: &[f64]) -> Vec<u64> {
    y.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// Minimizes `obj` from the feasible point `y0`.
///
/// Probes of one iteration run on up to `params.jobs` threads; the selection
/// only depends on probe order, never on completion order.
pub fn minimize<F>(obj: F, bounds: &Bounds, params: &LvParams, y0: &[f64]) -> Result<LvOutcome>
where
    F: Fn(&[f64]) -> std::result::Result<f64, EvalError> + Sync,
{
    params.validate(bounds)?;
    bounds.check_point(y0, "start point")?;
    for (j, k) in params.kinds.iter().enumerate() {
        if *k == VarKind::Integer && y0[j].fract() != 0.0 {
            return Err(Error::Invalid(format!("start value {} of integer variable {j}", y0[j])));
        }
    }
    let d = bounds.dim();
    let mut memo: HashMap<Vec<u64>, std::result::Result<f64, String>> = HashMap::new();
    let mut y = y0.to_vec();
    let mut f = obj(&y).map_err(|source| Error::Evaluation {
        point: y.clone(),
        source,
    })?;
    memo.insert(key(&y), Ok(f));
    let mut tau = params.tau0.clone();
    let mut probes = Vec::new();
    let mut iterations = 0;

    while iterations < params.max_iterations
        && (0..d).any(|j| tau[j] > params.tau_min[j])
    {
        iterations += 1;
        let mut points: Vec<Vec<f64>> = Vec::with_capacity(2 * d);
        for j in 0..d {
            for s in [-1.0, 1.0] {
                let mut z = y.clone();
                z[j] += s * tau[j];
                let z = bounds.clamp(&z);
                if z != y && !points.contains(&z) {
                    points.push(z);
                }
            }
        }
        let fresh: Vec<Vec<f64>> = points
            .iter()
            .filter(|p| !memo.contains_key(&key(p)))
            .cloned()
            .collect();
        let results = par::map(&fresh, params.jobs, |p| obj(p).map_err(|e| e.to_string()));
        let fresh_keys: Vec<Vec<u64>> = fresh.iter().map(|p| key(p)).collect();
        for (k, r) in fresh_keys.iter().zip(results) {
            memo.insert(k.clone(), r);
        }

        let first = probes.len();
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let k = key(p);
            let r = &memo[&k];
            if let Err(msg) = r {
                log::warn!("probe {p:?} failed: {msg}");
            }
            let v = r.as_ref().ok().copied();
            if let Some(v) = v {
                if v < f && best.map_or(true, |(_, b)| v < b) {
                    best = Some((i, v));
                }
            }
            probes.push(Probe {
                iteration: iterations,
                point: p.clone(),
                f: v,
                accepted: false,
                cached: !fresh_keys.contains(&k),
            });
        }
        match best {
            Some((i, v)) => {
                probes[first + i].accepted = true;
                y = points[i].clone();
                f = v;
                log::debug!("lv it={iterations} moved to {y:?} f={f:.6e}");
            }
            None => {
                for j in 0..d {
                    if tau[j] > params.tau_min[j] {
                        tau[j] = match params.kinds[j] {
                            VarKind::Continuous => 0.5 * tau[j],
                            VarKind::Integer => tau[j] - 1.0,
                        };
                    }
                }
                log::debug!("lv it={iterations} steps reduced to {tau:?}");
            }
        }
    }
    Ok(LvOutcome {
        y,
        f,
        tau,
        iterations,
        evaluations: memo.len(),
        probes,
    })
}

/// Writes the probe log as CSV: `iteration, y_0.., f, accepted`. Failed
/// probes leave `f` empty.
pub fn write_probes<W: Write>(probes: &[Probe], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let dim = probes.first().map_or(0, |p| p.point.len());
    let mut header = vec!["iteration".to_string()];
    header.extend((0..dim).map(|j| format!("y{j}")));
    header.extend(["f", "accepted"].map(String::from));
    wr.write_record(&header)?;
    for p in probes {
        let mut row = vec![p.iteration.to_string()];
        row.extend(p.point.iter().map(|v| v.to_string()));
        row.push(p.f.map_or(String::new(), |v| v.to_string()));
        row.push(p.accepted.to_string());
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}
