//! Element activation timeline.

use super::mesh::{BuildPlan, Mesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Print,
    Dwell,
    Cooldown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub dt: f64,
    /// Element activated at the start of this step.
    pub activate: Option<usize>,
    pub phase: Phase,
}

/// Ordered steps; step `n` (1-based) is `steps[n - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSchedule {
    pub steps: Vec<Step>,
    pub element_birth: Vec<usize>,
    pub node_birth: Vec<usize>,
}

impl ActivationSchedule {
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn step(&self, n: usize) -> &Step {
        &self.steps[n - 1]
    }

    pub fn end_time(&self) -> f64 {
        self.steps.iter().map(|s| s.dt).sum()
    }
}

/// Cooldown step length for a print at `dt_element`.
pub fn cooldown_step(dt_element: f64, cooldown: f64) -> f64 {
    (50.0 * dt_element).min(cooldown / 40.0)
}

fn uniform_split(total: f64, target: f64) -> (usize, f64) {
    if total <= 0.0 {
        return (0, 0.0);
    }
    let n = ((total / target) - 1e-9).ceil().max(1.0) as usize;
    (n, total / n as f64)
}

/// One element per step left to right, layers bottom to top, dwell after
/// every layer but the last, then cooldown.
pub fn make_schedule(plan: &BuildPlan, mesh: &Mesh) -> Result<ActivationSchedule> {
    plan.validate()?;
    let dt = plan.dt_element;
    let mut steps = Vec::new();
    let mut element_birth = vec![0; mesh.n_elements()];
    let mut node_birth = vec![usize::MAX; mesh.n_nodes()];
    let rpl = plan.rows_per_layer();
    for layer in 0..plan.n_layers {
        let elems = mesh.rows[layer * rpl].start..mesh.rows[(layer + 1) * rpl - 1].end;
        let count = elems.len();
        for e in elems {
            steps.push(Step {
                dt,
                activate: Some(e),
                phase: Phase::Print,
            });
            element_birth[e] = steps.len();
            for &n in &mesh.elements[e].nodes {
                if node_birth[n] == usize::MAX {
                    node_birth[n] = steps.len();
                }
            }
        }
        if layer + 1 < plan.n_layers {
            let (n, h) = uniform_split(plan.dwell_factor * count as f64 * dt, dt);
            steps.extend((0..n).map(|_| Step {
                dt: h,
                activate: None,
                phase: Phase::Dwell,
            }));
        }
    }
    let (n, h) = uniform_split(plan.cooldown, cooldown_step(dt, plan.cooldown));
    steps.extend((0..n).map(|_| Step {
        dt: h,
        activate: None,
        phase: Phase::Cooldown,
    }));
    if let Some(n) = node_birth.iter().position(|&b| b == usize::MAX) {
        return Err(Error::Schedule(format!("node {n} is never activated")));
    }
    Ok(ActivationSchedule {
        steps,
        element_birth,
        node_birth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deposition::mesh::build_mesh;

    #[test]
    fn two_by_two_wall() {
        let mut plan = BuildPlan::wall(2.0, 2.0, 2, 2, 0.01);
        plan.cooldown = 0.0;
        let mesh = build_mesh(&plan).unwrap();
        let s = make_schedule(&plan, &mesh).unwrap();
        let acts: Vec<_> = s.steps.iter().map(|s| s.activate).collect();
        assert_eq!(acts, vec![Some(0), Some(1), None, Some(2), Some(3)]);
        assert!((s.steps[2].dt - 0.01).abs() < 1e-15);
        assert_eq!(s.steps[2].phase, Phase::Dwell);
        assert_eq!(s.element_birth, vec![1, 2, 4, 5]);
    }

    #[test]
    fn paper_wall_step_count() {
        let plan = BuildPlan::wall(20.0, 10.0, 40, 30, 0.006);
        let mesh = build_mesh(&plan).unwrap();
        let s = make_schedule(&plan, &mesh).unwrap();
        let dwell = 29 * 20; // 0.5 * 40 elements per layer
        let cool = (240.0f64 / cooldown_step(0.006, 240.0)).ceil() as usize;
        assert_eq!(cool, 800);
        assert_eq!(s.n_steps(), 1200 + dwell + cool);
        assert!((s.end_time() - (1200.0 * 0.006 + 29.0 * 20.0 * 0.006 + 240.0)).abs() < 1e-9);
    }
}
