//! One-call evaluation of the shape error of a print, optionally with its
//! derivative with respect to the convection coefficient.

use crate::deposition::mesh::BuildPlan;
use crate::error::Result;
use crate::fem::{RunSummary, SimOptions, Simulation};
use crate::material::MaterialParams;
use crate::objective::{shape_error, shape_error_gradient_wrt_u, ErrorSurface};
use crate::sensitivity::{total_gradient, DesignVariable};
use crate::units;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub f: f64,
    /// `df/dh` with `h` in W/(m^2 K).
    pub df_dh: Option<f64>,
    pub summary: RunSummary,
}

/// Simulates `plan` and measures the shape error at the final state.
///
/// With `gradient` set the convection sensitivity is propagated alongside the
/// state; factor reuse is then switched off.
pub fn evaluate(
    plan: &BuildPlan,
    params: &MaterialParams,
    options: SimOptions,
    gradient: bool,
) -> Result<Evaluation> {
    evaluate_with_length(plan, params, options, gradient, None)
}

/// As [`evaluate`], with the characteristic length of the error surface
/// replaced by `l_c` when given.
pub fn evaluate_with_length(
    plan: &BuildPlan,
    params: &MaterialParams,
    mut options: SimOptions,
    gradient: bool,
    l_c: Option<f64>,
) -> Result<Evaluation> {
    options.sensitivity = gradient.then_some(DesignVariable::Convection);
    let mut sim = Simulation::new(plan, params, options)?;
    let mut surf = ErrorSurface::for_plan(plan, &sim.mesh)?;
    if let Some(l_c) = l_c {
        surf = ErrorSurface::new(surf.segments, surf.deviation, l_c)?;
    }
    sim.run()?;
    let f = shape_error(&sim.mesh, &sim.state.u, &surf);
    let df_dh = sim.sensitivity.as_ref().map(|s| {
        let g = shape_error_gradient_wrt_u(&sim.mesh, &sim.state.u, &surf);
        // h_internal = h_si * 1e-3
        units::convection_from_si(total_gradient(s, &g))
    });
    Ok(Evaluation {
        f,
        df_dh,
        summary: sim.summary,
    })
}
