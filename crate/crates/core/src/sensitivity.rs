//! Forward (primal) sensitivities of the discrete trajectory.
//!
//! After each converged step the linear system
//! `J dx_n = -(dr/dx_{n-1} dx_{n-1} + dr/dhis dhis + dr/dy)` is solved with the
//! factorization from the last Newton iteration. Velocity and acceleration
//! sensitivities follow the same trapezoidal update as the state.

use crate::deposition::constraints::{Assembler, Dof};
use crate::deposition::mesh::Mesh;
use crate::deposition::{birth_rule, BirthRule};
use crate::error::{Error, Result};
use crate::fem::assembly::StepContext;
use crate::fem::element::{self, HistoryMatrices, PriorStepMatrices, Vec12};
use crate::fem::state::SimState;
use crate::linalg::BandLu;

/// Process parameters that can be varied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DesignVariable {
    /// Convection coefficient `h`.
    Convection,
    /// Time to print one element.
    ElementTime,
    /// Number of layers (sets the layer thickness).
    LayerCount,
}

impl DesignVariable {
    pub fn name(self) -> &'static str {
        match self {
            DesignVariable::Convection => "h",
            DesignVariable::ElementTime => "dt",
            DesignVariable::LayerCount => "layers",
        }
    }
}

/// Nodal and history sensitivities with respect to one design variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityState {
    pub variable: DesignVariable,
    pub du: Vec<[f64; 2]>,
    pub dv: Vec<[f64; 2]>,
    pub da: Vec<[f64; 2]>,
    pub dtheta: Vec<f64>,
    pub du_his: Vec<[[f64; 2]; 4]>,
    pub dtheta_his: Vec<[f64; 4]>,
}

impl SensitivityState {
    /// Zero initial sensitivities. Only the convection coefficient is supported.
    pub fn new(variable: DesignVariable, n_nodes: usize, n_elements: usize) -> Result<Self> {
        if variable != DesignVariable::Convection {
            return Err(Error::UnsupportedDesignVariable(variable.name().into()));
        }
        Ok(SensitivityState {
            variable,
            du: vec![[0.0; 2]; n_nodes],
            dv: vec![[0.0; 2]; n_nodes],
            da: vec![[0.0; 2]; n_nodes],
            dtheta: vec![0.0; n_nodes],
            du_his: vec![[[0.0; 2]; 4]; n_elements],
            dtheta_his: vec![[0.0; 4]; n_elements],
        })
    }

    /// Mirrors the newborn initialization of the state for `element`.
    ///
    /// `was_active` holds the activity of the element's corners before birth.
    pub fn on_activate(&mut self, mesh: &Mesh, element: usize, was_active: [bool; 4]) -> Result<()> {
        let nodes = mesh.elements[element].nodes;
        for (a, &n) in nodes.iter().enumerate() {
            if was_active[a] {
                continue;
            }
            let (du, dth) = match birth_rule(mesh, element, a)? {
                BirthRule::Hanging(c) => {
                    let [(m0, w0), (m1, w1)] = c.weights();
                    (
                        [
                            w0 * self.du[m0][0] + w1 * self.du[m1][0],
                            w0 * self.du[m0][1] + w1 * self.du[m1][1],
                        ],
                        w0 * self.dtheta[m0] + w1 * self.dtheta[m1],
                    )
                }
                BirthRule::Base => ([0.0; 2], 0.0),
                BirthRule::Above(b) => (self.du[b], 0.0),
            };
            self.du[n] = du;
            self.dv[n] = [0.0; 2];
            self.da[n] = [0.0; 2];
            self.dtheta[n] = dth;
        }
        for (a, &n) in nodes.iter().enumerate() {
            self.du_his[element][a] = self.du[n];
            self.dtheta_his[element][a] = self.dtheta[n];
        }
        Ok(())
    }
}

/// Derivatives of element `e`'s residual with respect to the previous step.
pub fn step_rhs_matrices(ctx: &StepContext, cur: &SimState, e: usize) -> Result<PriorStepMatrices> {
    element::prior_step_matrices(&ctx.element_state(cur, e), ctx.params, ctx.material)
}

/// Derivatives of element `e`'s residual with respect to its history variables.
pub fn history_matrices(ctx: &StepContext, cur: &SimState, e: usize) -> Result<HistoryMatrices> {
    element::history_matrices(&ctx.element_state(cur, e), ctx.params, ctx.material)
}

/// Explicit derivative of element `e`'s residual with respect to `var`.
pub fn dr_dy(ctx: &StepContext, cur: &SimState, e: usize, var: DesignVariable) -> Result<Vec12> {
    match var {
        DesignVariable::Convection => Ok(element::dr_dh(
            &ctx.element_state(cur, e),
            &ctx.edges[e],
            ctx.params,
        )),
        other => Err(Error::UnsupportedDesignVariable(other.name().into())),
    }
}

/// Advances the sensitivities over one converged step.
///
/// `lu` must factor the condensed Jacobian of this step.
pub fn propagate_step(
    sens: &mut SensitivityState,
    ctx: &StepContext,
    cur: &SimState,
    lu: &BandLu,
) -> Result<()> {
    let n_eq = ctx.dofs.n_eq;
    if lu.n() != n_eq {
        return Err(Error::Internal(format!(
            "factorization has {} equations, system has {n_eq}",
            lu.n()
        )));
    }
    let mut rhs = vec![0.0; n_eq];
    let mut asm = Assembler::new(ctx.dofs);
    for e in 0..cur.n_active {
        let nodes = ctx.mesh.elements[e].nodes;
        let st = ctx.element_state(cur, e);
        let prior = element::prior_step_matrices(&st, ctx.params, ctx.material)?;
        let his = element::history_matrices(&st, ctx.params, ctx.material)?;
        let mut local = match sens.variable {
            DesignVariable::Convection => element::dr_dh(&st, &ctx.edges[e], ctx.params),
            other => return Err(Error::UnsupportedDesignVariable(other.name().into())),
        };
        let mut du = nalgebra::SVector::<f64, 8>::zeros();
        let mut dv = nalgebra::SVector::<f64, 8>::zeros();
        let mut da = nalgebra::SVector::<f64, 8>::zeros();
        let mut duh = nalgebra::SVector::<f64, 8>::zeros();
        let mut dth = nalgebra::SVector::<f64, 4>::zeros();
        let mut dthh = nalgebra::SVector::<f64, 4>::zeros();
        for (a, &n) in nodes.iter().enumerate() {
            for c in 0..2 {
                du[2 * a + c] = sens.du[n][c];
                dv[2 * a + c] = sens.dv[n][c];
                da[2 * a + c] = sens.da[n][c];
                duh[2 * a + c] = sens.du_his[e][a][c];
            }
            dth[a] = sens.dtheta[n];
            dthh[a] = sens.dtheta_his[e][a];
        }
        local += prior.du_prev * du
            + prior.dv_prev * dv
            + prior.da_prev * da
            + prior.dtheta_prev * dth
            + his.du_his * duh
            + his.dtheta_his * dthh;
        asm.load(&nodes);
        asm.add_vector(local.as_slice(), &mut rhs);
    }
    rhs.iter_mut().for_each(|v| *v = -*v);
    lu.solve_in_place(&mut rhs);

    let dt = ctx.dt;
    let du_prev = sens.du.clone();
    for (n, d) in ctx.dofs.dofs.iter().enumerate() {
        for c in 0..3 {
            let val = match d[c] {
                Dof::Free(eq) => rhs[eq],
                _ => 0.0,
            };
            if c < 2 {
                sens.du[n][c] = val;
            } else {
                sens.dtheta[n] = val;
            }
        }
    }
    for con in &ctx.dofs.constraints {
        let [(m0, w0), (m1, w1)] = con.weights();
        for c in 0..2 {
            sens.du[con.node][c] = w0 * sens.du[m0][c] + w1 * sens.du[m1][c];
        }
        sens.dtheta[con.node] = w0 * sens.dtheta[m0] + w1 * sens.dtheta[m1];
    }
    for n in 0..sens.du.len() {
        if !cur.node_active[n] {
            continue;
        }
        for c in 0..2 {
            let dv_new = 2.0 / dt * (sens.du[n][c] - du_prev[n][c]) - sens.dv[n][c];
            let da_new = 4.0 / (dt * dt) * (sens.du[n][c] - du_prev[n][c] - dt * sens.dv[n][c])
                - sens.da[n][c];
            sens.dv[n][c] = dv_new;
            sens.da[n][c] = da_new;
        }
    }
    Ok(())
}

/// `df/dy = (df/du) . (du/dy)`; temperature and explicit terms vanish for the
/// shape error.
pub fn total_gradient(sens: &SensitivityState, df_du: &[[f64; 2]]) -> f64 {
    df_du
        .iter()
        .zip(&sens.du)
        .map(|(g, d)| g[0] * d[0] + g[1] * d[1])
        .sum()
}
