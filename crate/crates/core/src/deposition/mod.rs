//! Layered build: mesh, activation schedule, newborn initialization and
//! hanging-node constraints.

pub mod constraints;
pub mod mesh;
pub mod schedule;

pub use constraints::{apply_hanging_constraints, DofMap};
pub use mesh::{build_mesh, BoundarySegment, BuildPlan, Element, Geometry, HangingConstraint, Mesh, Node};
pub use schedule::{make_schedule, ActivationSchedule, Phase, Step};

use crate::error::{Error, Result};
use crate::fem::state::SimState;
use crate::material::MaterialParams;

/// How a newborn node obtains its initial values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BirthRule {
    /// Interpolated from the edge it hangs on.
    Hanging(HangingConstraint),
    /// On the fixed base.
    Base,
    /// Fresh material on top of `below`: displacement copied, deposition temperature.
    Above(usize),
}

/// Birth rule of corner `a` of `element`.
pub fn birth_rule(mesh: &Mesh, element: usize, a: usize) -> Result<BirthRule> {
    let e = &mesh.elements[element];
    let node = e.nodes[a];
    if let Some(c) = mesh.hanging.iter().find(|c| c.node == node) {
        return Ok(BirthRule::Hanging(*c));
    }
    if mesh.nodes[node].level == 0 {
        return Ok(BirthRule::Base);
    }
    match a {
        2 => Ok(BirthRule::Above(e.nodes[1])),
        3 => Ok(BirthRule::Above(e.nodes[0])),
        _ => Err(Error::Schedule(format!(
            "element {element} has an unsupported bottom node {node}"
        ))),
    }
}

/// Activates `element`: initializes its newborn nodes and records history.
pub fn activate(element: usize, state: &mut SimState, mesh: &Mesh, p: &MaterialParams) -> Result<()> {
    if element != state.n_active {
        return Err(Error::Schedule(format!(
            "element {element} activated out of order (expected {})",
            state.n_active
        )));
    }
    let nodes = mesh.elements[element].nodes;
    for (a, &n) in nodes.iter().enumerate() {
        if state.node_active[n] {
            continue;
        }
        let (u, theta) = match birth_rule(mesh, element, a)? {
            BirthRule::Hanging(c) => {
                if c.masters.iter().any(|&m| !state.node_active[m]) {
                    return Err(Error::Schedule(format!("hanging node {n} born before its masters")));
                }
                let [(m0, w0), (m1, w1)] = c.weights();
                (
                    [
                        w0 * state.u[m0][0] + w1 * state.u[m1][0],
                        w0 * state.u[m0][1] + w1 * state.u[m1][1],
                    ],
                    w0 * state.theta[m0] + w1 * state.theta[m1],
                )
            }
            BirthRule::Base => ([0.0; 2], p.theta_inf),
            BirthRule::Above(below) => {
                if !state.node_active[below] {
                    return Err(Error::Schedule(format!("node {n} has no support below")));
                }
                (state.u[below], p.theta_deposit)
            }
        };
        state.u[n] = u;
        state.v[n] = [0.0; 2];
        state.a[n] = [0.0; 2];
        state.theta[n] = theta;
        state.theta_dot[n] = 0.0;
        state.node_active[n] = true;
    }
    for (a, &n) in nodes.iter().enumerate() {
        state.history.u_his[element][a] = state.u[n];
        state.history.theta_his[element][a] = state.theta[n];
    }
    state.n_active += 1;
    Ok(())
}
