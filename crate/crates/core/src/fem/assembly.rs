//! Scatter of element contributions into the condensed global system.

use crate::deposition::constraints::{Assembler, DofMap};
use crate::deposition::mesh::{EdgePoint, Mesh};
use crate::error::Result;
use crate::fem::element::{residual_and_tangent, ElementState};
use crate::fem::state::SimState;
use crate::linalg::BandMatrix;
use crate::material::{MaterialCache, MaterialParams};

/// Everything fixed during the Newton iterations of one step.
pub struct StepContext<'a> {
    pub mesh: &'a Mesh,
    pub params: &'a MaterialParams,
    pub material: &'a MaterialCache,
    pub dofs: &'a DofMap,
    /// Convection quadrature points per element.
    pub edges: &'a [Vec<EdgePoint>],
    /// Converged state of the previous step (with this step's births applied).
    pub prev: &'a SimState,
    pub dt: f64,
}

impl StepContext<'_> {
    /// Local state of element `e` with `cur` as the current iterate.
    pub fn element_state(&self, cur: &SimState, e: usize) -> ElementState {
        let el = &self.mesh.elements[e];
        let h = &self.prev.history;
        let mut st = ElementState {
            dx: el.width(),
            dy: el.height(),
            dt: self.dt,
            u: [0.0; 8],
            u_prev: [0.0; 8],
            v_prev: [0.0; 8],
            a_prev: [0.0; 8],
            u_his: [0.0; 8],
            theta: [0.0; 4],
            theta_prev: [0.0; 4],
            theta_his: h.theta_his[e],
        };
        for (a, &n) in el.nodes.iter().enumerate() {
            for c in 0..2 {
                st.u[2 * a + c] = cur.u[n][c];
                st.u_prev[2 * a + c] = self.prev.u[n][c];
                st.v_prev[2 * a + c] = self.prev.v[n][c];
                st.a_prev[2 * a + c] = self.prev.a[n][c];
                st.u_his[2 * a + c] = h.u_his[e][a][c];
            }
            st.theta[a] = cur.theta[n];
            st.theta_prev[a] = self.prev.theta[n];
        }
        st
    }
}

/// Condensed residual plus the size of the terms that produced it.
pub struct Residual {
    pub r: Vec<f64>,
    /// Largest per-equation sum of absolute contributions, momentum then energy.
    pub magnitude: [f64; 2],
}

impl Residual {
    /// Infinity norms of the momentum and energy parts.
    pub fn norms(&self) -> [f64; 2] {
        let mut n = [0.0f64; 2];
        for (i, v) in self.r.iter().enumerate() {
            let k = usize::from(i % 3 == 2);
            n[k] = n[k].max(v.abs());
        }
        n
    }
}

/// Assembles the residual and, when `tangent` is given, the Jacobian.
pub fn assemble(
    ctx: &StepContext,
    cur: &SimState,
    mut tangent: Option<&mut BandMatrix>,
) -> Result<Residual> {
    let n = ctx.dofs.n_eq;
    let mut r = vec![0.0; n];
    let mut mag = vec![0.0; n];
    if let Some(k) = tangent.as_deref_mut() {
        k.clear();
    }
    let mut asm = Assembler::new(ctx.dofs);
    for e in 0..cur.n_active {
        let st = ctx.element_state(cur, e);
        let (re, ke) = residual_and_tangent(
            &st,
            &ctx.edges[e],
            ctx.params,
            ctx.material,
            tangent.is_some(),
        )?;
        asm.load(&ctx.mesh.elements[e].nodes);
        asm.add_vector(re.as_slice(), &mut r);
        let abs: Vec<f64> = re.iter().map(|v| v.abs()).collect();
        asm.add_vector(&abs, &mut mag);
        if let (Some(k), Some(ke)) = (tangent.as_deref_mut(), ke.as_ref()) {
            asm.add_matrix(ke, k);
        }
    }
    let mut magnitude = [0.0f64; 2];
    for (i, m) in mag.iter().enumerate() {
        let k = usize::from(i % 3 == 2);
        magnitude[k] = magnitude[k].max(m.abs());
    }
    Ok(Residual { r, magnitude })
}
