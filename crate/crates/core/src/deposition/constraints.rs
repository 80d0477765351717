//! Degree-of-freedom numbering with Dirichlet elimination and
//! master-slave condensation of hanging nodes.

use std::collections::HashMap;

use super::mesh::{HangingConstraint, Mesh};
use crate::error::{Error, Result};
use crate::linalg::BandMatrix;

/// Unknowns per node: `u_x`, `u_y`, `theta`.
pub const NDOF: usize = 3;

/// Rejects constraints whose masters are themselves constrained.
pub fn check_acyclic(constraints: &[HangingConstraint]) -> Result<()> {
    let slaves: HashMap<usize, usize> = constraints
        .iter()
        .enumerate()
        .map(|(i, c)| (c.node, i))
        .collect();
    if slaves.len() != constraints.len() {
        return Err(Error::Config("a node carries more than one hanging constraint".into()));
    }
    for c in constraints {
        for m in c.masters {
            if slaves.contains_key(&m) {
                return Err(Error::Config(format!(
                    "constraint cycle: master {m} of hanging node {} is itself hanging",
                    c.node
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dof {
    Inactive,
    Free(usize),
    /// Prescribed value.
    Fixed(f64),
    /// Index into [`DofMap::constraints`].
    Slave(usize),
}

/// Maps nodal unknowns of the active part to global equations.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub dofs: Vec<[Dof; NDOF]>,
    pub constraints: Vec<HangingConstraint>,
    pub n_eq: usize,
}

impl DofMap {
    /// Numbers the free unknowns of active nodes in node order.
    ///
    /// Nodes with `fixed[n] = Some(values)` get prescribed values; active
    /// hanging nodes become slaves of their masters.
    pub fn new(
        active: &[bool],
        fixed: &dyn Fn(usize) -> Option<[f64; NDOF]>,
        constraints: &[HangingConstraint],
    ) -> Result<Self> {
        let mut dofs = vec![[Dof::Inactive; NDOF]; active.len()];
        let mut used = Vec::new();
        for c in constraints.iter().filter(|c| active[c.node]) {
            if c.masters.iter().any(|&m| !active[m]) {
                return Err(Error::Schedule(format!(
                    "hanging node {} activated before its masters",
                    c.node
                )));
            }
            dofs[c.node] = [Dof::Slave(used.len()); NDOF];
            used.push(*c);
        }
        check_acyclic(&used)?;
        let mut n_eq = 0;
        for (n, d) in dofs.iter_mut().enumerate() {
            if !active[n] || matches!(d[0], Dof::Slave(_)) {
                continue;
            }
            match fixed(n) {
                Some(v) => *d = v.map(Dof::Fixed),
                None => {
                    for slot in d.iter_mut() {
                        *slot = Dof::Free(n_eq);
                        n_eq += 1;
                    }
                }
            }
        }
        Ok(DofMap {
            dofs,
            constraints: used,
            n_eq,
        })
    }

    /// Builds the map for a mesh: base nodes are fixed at zero displacement
    /// and `theta_base`.
    pub fn for_mesh(mesh: &Mesh, active: &[bool], theta_base: f64) -> Result<Self> {
        let fixed = |n: usize| (mesh.nodes[n].level == 0).then_some([0.0, 0.0, theta_base]);
        DofMap::new(active, &fixed, &mesh.hanging)
    }

    /// Equations and weights that a nodal unknown contributes to.
    pub fn expand(&self, node: usize, comp: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        match self.dofs[node][comp] {
            Dof::Free(eq) => out.push((eq, 1.0)),
            Dof::Slave(c) => {
                for (m, w) in self.constraints[c].weights() {
                    if let Dof::Free(eq) = self.dofs[m][comp] {
                        out.push((eq, w));
                    }
                }
            }
            Dof::Fixed(_) | Dof::Inactive => {}
        }
    }

    /// Lower and upper bandwidth of the condensed system given element connectivity.
    pub fn bandwidth<'a>(&self, elements: impl Iterator<Item = &'a [usize; 4]>) -> usize {
        let mut bw = 0;
        let mut buf = Vec::new();
        for nodes in elements {
            let (mut lo, mut hi) = (usize::MAX, 0);
            for &n in nodes {
                for c in 0..NDOF {
                    self.expand(n, c, &mut buf);
                    for &(eq, _) in &buf {
                        lo = lo.min(eq);
                        hi = hi.max(eq);
                    }
                }
            }
            if hi >= lo && lo != usize::MAX {
                bw = bw.max(hi - lo);
            }
        }
        bw
    }

    /// Reads the unknowns from nodal fields into an equation vector.
    pub fn gather(&self, u: &[[f64; 2]], theta: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_eq];
        for (n, d) in self.dofs.iter().enumerate() {
            for c in 0..NDOF {
                if let Dof::Free(eq) = d[c] {
                    x[eq] = if c < 2 { u[n][c] } else { theta[n] };
                }
            }
        }
        x
    }

    /// Adds an equation-space increment to the nodal fields and refreshes
    /// fixed and slave values.
    pub fn scatter_add(&self, dx: &[f64], u: &mut [[f64; 2]], theta: &mut [f64]) {
        for (n, d) in self.dofs.iter().enumerate() {
            for c in 0..NDOF {
                if let Dof::Free(eq) = d[c] {
                    if c < 2 {
                        u[n][c] += dx[eq];
                    } else {
                        theta[n] += dx[eq];
                    }
                }
            }
        }
        self.enforce(u, theta);
    }

    /// Writes prescribed values and slave interpolations.
    pub fn enforce(&self, u: &mut [[f64; 2]], theta: &mut [f64]) {
        for (n, d) in self.dofs.iter().enumerate() {
            for c in 0..NDOF {
                if let Dof::Fixed(v) = d[c] {
                    if c < 2 {
                        u[n][c] = v;
                    } else {
                        theta[n] = v;
                    }
                }
            }
        }
        self.interpolate_slaves(u, theta);
    }

    pub fn interpolate_slaves(&self, u: &mut [[f64; 2]], theta: &mut [f64]) {
        for c in &self.constraints {
            let [(m0, w0), (m1, w1)] = c.weights();
            u[c.node] = [
                w0 * u[m0][0] + w1 * u[m1][0],
                w0 * u[m0][1] + w1 * u[m1][1],
            ];
            theta[c.node] = w0 * theta[m0] + w1 * theta[m1];
        }
    }
}

/// Condenses a dense system `K x = f` written over all nodal unknowns.
///
/// Returns `T^T K T` and `T^T (f - K x_fixed)` where `T` maps equations to
/// nodal unknowns. Used for small checks; production assembly condenses at
/// scatter time.
pub fn apply_hanging_constraints(
    map: &DofMap,
    k: &nalgebra::DMatrix<f64>,
    f: &nalgebra::DVector<f64>,
) -> (nalgebra::DMatrix<f64>, nalgebra::DVector<f64>) {
    let nn = map.dofs.len() * NDOF;
    assert_eq!(k.nrows(), nn);
    let mut t = nalgebra::DMatrix::zeros(nn, map.n_eq);
    let mut x_fixed = nalgebra::DVector::zeros(nn);
    let mut buf = Vec::new();
    for n in 0..map.dofs.len() {
        for c in 0..NDOF {
            map.expand(n, c, &mut buf);
            for &(eq, w) in &buf {
                t[(n * NDOF + c, eq)] += w;
            }
            if let Dof::Fixed(v) = map.dofs[n][c] {
                x_fixed[n * NDOF + c] = v;
            }
        }
    }
    let kt = t.transpose() * k * &t;
    let ft = t.transpose() * (f - k * x_fixed);
    (kt, ft)
}

/// Accumulates element contributions into the condensed global system.
pub struct Assembler<'a> {
    pub map: &'a DofMap,
    buf: Vec<Vec<(usize, f64)>>,
}

impl<'a> Assembler<'a> {
    pub fn new(map: &'a DofMap) -> Self {
        Assembler {
            map,
            buf: vec![Vec::new(); 4 * NDOF],
        }
    }

    /// Expands the local unknowns of an element.
    pub fn load(&mut self, nodes: &[usize; 4]) {
        for (a, &n) in nodes.iter().enumerate() {
            for c in 0..NDOF {
                self.map.expand(n, c, &mut self.buf[a * NDOF + c]);
            }
        }
    }

    pub fn add_vector(&self, local: &[f64], global: &mut [f64]) {
        for (i, targets) in self.buf.iter().enumerate() {
            for &(eq, w) in targets {
                global[eq] += w * local[i];
            }
        }
    }

    pub fn add_matrix(&self, local: &nalgebra::SMatrix<f64, 12, 12>, global: &mut BandMatrix) {
        for (i, ti) in self.buf.iter().enumerate() {
            for &(ei, wi) in ti {
                for (j, tj) in self.buf.iter().enumerate() {
                    let kij = local[(i, j)];
                    if kij == 0.0 {
                        continue;
                    }
                    for &(ej, wj) in tj {
                        global.add(ei, ej, wi * wj * kij);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deposition::mesh::HangingConstraint;

    #[test]
    fn cycle_detected() {
        let a = HangingConstraint::new(2, [0, 1], 0.5).unwrap();
        let b = HangingConstraint::new(3, [2, 4], 0.5).unwrap();
        assert!(check_acyclic(&[a]).is_ok());
        assert!(matches!(check_acyclic(&[a, b]), Err(Error::Config(_))));
    }

    #[test]
    fn slave_interpolates_temperature() {
        let c = HangingConstraint::new(2, [0, 1], 0.5).unwrap();
        let active = vec![true; 3];
        let map = DofMap::new(&active, &|_| None, &[c]).unwrap();
        assert_eq!(map.n_eq, 6);
        let mut u = vec![[0.0; 2]; 3];
        let mut th = vec![0.0; 3];
        let dx = vec![0.0, 0.0, 400.0, 0.0, 0.0, 500.0];
        map.scatter_add(&dx, &mut u, &mut th);
        assert_eq!(th[2], 450.0);
    }
}
