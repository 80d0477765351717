//! Plain-text nodal field records.

use std::io::{self, Write};

use crate::deposition::mesh::Mesh;
use crate::fem::state::SimState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub ux: f64,
    pub uy: f64,
    pub theta: f64,
}

/// Active-node fields at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub nodes: Vec<NodeRecord>,
}

impl Snapshot {
    pub fn capture(mesh: &Mesh, state: &SimState) -> Self {
        let nodes = mesh
            .nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| state.node_active[*i])
            .map(|(i, n)| NodeRecord {
                id: i,
                x: n.x,
                y: n.y,
                ux: state.u[i][0],
                uy: state.u[i][1],
                theta: state.theta[i],
            })
            .collect();
        Snapshot {
            step: state.step,
            t: state.t,
            nodes,
        }
    }

    /// Whitespace-separated table with a commented header line.
    pub fn write_table<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# step {} t {}", self.step, self.t)?;
        writeln!(w, "# id x y u_x u_y theta")?;
        for r in &self.nodes {
            writeln!(
                w,
                "{} {:.9e} {:.9e} {:.9e} {:.9e} {:.9e}",
                r.id, r.x, r.y, r.ux, r.uy, r.theta
            )?;
        }
        Ok(())
    }
}
