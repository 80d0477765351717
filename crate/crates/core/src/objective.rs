//! Shape-error objective measured on a polyline of the printed surface.
//!
//! `f_h = sqrt(sum_i sum_j e_ij^2 w_j l_i / 2) / (L_c sqrt(sum_i l_i))`
//! with 3-point Gauss quadrature per segment.

use crate::deposition::mesh::{BuildPlan, Geometry, HangingConstraint, Mesh};
use crate::error::{Error, Result};
use crate::quadrature::GAUSS3;

/// Point given as a weighted combination of nodes.
pub type NodeCombo = Vec<(usize, f64)>;

/// Straight piece of the measured surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSegment {
    pub a: NodeCombo,
    pub b: NodeCombo,
}

/// Signed deviation of a printed point from the design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Deviation {
    /// Deformed height minus the designed height.
    Height { designed: f64 },
    /// Deformed distance from `center` minus `radius`.
    Radius { center: [f64; 2], radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSurface {
    pub segments: Vec<SurfaceSegment>,
    pub deviation: Deviation,
    /// Characteristic length.
    pub l_c: f64,
}

fn combo_point(mesh: &Mesh, u: &[[f64; 2]], c: &NodeCombo) -> ([f64; 2], [f64; 2]) {
    let mut x = [0.0; 2];
    let mut d = [0.0; 2];
    for &(n, w) in c {
        x[0] += w * mesh.nodes[n].x;
        x[1] += w * mesh.nodes[n].y;
        d[0] += w * u[n][0];
        d[1] += w * u[n][1];
    }
    (x, d)
}

impl ErrorSurface {
    /// Top edges of the uppermost row, compared against `designed` height.
    pub fn top_edge(mesh: &Mesh, designed: f64, l_c: f64) -> Result<Self> {
        let top = mesh.rows.last().ok_or_else(|| Error::Config("empty mesh".into()))?;
        let segments = mesh.elements[top.clone()]
            .iter()
            .map(|e| SurfaceSegment {
                a: vec![(e.nodes[3], 1.0)],
                b: vec![(e.nodes[2], 1.0)],
            })
            .collect();
        ErrorSurface::new(segments, Deviation::Height { designed }, l_c)
    }

    /// Polyline through the midpoints of the staircase edges that approximate a
    /// quarter-circle hole at the top-right corner, closed off at the top
    /// surface and the right side.
    pub fn step_edge(mesh: &Mesh, center: [f64; 2], radius: f64) -> Result<Self> {
        let edges = staircase_edges(mesh);
        if edges.is_empty() {
            return Err(Error::Config("no staircase edges: the mesh has no hole".into()));
        }
        let mid = |e: &(usize, usize)| vec![(e.0, 0.5), (e.1, 0.5)];
        let mut points: Vec<NodeCombo> = vec![vec![(edges[0].0, 1.0)]];
        points.extend(edges.iter().map(mid));
        points.push(vec![(edges[edges.len() - 1].1, 1.0)]);
        let segments = points
            .windows(2)
            .map(|w| SurfaceSegment {
                a: w[0].clone(),
                b: w[1].clone(),
            })
            .collect();
        ErrorSurface::new(segments, Deviation::Radius { center, radius }, radius)
    }

    /// Surface used for a plan: top edge of a rectangle (L_c = height) or the
    /// step edge of the hole (L_c = radius).
    pub fn for_plan(plan: &BuildPlan, mesh: &Mesh) -> Result<Self> {
        match plan.geometry {
            Geometry::Rectangle => ErrorSurface::top_edge(mesh, plan.height, plan.height),
            Geometry::QuarterHole { radius } => {
                ErrorSurface::step_edge(mesh, [plan.width, plan.height], radius)
            }
        }
    }

    pub fn new(segments: Vec<SurfaceSegment>, deviation: Deviation, l_c: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Config("error surface has no segments".into()));
        }
        if !(l_c > 0.0) {
            return Err(Error::Config(format!("characteristic length must be positive, got {l_c}")));
        }
        Ok(ErrorSurface {
            segments,
            deviation,
            l_c,
        })
    }

    /// Total reference length of the surface.
    pub fn reference_length(&self, mesh: &Mesh) -> f64 {
        let zero = vec![[0.0; 2]; mesh.n_nodes()];
        self.segments
            .iter()
            .map(|s| {
                let (a, _) = combo_point(mesh, &zero, &s.a);
                let (b, _) = combo_point(mesh, &zero, &s.b);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .sum()
    }

    /// Deviation and its gradient with respect to the deformed position.
    fn deviation_at(&self, x: [f64; 2], d: [f64; 2]) -> (f64, [f64; 2]) {
        match self.deviation {
            Deviation::Height { designed } => (x[1] + d[1] - designed, [0.0, 1.0]),
            Deviation::Radius { center, radius } => {
                let p = [x[0] + d[0] - center[0], x[1] + d[1] - center[1]];
                let dist = p[0].hypot(p[1]);
                let n = if dist > 0.0 { [p[0] / dist, p[1] / dist] } else { [0.0; 2] };
                (dist - radius, n)
            }
        }
    }

    /// Walks every quadrature point, returning `(sum e^2 w l/2, sum l)`.
    fn accumulate(
        &self,
        mesh: &Mesh,
        u: &[[f64; 2]],
        mut visit: impl FnMut(&SurfaceSegment, f64, f64, [f64; 2]),
    ) -> (f64, f64) {
        let (mut sum, mut len) = (0.0, 0.0);
        for s in &self.segments {
            let (xa, da) = combo_point(mesh, u, &s.a);
            let (xb, db) = combo_point(mesh, u, &s.b);
            let l = (xb[0] - xa[0]).hypot(xb[1] - xa[1]);
            len += l;
            for &(q, w) in &GAUSS3 {
                let t = 0.5 * (1.0 + q);
                let lerp = |a: [f64; 2], b: [f64; 2]| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let (e, n) = self.deviation_at(lerp(xa, xb), lerp(da, db));
                let wq = w * 0.5 * l;
                sum += wq * e * e;
                visit(s, t, wq * e, n);
            }
        }
        (sum, len)
    }
}

/// Discrete shape error for nodal displacements `u`.
pub fn shape_error(mesh: &Mesh, u: &[[f64; 2]], surf: &ErrorSurface) -> f64 {
    let (sum, len) = surf.accumulate(mesh, u, |_, _, _, _| {});
    sum.sqrt() / (surf.l_c * len.sqrt())
}

/// Gradient of [`shape_error`] with respect to every nodal displacement.
///
/// Zero when the error itself is below 1e-14, where the root is not differentiable.
pub fn shape_error_gradient_wrt_u(mesh: &Mesh, u: &[[f64; 2]], surf: &ErrorSurface) -> Vec<[f64; 2]> {
    let mut g = vec![[0.0; 2]; mesh.n_nodes()];
    let (sum, len) = surf.accumulate(mesh, u, |s, t, we, n| {
        for (combo, f) in [(&s.a, 1.0 - t), (&s.b, t)] {
            for &(node, w) in combo {
                g[node][0] += we * f * w * n[0];
                g[node][1] += we * f * w * n[1];
            }
        }
    });
    let f = sum.sqrt() / (surf.l_c * len.sqrt());
    if f < 1e-14 {
        return vec![[0.0; 2]; mesh.n_nodes()];
    }
    let scale = 1.0 / (sum.sqrt() * surf.l_c * len.sqrt());
    for gi in g.iter_mut() {
        gi[0] *= scale;
        gi[1] *= scale;
    }
    g
}

/// Moves gradient entries of hanging nodes onto their masters.
pub fn condense_gradient(grad: &[[f64; 2]], hanging: &[HangingConstraint]) -> Vec<[f64; 2]> {
    let mut out = grad.to_vec();
    for c in hanging {
        let gs = out[c.node];
        for (m, w) in c.weights() {
            out[m][0] += w * gs[0];
            out[m][1] += w * gs[1];
        }
        out[c.node] = [0.0; 2];
    }
    out
}

/// Boundary edges of the hole staircase, ordered from the top surface down to
/// the right side, each as a node pair in walking order. A horizontal step
/// counts as one edge even when grid nodes subdivide it.
fn staircase_edges(mesh: &Mesh) -> Vec<(usize, usize)> {
    let ny = mesh.rows.len();
    let width = mesh
        .rows
        .iter()
        .enumerate()
        .map(|(j, _)| mesh.row_end(j))
        .fold(0.0, f64::max);
    let tol = 1e-9 * width;
    let mut edges = Vec::new();
    let mut j = ny;
    while j > 0 {
        j -= 1;
        let end = mesh.row_end(j);
        if end >= width - tol {
            break;
        }
        let e = &mesh.elements[mesh.rows[j].end - 1];
        edges.push((e.nodes[2], e.nodes[1]));
        // exposed step on top of the row below, taken as one printed edge
        let below_end = if j > 0 { mesh.row_end(j - 1) } else { end };
        if below_end > end + tol {
            let at = |x: f64| {
                mesh.nodes
                    .iter()
                    .position(|n| n.level == j && (n.x - x).abs() <= tol)
                    .expect("step corner node")
            };
            edges.push((at(end), at(below_end)));
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deposition::mesh::build_mesh;

    #[test]
    fn undeformed_wall_has_zero_error() {
        let plan = BuildPlan::wall(4.0, 2.0, 4, 2, 0.01);
        let mesh = build_mesh(&plan).unwrap();
        let s = ErrorSurface::for_plan(&plan, &mesh).unwrap();
        let u = vec![[0.0; 2]; mesh.n_nodes()];
        assert_eq!(shape_error(&mesh, &u, &s), 0.0);
        assert!(shape_error_gradient_wrt_u(&mesh, &u, &s).iter().all(|g| *g == [0.0; 2]));
    }

    #[test]
    fn uniform_lift() {
        let plan = BuildPlan::wall(4.0, 2.0, 4, 2, 0.01);
        let mesh = build_mesh(&plan).unwrap();
        let s = ErrorSurface::for_plan(&plan, &mesh).unwrap();
        let u = vec![[0.3, -0.05]; mesh.n_nodes()];
        assert!((shape_error(&mesh, &u, &s) - 0.05 / 2.0).abs() < 1e-15);
    }
}
