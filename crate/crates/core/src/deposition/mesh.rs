//! Structured layered mesh with an optional quarter-circle cut-out.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::quadrature::GAUSS3;

/// Designed part outline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Rectangle,
    /// Quarter-circle hole centred on the top-right corner of the wall.
    QuarterHole { radius: f64 },
}

/// Geometry, discretization and process timing of one print.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildPlan {
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub geometry: Geometry,
    pub n_layers: usize,
    /// Time to print one full element (s).
    pub dt_element: f64,
    /// Dwell between layers as a fraction of one layer's print time.
    pub dwell_factor: f64,
    /// Idle cooling time after the last layer (s).
    pub cooldown: f64,
}

impl BuildPlan {
    /// Rectangular wall with one element row per layer.
    pub fn wall(width: f64, height: f64, nx: usize, n_layers: usize, dt_element: f64) -> Self {
        BuildPlan {
            width,
            height,
            nx,
            ny: n_layers,
            geometry: Geometry::Rectangle,
            n_layers,
            dt_element,
            dwell_factor: 0.5,
            cooldown: 240.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !(self.width > 0.0 && self.height > 0.0) {
            return cfg(format!("wall size must be positive, got {} x {}", self.width, self.height));
        }
        if self.nx == 0 || self.ny == 0 || self.n_layers == 0 {
            return cfg("nx, ny and n_layers must be positive".into());
        }
        if self.ny % self.n_layers != 0 {
            return cfg(format!(
                "ny = {} is not a multiple of n_layers = {}",
                self.ny, self.n_layers
            ));
        }
        if !(self.dt_element > 0.0 && self.dt_element.is_finite()) {
            return cfg(format!("dt_element must be positive, got {}", self.dt_element));
        }
        if !(self.dwell_factor >= 0.0) || !(self.cooldown >= 0.0) {
            return cfg("dwell_factor and cooldown must be non-negative".into());
        }
        if let Geometry::QuarterHole { radius } = self.geometry {
            if !(radius > 0.0 && radius < self.width && radius < self.height) {
                return cfg(format!(
                    "hole radius {radius} must be positive and smaller than both wall dimensions"
                ));
            }
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.width / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.height / self.ny as f64
    }

    pub fn rows_per_layer(&self) -> usize {
        self.ny / self.n_layers
    }

    pub fn layer_thickness(&self) -> f64 {
        self.height / self.n_layers as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub y: f64,
    pub level: usize,
}

/// Axis-aligned bilinear quadrilateral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    /// Corner nodes counter-clockwise from bottom-left.
    pub nodes: [usize; 4],
    pub row: usize,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Element {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    /// Bilinear shape functions at a physical point of the element.
    pub fn shape_at(&self, x: f64, y: f64) -> [f64; 4] {
        let xi = (2.0 * x - self.x0 - self.x1) / self.width();
        let eta = (2.0 * y - self.y0 - self.y1) / self.height();
        crate::quadrature::shape(xi, eta)
    }
}

/// Node sitting inside an edge of the layer below.
///
/// Its value is `(1 - ratio) * masters[0] + ratio * masters[1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HangingConstraint {
    pub node: usize,
    pub masters: [usize; 2],
    pub ratio: f64,
}

impl HangingConstraint {
    pub fn new(node: usize, masters: [usize; 2], ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Config(format!(
                "hanging node {node}: ratio {ratio} must lie strictly inside (0, 1)"
            )));
        }
        if masters.contains(&node) || masters[0] == masters[1] {
            return Err(Error::Config(format!(
                "hanging node {node}: masters {masters:?} must be two other nodes"
            )));
        }
        Ok(HangingConstraint {
            node,
            masters,
            ratio,
        })
    }

    pub fn weights(&self) -> [(usize, f64); 2] {
        [
            (self.masters[0], 1.0 - self.ratio),
            (self.masters[1], self.ratio),
        ]
    }
}

/// Quadrature point on a convecting boundary segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePoint {
    pub n: [f64; 4],
    /// Gauss weight times half the segment length.
    pub weight: f64,
}

/// Part of an element edge on the free surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySegment {
    pub element: usize,
    pub p0: [f64; 2],
    pub p1: [f64; 2],
}

impl BoundarySegment {
    pub fn length(&self) -> f64 {
        (self.p1[0] - self.p0[0]).hypot(self.p1[1] - self.p0[1])
    }

    pub fn gauss_points(&self, elem: &Element) -> [EdgePoint; 3] {
        let half = 0.5 * self.length();
        GAUSS3.map(|(s, w)| {
            let t = 0.5 * (1.0 + s);
            let x = self.p0[0] + t * (self.p1[0] - self.p0[0]);
            let y = self.p0[1] + t * (self.p1[1] - self.p0[1]);
            EdgePoint {
                n: elem.shape_at(x, y),
                weight: w * half,
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Node>,
    /// Row-major from the bottom, left to right: this is also the print order.
    pub elements: Vec<Element>,
    /// `rows[j]` is the element index range of row `j`.
    pub rows: Vec<std::ops::Range<usize>>,
    pub hanging: Vec<HangingConstraint>,
    /// y coordinate of each node level.
    pub levels: Vec<f64>,
}

fn x_key(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

/// Builds the structured mesh of `plan`.
pub fn build_mesh(plan: &BuildPlan) -> Result<Mesh> {
    plan.validate()?;
    let (dx, dy) = (plan.dx(), plan.dy());
    let snap = 1e-9 * dx;

    // x extent of each row: number of grid cells and right end.
    let mut row_cells: Vec<(usize, f64)> = Vec::with_capacity(plan.ny);
    for j in 0..plan.ny {
        let ym = (j as f64 + 0.5) * dy;
        let x_cut = match plan.geometry {
            Geometry::Rectangle => plan.width,
            Geometry::QuarterHole { radius } => {
                let dh = plan.height - ym;
                if dh >= radius {
                    plan.width
                } else {
                    plan.width - (radius * radius - dh * dh).sqrt()
                }
            }
        };
        // Keep cells whose centroid lies outside the hole.
        let kept = (0..plan.nx)
            .take_while(|&k| (k as f64 + 0.5) * dx <= x_cut + snap)
            .count();
        if kept == 0 {
            return Err(Error::Config(format!("row {j} has no material left after slicing")));
        }
        let mut x_end = x_cut.min(kept as f64 * dx);
        if (x_end - kept as f64 * dx).abs() < snap {
            x_end = kept as f64 * dx;
        }
        row_cells.push((kept, x_end));
    }

    let cell_x = |k: usize, kept: usize, x_end: f64| -> (f64, f64) {
        let x0 = k as f64 * dx;
        let x1 = if k + 1 == kept { x_end } else { (k + 1) as f64 * dx };
        (x0, x1)
    };

    // Node positions per level.
    let mut level_x: Vec<BTreeSet<i64>> = vec![BTreeSet::new(); plan.ny + 1];
    let mut xs_of: Vec<Vec<f64>> = vec![Vec::new(); plan.ny + 1];
    for (j, &(kept, x_end)) in row_cells.iter().enumerate() {
        for k in 0..kept {
            let (x0, x1) = cell_x(k, kept, x_end);
            for (lvl, x) in [(j, x0), (j, x1), (j + 1, x0), (j + 1, x1)] {
                if level_x[lvl].insert(x_key(x)) {
                    xs_of[lvl].push(x);
                }
            }
        }
    }
    let levels: Vec<f64> = (0..=plan.ny).map(|j| j as f64 * dy).collect();
    let mut nodes = Vec::new();
    let mut node_at: Vec<Vec<(i64, usize)>> = Vec::with_capacity(plan.ny + 1);
    for (lvl, xs) in xs_of.iter_mut().enumerate() {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ids = Vec::with_capacity(xs.len());
        for &x in xs.iter() {
            ids.push((x_key(x), nodes.len()));
            nodes.push(Node {
                x,
                y: levels[lvl],
                level: lvl,
            });
        }
        node_at.push(ids);
    }
    let find = |lvl: usize, x: f64| -> usize {
        let key = x_key(x);
        let ids = &node_at[lvl];
        ids[ids.binary_search_by_key(&key, |&(k, _)| k).expect("node registered")].1
    };

    let mut elements = Vec::new();
    let mut rows = Vec::with_capacity(plan.ny);
    for (j, &(kept, x_end)) in row_cells.iter().enumerate() {
        let start = elements.len();
        for k in 0..kept {
            let (x0, x1) = cell_x(k, kept, x_end);
            elements.push(Element {
                nodes: [find(j, x0), find(j, x1), find(j + 1, x1), find(j + 1, x0)],
                row: j,
                x0,
                x1,
                y0: levels[j],
                y1: levels[j + 1],
            });
        }
        rows.push(start..elements.len());
    }

    // Hanging nodes: bottom corners of row j that are not top corners of row j - 1.
    let mut hanging = Vec::new();
    for j in 1..plan.ny {
        let below = &elements[rows[j - 1].clone()];
        let here = &elements[rows[j].clone()];
        let top_corners: BTreeSet<usize> = below.iter().flat_map(|e| [e.nodes[3], e.nodes[2]]).collect();
        let bottom_corners: BTreeSet<usize> = here.iter().flat_map(|e| [e.nodes[0], e.nodes[1]]).collect();
        for &n in bottom_corners.difference(&top_corners) {
            let x = nodes[n].x;
            let host = below
                .iter()
                .find(|e| x > e.x0 + snap && x < e.x1 - snap)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "node {n} at ({x}, {}) has no supporting edge below",
                        nodes[n].y
                    ))
                })?;
            let ratio = (x - host.x0) / host.width();
            hanging.push(HangingConstraint::new(n, [host.nodes[3], host.nodes[2]], ratio)?);
        }
        for &n in top_corners.difference(&bottom_corners) {
            let x = nodes[n].x;
            if here.iter().any(|e| x > e.x0 + snap && x < e.x1 - snap) {
                return Err(Error::Config(format!(
                    "node {n} at ({x}, {}) lies inside an edge of the layer above",
                    nodes[n].y
                )));
            }
        }
    }
    super::constraints::check_acyclic(&hanging)?;

    Ok(Mesh {
        nodes,
        elements,
        rows,
        hanging,
        levels,
    })
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Right end of the material in row `j`.
    pub fn row_end(&self, j: usize) -> f64 {
        self.elements[self.rows[j].end - 1].x1
    }

    /// Free-surface segments when the first `n_active` elements are printed.
    ///
    /// The base (y = 0) is excluded because it carries Dirichlet conditions.
    pub fn exposed_segments(&self, n_active: usize) -> Vec<BoundarySegment> {
        let mut out = Vec::new();
        if n_active == 0 {
            return out;
        }
        // Right end of the printed part of each row.
        let covered = |j: usize| -> f64 {
            let r = &self.rows[j];
            if r.start >= n_active {
                f64::NEG_INFINITY
            } else {
                self.elements[(r.end.min(n_active)) - 1].x1
            }
        };
        for (id, e) in self.elements[..n_active].iter().enumerate() {
            let r = &self.rows[e.row];
            let seg = |p0: [f64; 2], p1: [f64; 2]| BoundarySegment {
                element: id,
                p0,
                p1,
            };
            // bottom, against the row below
            if e.row > 0 {
                let c = covered(e.row - 1);
                if c < e.x1 {
                    out.push(seg([e.x0.max(c), e.y0], [e.x1, e.y0]));
                }
            }
            // right
            if id + 1 == r.end || id + 1 >= n_active {
                out.push(seg([e.x1, e.y0], [e.x1, e.y1]));
            }
            // top, against the row above
            let c = if e.row + 1 < self.rows.len() {
                covered(e.row + 1)
            } else {
                f64::NEG_INFINITY
            };
            if c < e.x1 {
                out.push(seg([e.x1, e.y1], [e.x0.max(c), e.y1]));
            }
            // left
            if id == r.start {
                out.push(seg([e.x0, e.y1], [e.x0, e.y0]));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hole_plan(nx: usize, ny: usize, r: f64) -> BuildPlan {
        BuildPlan {
            geometry: Geometry::QuarterHole { radius: r },
            ..BuildPlan::wall(15.0, 10.0, nx, ny, 0.006)
        }
    }

    #[test]
    fn paper_wall_counts() {
        let mut plan = BuildPlan::wall(20.0, 10.0, 40, 30, 0.006);
        plan.n_layers = 30;
        let m = build_mesh(&plan).unwrap();
        assert_eq!(m.n_nodes(), 41 * 31);
        assert_eq!(m.n_elements(), 1200);
        assert!(m.hanging.is_empty());
    }

    #[test]
    fn single_element() {
        let m = build_mesh(&BuildPlan::wall(1.0, 1.0, 1, 1, 0.01)).unwrap();
        assert_eq!(m.n_nodes(), 4);
        assert_eq!(m.elements[0].nodes, [0, 1, 3, 2]);
    }

    #[test]
    fn hole_keeps_cells_with_centroid_outside() {
        let plan = hole_plan(30, 20, 3.0);
        let m = build_mesh(&plan).unwrap();
        let (dx, dy) = (plan.dx(), plan.dy());
        let mut expected = 0;
        for j in 0..20 {
            for k in 0..30 {
                let (xc, yc) = ((k as f64 + 0.5) * dx, (j as f64 + 0.5) * dy);
                if (xc - 15.0).hypot(yc - 10.0) >= 3.0 {
                    expected += 1;
                }
            }
        }
        assert_eq!(m.n_elements(), expected);
        assert!(!m.hanging.is_empty());
        for h in &m.hanging {
            let n = m.nodes[h.node];
            let (a, b) = (m.nodes[h.masters[0]], m.nodes[h.masters[1]]);
            assert_eq!(n.y, a.y);
            assert!((a.x + h.ratio * (b.x - a.x) - n.x).abs() < 1e-12);
        }
    }

    #[test]
    fn exposed_boundary_of_full_wall_is_perimeter_minus_base() {
        let m = build_mesh(&BuildPlan::wall(4.0, 2.0, 4, 2, 0.01)).unwrap();
        let len: f64 = m.exposed_segments(8).iter().map(|s| s.length()).sum();
        assert!((len - 8.0).abs() < 1e-12);
        // first element alone: right, top, left
        let len: f64 = m.exposed_segments(1).iter().map(|s| s.length()).sum();
        assert!((len - 3.0).abs() < 1e-12);
        // first row plus one element on top: 1 + 4 + 1 (first row sides and top)
        // + 1 + 1 + 1 (second element sides and top) - 1 (covered top) = 8
        let len: f64 = m.exposed_segments(5).iter().map(|s| s.length()).sum();
        assert!((len - 8.0).abs() < 1e-12);
    }

    #[test]
    fn bad_geometry_rejected() {
        let mut plan = hole_plan(10, 10, 12.0);
        assert!(build_mesh(&plan).is_err());
        plan.geometry = Geometry::QuarterHole { radius: 3.0 };
        plan.n_layers = 3;
        assert!(matches!(build_mesh(&plan), Err(Error::Config(_))));
    }

    #[test]
    fn ratio_must_be_interior() {
        assert!(HangingConstraint::new(2, [0, 1], 1.0).is_err());
        assert!(HangingConstraint::new(2, [0, 1], 0.0).is_err());
        assert!(HangingConstraint::new(2, [0, 1], 0.5).is_ok());
    }
}
