//! Gauss-Legendre rules and bilinear shape functions.

/// 3-point Gauss-Legendre points and weights on [-1, 1].
pub const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Parent coordinates of the four corners, counter-clockwise from bottom-left.
const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Bilinear shape function values at (xi, eta).
pub fn shape(xi: f64, eta: f64) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (a, &(xa, ya)) in CORNERS.iter().enumerate() {
        n[a] = 0.25 * (1.0 + xa * xi) * (1.0 + ya * eta);
    }
    n
}

/// Parent-coordinate derivatives `[dN/dxi, dN/deta]` per node.
pub fn shape_derivatives(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    let mut d = [[0.0; 2]; 4];
    for (a, &(xa, ya)) in CORNERS.iter().enumerate() {
        d[a] = [0.25 * xa * (1.0 + ya * eta), 0.25 * ya * (1.0 + xa * xi)];
    }
    d
}

/// Quadrature point of an axis-aligned rectangle of size `dx` by `dy`.
#[derive(Debug, Clone, Copy)]
pub struct RectPoint {
    pub n: [f64; 4],
    /// Physical gradients `[dN/dx, dN/dy]` per node.
    pub grad: [[f64; 2]; 4],
    /// Weight times Jacobian determinant.
    pub weight: f64,
}

/// 3x3 rule on an axis-aligned rectangle.
pub fn rect_points(dx: f64, dy: f64) -> [RectPoint; 9] {
    let det = 0.25 * dx * dy;
    let mut out = [RectPoint {
        n: [0.0; 4],
        grad: [[0.0; 2]; 4],
        weight: 0.0,
    }; 9];
    let mut k = 0;
    for &(eta, we) in &GAUSS3 {
        for &(xi, wx) in &GAUSS3 {
            let d = shape_derivatives(xi, eta);
            let mut grad = [[0.0; 2]; 4];
            for a in 0..4 {
                grad[a] = [d[a][0] * 2.0 / dx, d[a][1] * 2.0 / dy];
            }
            out[k] = RectPoint {
                n: shape(xi, eta),
                grad,
                weight: wx * we * det,
            };
            k += 1;
        }
    }
    out
}
