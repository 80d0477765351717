//! Element residuals, tangents and the derivative blocks used by the
//! sensitivity recursion.
//!
//! Local unknowns are interleaved per corner: `3 a + 0` is `u_x`, `3 a + 1`
//! is `u_y`, `3 a + 2` is `theta`. Displacement-only blocks (8 columns) use
//! `2 a + c`, temperature-only blocks (4 columns) use `a`.
//!
//! Momentum residual: `M_u a + int B^T sigma`. Energy residual:
//! `int N c theta_dot + k int grad N . grad theta - int N theta M : eps_dot
//!  + int_G N h (theta - theta_inf)`. Velocity and acceleration follow the
//! trapezoidal rule, the temperature rate backward Euler.

use nalgebra::{SMatrix, SVector, Vector3};

use crate::deposition::mesh::EdgePoint;
use crate::error::Result;
use crate::material::{MaterialCache, MaterialParams, PointState, Response, Sym2};
use crate::quadrature::rect_points;

pub type Vec12 = SVector<f64, 12>;
pub type Mat12 = SMatrix<f64, 12, 12>;
pub type Mat12x8 = SMatrix<f64, 12, 8>;
pub type Mat12x4 = SMatrix<f64, 12, 4>;

/// Local snapshot of one element at the current Newton iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementState {
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
    pub u: [f64; 8],
    pub u_prev: [f64; 8],
    pub v_prev: [f64; 8],
    pub a_prev: [f64; 8],
    pub u_his: [f64; 8],
    pub theta: [f64; 4],
    pub theta_prev: [f64; 4],
    pub theta_his: [f64; 4],
}

impl ElementState {
    pub fn velocity(&self) -> [f64; 8] {
        std::array::from_fn(|i| 2.0 / self.dt * (self.u[i] - self.u_prev[i]) - self.v_prev[i])
    }

    pub fn acceleration(&self) -> [f64; 8] {
        let dt = self.dt;
        std::array::from_fn(|i| {
            4.0 / (dt * dt) * (self.u[i] - self.u_prev[i] - dt * self.v_prev[i]) - self.a_prev[i]
        })
    }

    pub fn theta_rate(&self) -> [f64; 4] {
        std::array::from_fn(|i| (self.theta[i] - self.theta_prev[i]) / self.dt)
    }
}

/// Strain-displacement column of corner gradient `g` for component `c`.
#[inline]
fn bcol(g: &[f64; 2], c: usize) -> Vector3<f64> {
    if c == 0 {
        Vector3::new(g[0], 0.0, g[1])
    } else {
        Vector3::new(0.0, g[1], g[0])
    }
}

struct Qp {
    n: [f64; 4],
    g: [[f64; 2]; 4],
    w: f64,
    r: Response,
    eps_dot: Vector3<f64>,
    theta: f64,
    theta_dot: f64,
    grad_theta: [f64; 2],
    acc: [f64; 2],
}

fn eval_points(
    st: &ElementState,
    p: &MaterialParams,
    mat: &MaterialCache,
    with_tangent: bool,
) -> Result<Vec<Qp>> {
    let vel = st.velocity();
    let acc = st.acceleration();
    let tdot = st.theta_rate();
    let mut out = Vec::with_capacity(9);
    for q in rect_points(st.dx, st.dy) {
        let mut eps = Vector3::zeros();
        let mut eps_dot = Vector3::zeros();
        let (mut th, mut th0, mut thd) = (0.0, 0.0, 0.0);
        let mut gt = [0.0; 2];
        let mut ac = [0.0; 2];
        for a in 0..4 {
            for c in 0..2 {
                let b = bcol(&q.grad[a], c);
                eps += b * (st.u[2 * a + c] - st.u_his[2 * a + c]);
                eps_dot += b * vel[2 * a + c];
                ac[c] += q.n[a] * acc[2 * a + c];
            }
            th += q.n[a] * st.theta[a];
            th0 += q.n[a] * st.theta_his[a];
            thd += q.n[a] * tdot[a];
            gt[0] += q.grad[a][0] * st.theta[a];
            gt[1] += q.grad[a][1] * st.theta[a];
        }
        let ps = PointState {
            eps: Sym2::from_strain_voigt(&eps),
            theta: th,
            theta_ref: th0,
            eps_dot: Sym2::from_strain_voigt(&eps_dot),
        };
        out.push(Qp {
            n: q.n,
            g: q.grad,
            w: q.weight,
            r: mat.evaluate_partial(&ps, p, with_tangent)?,
            eps_dot,
            theta: th,
            theta_dot: thd,
            grad_theta: gt,
            acc: ac,
        });
    }
    Ok(out)
}

/// Element residual and, if requested, its Jacobian in the local unknowns.
pub fn residual_and_tangent(
    st: &ElementState,
    edges: &[EdgePoint],
    p: &MaterialParams,
    mat: &MaterialCache,
    want_tangent: bool,
) -> Result<(Vec12, Option<Mat12>)> {
    let qps = eval_points(st, p, mat, want_tangent)?;
    let mut r = Vec12::zeros();
    let mut k = Mat12::zeros();
    let rho = p.rho_0;
    let inertia = 4.0 / (st.dt * st.dt);
    for q in &qps {
        let s = &q.r.stress;
        let m = &q.r.modulus;
        let md = m.dot(&q.eps_dot);
        for a in 0..4 {
            let (na, ga) = (q.n[a], &q.g[a]);
            r[3 * a] += q.w * (rho * na * q.acc[0] + ga[0] * s[0] + ga[1] * s[2]);
            r[3 * a + 1] += q.w * (rho * na * q.acc[1] + ga[1] * s[1] + ga[0] * s[2]);
            r[3 * a + 2] += q.w
                * (na * q.r.capacity * q.theta_dot
                    + p.k_cond * (ga[0] * q.grad_theta[0] + ga[1] * q.grad_theta[1])
                    - na * q.theta * md);
        }
        if !want_tangent {
            continue;
        }
        let t = &q.r.tangent;
        // energy row acting on displacement columns
        let qu: Vector3<f64> = t.dcapacity_dstrain * q.theta_dot
            - t.dmodulus_dstrain.transpose() * q.eps_dot * q.theta
            - m * (q.theta * 2.0 / st.dt);
        let tt = t.dcapacity_dtheta * q.theta_dot + q.r.capacity / st.dt
            - md
            - q.theta * t.dmodulus_dtheta.dot(&q.eps_dot);
        let mut db = [[Vector3::zeros(); 2]; 4];
        for b in 0..4 {
            for c in 0..2 {
                db[b][c] = t.dstress_dstrain * bcol(&q.g[b], c);
            }
        }
        for a in 0..4 {
            let (na, ga) = (q.n[a], &q.g[a]);
            for i in 0..2 {
                let ba = bcol(ga, i);
                for b in 0..4 {
                    let nb = q.n[b];
                    for j in 0..2 {
                        let mut v = ba.dot(&db[b][j]);
                        if i == j {
                            v += rho * na * nb * inertia;
                        }
                        k[(3 * a + i, 3 * b + j)] += q.w * v;
                    }
                    k[(3 * a + i, 3 * b + 2)] += q.w * ba.dot(m) * nb;
                }
            }
            for b in 0..4 {
                let (nb, gb) = (q.n[b], &q.g[b]);
                for j in 0..2 {
                    k[(3 * a + 2, 3 * b + j)] += q.w * na * qu.dot(&bcol(gb, j));
                }
                k[(3 * a + 2, 3 * b + 2)] +=
                    q.w * (na * nb * tt + p.k_cond * (ga[0] * gb[0] + ga[1] * gb[1]));
            }
        }
    }
    for e in edges {
        let th: f64 = (0..4).map(|a| e.n[a] * st.theta[a]).sum();
        for a in 0..4 {
            r[3 * a + 2] += e.weight * e.n[a] * p.h_conv * (th - p.theta_inf);
            if want_tangent {
                for b in 0..4 {
                    k[(3 * a + 2, 3 * b + 2)] += e.weight * e.n[a] * p.h_conv * e.n[b];
                }
            }
        }
    }
    Ok((r, want_tangent.then_some(k)))
}

/// Derivatives of the element residual with respect to the previous step.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorStepMatrices {
    pub du_prev: Mat12x8,
    pub dv_prev: Mat12x8,
    pub da_prev: Mat12x8,
    pub dtheta_prev: Mat12x4,
}

/// Derivatives of the element residual with respect to its history variables.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryMatrices {
    pub du_his: Mat12x8,
    pub dtheta_his: Mat12x4,
}

pub fn prior_step_matrices(
    st: &ElementState,
    p: &MaterialParams,
    mat: &MaterialCache,
) -> Result<PriorStepMatrices> {
    let qps = eval_points(st, p, mat, false)?;
    let mut out = PriorStepMatrices {
        du_prev: Mat12x8::zeros(),
        dv_prev: Mat12x8::zeros(),
        da_prev: Mat12x8::zeros(),
        dtheta_prev: Mat12x4::zeros(),
    };
    let dt = st.dt;
    for q in &qps {
        let m = &q.r.modulus;
        for a in 0..4 {
            let na = q.n[a];
            for b in 0..4 {
                let nb = q.n[b];
                let mass = q.w * p.rho_0 * na * nb;
                for c in 0..2 {
                    out.du_prev[(3 * a + c, 2 * b + c)] -= 4.0 / (dt * dt) * mass;
                    out.dv_prev[(3 * a + c, 2 * b + c)] -= 4.0 / dt * mass;
                    out.da_prev[(3 * a + c, 2 * b + c)] -= mass;
                    let tm = q.w * na * q.theta * m.dot(&bcol(&q.g[b], c));
                    out.du_prev[(3 * a + 2, 2 * b + c)] += 2.0 / dt * tm;
                    out.dv_prev[(3 * a + 2, 2 * b + c)] += tm;
                }
                out.dtheta_prev[(3 * a + 2, b)] -= q.w * na * q.r.capacity / dt * nb;
            }
        }
    }
    Ok(out)
}

pub fn history_matrices(
    st: &ElementState,
    p: &MaterialParams,
    mat: &MaterialCache,
) -> Result<HistoryMatrices> {
    let qps = eval_points(st, p, mat, true)?;
    let mut out = HistoryMatrices {
        du_his: Mat12x8::zeros(),
        dtheta_his: Mat12x4::zeros(),
    };
    for q in &qps {
        let t = &q.r.tangent;
        let qu: Vector3<f64> =
            t.dcapacity_dstrain * q.theta_dot - t.dmodulus_dstrain.transpose() * q.eps_dot * q.theta;
        let t0 = q.theta_dot * t.dcapacity_dtheta_ref - q.theta * t.dmodulus_dtheta_ref.dot(&q.eps_dot);
        for a in 0..4 {
            let (na, ga) = (q.n[a], &q.g[a]);
            for b in 0..4 {
                let (nb, gb) = (q.n[b], &q.g[b]);
                for j in 0..2 {
                    let bb = bcol(gb, j);
                    let dsb: Vector3<f64> = t.dstress_dstrain * bb;
                    for i in 0..2 {
                        out.du_his[(3 * a + i, 2 * b + j)] -= q.w * bcol(ga, i).dot(&dsb);
                    }
                    out.du_his[(3 * a + 2, 2 * b + j)] -= q.w * na * qu.dot(&bb);
                }
                for i in 0..2 {
                    out.dtheta_his[(3 * a + i, b)] += q.w * bcol(ga, i).dot(&t.dstress_dtheta_ref) * nb;
                }
                out.dtheta_his[(3 * a + 2, b)] += q.w * na * t0 * nb;
            }
        }
    }
    Ok(out)
}

/// Derivative of the element residual with respect to the convection coefficient
/// (internal units).
pub fn dr_dh(st: &ElementState, edges: &[EdgePoint], p: &MaterialParams) -> Vec12 {
    let mut r = Vec12::zeros();
    for e in edges {
        let th: f64 = (0..4).map(|a| e.n[a] * st.theta[a]).sum();
        for a in 0..4 {
            r[3 * a + 2] += e.weight * e.n[a] * (th - p.theta_inf);
        }
    }
    r
}

/// Element operators in the split form
/// `r1 = M_u a + R_u - F`, `r2 = T theta_dot + M_t theta + R_t - Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMatrices {
    pub mass: SMatrix<f64, 8, 8>,
    pub internal_force: SVector<f64, 8>,
    pub body_force: SVector<f64, 8>,
    pub capacity: SMatrix<f64, 4, 4>,
    pub conduction: SMatrix<f64, 4, 4>,
    pub coupling: SVector<f64, 4>,
    pub heat_load: SVector<f64, 4>,
}

pub fn element_matrices(
    st: &ElementState,
    edges: &[EdgePoint],
    p: &MaterialParams,
    mat: &MaterialCache,
) -> Result<ElementMatrices> {
    let qps = eval_points(st, p, mat, false)?;
    let mut out = ElementMatrices {
        mass: SMatrix::zeros(),
        internal_force: SVector::zeros(),
        body_force: SVector::zeros(),
        capacity: SMatrix::zeros(),
        conduction: SMatrix::zeros(),
        coupling: SVector::zeros(),
        heat_load: SVector::zeros(),
    };
    for q in &qps {
        let s = &q.r.stress;
        let md = q.r.modulus.dot(&q.eps_dot);
        for a in 0..4 {
            let (na, ga) = (q.n[a], &q.g[a]);
            out.internal_force[2 * a] += q.w * (ga[0] * s[0] + ga[1] * s[2]);
            out.internal_force[2 * a + 1] += q.w * (ga[1] * s[1] + ga[0] * s[2]);
            out.coupling[a] -= q.w * na * q.theta * md;
            for b in 0..4 {
                let (nb, gb) = (q.n[b], &q.g[b]);
                for c in 0..2 {
                    out.mass[(2 * a + c, 2 * b + c)] += q.w * p.rho_0 * na * nb;
                }
                out.capacity[(a, b)] += q.w * na * q.r.capacity * nb;
                out.conduction[(a, b)] += q.w * p.k_cond * (ga[0] * gb[0] + ga[1] * gb[1]);
            }
        }
    }
    for e in edges {
        for a in 0..4 {
            out.heat_load[a] += e.weight * e.n[a] * p.h_conv * p.theta_inf;
            for b in 0..4 {
                out.conduction[(a, b)] += e.weight * e.n[a] * p.h_conv * e.n[b];
            }
        }
    }
    Ok(out)
}

/// Stresses at the nine quadrature points.
pub fn quadrature_stresses(
    st: &ElementState,
    p: &MaterialParams,
    mat: &MaterialCache,
) -> Result<Vec<Vector3<f64>>> {
    Ok(eval_points(st, p, mat, false)?.into_iter().map(|q| q.r.stress).collect())
}

