//! Thermoelastic constitutive law with a temperature-scaled elastic response.
//!
//! The free energy per unit referential volume is
//!
//! ```text
//! psi(eps, theta) = f(theta) * [ 1/2 eps : C0 eps - kappa0 * alpha * (theta - theta0) * ln(1 + tr eps) ]
//!                 + c_bar * (theta - theta0 - theta * ln(theta / theta0))
//! ```
//!
//! where `f` is the softening function returned by [`f_tilde`]. Everything in
//! this module is derived from `psi`: stress, stress-temperature modulus,
//! heat capacity and the partial derivatives the tangent and sensitivity
//! matrices need.
//!
//! Tensors are stored in Voigt form. Stress-like quantities use
//! `[xx, yy, xy]`, strain-like ones use `[xx, yy, 2 xy]`, so a double
//! contraction is a plain dot product. Plane strain is assumed and traces are
//! in-plane.
//!
//! Units are mm, N (MPa), s, K; energies are in mJ (N mm).

use nalgebra::{Matrix3, Vector3};

use crate::error::{invalid, Error, Result};

/// In-plane identity in stress-like Voigt form.
pub const IDENTITY: Vector3<f64> = Vector3::new(1.0, 1.0, 0.0);

/// Material constants in internal units (mm, N, s, K).
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams {
    /// Exponent of the softening function.
    pub a: f64,
    /// Amplitude of the softening function.
    pub b: f64,
    /// Temperature at which `E_0m` was measured (K).
    pub theta_0m: f64,
    /// Young's modulus at `theta_0m` (MPa).
    pub e_0m: f64,
    pub nu: f64,
    /// Thermal expansion coefficient (1/K).
    pub alpha: f64,
    /// Heat capacity per referential volume at the reference temperature (mJ/(mm^3 K)).
    pub c_bar: f64,
    /// Thermal conductivity (mW/(mm K)).
    pub k_cond: f64,
    /// Referential mass density (t/mm^3).
    pub rho_0: f64,
    /// Convection coefficient (mW/(mm^2 K)).
    pub h_conv: f64,
    pub theta_inf: f64,
    pub theta_deposit: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        let rho_si = 1050.0; // kg/m^3
        let cp_si = 2000.0; // J/(kg K)
        MaterialParams {
            a: -5.5,
            b: 1.0,
            theta_0m: 475.0,
            e_0m: 250.0,
            nu: 0.35,
            alpha: 9.0e-5,
            c_bar: crate::units::heat_capacity_from_si(rho_si * cp_si),
            k_cond: crate::units::conductivity_from_si(DEFAULT_CONDUCTIVITY_SI),
            rho_0: crate::units::density_from_si(rho_si),
            h_conv: crate::units::convection_from_si(40.0),
            theta_inf: 315.0,
            theta_deposit: 500.0,
        }
    }
}

/// Default conductivity in W/(m K).
///
/// An effective value: with a plane section and no out-of-plane losses the
/// printed walls only return to ambient within the 240 s dissipation window
/// when the thermal diffusivity is around 1 mm^2/s.
pub const DEFAULT_CONDUCTIVITY_SI: f64 = 2.5;

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive, got {v}")))
            }
        };
        positive("theta_0m", self.theta_0m)?;
        positive("theta_inf", self.theta_inf)?;
        positive("e_0m", self.e_0m)?;
        positive("k_cond", self.k_cond)?;
        positive("rho_0", self.rho_0)?;
        positive("c_bar", self.c_bar)?;
        if !(self.theta_deposit > self.theta_inf) {
            return Err(invalid(
                "theta_deposit",
                format!(
                    "must exceed theta_inf ({} <= {})",
                    self.theta_deposit, self.theta_inf
                ),
            ));
        }
        if !(self.nu > -1.0 && self.nu < 0.5) {
            return Err(invalid("nu", format!("must lie in (-1, 0.5), got {}", self.nu)));
        }
        if !(self.h_conv >= 0.0) {
            return Err(invalid("h_conv", format!("must be non-negative, got {}", self.h_conv)));
        }
        if !self.alpha.is_finite() || !self.a.is_finite() || !self.b.is_finite() {
            return Err(invalid("alpha/a/b", "must be finite"));
        }
        Ok(())
    }

    /// Lame's first parameter at `theta_0m`.
    pub fn lambda(&self) -> f64 {
        self.e_0m * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
    }

    /// Shear modulus at `theta_0m`.
    pub fn mu(&self) -> f64 {
        self.e_0m / (2.0 * (1.0 + self.nu))
    }

    /// Bulk modulus at `theta_0m`.
    pub fn kappa(&self) -> f64 {
        self.e_0m / (3.0 * (1.0 - 2.0 * self.nu))
    }

    /// Plane-strain elasticity matrix at `theta_0m` (maps Voigt strain to stress).
    pub fn elasticity(&self) -> Matrix3<f64> {
        let (l, m) = (self.lambda(), self.mu());
        Matrix3::new(l + 2.0 * m, l, 0.0, l, l + 2.0 * m, 0.0, 0.0, 0.0, m)
    }
}

/// Symmetric 2x2 tensor stored by its tensor components.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 {
        xx: 0.0,
        yy: 0.0,
        xy: 0.0,
    };

    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Sym2 { xx, yy, xy }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// `[xx, yy, 2 xy]`
    pub fn to_strain_voigt(self) -> Vector3<f64> {
        Vector3::new(self.xx, self.yy, 2.0 * self.xy)
    }

    /// `[xx, yy, xy]`
    pub fn to_stress_voigt(self) -> Vector3<f64> {
        Vector3::new(self.xx, self.yy, self.xy)
    }

    pub fn from_strain_voigt(v: &Vector3<f64>) -> Self {
        Sym2::new(v[0], v[1], 0.5 * v[2])
    }

    pub fn from_stress_voigt(v: &Vector3<f64>) -> Self {
        Sym2::new(v[0], v[1], v[2])
    }

    pub fn max_abs(&self) -> f64 {
        self.xx.abs().max(self.yy.abs()).max(self.xy.abs())
    }
}

/// State of one material point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    pub eps: Sym2,
    pub theta: f64,
    /// Referential temperature recorded when the material was deposited.
    pub theta_ref: f64,
    pub eps_dot: Sym2,
}

impl PointState {
    pub fn new(eps: Sym2, theta: f64, theta_ref: f64) -> Self {
        PointState {
            eps,
            theta,
            theta_ref,
            eps_dot: Sym2::ZERO,
        }
    }

    fn check(&self) -> Result<f64> {
        if !(self.theta > 0.0) {
            return Err(Error::NonPositiveTemperature(self.theta));
        }
        if !(self.theta_ref > 0.0) {
            return Err(Error::NonPositiveTemperature(self.theta_ref));
        }
        let j = 1.0 + self.eps.trace();
        if !(j > 0.0) {
            return Err(Error::StrainSingularity(j));
        }
        Ok(j)
    }
}

/// Softening function and its first three temperature derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FTilde {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// `b x^a + b (a - 1) + (1 - a b) x` with `x = theta / theta_0m`.
pub fn f_tilde(theta: f64, p: &MaterialParams) -> Result<FTilde> {
    if !(theta > 0.0) {
        return Err(Error::NonPositiveTemperature(theta));
    }
    let (a, b, t0) = (p.a, p.b, p.theta_0m);
    let x = theta / t0;
    let xa = x.powf(a);
    Ok(FTilde {
        value: b * xa + b * (a - 1.0) + (1.0 - a * b) * x,
        d1: (a * b * xa / x + (1.0 - a * b)) / t0,
        d2: a * (a - 1.0) * b * xa / (x * x) / (t0 * t0),
        d3: a * (a - 1.0) * (a - 2.0) * b * xa / (x * x * x) / (t0 * t0 * t0),
    })
}

/// Helmholtz free energy per unit referential volume.
pub fn free_energy(ps: &PointState, p: &MaterialParams) -> Result<f64> {
    let j = ps.check()?;
    let f = f_tilde(ps.theta, p)?;
    let e = ps.eps.to_strain_voigt();
    let w = 0.5 * e.dot(&(p.elasticity() * e));
    let dtheta = ps.theta - ps.theta_ref;
    Ok(f.value * (w - p.kappa() * p.alpha * dtheta * j.ln())
        + p.c_bar * (dtheta - ps.theta * (ps.theta / ps.theta_ref).ln()))
}

pub fn stress(ps: &PointState, p: &MaterialParams) -> Result<Sym2> {
    Ok(Sym2::from_stress_voigt(&evaluate(ps, p)?.stress))
}

/// Stress-temperature modulus (second mixed derivative of the free energy).
pub fn stress_temperature_modulus(ps: &PointState, p: &MaterialParams) -> Result<Sym2> {
    Ok(Sym2::from_stress_voigt(&evaluate(ps, p)?.modulus))
}

/// Volumetric heat capacity `-theta d2psi/dtheta2`.
pub fn heat_capacity(ps: &PointState, p: &MaterialParams) -> Result<f64> {
    Ok(evaluate(ps, p)?.capacity)
}

/// Fourier heat flux `-k grad(theta)`.
pub fn heat_flux(grad_theta: [f64; 2], p: &MaterialParams) -> [f64; 2] {
    [-p.k_cond * grad_theta[0], -p.k_cond * grad_theta[1]]
}

/// Inward boundary flux `h (theta_inf - theta)`.
pub fn convection_flux(theta_surface: f64, p: &MaterialParams) -> f64 {
    p.h_conv * (p.theta_inf - theta_surface)
}

pub fn tangent_moduli(ps: &PointState, p: &MaterialParams) -> Result<TangentModuli> {
    Ok(evaluate(ps, p)?.tangent)
}

/// Derivatives of the stress, modulus and capacity.
///
/// `*_dstrain` quantities act on Voigt strain increments, `*_dtheta_ref` are
/// taken with respect to the referential temperature.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TangentModuli {
    pub dstress_dstrain: Matrix3<f64>,
    pub dstress_dtheta: Vector3<f64>,
    pub dmodulus_dstrain: Matrix3<f64>,
    pub dmodulus_dtheta: Vector3<f64>,
    pub dcapacity_dstrain: Vector3<f64>,
    pub dcapacity_dtheta: f64,
    pub dstress_dtheta_ref: Vector3<f64>,
    pub dmodulus_dtheta_ref: Vector3<f64>,
    pub dcapacity_dtheta_ref: f64,
}

/// Full constitutive response at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    pub stress: Vector3<f64>,
    pub modulus: Vector3<f64>,
    pub capacity: f64,
    pub tangent: TangentModuli,
}

/// Evaluates stress, modulus, capacity and every derivative in one pass.
pub fn evaluate(ps: &PointState, p: &MaterialParams) -> Result<Response> {
    let j = ps.check()?;
    let f = f_tilde(ps.theta, p)?;
    evaluate_with(ps, p, &p.elasticity(), &f, j, true)
}

/// Same as [`evaluate`] with precomputed pieces; used by the element loops.
///
/// Without `with_tangent` the derivatives are left at zero.
pub fn evaluate_with(
    ps: &PointState,
    p: &MaterialParams,
    c0: &Matrix3<f64>,
    f: &FTilde,
    j: f64,
    with_tangent: bool,
) -> Result<Response> {
    let theta = ps.theta;
    let e = ps.eps.to_strain_voigt();
    let s0 = c0 * e;
    let w = 0.5 * e.dot(&s0);
    let ka = p.kappa() * p.alpha;
    let q = 1.0 / j;
    let ln_j = j.ln();
    let dth = theta - ps.theta_ref;
    let (f0, f1, f2, f3) = (f.value, f.d1, f.d2, f.d3);
    let ixi = IDENTITY * IDENTITY.transpose();

    let stress = (s0 - IDENTITY * (ka * dth * q)) * f0;
    let modulus = s0 * f1 - IDENTITY * ((f1 * dth + f0) * ka * q);
    let g = f2 * dth + 2.0 * f1;
    let capacity = -theta * f2 * w + theta * ka * ln_j * g + p.c_bar;

    if !with_tangent {
        return Ok(Response {
            stress,
            modulus,
            capacity,
            tangent: TangentModuli::default(),
        });
    }
    let tangent = TangentModuli {
        dstress_dstrain: (c0 + ixi * (ka * dth * q * q)) * f0,
        dstress_dtheta: modulus,
        dmodulus_dstrain: c0 * f1 + ixi * ((f1 * dth + f0) * ka * q * q),
        dmodulus_dtheta: s0 * f2 - IDENTITY * (g * ka * q),
        dcapacity_dstrain: s0 * (-theta * f2) + IDENTITY * (theta * ka * q * g),
        dcapacity_dtheta: -(f2 + theta * f3) * w
            + ka * ln_j * (g + theta * (f3 * dth + 3.0 * f2)),
        dstress_dtheta_ref: IDENTITY * (f0 * ka * q),
        dmodulus_dtheta_ref: IDENTITY * (f1 * ka * q),
        dcapacity_dtheta_ref: -theta * ka * ln_j * f2,
    };
    Ok(Response {
        stress,
        modulus,
        capacity,
        tangent,
    })
}

/// Precomputed pieces shared by every quadrature point of a run.
#[derive(Debug, Clone)]
pub struct MaterialCache {
    pub c0: Matrix3<f64>,
}

impl MaterialCache {
    pub fn new(p: &MaterialParams) -> Self {
        MaterialCache { c0: p.elasticity() }
    }

    pub fn evaluate(&self, ps: &PointState, p: &MaterialParams) -> Result<Response> {
        self.evaluate_partial(ps, p, true)
    }

    /// Skips the derivatives unless `with_tangent` is set.
    pub fn evaluate_partial(&self, ps: &PointState, p: &MaterialParams, with_tangent: bool) -> Result<Response> {
        let j = ps.check()?;
        let f = f_tilde(ps.theta, p)?;
        evaluate_with(ps, p, &self.c0, &f, j, with_tangent)
    }
}
