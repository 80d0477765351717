//! Thermoelastic simulation of layer-by-layer deposition with element birth,
//! a shape-error objective and forward sensitivities of that objective with
//! respect to the convection coefficient.

pub mod deposition;
pub mod error;
pub mod evaluate;
pub mod fem;
pub mod linalg;
pub mod material;
pub mod objective;
pub mod quadrature;
pub mod sensitivity;
pub mod units;

pub use error::{Error, Result};
