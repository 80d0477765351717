//! Box-constrained optimizers for expensive objectives.
//!
//! - [`gradient`]: projected gradient descent with Armijo backtracking.
//! - [`localvar`]: method of local variations over mixed continuous and
//!   integer variables.
//! - [`bayes`]: Gaussian-process Bayesian optimization with expected
//!   improvement.
//!
//! All three minimize. Evaluators report failures as [`EvalError`].

pub mod bayes;
pub mod bounds;
pub mod error;
pub mod gradient;
pub mod localvar;
mod par;

pub use bounds::{Bounds, VarKind};
pub use error::{Error, EvalError, Result};
