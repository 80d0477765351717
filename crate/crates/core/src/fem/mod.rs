//! Coupled thermoelastic finite elements with element birth.

pub mod assembly;
pub mod element;
pub mod snapshot;
pub mod solver;
pub mod state;

pub use solver::{run_simulation, RunSummary, SimOptions, Simulation, StepReport};
pub use state::{HistoryVars, SimState};
