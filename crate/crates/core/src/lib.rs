//! Analysis of linear quantum systems: back-action-evading measurement
//! certification, QND interaction conditions, coherent-feedback reduction
//! and stochastic master equation simulation.

pub mod error;
pub mod matcore;
pub mod qsys;
pub mod random;
pub mod xferfn;
pub mod bae;
pub mod qnd;
pub mod feedback;
pub mod kalman;
pub mod sme;

pub use error::{Error, Result, Violation};
pub use matcore::{CMatrix, RMatrix};
pub use qsys::{Form, QuantumLinearSystem, Realization, SystemParams};
