//! Hours-ahead power grid risk assessment.
//!
//! The pipeline samples spatio-temporally correlated zonal load and wind
//! scenarios, labels each one by solving a DC security-constrained unit
//! commitment MILP, trains GraphSAGE surrogates on the labels and turns either
//! pathway's outputs into load-shedding and branch-overloading reliability and
//! risk metrics.

pub mod error;
pub mod gnn;
pub mod grid;
pub mod lp;
pub mod pipeline;
pub mod risk;
pub mod scenario;
pub mod scuc;

pub use error::{Error, Result};
