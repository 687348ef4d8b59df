//! Day-ahead and intraday market model for a renewable virtual power plant
//! with flexible demand, solved by the embedded `milp` solver.

pub mod analysis;
pub mod error;
pub mod formulation;
pub mod market;
pub mod model;
pub mod random;
pub mod report;
pub mod scenario_file;

#[cfg(test)]
pub(crate) mod fixtures;

pub use error::{Error, Result};
