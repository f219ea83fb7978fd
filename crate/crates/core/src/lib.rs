pub mod error;
pub mod formulation;
pub mod heuristic;
pub mod ingest;
pub mod model;
pub mod report;
pub mod simulate;
pub mod solve;

pub use error::{CoreError, Result};
