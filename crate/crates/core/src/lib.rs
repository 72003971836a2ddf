//! Numerical toolkit for Carnot groups.
pub mod coarea;
pub mod error;
pub mod group;
pub mod linalg;
pub mod maps;
pub mod measure;
pub mod pansu;
pub mod projection;
mod sum;

pub use error::{Error, Result};
pub use group::{AlgebraVector, Group, GroupSchema, Point};
pub use sum::{compensated_sum, NeumaierSum};
