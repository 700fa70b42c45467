pub mod cli;
pub mod complexity;
pub mod empirical_process;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod point_sets;
pub mod quadrature;
pub mod rng;
pub mod transport;

pub use error::{Error, Result};
