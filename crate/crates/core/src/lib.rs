pub mod cli;
pub mod discretization;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
