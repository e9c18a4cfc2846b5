pub mod error;
pub mod estimates;
pub mod heatball;
pub mod kernels;
pub mod models;
pub mod numerics;
pub mod reduced_geometry;

pub use error::{Error, Result};
