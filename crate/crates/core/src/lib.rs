pub mod bessel;
pub mod checks;
pub mod config;
pub mod error;
pub mod kernels;
pub(crate) mod layer;
pub mod output;
pub mod params;
pub mod observer;
pub mod plant;
pub mod quadrature;
pub mod scenario;
pub mod tridiag;

pub use error::{Error, Result};
