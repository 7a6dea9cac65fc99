//! Numerical laboratory for maximum-a-posteriori estimation under diagonal
//! Gaussian priors on truncated ℓ^p sequence spaces.

pub mod amf;
pub mod config;
pub mod convexify;
pub mod error;
pub mod gaussian;
pub mod inverse;
pub mod numeric;
pub mod quadrature;
pub mod report;
pub mod runner;
pub mod rng;
pub mod sequence;
pub mod smallball;
pub mod suites;

pub use error::{Error, Result};
pub use gaussian::{DiagonalGaussian, GammaDiagonal, SampleBatch};
pub use sequence::{DerivedConstants, Point, PriorSpec};
