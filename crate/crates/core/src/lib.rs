//! Train deep linear (and ReLU) networks on nearly-orthonormal synthetic
//! data, measure how features compress within classes and separate between
//! classes layer by layer, and check the measurements against explicit
//! layerwise bounds.
//!
//! Modules, bottom-up: [`numerics`] → [`dataset`] → [`network`] →
//! [`training`] → [`metrics`] → [`theory`] → [`harness`].

pub mod audit;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod network;
pub mod numerics;
pub mod theory;
pub mod training;

pub use error::{Error, Result};
pub use numerics::Matrix;
