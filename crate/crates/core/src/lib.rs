//! Numerical verification of locally biHölder mappings between sampled
//! Ahlfors regular metric measure spaces.
//!
//! - [`space`]: weighted point clouds, canonical examples and their geometric
//!   parameters (Ahlfors exponent, uniform perfectness).
//! - [`mapping`]: sampled homeomorphisms with biHölder, power-quasisymmetry
//!   and uniform-boundedness analyzers plus the constant calculus relating them.
//! - [`besov`]: `L^p` and Besov norms (exact double sums and the multiscale
//!   discretization), the composition operator and embedding studies.
//! - [`cli`]: JSON-configured batch runs and named presets.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod cli;
pub mod error;
pub mod mapping;
pub mod space;
pub mod stats;

pub use error::{Error, Result};
