//! Simulation and bound checking for the smallest network that shows progressive
//! sharpening and the edge of stability: a width-one, two-layer linear model
//! `f(x) = α(β1·x1 + β2·x2)` fit to `y = x2` under Gaussian inputs with variances
//! `λ1` (large, irrelevant feature) and `λ2` (small, relevant feature).
//!
//! The crate is `no_std` (with `alloc`). Everything here is a pure function of its
//! inputs; file formats, plotting and the command line live in `eos-harness`.
//!
//! Parameter vectors and matrices are always ordered `(α, β1, β2)`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod constrained;
pub mod dynamics;
pub mod eigen;
mod error;
pub mod model;
mod num;
pub mod regions;

pub use error::Error;
pub use model::{LossParts, ModelConfig, Params, SharpnessInfo};

pub type Result<T, E = Error> = core::result::Result<T, E>;
