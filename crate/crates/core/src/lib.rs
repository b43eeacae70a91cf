//! Classical and semi-quantum restricted Boltzmann machines.
//!
//! The crate trains RBMs (hidden pool `{Z}`) and sqRBMs (hidden pool
//! `{X, Y, Z}`) with generalized contrastive divergence or with finite-shot
//! likelihood gradients, and checks every closed form against a dense
//! Gibbs-state oracle.

pub mod datasets;
pub mod error;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod par;
pub mod sampling;
pub mod training;
pub mod validate;

pub use error::{Error, Result};
