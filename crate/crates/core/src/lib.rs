//! Numerical laboratory for simple-versus-simple testing in the spiked Wigner
//! model `Y = λ·xxᵀ/‖x‖² + W`.
//!
//! Modules, bottom up: [`prior`] and [`model`] sample observations,
//! [`spectral`] computes the LSS statistic and its calibrated tests, [`roc`]
//! holds the curve `φ_λ`, the `val` functional and the envelope
//! constructions, [`lowdeg`] evaluates likelihood-ratio norms, and
//! [`witness`] turns a battery of tests into a ratio witness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lowdeg;
pub mod model;
pub mod normal;
pub mod prior;
pub mod quad;
pub mod roc;
pub mod spectral;
pub mod stream;
pub mod witness;

pub use error::{Error, Result};
