//! Bell scenarios, no-signaling faces, theta-body exclusion certificates,
//! self-testing checks for planar two-qubit models and XOR game constructions.
//!
//! Every container that holds probabilities or matrix entries is generic over
//! [`Scalar`], implemented for exact [`Rational`] and for `f64`. A single
//! computation never mixes the two.

pub mod bell;
pub mod error;
pub mod faces;
pub mod linalg;
pub mod lp;
pub mod scalar;
pub mod sdp;
pub mod selftest;
pub mod theta;
pub mod xor;

pub use bell::{BellBox, BellScenario, CorrelatorTable, EventIndex, Relabeling};
pub use error::{Error, Result};
pub use scalar::{NumMode, Rational, Scalar};
