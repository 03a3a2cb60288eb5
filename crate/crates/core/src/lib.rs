//! Quantum stochastic evolution toolkit.
//!
//! Dense complex linear algebra, the symbolic quantum Ito algebra, germ
//! matrices of completely positive cocycles, pseudo-Hilbert dilations,
//! classical (Wiener / Poisson) unravelings and coherent-kernel dynamics.

// indexed loops below walk several parallel arrays at once, and the
// negated float comparisons deliberately treat NaN as invalid input
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dilation;
pub mod generator;
pub mod ito;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod trajectory;

mod error;

pub use error::Error;
pub use linalg::{ComplexMatrix, SuperOperator};

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Schema version stamped into every machine-readable output.
pub const SCHEMA_VERSION: &str = "1";
