//! Multipoint iterative solvers for zeros of known multiplicity.
//!
//! The crate is organised around a handful of modules:
//!
//! * [`scalar`]: precision-parameterized real/complex numbers and the
//!   principal m-th root;
//! * [`exprs`]: the function-expression grammar, symbolic derivative and
//!   counting evaluation oracles;
//! * [`weights`]: weight functions with exact Taylor metadata and the
//!   per-family convergence conditions;
//! * [`solvers`]: single-step maps of every family and the iteration driver;
//! * [`series`]: exact truncated power series and the order oracle;
//! * [`analysis`]: computational order of convergence over a test corpus;
//! * [`bench`]: m-th root and Horner timing at hardware double precision.

pub mod analysis;
pub mod bench;
pub mod exprs;
pub mod family;
pub mod scalar;
pub mod series;
pub mod solvers;
pub mod weights;

pub use family::{Family, MethodParams};
pub use scalar::{DomainMode, Scalar};
