//! Certificates for the uniqueness of canonical polyadic decompositions.
//!
//! Given factor matrices `A`, `B`, `C` of a polyadic decomposition
//! `T = [A, B, C]_R`, this crate decides (or, where no decision procedure
//! exists, bounds) a hierarchy of sufficient conditions built on compound
//! matrices and assembles them into an auditable uniqueness certificate.
//!
//! Exact rational arithmetic is the default backend; a floating-point
//! backend with an explicit rank tolerance is available for measured data.
//! Only real (and rational) scalars are supported; complex factor matrices
//! are not.

pub mod certify;
pub mod cli;
pub mod combinatorics;
pub mod compound;
pub mod conditions;
mod error;
pub mod linalg;
pub mod report;
mod settings;
pub mod tensor;

pub use error::{Error, Result};
pub use linalg::{Field, Matrix, Rational};
pub use settings::{Settings, DEFAULT_SEARCH_RESTARTS, DEFAULT_TOLERANCE};

/// Library version recorded in certificates.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
