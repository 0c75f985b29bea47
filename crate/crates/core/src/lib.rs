//! Minimal nonnegative solutions of nonsymmetric algebraic Riccati equations
//! associated with M-matrices (M-NAREs):
//!
//! ```text
//! X C X - A X - X D + B = 0
//! ```
//!
//! The crate provides the Structured Doubling Algorithm (SDA) with Cayley
//! initialization, the classical rank-1 (Brauer) shift, and the rank-k
//! subspace shift ("SuShi") that moves a whole central invariant subspace of
//! the linearizing matrix away from the imaginary axis before solving, which
//! restores fast convergence on close-to-critical problems.
//!
//! Module map:
//!
//! - [`dense`]: dense linear-algebra primitives (LU, thin QR, eigenvalues,
//!   singular values, Kronecker Sylvester operator).
//! - [`nare`]: the problem model, linearizing matrix, residuals, M-matrix
//!   classification and the Cayley transform.
//! - [`sda`]: the doubling iteration.
//! - [`shift`]: central subspaces, shift selection, shifted matrices and the
//!   SuShi driver.
//! - [`diagnostics`]: gap, Cayley gap, sep, relsep and related measures.
//! - [`problems`]: benchmark generators (transport, random M-matrix).
//! - [`mm`]: Matrix Market array-format I/O.

pub mod dense;
pub mod diagnostics;
mod error;
pub mod mm;
pub mod nare;
pub mod problems;
mod real;
pub mod sda;
pub mod shift;

pub use dense::{Complex, Mat, Spectrum};
pub use error::{Error, Result};
pub use nare::{LinearizingMatrix, MMatrixClass, MMatrixTag, NareProblem, Solution};
pub use real::Real;
pub use sda::{SdaConfig, SdaOutcome, SdaState};
pub use shift::{CentralSubspaces, ShiftPlan, SushiOptions, SushiReport};
