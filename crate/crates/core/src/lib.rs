//! Linearity tests for the reduced dynamics of open quantum systems.
//!
//! Given a finite family of initial system-environment states and a joint
//! unitary, the crate builds the spanned subspace `V`, decides whether it is
//! U-consistent (equivalently, whether the reduced dynamics is a linear map),
//! and, when it is, constructs the assignment map, the dynamical map, its
//! Choi matrix and signed operator-sum decomposition, and the
//! Hermiticity / trace-preservation / complete-positivity verdicts.

pub mod cli;
pub mod consistency;
pub mod error;
pub mod family;
pub mod json;
pub mod maps;
pub mod operator;
pub mod subspace;
pub mod two_qubit;

pub use error::{RdlError, Result};
pub use operator::{BipartiteDims, CMatrix, Tolerances, C64};
