//! Local discontinuous Galerkin discretisation of steady p-Stokes and
//! p-Navier-Stokes flow with (p, δ)-structure on the square `(-1, 1)²`.

// index loops mirror the component formulas; `!(x > 0)` also rejects NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod constitutive;
pub mod dgops;
pub mod dual;
pub mod error;
pub mod experiments;
pub mod mesh;
pub mod newton;
pub mod quadrature;
pub mod report;
pub mod spaces;
pub mod sparse;
pub mod tensor;
#[cfg(feature = "umfpack")]
mod umfpack;

pub use error::{LdgError, Result};
