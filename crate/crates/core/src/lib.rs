//! Parametric conformal prediction regions for generalized linear models.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod conformal;
pub mod diagnostics;
pub mod error;
pub mod glm;
pub mod io;
pub mod methods;
pub mod parametric;
pub mod partition;
mod roots;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
