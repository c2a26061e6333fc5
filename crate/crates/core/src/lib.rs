// `!(x > 0.0)` guards reject NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod error;
pub mod exec;
pub mod forward;
pub mod numerics;
pub mod scenario;
pub mod verification;

pub use error::{Error, Result};
pub use exec::Execution;
