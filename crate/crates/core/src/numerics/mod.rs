//! Grids, fields, the elliptic operator, spectral norms and trace operators.

pub mod field;
pub mod grid;
pub mod io;
pub mod operator;
pub mod spectral;
pub mod trace;

pub use field::{Field, TensorField};
pub use grid::{Grid1D, Grid2D};
pub use operator::{EllipticOperator, ImplicitStep, OperatorKind};
pub use spectral::{sobolev_norm, SobolevArg, SpectralBasis};
pub use trace::{delta_star, delta_trace, heat_mollifier};
