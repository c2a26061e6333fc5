//! Backward adjoint equations solved by regression Monte Carlo.

pub mod first;
pub mod regression;
pub mod second;

pub use first::{solve_adjoint1, BackwardPair1, EvalScratch};
pub use regression::{FitDiagnostics, RegressionBasis, StepFit};
pub use second::{solve_adjoint2, solve_adjoint2_limit, solve_adjoint2_mollified, BackwardPair2, CauchyReport, Terminal};
