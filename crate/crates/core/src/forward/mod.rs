//! Path simulation: state, variational equations and the tensor process.

pub mod cost;
pub mod ensemble;
pub mod linear;
pub mod residual;
pub mod state;
pub mod tensor;

pub use cost::{cost, path_cost, path_costs, Estimate};
pub use ensemble::PathEnsemble;
pub use linear::{simulate_first_variation, simulate_linear, LinearSources, Spike};
pub use residual::{variation_stats, VariationStats, HGAMMA_ORDER};
pub use state::{simulate_state, simulate_with, PathSet, StateEnsemble, Trajectory, TrajectoryDump, TrajectoryKind};
pub use tensor::{simulate_tensor, tensor_trajectory, TensorOutcome, TensorStep};
