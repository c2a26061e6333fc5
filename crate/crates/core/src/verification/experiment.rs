//! Maximum-principle experiment: gaps at the brute-force optimum and the
//! contrapositive check on a deliberately perturbed control.

use super::brute::{brute_force_search, BruteForceResult};
use super::report::{GapCell, SMPReport};
use super::smp::{gap_lattice, sample_steps};
use crate::adjoint::{solve_adjoint1, solve_adjoint2_mollified, RegressionBasis};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forward::{path_costs, simulate_state, Estimate, PathEnsemble, TensorStep};
use crate::scenario::{ControlProcess, Scenario};

/// Number of interior gap sample steps.
pub const GAP_SAMPLES: usize = 8;

/// Gap lattice for the reference control `u` of a scenario.
pub fn gap_at_control(s: &Scenario, u: &ControlProcess, e: &PathEnsemble, exec: Execution) -> Result<SMPReport> {
    let s = s.with_reference(u.clone())?;
    let xbar = simulate_state(&s, u, e, exec)?;
    let rbasis = RegressionBasis::new(s.run.basis_modes, s.run.basis_products);
    let pq = solve_adjoint1(&s, &xbar, e, rbasis, exec)?;
    let step = TensorStep::factored(&s)?;
    let eta = s.run.eta.resolve(s.grid.h());
    let big = solve_adjoint2_mollified(&s, &xbar, e, &pq, eta, rbasis, &step, exec)?;
    gap_lattice(&s, &xbar, &pq, &big, &sample_steps(s.n_t, GAP_SAMPLES), &s.controls.lattice(), exec)
}

/// The perturbed control, its gap lattice, the most negative cell and the
/// paired cost change of a one-step spike placed on that cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedCheck {
    pub block: usize,
    pub choice: Vec<usize>,
    pub report: SMPReport,
    pub worst: GapCell,
    /// `J(spiked) − J(perturbed)` on shared noise.
    pub spike_delta: Estimate,
}

impl PerturbedCheck {
    /// Some cell falls below `−threshold·scale` and its spike lowers `J` by
    /// more than `z` standard errors.
    pub fn passes(&self, threshold: f64, z: f64) -> bool {
        self.worst.mean.mean < -threshold * self.report.scale() && self.spike_delta.mean < -z * self.spike_delta.std_err
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmpExperiment {
    pub brute: BruteForceResult,
    pub at_optimum: SMPReport,
    pub perturbed: PerturbedCheck,
}

/// Paired `J(spike) − J(u)` for the point `v` held on `[k, k+1)`.
pub fn spike_cost_change(s: &Scenario, u: &ControlProcess, e: &PathEnsemble, v: &[f64], k: usize, exec: Execution) -> Result<Estimate> {
    let dt = s.dt();
    let spiked = s.spike_of(u, v.to_vec(), k as f64 * dt, dt)?;
    let base = path_costs(s, &simulate_state(s, u, e, exec)?, exec);
    let other = path_costs(s, &simulate_state(s, &spiked, e, exec)?, exec);
    let diff: Vec<f64> = other.iter().zip(&base).map(|(a, b)| a - b).collect();
    Ok(Estimate::from_samples(&diff))
}

/// Brute-force search, gaps at its optimum, then the same at the
/// single-block change of the optimum that raises `J` the most.
pub fn smp_experiment(s: &Scenario, e: &PathEnsemble, blocks: usize, exec: Execution) -> Result<SmpExperiment> {
    let brute = brute_force_search(s, e, blocks, exec)?;
    let best = brute.best_control(s.n_t)?;
    let at_optimum = gap_at_control(s, &best, e, exec)?;

    let (block, alt) = brute
        .perturbations
        .iter()
        .max_by(|a, b| a.2.mean.total_cmp(&b.2.mean))
        .map(|(b, a, _)| (*b, *a))
        .ok_or_else(|| Error::Domain("the optimum has no finite single-block change".into()))?;
    let mut choice = brute.table[brute.best].choice.clone();
    choice[block] = alt;
    let u = brute.control_of(&choice, s.n_t)?;
    let report = gap_at_control(s, &u, e, exec)?;
    let worst = report
        .cells
        .iter()
        .min_by(|a, b| a.mean.mean.total_cmp(&b.mean.mean))
        .cloned()
        .ok_or_else(|| Error::Domain("empty gap lattice".into()))?;
    let s_u = s.with_reference(u.clone())?;
    let spike_delta = spike_cost_change(&s_u, &u, e, &worst.v, worst.step, exec)?;
    Ok(SmpExperiment { brute, at_optimum, perturbed: PerturbedCheck { block, choice, report, worst, spike_delta } })
}
