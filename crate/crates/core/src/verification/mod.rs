//! Experiments: duality checks, rate fits, mollification, the
//! maximum-principle gap and a brute-force control search.

pub mod brute;
pub mod duality;
pub mod experiment;
pub mod identity;
pub mod mollify;
pub mod oracle;
pub mod rates;
pub mod report;
pub mod smp;

pub use brute::{brute_force_search, BruteForceResult, CandidateCost};
pub use duality::{check_duality1, check_duality2, check_limit_spike, random_probes1, random_probes2, Probe1, Probe2};
pub use experiment::{gap_at_control, smp_experiment, spike_cost_change, PerturbedCheck, SmpExperiment, GAP_SAMPLES};
pub use identity::{tensor_identity, TensorIdentityReport};
pub use mollify::{mollification_distances, MollificationReport};
pub use oracle::{noise_free_oracle, oracle_check, NoiseFreeOracle, OracleReport};
pub use rates::{fit_slope, ladder_widths, rate_experiment, rate_suite, RateKind};
pub use report::{DualityReport, GapCell, RateReport, SMPReport, SlopeFit, Verdict};
pub use smp::{gap_lattice, hamiltonian, sample_steps, smp_gap};

use std::sync::Mutex;

use crate::error::Result;
use crate::exec::Execution;

/// Deterministic-order per-path reduction that reports the error of the lowest failing path.
pub(crate) fn sum_paths<F>(exec: Execution, m: usize, width: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync + Send,
{
    let failure = Mutex::new(None);
    let sums = exec.chunked_sum(m, width, |p, acc| {
        if let Err(err) = f(p, acc) {
            let mut slot = failure.lock().expect("lock poisoned");
            if slot.as_ref().is_none_or(|(q, _)| p < *q) {
                *slot = Some((p, err));
            }
        }
    });
    match failure.into_inner().expect("lock poisoned") {
        Some((_, err)) => Err(err),
        None => Ok(sums),
    }
}
