//! Exhaustive search over piecewise-constant controls on a tiny instance.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forward::{path_costs, simulate_state, Estimate, PathEnsemble};
use crate::scenario::{ControlPoint, ControlProcess, ControlSet, Scenario};

/// Largest admissible number of candidates.
pub const MAX_CANDIDATES: usize = 6561;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateCost {
    /// Index into the control set's points, per block.
    pub choice: Vec<usize>,
    /// `None` when the candidate blew up.
    pub cost: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub points: Vec<ControlPoint>,
    pub blocks: usize,
    pub table: Vec<CandidateCost>,
    /// Index of the minimizer in `table`.
    pub best: usize,
    /// Candidates within one standard error of the minimum, other than it.
    pub ties: Vec<usize>,
    /// Paired cost increase `J(ū with one block changed) − J(ū)` for
    /// every single-block change of the minimizer, as `(block, point, Δ)`.
    pub perturbations: Vec<(usize, usize, Estimate)>,
}

impl BruteForceResult {
    pub fn best_control(&self, n_t: usize) -> Result<ControlProcess> {
        self.control_of(&self.table[self.best].choice, n_t)
    }

    pub fn control_of(&self, choice: &[usize], n_t: usize) -> Result<ControlProcess> {
        let blocks: Vec<ControlPoint> = choice.iter().map(|&i| self.points[i].clone()).collect();
        ControlProcess::blocks(&blocks, n_t)
    }

    pub fn best_cost(&self) -> Estimate {
        self.table[self.best].cost.expect("the minimizer has a finite cost")
    }

    /// Every single-block change raises `J` by more than `z` paired
    /// standard errors.
    pub fn locally_optimal(&self, z: f64) -> bool {
        !self.perturbations.is_empty() && self.perturbations.iter().all(|(_, _, d)| d.mean > z * d.std_err)
    }
}

fn decode(mut index: usize, base: usize, blocks: usize) -> Vec<usize> {
    let mut out = vec![0; blocks];
    for slot in out.iter_mut().rev() {
        *slot = index % base;
        index /= base;
    }
    out
}

/// Evaluate `J` for every block control on one shared ensemble and return
/// the table, its minimizer, near-ties and the single-block certificate.
pub fn brute_force_search(s: &Scenario, e: &PathEnsemble, blocks: usize, exec: Execution) -> Result<BruteForceResult> {
    let points = match &s.controls {
        ControlSet::Finite(points) => points.clone(),
        ControlSet::Box { .. } => return Err(Error::Domain("brute-force search needs a finite control set".into())),
    };
    if points.len() > 3 {
        return Err(Error::Domain(format!("brute-force search allows at most 3 control points, got {}", points.len())));
    }
    if blocks == 0 || blocks > 8 || blocks > s.n_t {
        return Err(Error::Domain(format!("brute-force search needs 1..=8 blocks within {} steps, got {blocks}", s.n_t)));
    }
    let base = points.len();
    let count = base.pow(blocks as u32);
    debug_assert!(count <= MAX_CANDIDATES);
    let mut table = Vec::with_capacity(count);
    let mut samples: Vec<Option<Vec<f64>>> = Vec::with_capacity(count);
    for idx in 0..count {
        let choice = decode(idx, base, blocks);
        let blocks_u: Vec<ControlPoint> = choice.iter().map(|&i| points[i].clone()).collect();
        let u = ControlProcess::blocks(&blocks_u, s.n_t)?;
        match simulate_state(s, &u, e, exec) {
            Ok(xs) => {
                let costs = path_costs(s, &xs, exec);
                if costs.iter().all(|c| c.is_finite()) {
                    table.push(CandidateCost { choice, cost: Some(Estimate::from_samples(&costs)) });
                    samples.push(Some(costs));
                    continue;
                }
                log::warn!("candidate {choice:?} produced a non-finite cost and is excluded");
            }
            Err(Error::BlowUp { path, step }) => {
                log::warn!("candidate {choice:?} blew up on path {path} at step {step} and is excluded");
            }
            Err(err) => return Err(err),
        }
        table.push(CandidateCost { choice, cost: None });
        samples.push(None);
    }
    let best = table
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.cost.map(|e| (i, e.mean)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Domain("every candidate blew up".into()))?;
    let best_est = table[best].cost.expect("minimizer is finite");
    let ties = table
        .iter()
        .enumerate()
        .filter(|(i, c)| *i != best && c.cost.is_some_and(|e| e.mean - best_est.mean <= best_est.std_err.max(e.std_err)))
        .map(|(i, _)| i)
        .collect();
    let best_samples = samples[best].as_ref().expect("minimizer is finite");
    let mut perturbations = Vec::new();
    for b in 0..blocks {
        for alt in 0..base {
            if alt == table[best].choice[b] {
                continue;
            }
            let mut choice = table[best].choice.clone();
            choice[b] = alt;
            let idx = choice.iter().fold(0, |acc, &c| acc * base + c);
            if let Some(other) = &samples[idx] {
                let diff: Vec<f64> = other.iter().zip(best_samples).map(|(a, b)| a - b).collect();
                perturbations.push((b, alt, Estimate::from_samples(&diff)));
            }
        }
    }
    Ok(BruteForceResult { points, blocks, table, best, ties, perturbations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_matches_the_encoding() {
        for idx in 0..81 {
            let c = decode(idx, 3, 4);
            assert_eq!(c.iter().fold(0, |acc, &d| acc * 3 + d), idx);
        }
    }
}
