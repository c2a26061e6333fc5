//! Distance of the mollified terminal data to its diagonal limit.

use super::sum_paths;
use crate::adjoint::second::{terminal_into, Terminal};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forward::StateEnsemble;
use crate::numerics::SpectralBasis;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct MollificationReport {
    pub ladder: Vec<f64>,
    /// `(E‖h^η − δ*(h_xx(x̄_T))‖²_{H⁻¹(Λ²)})^{1/2}` per rung.
    pub distances: Vec<f64>,
}

impl MollificationReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] < w[0])
    }
}

/// `H⁻¹(Λ²)` distance between `h^η` and `δ*(h_xx(x̄_T))`, averaged over
/// the terminal states of the ensemble, for each `η` of a decreasing ladder.
pub fn mollification_distances(s: &Scenario, xbar: &StateEnsemble, ladder: &[f64], exec: Execution) -> Result<MollificationReport> {
    if ladder.is_empty() || ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Domain("η ladder must be non-empty and strictly decreasing".into()));
    }
    let basis = SpectralBasis::new(&s.op)?;
    let (n, n_t) = (s.n(), s.n_t);
    let nn = n * n;
    let sums = sum_paths(exec, xbar.paths(), ladder.len(), |p, acc| {
        let xt = xbar.state(p, n_t);
        let mut diag = vec![0.0; nn];
        terminal_into(s, Terminal::Diagonal, xt, &mut diag)?;
        let mut w = vec![0.0; nn];
        for (j, &eta) in ladder.iter().enumerate() {
            terminal_into(s, Terminal::Mollified(eta), xt, &mut w)?;
            w.iter_mut().zip(&diag).for_each(|(a, b)| *a -= b);
            let c = basis.coefficients2(&w);
            acc[j] += basis.sobolev_inner2_raw(&c, &c, -1.0);
        }
        Ok(())
    })?;
    let m = xbar.paths() as f64;
    Ok(MollificationReport { ladder: ladder.to_vec(), distances: sums.iter().map(|v| (v / m).sqrt()).collect() })
}
