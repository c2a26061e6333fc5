//! Spike-variation statistics: moments of `y^ε`, `z^ε`, the expansion
//! residual `x^ε − x̄ − y^ε − z^ε`, and the `H^γ` norm of `y^ε_T`.

use super::cost::Estimate;
use super::ensemble::PathEnsemble;
use super::linear::{variation_path, LinearKernel, Spike};
use super::state::StateEnsemble;
use crate::error::Result;
use crate::exec::Execution;
use crate::numerics::SpectralBasis;
use crate::scenario::Scenario;

/// Order of the fractional norm reported by [`VariationStats::hgamma`].
pub const HGAMMA_ORDER: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct VariationStats {
    /// `sup_k E‖y^ε_k‖²`.
    pub y_moment: Estimate,
    /// `sup_k E‖z^ε_k‖`.
    pub z_moment: Estimate,
    /// `sup_k E‖x^ε_k − x̄_k − y^ε_k − z^ε_k‖²`.
    pub residual: Estimate,
    /// `E‖y^ε_T‖²_{H^γ}` with `γ = HGAMMA_ORDER`.
    pub hgamma: Estimate,
    pub paths: usize,
}

/// One pass over the ensemble computing all four statistics.
pub fn variation_stats(
    s: &Scenario,
    xbar: &StateEnsemble,
    e: &PathEnsemble,
    spike: &Spike,
    exec: Execution,
) -> Result<VariationStats> {
    let kernel = LinearKernel::new(s, xbar, e)?;
    let basis = SpectralBasis::new(&s.op)?;
    let (h, n_t) = (s.grid.h(), s.n_t);
    let steps = n_t + 1;
    // per step: [‖y‖², ‖z‖, ‖r‖²] and their squares, then hγ and its square
    let width = 6 * steps + 2;
    let failures = std::sync::Mutex::new(None);
    let sums = exec.chunked_sum(e.paths(), width, |p, acc| {
        let res = variation_path(&kernel, spike, p, |v| {
            let (mut yy, mut zz, mut rr) = (0.0, 0.0, 0.0);
            for i in 0..v.y.len() {
                yy += v.y[i] * v.y[i];
                zz += v.z[i] * v.z[i];
                let r = v.xeps[i] - v.xbar[i] - v.y[i] - v.z[i];
                rr += r * r;
            }
            let vals = [h * yy, (h * zz).sqrt(), h * rr];
            for (j, val) in vals.iter().enumerate() {
                acc[j * steps + v.step] += val;
                acc[(3 + j) * steps + v.step] += val * val;
            }
            if v.step == n_t {
                let c = basis.coefficients(v.y);
                let hg: f64 = basis.eigenvalues().iter().zip(&c).map(|(l, x)| l.powf(HGAMMA_ORDER) * x * x).sum();
                acc[6 * steps] += hg;
                acc[6 * steps + 1] += hg * hg;
            }
        });
        if let Err(err) = res {
            failures.lock().unwrap().get_or_insert(err);
        }
    });
    if let Some(err) = failures.into_inner().unwrap() {
        return Err(err);
    }
    let m = e.paths();
    let sup = |j: usize| -> Estimate {
        (0..steps)
            .map(|t| Estimate::from_sums(sums[j * steps + t], sums[(3 + j) * steps + t], m))
            .fold(Estimate { mean: 0.0, std_err: 0.0 }, |best, est| if est.mean > best.mean { est } else { best })
    };
    Ok(VariationStats {
        y_moment: sup(0),
        z_moment: sup(1),
        residual: sup(2),
        hgamma: Estimate::from_sums(sums[6 * steps], sums[6 * steps + 1], m),
        paths: m,
    })
}
