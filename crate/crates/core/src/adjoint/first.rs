//! First-order adjoint: the exact discrete adjoint of the linear scheme.
//!
//! With `B = (I − ΔtA)^{-1}` and `r_N = h_x(x̄_T)`, each backward step sets
//! `Π = B r_{k+1}`, fits `Π ≈ p̂_k + Σ_m q_k^m ΔW_k^m` jointly (so `p̂_k = E_k[Π]`,
//! `q_k = E_k[Π ΔW_k] / Δt`) and
//! `r_k = (1 + Δt b_x) p̂_k + Δt Σ_m σ_{x,m} q_k^m + Δt l_x`, all
//! coefficients taken at `(x̄_k, ū_k)`. Then for every adapted `(φ, ψ)` the
//! linear scheme satisfies
//! `E[Σ_k Δt⟨l_x, y_k⟩ + ⟨h_x, y_N⟩] = Σ_k Δt E[⟨p̂_k, φ_k⟩ + ⟨q_k, ψ_k⟩]`
//! whenever the conditional expectations are exact.

use super::regression::{Design, FitDiagnostics, RegressionBasis, StepFit};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forward::linear::LinearKernel;
use crate::forward::state::check_finite;
use crate::forward::{PathEnsemble, StateEnsemble};
use crate::numerics::{Field, Grid1D, SpectralBasis};
use crate::scenario::Scenario;

/// `(p, q)` as regressed functions of the reference state.
#[derive(Debug, Clone)]
pub struct BackwardPair1 {
    grid: Grid1D,
    k: usize,
    n_t: usize,
    /// Step `k < n_t`; targets are `p̂_k` (n) then `q_k` (K·n).
    fits: Vec<StepFit>,
    rbasis: RegressionBasis,
    basis: SpectralBasis,
    bypassed: bool,
    crn_id: u64,
}

/// Reusable buffers for evaluating fitted adjoints on one path.
#[derive(Debug, Default, Clone)]
pub struct EvalScratch {
    pub(crate) raw: Vec<f64>,
    pub(crate) row: Vec<f64>,
}

/// True when conditional expectations reduce to plain means: the reference
/// state is deterministic.
pub(crate) fn deterministic_reference(s: &Scenario, e: &PathEnsemble) -> bool {
    (e.is_zero() || s.coeffs.is_noise_free()) && s.reference.is_deterministic()
}

pub(crate) fn features_into(
    rbasis: &RegressionBasis,
    basis: &SpectralBasis,
    xbar: &StateEnsemble,
    k: usize,
    exec: Execution,
) -> Vec<f64> {
    let f = rbasis.raw_count(xbar.grid().n());
    let mut raw = vec![0.0; xbar.paths() * f];
    if f > 0 {
        exec.for_each_row(&mut raw, f, |p, row| rbasis.features(basis, xbar.state(p, k), row));
    }
    raw
}

pub(crate) fn check_pairing(xbar: &StateEnsemble, e: &PathEnsemble) -> Result<()> {
    if xbar.crn_id() != e.crn_id() {
        return Err(Error::Structural("adjoint and reference paths use different noise ensembles".into()));
    }
    Ok(())
}

/// Backward sweep for `(p, q)` along `x̄`.
pub fn solve_adjoint1(
    s: &Scenario,
    xbar: &StateEnsemble,
    e: &PathEnsemble,
    rbasis: RegressionBasis,
    exec: Execution,
) -> Result<BackwardPair1> {
    check_pairing(xbar, e)?;
    let kernel = LinearKernel::new(s, xbar, e)?;
    let (n, kk, n_t, m, dt) = (s.n(), s.k(), s.n_t, e.paths(), s.dt());
    let bypassed = deterministic_reference(s, e);
    let rbasis = if bypassed { RegressionBasis::constant() } else { rbasis };
    rbasis.check_paths(n, m)?;
    let basis = SpectralBasis::new(&s.op)?;
    let c = &s.coeffs;

    let mut r = vec![0.0; m * n];
    exec.for_each_row(&mut r, n, |p, row| {
        for (v, &x) in row.iter_mut().zip(xbar.state(p, n_t)) {
            *v = c.h_x(x);
        }
    });
    let mut fits = Vec::with_capacity(n_t);
    let raw_count = rbasis.raw_count(n);
    for k in (0..n_t).rev() {
        exec.for_each_row(&mut r, n, |_, row| kernel.step.solve_in_place(row));
        let raw = features_into(&rbasis, &basis, xbar, k, exec);
        let design = Design::new(&raw, m, raw_count, k, exec)?;
        let (coef, r2) = design.solve_joint(&r, n, kk, dt, |p| e.dw(p, k), k, exec)?;
        let cols = design.cols();
        let t = n + kk * n;

        let results = exec.map_rows(&mut r, n, |p, row| -> Result<()> {
            let mut pq = vec![0.0; t];
            design.predict(&coef, t, p, &mut pq);
            let mut beta = vec![0.0; n];
            let mut sx = vec![0.0; kk * n];
            kernel.coefficients(p, k, &mut beta, &mut sx);
            let x = xbar.state(p, k);
            let u = xbar.control(p, k);
            for i in 0..n {
                let mut v = (1.0 + dt * beta[i]) * pq[i] + dt * c.l_x(x[i], u);
                for mode in 0..kk {
                    v += dt * sx[mode * n + i] * pq[n + mode * n + i];
                }
                row[i] = v;
            }
            check_finite(row, p, k)
        });
        results.into_iter().collect::<Result<Vec<()>>>()?;

        let diagnostics = FitDiagnostics { step: k, condition: design.condition(), r2, features: cols };
        fits.push(design.into_fit(coef, t, diagnostics));
    }
    fits.reverse();
    Ok(BackwardPair1 { grid: s.grid, k: kk, n_t, fits, rbasis, basis, bypassed, crn_id: e.crn_id() })
}

impl BackwardPair1 {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn steps(&self) -> usize {
        self.n_t
    }

    pub fn crn_id(&self) -> u64 {
        self.crn_id
    }

    /// True if regression was replaced by plain means.
    pub fn bypassed(&self) -> bool {
        self.bypassed
    }

    pub fn diagnostics(&self) -> Vec<FitDiagnostics> {
        self.fits.iter().map(|f| f.diagnostics).collect()
    }

    pub fn fit(&self, k: usize) -> &StepFit {
        &self.fits[k]
    }

    pub(crate) fn design_row(&self, xbar: &StateEnsemble, p: usize, k: usize, sc: &mut EvalScratch) {
        sc.raw.resize(self.rbasis.raw_count(self.grid.n()), 0.0);
        self.rbasis.features(&self.basis, xbar.state(p, k), &mut sc.raw);
        self.fits[k].design_row(&sc.raw, &mut sc.row);
    }

    /// `p̂_k` on path `p`; at `k = n_t` this is `h_x(x̄_T)` exactly.
    pub fn p_at(&self, s: &Scenario, xbar: &StateEnsemble, p: usize, k: usize, sc: &mut EvalScratch, out: &mut [f64]) {
        let n = self.grid.n();
        if k == self.n_t {
            for (o, &x) in out.iter_mut().zip(xbar.state(p, k)) {
                *o = s.coeffs.h_x(x);
            }
            return;
        }
        self.design_row(xbar, p, k, sc);
        self.fits[k].predict(&sc.row, 0, n, out);
    }

    /// `q_k` on path `p`, `K` blocks of length n. Zero at `k = n_t`.
    pub fn q_at(&self, xbar: &StateEnsemble, p: usize, k: usize, sc: &mut EvalScratch, out: &mut [f64]) {
        let n = self.grid.n();
        if k == self.n_t {
            out[..self.k * n].fill(0.0);
            return;
        }
        self.design_row(xbar, p, k, sc);
        self.fits[k].predict(&sc.row, n, self.k * n, out);
    }

    /// Both `p̂_k` and `q_k` with one feature evaluation.
    pub fn pq_at(&self, xbar: &StateEnsemble, p: usize, k: usize, sc: &mut EvalScratch, p_out: &mut [f64], q_out: &mut [f64]) {
        let n = self.grid.n();
        self.design_row(xbar, p, k, sc);
        self.fits[k].predict(&sc.row, 0, n, p_out);
        self.fits[k].predict(&sc.row, n, self.k * n, q_out);
    }

    /// Sample mean of `p̂_k` over the ensemble, as a field.
    pub fn mean_p(&self, k: usize) -> Field {
        let n = self.grid.n();
        // the standardized design has zero-mean columns, so the intercept is the mean
        Field::from_raw(self.grid, self.fits[k].column(0, 0, n).to_vec())
    }

    /// Sample mean of `q_k^m`.
    pub fn mean_q(&self, k: usize, mode: usize) -> Field {
        let n = self.grid.n();
        Field::from_raw(self.grid, self.fits[k].column(0, n + mode * n, n).to_vec())
    }

    /// `E‖p̂_k‖²_{L²}` from the fitted coefficients.
    pub fn mean_sq_p(&self, k: usize) -> f64 {
        let h = self.grid.h();
        let n = self.grid.n();
        self.fits[k]
            .mean_form(None, 0, n, |c| c, |a, b| h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .expect("a fit always shares its own design")
    }
}
