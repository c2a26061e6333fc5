//! Second-order adjoint on `Λ²`, mollified or with diagonal terminal data.
//!
//! The sweep mirrors the first-order one on the tensor scheme:
//! `Π = B₂ R_{k+1}`, `P̂_k = E_k[Π]`, `Q_k = E_k[(Π − P̂_k) ΔW_k] / Δt`,
//! `R_k = (1 + Δtβ₂) P̂_k + Δt Σ_m S_m Q_k^m + Δt δ*(c_k)` with
//! `c_k = l_xx + b_xx p̂_k + Σ_m σ_{xx,m} q_k^m`. Regression acts on the
//! upper triangle, so every `P̂_k` and `Q_k` is exactly symmetric.

use super::first::{check_pairing, deterministic_reference, features_into, BackwardPair1, EvalScratch};
use super::regression::{Design, FitDiagnostics, RegressionBasis, StepFit};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forward::linear::LinearKernel;
use crate::forward::state::check_finite;
use crate::forward::tensor::{TensorCoefficients, TensorStep};
use crate::forward::{PathEnsemble, StateEnsemble};
use crate::numerics::trace::{delta_star_add, heat_mollifier_into};
use crate::numerics::{Grid1D, Grid2D, SpectralBasis, TensorField};
use crate::scenario::Scenario;

/// Terminal data of the second-order adjoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terminal {
    /// `h^η_xx` with width `η`.
    Mollified(f64),
    /// `δ*(h_xx(x̄_T))` as terminal data of the sweep itself.
    Diagonal,
    /// Limit representative: swept with width `η`, terminal reported as
    /// `δ*(h_xx(x̄_T))`.
    Limit(f64),
}

impl Terminal {
    fn sweep(self) -> Terminal {
        match self {
            Terminal::Limit(eta) => Terminal::Mollified(eta),
            t => t,
        }
    }
}

/// Upper-triangle index map for symmetric `n × n` tensors.
#[derive(Debug, Clone)]
pub(crate) struct Packing {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl Packing {
    pub fn new(n: usize) -> Self {
        let pairs = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        Packing { n, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn pack(&self, w: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (o, &(i, j)) in out.iter_mut().zip(&self.pairs) {
            *o = 0.5 * (w[i * n + j] + w[j * n + i]);
        }
    }

    pub fn unpack(&self, packed: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (&v, &(i, j)) in packed.iter().zip(&self.pairs) {
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }

    /// `h² Σ_ij a_ij b_ij` on packed storage.
    pub fn l2_inner(&self, h: f64, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((&x, &y), &(i, j)) in a.iter().zip(b).zip(&self.pairs) {
            s += if i == j { x * y } else { 2.0 * x * y };
        }
        h * h * s
    }
}

/// `(P, Q)` as regressed functions of the reference state.
#[derive(Debug, Clone)]
pub struct BackwardPair2 {
    grid: Grid1D,
    k: usize,
    n_t: usize,
    terminal: Terminal,
    /// Targets: packed `P̂_k`, then `K` packed `Q_k^m`.
    fits: Vec<StepFit>,
    rbasis: RegressionBasis,
    basis: SpectralBasis,
    packing: Packing,
    crn_id: u64,
}

/// Terminal data on one path.
pub(crate) fn terminal_into(s: &Scenario, terminal: Terminal, xt: &[f64], out: &mut [f64]) -> Result<()> {
    let hxx: Vec<f64> = xt.iter().map(|&x| s.coeffs.h_xx(x)).collect();
    match terminal {
        Terminal::Mollified(eta) => heat_mollifier_into(&s.grid.nodes(), &hxx, eta, s.grid.h(), out),
        Terminal::Diagonal | Terminal::Limit(_) => {
            out.fill(0.0);
            delta_star_add(&hxx, s.grid.h(), 1.0, out);
            Ok(())
        }
    }
}

/// `c = l_xx + b_xx p + Σ_m σ_{xx,m} g_m q^m` at `(x, u)`.
pub(crate) fn second_order_source(s: &Scenario, x: &[f64], u: &[f64], p1: &[f64], q1: &[f64], out: &mut [f64]) {
    let c = &s.coeffs;
    let n = x.len();
    for i in 0..n {
        let mut v = c.l_xx(x[i], u) + c.b_xx(x[i], u) * p1[i];
        for mode in 0..s.k() {
            v += c.sigma_xx(x[i], u, mode) * s.noise.profile(mode)[i] * q1[mode * n + i];
        }
        out[i] = v;
    }
}

/// Backward sweep for `(P^η, Q^η)` (or the diagonal-terminal pair).
#[allow(clippy::too_many_arguments)]
pub fn solve_adjoint2(
    s: &Scenario,
    xbar: &StateEnsemble,
    e: &PathEnsemble,
    pq: &BackwardPair1,
    terminal: Terminal,
    rbasis: RegressionBasis,
    step: &TensorStep,
    exec: Execution,
) -> Result<BackwardPair2> {
    check_pairing(xbar, e)?;
    if pq.crn_id() != e.crn_id() {
        return Err(Error::Structural("first-order adjoint was solved on a different ensemble".into()));
    }
    if let Terminal::Mollified(eta) | Terminal::Limit(eta) = terminal {
        if !(eta > 0.0) {
            return Err(Error::Domain(format!("mollifier width must be positive, got {eta}")));
        }
    }
    let kernel = LinearKernel::new(s, xbar, e)?;
    let (n, kk, n_t, m, dt) = (s.n(), s.k(), s.n_t, e.paths(), s.dt());
    let nn = n * n;
    let packing = Packing::new(n);
    let np = packing.len();
    let rbasis = if deterministic_reference(s, e) { RegressionBasis::constant() } else { rbasis };
    rbasis.check_paths(n, m)?;
    let basis = SpectralBasis::new(&s.op)?;
    let h = s.grid.h();

    let mut r = vec![0.0; m * nn];
    let init = exec.map_rows(&mut r, nn, |p, row| terminal_into(s, terminal.sweep(), xbar.state(p, n_t), row));
    init.into_iter().collect::<Result<Vec<()>>>()?;

    let mut fits = Vec::with_capacity(n_t);
    let raw_count = rbasis.raw_count(n);
    let mut packed = vec![0.0; m * np];
    for k in (0..n_t).rev() {
        exec.for_each_row(&mut r, nn, |_, row| {
            let mut scratch = Vec::new();
            step.solve_in_place(row, &mut scratch);
        });
        {
            let r = &r;
            exec.for_each_row(&mut packed, np, |p, row| packing.pack(&r[p * nn..(p + 1) * nn], row));
        }
        let raw = features_into(&rbasis, &basis, xbar, k, exec);
        let design = Design::new(&raw, m, raw_count, k, exec)?;
        let (coef, r2) = design.solve_joint(&packed, np, kk, dt, |p| e.dw(p, k), k, exec)?;
        let cols = design.cols();
        let t = np * (1 + kk);

        let results = exec.map_rows(&mut r, nn, |p, row| -> Result<()> {
            let mut pq_packed = vec![0.0; t];
            design.predict(&coef, t, p, &mut pq_packed);
            let mut big_p = vec![0.0; nn];
            packing.unpack(&pq_packed[..np], &mut big_p);
            let mut big_q = vec![0.0; kk * nn];
            for mode in 0..kk {
                packing.unpack(&pq_packed[np + mode * np..np + (mode + 1) * np], &mut big_q[mode * nn..(mode + 1) * nn]);
            }
            let mut beta = vec![0.0; n];
            let mut sx = vec![0.0; kk * n];
            kernel.coefficients(p, k, &mut beta, &mut sx);
            let mut coef2 = TensorCoefficients::new(n);
            coef2.build(&beta, &sx, kk);
            for i in 0..n {
                for j in 0..n {
                    let a = i * n + j;
                    let mut v = (1.0 + dt * coef2.beta2[a]) * big_p[a];
                    for mode in 0..kk {
                        v += dt * (sx[mode * n + i] + sx[mode * n + j]) * big_q[mode * nn + a];
                    }
                    row[a] = v;
                }
            }
            let mut sc = EvalScratch::default();
            let mut p1 = vec![0.0; n];
            let mut q1 = vec![0.0; kk * n];
            pq.pq_at(xbar, p, k, &mut sc, &mut p1, &mut q1);
            let mut src = vec![0.0; n];
            second_order_source(s, xbar.state(p, k), xbar.control(p, k), &p1, &q1, &mut src);
            delta_star_add(&src, h, dt, row);
            check_finite(row, p, k)
        });
        results.into_iter().collect::<Result<Vec<()>>>()?;

        let diagnostics = FitDiagnostics { step: k, condition: design.condition(), r2, features: cols };
        fits.push(design.into_fit(coef, t, diagnostics));
    }
    fits.reverse();
    Ok(BackwardPair2 { grid: s.grid, k: kk, n_t, terminal, fits, rbasis, basis, packing, crn_id: e.crn_id() })
}

/// Mollified pair with `h^η_xx` terminal data.
#[allow(clippy::too_many_arguments)]
pub fn solve_adjoint2_mollified(
    s: &Scenario,
    xbar: &StateEnsemble,
    e: &PathEnsemble,
    pq: &BackwardPair1,
    eta: f64,
    rbasis: RegressionBasis,
    step: &TensorStep,
    exec: Execution,
) -> Result<BackwardPair2> {
    solve_adjoint2(s, xbar, e, pq, Terminal::Mollified(eta), rbasis, step, exec)
}

/// Convergence certificate for the mollified pairs along an `η` ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyReport {
    pub ladder: Vec<f64>,
    /// `‖P^{η_i} − P^{η_{i+1}}‖` in `L²([0,T]×Ω; L²(Λ²))`.
    pub l2_increments: Vec<f64>,
    /// `sup_t E‖P^{η_i}_t − P^{η_{i+1}}_t‖²_{H⁻¹(Λ²)}`.
    pub hm1_increments: Vec<f64>,
    /// `sup_t E‖P^η_t‖²_{H⁻¹} + 2E∫‖P^η_t‖²_{L²} dt + E∫‖Q^η_t‖²_{H⁻¹} dt`
    /// per rung.
    pub apriori: Vec<f64>,
    /// False when the `L²` increments fail to decrease.
    pub converging: bool,
}

impl CauchyReport {
    /// Largest relative growth of the a-priori statistic between rungs.
    pub fn apriori_growth(&self) -> f64 {
        self.apriori.windows(2).map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
    }
}

/// Solves the mollified pair for every rung of a strictly decreasing ladder
/// and returns the finest one tagged as the limit, with its certificate.
#[allow(clippy::too_many_arguments)]
pub fn solve_adjoint2_limit(
    s: &Scenario,
    xbar: &StateEnsemble,
    e: &PathEnsemble,
    pq: &BackwardPair1,
    ladder: &[f64],
    rbasis: RegressionBasis,
    step: &TensorStep,
    exec: Execution,
) -> Result<(BackwardPair2, CauchyReport)> {
    if ladder.len() < 2 {
        return Err(Error::Domain("an η ladder needs at least two widths".into()));
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Domain("η ladder must be strictly decreasing".into()));
    }
    let mut pairs = Vec::with_capacity(ladder.len());
    for &eta in ladder {
        pairs.push(solve_adjoint2(s, xbar, e, pq, Terminal::Mollified(eta), rbasis, step, exec)?);
    }
    let mut l2_increments = Vec::new();
    let mut hm1_increments = Vec::new();
    for w in pairs.windows(2) {
        let (l2, hm1) = w[0].difference_norms(s, xbar, Some(&w[1]), exec)?;
        l2_increments.push(l2);
        hm1_increments.push(hm1);
    }
    let apriori = pairs
        .iter()
        .map(|p| p.apriori_statistic(s, xbar, exec))
        .collect::<Result<Vec<_>>>()?;
    let converging = l2_increments.windows(2).all(|w| w[1] < w[0]);
    if !converging {
        log::warn!("Cauchy increments along the η ladder are not decreasing: {l2_increments:?}");
    }
    let mut finest = pairs.pop().expect("ladder is non-empty");
    finest.terminal = Terminal::Limit(*ladder.last().expect("ladder is non-empty"));
    Ok((finest, CauchyReport { ladder: ladder.to_vec(), l2_increments, hm1_increments, apriori, converging }))
}

impl BackwardPair2 {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn terminal(&self) -> Terminal {
        self.terminal
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

    pub fn diagnostics(&self) -> Vec<FitDiagnostics> {
        self.fits.iter().map(|f| f.diagnostics).collect()
    }

        fn design_row(&self, xbar: &StateEnsemble, p: usize, k: usize, sc: &mut EvalScratch) {
        sc.raw.resize(self.rbasis.raw_count(self.grid.n()), 0.0);
        self.rbasis.features(&self.basis, xbar.state(p, k), &mut sc.raw);
        self.fits[k].design_row(&sc.raw, &mut sc.row);
    }

    /// Unpacked `P̂_k` (n²) and `Q_k` (`K` blocks of n²) on path `p`, `k < n_t`.
    pub(crate) fn pq_at(&self, xbar: &StateEnsemble, p: usize, k: usize, sc: &mut EvalScratch, p_out: &mut [f64], q_out: &mut [f64]) {
        let nn = self.grid.n() * self.grid.n();
        let np = self.packing.len();
        self.design_row(xbar, p, k, sc);
        let mut packed = vec![0.0; np];
        self.fits[k].predict(&sc.row, 0, np, &mut packed);
        self.packing.unpack(&packed, p_out);
        for mode in 0..self.k {
            self.fits[k].predict(&sc.row, np + mode * np, np, &mut packed);
            self.packing.unpack(&packed, &mut q_out[mode * nn..(mode + 1) * nn]);
        }
    }

    /// Terminal data used by the sweep (mollified for a limit representative).
    pub(crate) fn sweep_terminal_into(&self, s: &Scenario, xt: &[f64], out: &mut [f64]) -> Result<()> {
        terminal_into(s, self.terminal.sweep(), xt, out)
    }

    /// `P̂_k` on path `p` (n² values); at `k = n_t` the terminal data.
    pub fn p_at(&self, s: &Scenario, xbar: &StateEnsemble, p: usize, k: usize, out: &mut [f64]) -> Result<()> {
        if k == self.n_t {
            return terminal_into(s, self.terminal, xbar.state(p, k), out);
        }
        let np = self.packing.len();
        let mut sc = EvalScratch::default();
        self.design_row(xbar, p, k, &mut sc);
        let mut packed = vec![0.0; np];
        self.fits[k].predict(&sc.row, 0, np, &mut packed);
        self.packing.unpack(&packed, out);
        Ok(())
    }

    /// `Q_k` on path `p` (`K` blocks of n²). Zero at `k = n_t`.
    pub fn q_at(&self, xbar: &StateEnsemble, p: usize, k: usize, out: &mut [f64]) {
        let nn = self.grid.n() * self.grid.n();
        if k == self.n_t {
            out[..self.k * nn].fill(0.0);
            return;
        }
        let np = self.packing.len();
        let mut sc = EvalScratch::default();
        self.design_row(xbar, p, k, &mut sc);
        let mut packed = vec![0.0; np];
        for mode in 0..self.k {
            self.fits[k].predict(&sc.row, np + mode * np, np, &mut packed);
            self.packing.unpack(&packed, &mut out[mode * nn..(mode + 1) * nn]);
        }
    }

    /// `P̂_k` on path `p` as a tensor field.
    pub fn p_field(&self, s: &Scenario, xbar: &StateEnsemble, p: usize, k: usize) -> Result<TensorField> {
        let n = self.grid.n();
        let mut v = vec![0.0; n * n];
        self.p_at(s, xbar, p, k, &mut v)?;
        TensorField::new(Grid2D::new(self.grid), v)?.mark_symmetric()
    }

    /// Ensemble mean of `P̂_k`, `k < n_t`.
    pub fn mean_p(&self, k: usize) -> TensorField {
        let n = self.grid.n();
        let mut v = vec![0.0; n * n];
        self.packing.unpack(self.fits[k].column(0, 0, self.packing.len()), &mut v);
        TensorField::from_raw(Grid2D::new(self.grid), v)
    }

    /// `(‖D‖_{L²([0,T]×Ω;L²)}, sup_t E‖D_t‖²_{H⁻¹})` for `D = P − other`
    /// (or `D = P`), over the steps `0..=n_t`.
    /// Left side of the energy bound for `(P^η, Q^η)`:
    /// `sup_t E‖P_t‖²_{H⁻¹} + 2 E∫‖P_t‖²_{L²} dt + E∫‖Q_t‖²_{L₂(Ξ,H⁻¹)} dt`,
    /// the supremum taken outside the expectation.
    pub fn apriori_statistic(&self, s: &Scenario, xbar: &StateEnsemble, exec: Execution) -> Result<f64> {
        let (l2, sup) = self.difference_norms(s, xbar, None, exec)?;
        let n = self.grid.n();
        let np = self.packing.len();
        let to_coef = |packed: Vec<f64>| {
            let mut full = vec![0.0; n * n];
            self.packing.unpack(&packed, &mut full);
            self.basis.coefficients2(&full)
        };
        let mut q = 0.0;
        for fit in &self.fits {
            for mode in 0..self.k {
                q += s.dt() * fit.mean_form(None, np * (1 + mode), np, to_coef, |a, b| self.basis.sobolev_inner2_raw(a, b, -1.0))?;
            }
        }
        Ok(sup + 2.0 * l2 * l2 + q)
    }

    pub(crate) fn difference_norms(
        &self,
        s: &Scenario,
        xbar: &StateEnsemble,
        other: Option<&BackwardPair2>,
        exec: Execution,
    ) -> Result<(f64, f64)> {
        if let Some(o) = other {
            if o.crn_id != self.crn_id || o.n_t != self.n_t {
                return Err(Error::Structural("pairs were solved on different ensembles".into()));
            }
        }
        let n = self.grid.n();
        let np = self.packing.len();
        let h = self.grid.h();
        let dt = s.dt();
        let to_coef = |packed: Vec<f64>| {
            let mut full = vec![0.0; n * n];
            self.packing.unpack(&packed, &mut full);
            self.basis.coefficients2(&full)
        };
        let mut l2 = 0.0;
        let mut sup = 0.0f64;
        for (k, fit) in self.fits.iter().enumerate() {
            let minus = other.map(|o| &o.fits[k]);
            l2 += dt * fit.mean_form(minus, 0, np, |c| c, |a, b| self.packing.l2_inner(h, a, b))?;
            let hm1 = fit.mean_form(minus, 0, np, to_coef, |a, b| self.basis.sobolev_inner2_raw(a, b, -1.0))?;
            sup = sup.max(hm1);
        }
        let m = xbar.paths();
        let terminal = exec.chunked_sum(m, 1, |p, acc| {
            let mut d = vec![0.0; n * n];
            let _ = terminal_into(s, self.terminal.sweep(), xbar.state(p, self.n_t), &mut d);
            if let Some(o) = other {
                let mut b = vec![0.0; n * n];
                let _ = terminal_into(s, o.terminal.sweep(), xbar.state(p, self.n_t), &mut b);
                d.iter_mut().zip(&b).for_each(|(x, y)| *x -= y);
            }
            let c = self.basis.coefficients2(&d);
            acc[0] += self.basis.sobolev_inner2_raw(&c, &c, -1.0);
        })[0];
        sup = sup.max(terminal / m as f64);
        Ok((l2.sqrt(), sup))
    }
}
