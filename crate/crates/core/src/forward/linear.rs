//! Linear equations with coefficients frozen along the reference path:
//! `dy = [A y + b_x(x̄,ū) y + φ] dt + Σ_m [σ_{x,m}(x̄,ū) y + ψ_m] dW^m`.

use super::ensemble::PathEnsemble;
use super::state::{check_ensemble, check_finite, state_step, PathSet, StateEnsemble};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::numerics::ImplicitStep;
use crate::scenario::{ControlPoint, Scenario};

/// Per-path stepping machinery shared by the linear and tensor schemes.
pub(crate) struct LinearKernel<'a> {
    pub s: &'a Scenario,
    pub xbar: &'a StateEnsemble,
    pub e: &'a PathEnsemble,
    pub step: ImplicitStep,
}

impl<'a> LinearKernel<'a> {
    pub fn new(s: &'a Scenario, xbar: &'a StateEnsemble, e: &'a PathEnsemble) -> Result<Self> {
        check_ensemble(s, e)?;
        if xbar.crn_id() != e.crn_id() || xbar.paths() != e.paths() {
            return Err(Error::Structural(
                "reference paths were not simulated on this noise ensemble (common random numbers required)".into(),
            ));
        }
        Ok(LinearKernel { s, xbar, e, step: s.op.implicit_step(s.dt())? })
    }

    pub fn k(&self) -> usize {
        self.s.k()
    }

    /// `β = b_x(x̄_k, ū_k)` and `s_m = σ_{x,m}(x̄_k, ū_k) g_m`, modes stacked.
    pub fn coefficients(&self, p: usize, k: usize, beta: &mut [f64], sx: &mut [f64]) {
        let x = self.xbar.state(p, k);
        let u = self.xbar.control(p, k);
        let c = &self.s.coeffs;
        let n = x.len();
        for (b, &xi) in beta.iter_mut().zip(x) {
            *b = c.b_x(xi, u);
        }
        for m in 0..self.k() {
            let g = self.s.noise.profile(m);
            for i in 0..n {
                sx[m * n + i] = c.sigma_x(x[i], u, m) * g[i];
            }
        }
    }

    /// One step of the linear scheme, in place.
    #[allow(clippy::too_many_arguments)]
    pub fn advance(&self, y: &mut [f64], beta: &[f64], sx: &[f64], phi: &[f64], psi: &[f64], dw: &[f64]) {
        let dt = self.step.dt();
        let n = y.len();
        for i in 0..n {
            let yi = y[i];
            let mut v = (1.0 + dt * beta[i]) * yi + dt * phi[i];
            for (m, &d) in dw.iter().enumerate() {
                v += (sx[m * n + i] * yi + psi[m * n + i]) * d;
            }
            y[i] = v;
        }
        self.step.solve_in_place(y);
    }
}

/// Scratch buffers for one path.
pub(crate) struct LinearScratch {
    pub beta: Vec<f64>,
    pub sx: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl LinearScratch {
    pub fn new(n: usize, k: usize) -> Self {
        LinearScratch { beta: vec![0.0; n], sx: vec![0.0; n * k], phi: vec![0.0; n], psi: vec![0.0; n * k] }
    }
}

/// Source terms `(φ_k, ψ_k)` of a linear equation on path `p`. Sources
/// must be adapted: they may depend on anything known at `t_k`.
pub trait LinearSources: Sync {
    /// Fill `phi` (length n) and `psi` (K blocks of length n).
    fn fill(&self, path: usize, step: usize, phi: &mut [f64], psi: &mut [f64]);
}

impl<F> LinearSources for F
where
    F: Fn(usize, usize, &mut [f64], &mut [f64]) + Sync,
{
    fn fill(&self, path: usize, step: usize, phi: &mut [f64], psi: &mut [f64]) {
        self(path, step, phi, psi)
    }
}

/// Simulate the linear equation with zero initial value on every path.
pub fn simulate_linear<S: LinearSources>(
    s: &Scenario,
    xbar: &StateEnsemble,
    e: &PathEnsemble,
    sources: &S,
    exec: Execution,
) -> Result<PathSet> {
    let kernel = LinearKernel::new(s, xbar, e)?;
    let (n, k, n_t) = (s.n(), s.k(), s.n_t);
    let mut out = PathSet::zeros(e.paths(), n_t, n);
    let len = out.path_len();
    let results = exec.map_rows(out.values_mut(), len, |p, buf| -> Result<()> {
        let mut sc = LinearScratch::new(n, k);
        let mut y = vec![0.0; n];
        for step in 0..n_t {
            kernel.coefficients(p, step, &mut sc.beta, &mut sc.sx);
            sources.fill(p, step, &mut sc.phi, &mut sc.psi);
            kernel.advance(&mut y, &sc.beta, &sc.sx, &sc.phi, &sc.psi, e.dw(p, step));
            check_finite(&y, p, step + 1)?;
            buf[(step + 1) * n..(step + 2) * n].copy_from_slice(&y);
        }
        Ok(())
    });
    results.into_iter().collect::<Result<Vec<()>>>()?;
    Ok(out)
}

/// A spike `v` on the step window `[lo, hi)` on top of the reference
/// controls recorded along `x̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spike {
    pub v: ControlPoint,
    pub window: (usize, usize),
}

impl Spike {
    pub fn new(s: &Scenario, v: ControlPoint, tau: f64, eps: f64) -> Result<Self> {
        let u = s.spike_of(&s.reference, v.clone(), tau, eps)?;
        Ok(Spike { v, window: u.spike_window() })
    }

    pub fn active(&self, k: usize) -> bool {
        (self.window.0..self.window.1).contains(&k)
    }

    pub fn control<'a>(&'a self, xbar: &'a StateEnsemble, p: usize, k: usize) -> &'a [f64] {
        if self.active(k) {
            &self.v
        } else {
            xbar.control(p, k)
        }
    }
}

/// Sources of `y^ε`: `φ = b(x̄,u^ε) − b(x̄,ū)`, `ψ_m = (σ_m(x̄,u^ε) − σ_m(x̄,ū)) g_m`.
pub(crate) fn first_variation_sources(kernel: &LinearKernel<'_>, spike: &Spike, p: usize, k: usize, phi: &mut [f64], psi: &mut [f64]) {
    phi.fill(0.0);
    psi.fill(0.0);
    if !spike.active(k) {
        return;
    }
    let (s, c) = (kernel.s, &kernel.s.coeffs);
    let x = kernel.xbar.state(p, k);
    let ub = kernel.xbar.control(p, k);
    let v = &spike.v;
    let n = x.len();
    for i in 0..n {
        phi[i] = c.b(x[i], v) - c.b(x[i], ub);
    }
    for m in 0..s.k() {
        let g = s.noise.profile(m);
        for i in 0..n {
            psi[m * n + i] = (c.sigma(x[i], v, m) - c.sigma(x[i], ub, m)) * g[i];
        }
    }
}

/// Sources of `z^ε`: `½ b_xx y² + (b_x(x̄,u^ε) − b_x(x̄,ū)) y`, σ analogous.
#[allow(clippy::too_many_arguments)]
pub(crate) fn second_variation_sources(
    kernel: &LinearKernel<'_>,
    spike: &Spike,
    p: usize,
    k: usize,
    y: &[f64],
    phi: &mut [f64],
    psi: &mut [f64],
) {
    let (s, c) = (kernel.s, &kernel.s.coeffs);
    let x = kernel.xbar.state(p, k);
    let ub = kernel.xbar.control(p, k);
    let ue = spike.control(kernel.xbar, p, k);
    let n = x.len();
    for i in 0..n {
        phi[i] = 0.5 * c.b_xx(x[i], ub) * y[i] * y[i] + (c.b_x(x[i], ue) - c.b_x(x[i], ub)) * y[i];
    }
    for m in 0..s.k() {
        let g = s.noise.profile(m);
        for i in 0..n {
            let d = c.sigma_x(x[i], ue, m) - c.sigma_x(x[i], ub, m);
            psi[m * n + i] = (0.5 * c.sigma_xx(x[i], ub, m) * y[i] * y[i] + d * y[i]) * g[i];
        }
    }
}

/// Per-step snapshot handed to variation visitors.
pub struct VariationStep<'a> {
    pub step: usize,
    pub xbar: &'a [f64],
    pub xeps: &'a [f64],
    pub y: &'a [f64],
    pub z: &'a [f64],
}

/// Stream `(x̄, x^ε, y^ε, z^ε)` along one path, calling `visit` at every
/// step `0..=n_t`. `x^ε` uses the reference controls recorded along `x̄`
/// outside the spike window.
pub(crate) fn variation_path(
    kernel: &LinearKernel<'_>,
    spike: &Spike,
    p: usize,
    mut visit: impl FnMut(&VariationStep<'_>),
) -> Result<()> {
    let (s, e) = (kernel.s, kernel.e);
    let (n, k) = (s.n(), s.k());
    let mut sy = LinearScratch::new(n, k);
    let mut sz = LinearScratch::new(n, k);
    let mut xeps = s.x0.values().to_vec();
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    for step in 0..=s.n_t {
        visit(&VariationStep { step, xbar: kernel.xbar.state(p, step), xeps: &xeps, y: &y, z: &z });
        if step == s.n_t {
            break;
        }
        let dw = e.dw(p, step);
        kernel.coefficients(p, step, &mut sy.beta, &mut sy.sx);
        first_variation_sources(kernel, spike, p, step, &mut sy.phi, &mut sy.psi);
        second_variation_sources(kernel, spike, p, step, &y, &mut sz.phi, &mut sz.psi);
        state_step(s, &kernel.step, &mut xeps, spike.control(kernel.xbar, p, step), dw);
        kernel.advance(&mut y, &sy.beta, &sy.sx, &sy.phi, &sy.psi, dw);
        kernel.advance(&mut z, &sy.beta, &sy.sx, &sz.phi, &sz.psi, dw);
        check_finite(&xeps, p, step + 1)?;
        check_finite(&y, p, step + 1)?;
        check_finite(&z, p, step + 1)?;
    }
    Ok(())
}

/// First variation `y^ε` of a spike, stored on every path.
pub fn simulate_first_variation(
    s: &Scenario,
    xbar: &StateEnsemble,
    e: &PathEnsemble,
    spike: &Spike,
    exec: Execution,
) -> Result<PathSet> {
    let kernel = LinearKernel::new(s, xbar, e)?;
    let src = |p: usize, k: usize, phi: &mut [f64], psi: &mut [f64]| first_variation_sources(&kernel, spike, p, k, phi, psi);
    simulate_linear(s, xbar, e, &src, exec)
}
