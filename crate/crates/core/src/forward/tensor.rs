//! The tensor process `Y^ε` on `Λ²`, driven by the first variation.

use super::ensemble::PathEnsemble;
use super::linear::{first_variation_sources, LinearKernel, LinearScratch, Spike};
use super::state::{check_finite, PathSet, StateEnsemble};
use crate::error::Result;
use crate::exec::Execution;
use crate::numerics::field::max_asymmetry;
use crate::numerics::{ImplicitStep, SpectralBasis, TensorField};
use crate::scenario::Scenario;

/// Implicit step on the tensor grid.
#[derive(Debug, Clone)]
pub enum TensorStep {
    /// `(I − ΔtA)^{-1} ⊗ (I − ΔtA)^{-1}`, the step under which `y ⊗ y`
    /// evolves.
    Factored(ImplicitStep),
    /// `(I − Δt(A ⊕ A))^{-1}` applied in the eigenbasis.
    KroneckerSum { basis: SpectralBasis, dt: f64 },
}

impl TensorStep {
    pub fn factored(s: &Scenario) -> Result<Self> {
        Ok(TensorStep::Factored(s.op.implicit_step(s.dt())?))
    }

    pub fn kronecker_sum(s: &Scenario) -> Result<Self> {
        Ok(TensorStep::KroneckerSum { basis: SpectralBasis::new(&s.op)?, dt: s.dt() })
    }

    pub fn solve_in_place(&self, w: &mut [f64], scratch: &mut Vec<f64>) {
        match self {
            TensorStep::Factored(step) => step.solve2_in_place(w, scratch),
            TensorStep::KroneckerSum { basis, dt } => {
                let n = basis.n();
                let mut c = basis.coefficients2(w);
                let ev = basis.eigenvalues();
                for i in 0..n {
                    for j in 0..n {
                        c[i * n + j] /= 1.0 + dt * (ev[i] + ev[j]);
                    }
                }
                w.copy_from_slice(&basis.synthesize2(&c));
            }
        }
    }
}

/// Multipliers of the tensor scheme at one step, built from the
/// first-order coefficients `β = b_x` and `s_m = σ_{x,m} g_m`.
pub(crate) struct TensorCoefficients {
    /// `β(i) + β(j) + Σ_m s_m(i) s_m(j)`.
    pub beta2: Vec<f64>,
}

impl TensorCoefficients {
    pub fn new(n: usize) -> Self {
        TensorCoefficients { beta2: vec![0.0; n * n] }
    }

    pub fn build(&mut self, beta: &[f64], sx: &[f64], k: usize) {
        let n = beta.len();
        for i in 0..n {
            for j in 0..n {
                let mut v = beta[i] + beta[j];
                for m in 0..k {
                    v += sx[m * n + i] * sx[m * n + j];
                }
                self.beta2[i * n + j] = v;
            }
        }
    }
}

/// `Y ← B₂[(1 + Δtβ₂)Y + ΔtΦ + Σ_m (S_m Y + Ψ_m) ΔW^m]` with
/// `S_m(i,j) = s_m(i) + s_m(j)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn tensor_advance(
    step: &TensorStep,
    dt: f64,
    y2: &mut [f64],
    coef: &TensorCoefficients,
    sx: &[f64],
    phi2: &[f64],
    psi2: &[f64],
    dw: &[f64],
    scratch: &mut Vec<f64>,
) {
    let nn = y2.len();
    let n = (nn as f64).sqrt().round() as usize;
    for i in 0..n {
        for j in 0..n {
            let a = i * n + j;
            let y = y2[a];
            let mut v = (1.0 + dt * coef.beta2[a]) * y + dt * phi2[a];
            for (m, &d) in dw.iter().enumerate() {
                v += ((sx[m * n + i] + sx[m * n + j]) * y + psi2[m * nn + a]) * d;
            }
            y2[a] = v;
        }
    }
    step.solve_in_place(y2, scratch);
}

/// `Φ^ε` and `Ψ^ε` from the current `y` and the first-order sources.
pub(crate) fn tensor_sources(y: &[f64], sx: &[f64], phi: &[f64], psi: &[f64], k: usize, phi2: &mut [f64], psi2: &mut [f64]) {
    let n = y.len();
    let nn = n * n;
    for i in 0..n {
        for j in 0..n {
            let mut v = y[i] * phi[j] + y[j] * phi[i];
            for m in 0..k {
                let (si, sj) = (sx[m * n + i], sx[m * n + j]);
                let (pi, pj) = (psi[m * n + i], psi[m * n + j]);
                v += si * y[i] * pj + sj * y[j] * pi + pi * pj;
            }
            phi2[i * n + j] = v;
        }
    }
    for m in 0..k {
        let ps = &psi[m * n..(m + 1) * n];
        for i in 0..n {
            for j in 0..n {
                psi2[m * nn + i * n + j] = ps[i] * y[j] + ps[j] * y[i];
            }
        }
    }
}

/// Stream `(y^ε_k, Y^ε_k)` along one path.
pub(crate) fn tensor_path(
    kernel: &LinearKernel<'_>,
    step: &TensorStep,
    spike: &Spike,
    p: usize,
    mut visit: impl FnMut(usize, &[f64], &[f64]),
) -> Result<()> {
    let s = kernel.s;
    let (n, k, dt) = (s.n(), s.k(), s.dt());
    let nn = n * n;
    let mut sc = LinearScratch::new(n, k);
    let mut coef = TensorCoefficients::new(n);
    let mut y = vec![0.0; n];
    let mut y2 = vec![0.0; nn];
    let mut phi2 = vec![0.0; nn];
    let mut psi2 = vec![0.0; nn * k];
    let mut scratch = Vec::new();
    for t in 0..=s.n_t {
        visit(t, &y, &y2);
        if t == s.n_t {
            break;
        }
        let dw = kernel.e.dw(p, t);
        kernel.coefficients(p, t, &mut sc.beta, &mut sc.sx);
        first_variation_sources(kernel, spike, p, t, &mut sc.phi, &mut sc.psi);
        coef.build(&sc.beta, &sc.sx, k);
        tensor_sources(&y, &sc.sx, &sc.phi, &sc.psi, k, &mut phi2, &mut psi2);
        tensor_advance(step, dt, &mut y2, &coef, &sc.sx, &phi2, &psi2, dw, &mut scratch);
        kernel.advance(&mut y, &sc.beta, &sc.sx, &sc.phi, &sc.psi, dw);
        check_finite(&y2, p, t + 1)?;
    }
    Ok(())
}

/// Terminal values of `y^ε` and `Y^ε` on every path.
#[derive(Debug, Clone)]
pub struct TensorOutcome {
    /// `y^ε_T`, one row of length n per path.
    pub y_final: Vec<f64>,
    /// `Y^ε_T`, one row of length n² per path.
    pub y2_final: Vec<f64>,
    /// Largest `|Y(i,j) − Y(j,i)|` seen on any path and step.
    pub max_asymmetry: f64,
    pub n: usize,
}

impl TensorOutcome {
    pub fn y2(&self, p: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.y2_final[p * nn..(p + 1) * nn]
    }

    pub fn y(&self, p: usize) -> &[f64] {
        &self.y_final[p * self.n..(p + 1) * self.n]
    }
}

/// Simulate `Y^ε` for a spike alongside `y^ε` on the same noise.
pub fn simulate_tensor(
    s: &Scenario,
    xbar: &StateEnsemble,
    e: &PathEnsemble,
    spike: &Spike,
    step: &TensorStep,
    exec: Execution,
) -> Result<TensorOutcome> {
    let kernel = LinearKernel::new(s, xbar, e)?;
    let n = s.n();
    let per_path = exec.map(e.paths(), |p| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let mut asym: f64 = 0.0;
        let mut last = (Vec::new(), Vec::new());
        tensor_path(&kernel, step, spike, p, |t, y, y2| {
            asym = asym.max(max_asymmetry(y2, n));
            if t == s.n_t {
                last = (y.to_vec(), y2.to_vec());
            }
        })?;
        Ok((last.0, last.1, asym))
    });
    let mut out = TensorOutcome { y_final: Vec::new(), y2_final: Vec::new(), max_asymmetry: 0.0, n };
    for r in per_path {
        let (y, y2, a) = r?;
        out.y_final.extend_from_slice(&y);
        out.y2_final.extend_from_slice(&y2);
        out.max_asymmetry = out.max_asymmetry.max(a);
    }
    Ok(out)
}

/// Full `Y^ε` trajectory of a single path, for dumps and tests.
pub fn tensor_trajectory(
    s: &Scenario,
    xbar: &StateEnsemble,
    e: &PathEnsemble,
    spike: &Spike,
    step: &TensorStep,
    path: usize,
) -> Result<(PathSet, Vec<TensorField>)> {
    let kernel = LinearKernel::new(s, xbar, e)?;
    let n = s.n();
    let mut ys = PathSet::zeros(1, s.n_t, n);
    let mut fields = Vec::with_capacity(s.n_t + 1);
    let grid = crate::numerics::Grid2D::new(s.grid);
    let ys_buf = ys.values_mut();
    tensor_path(&kernel, step, spike, path, |t, y, y2| {
        ys_buf[t * n..(t + 1) * n].copy_from_slice(y);
        fields.push(TensorField::from_raw(grid, y2.to_vec()));
    })?;
    Ok((ys, fields))
}
