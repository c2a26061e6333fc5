use super::field::{Field, TensorField};
use super::grid::Grid1D;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Laplacian,
    DivergenceForm,
}

/// Dirichlet operator `∂_λ(a ∂_λ ·)` discretized with midpoint
/// coefficients. The Laplacian is the `a ≡ 1` case.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticOperator {
    kind: OperatorKind,
    grid: Grid1D,
    a_coeff: Option<Field>,
    a_half: Vec<f64>,
}

impl EllipticOperator {
    pub fn laplacian(grid: Grid1D) -> Self {
        EllipticOperator {
            kind: OperatorKind::Laplacian,
            grid,
            a_coeff: None,
            a_half: vec![1.0; grid.n() + 1],
        }
    }

    /// Divergence-form operator from nodal values of `a`. Midpoint values
    /// are averages of neighbours; the boundary midpoints take the nearest
    /// nodal value.
    pub fn divergence_form(a: Field, a0: f64) -> Result<Self> {
        let grid = *a.grid();
        let v = a.values();
        check_ellipticity(v, a0)?;
        let n = grid.n();
        let mut a_half = Vec::with_capacity(n + 1);
        a_half.push(v[0]);
        for i in 1..n {
            a_half.push(0.5 * (v[i - 1] + v[i]));
        }
        a_half.push(v[n - 1]);
        Ok(EllipticOperator { kind: OperatorKind::DivergenceForm, grid, a_coeff: Some(a), a_half })
    }

    /// Divergence-form operator with `a` sampled exactly at the midpoints.
    pub fn divergence_form_fn(grid: Grid1D, a: impl Fn(f64) -> f64, a0: f64) -> Result<Self> {
        let h = grid.h();
        let a_half: Vec<f64> = (0..=grid.n()).map(|i| a(grid.a() + (i as f64 + 0.5) * h)).collect();
        check_ellipticity(&a_half, a0)?;
        let nodal = Field::new(grid, grid.nodes().into_iter().map(&a).collect())?;
        Ok(EllipticOperator { kind: OperatorKind::DivergenceForm, grid, a_coeff: Some(nodal), a_half })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn a_coeff(&self) -> Option<&Field> {
        self.a_coeff.as_ref()
    }

    /// Coefficients at the `n + 1` cell midpoints.
    pub fn a_half(&self) -> &[f64] {
        &self.a_half
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        self.grid.ensure_same(f.grid())?;
        let mut out = vec![0.0; self.grid.n()];
        self.apply_slice(f.values(), &mut out);
        Ok(Field::from_raw(self.grid, out))
    }

    /// Kronecker sum `A_λ + A_μ` on the tensor grid.
    pub fn apply2(&self, w: &TensorField) -> Result<TensorField> {
        self.grid.ensure_same(w.grid().base())?;
        let mut out = vec![0.0; w.grid().len()];
        self.apply2_slice(w.values(), &mut out);
        Ok(TensorField::from_raw(*w.grid(), out))
    }

    pub(crate) fn apply_slice(&self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        let inv_h2 = 1.0 / (self.grid.h() * self.grid.h());
        let a = &self.a_half;
        for i in 0..n {
            let left = if i > 0 { f[i - 1] } else { 0.0 };
            let right = if i + 1 < n { f[i + 1] } else { 0.0 };
            out[i] = (a[i + 1] * (right - f[i]) - a[i] * (f[i] - left)) * inv_h2;
        }
    }

    pub(crate) fn apply2_slice(&self, w: &[f64], out: &mut [f64]) {
        let n = self.grid.n();
        let mut col = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for (row, o) in w.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            self.apply_slice(row, o);
        }
        for j in 0..n {
            for i in 0..n {
                col[i] = w[i * n + j];
            }
            self.apply_slice(&col, &mut tmp);
            for i in 0..n {
                out[i * n + j] += tmp[i];
            }
        }
    }

    /// Dense matrix of the operator, row-major.
    pub fn matrix(&self) -> Vec<f64> {
        let n = self.grid.n();
        let inv_h2 = 1.0 / (self.grid.h() * self.grid.h());
        let a = &self.a_half;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = -(a[i] + a[i + 1]) * inv_h2;
            if i + 1 < n {
                m[i * n + i + 1] = a[i + 1] * inv_h2;
                m[(i + 1) * n + i] = a[i + 1] * inv_h2;
            }
        }
        m
    }

    pub fn implicit_step(&self, dt: f64) -> Result<ImplicitStep> {
        ImplicitStep::new(self, dt)
    }
}

fn check_ellipticity(a: &[f64], a0: f64) -> Result<()> {
    if !(a0 > 0.0) {
        return Err(Error::validation("ellipticity", format!("lower bound a0 must be positive, got {a0}")));
    }
    match a.iter().copied().fold(f64::INFINITY, f64::min) {
        m if m >= a0 && m.is_finite() => Ok(()),
        m => Err(Error::validation("ellipticity", format!("min a = {m} below a0 = {a0}"))),
    }
}

/// Precomputed Thomas factorization of `I − Δt A`.
#[derive(Debug, Clone)]
pub struct ImplicitStep {
    n: usize,
    dt: f64,
    lower: Vec<f64>,
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl ImplicitStep {
    fn new(op: &EllipticOperator, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let n = op.grid.n();
        let r = dt / (op.grid.h() * op.grid.h());
        let a = &op.a_half;
        let diag: Vec<f64> = (0..n).map(|i| 1.0 + r * (a[i] + a[i + 1])).collect();
        let off: Vec<f64> = (0..n.saturating_sub(1)).map(|i| -r * a[i + 1]).collect();
        let mut c_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let sub = if i > 0 { off[i - 1] } else { 0.0 };
            let denom = diag[i] - sub * prev_c;
            inv_denom[i] = 1.0 / denom;
            let sup = if i + 1 < n { off[i] } else { 0.0 };
            c_prime[i] = sup * inv_denom[i];
            prev_c = c_prime[i];
        }
        let mut lower = vec![0.0; n];
        lower[1..].copy_from_slice(&off);
        Ok(ImplicitStep { n, dt, lower, c_prime, inv_denom })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Overwrite `x` with `(I − Δt A)^{-1} x`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        x[0] *= self.inv_denom[0];
        for i in 1..self.n {
            x[i] = (x[i] - self.lower[i] * x[i - 1]) * self.inv_denom[i];
        }
        for i in (0..self.n - 1).rev() {
            x[i] -= self.c_prime[i] * x[i + 1];
        }
    }

    /// Factored tensor step `(I − Δt A) ⊗ (I − Δt A)` inverted along rows,
    /// then along columns.
    pub fn solve2_in_place(&self, w: &mut [f64], scratch: &mut Vec<f64>) {
        let n = self.n;
        debug_assert_eq!(w.len(), n * n);
        for row in w.chunks_exact_mut(n) {
            self.solve_in_place(row);
        }
        scratch.resize(n, 0.0);
        for j in 0..n {
            for i in 0..n {
                scratch[i] = w[i * n + j];
            }
            self.solve_in_place(scratch);
            for i in 0..n {
                w[i * n + j] = scratch[i];
            }
        }
    }
}
