use nalgebra::{DMatrix, SymmetricEigen};

use super::field::{Field, TensorField};
use super::grid::Grid1D;
use super::operator::{EllipticOperator, OperatorKind};
use crate::error::{Error, Result};

/// Eigen-decomposition of `−A` on the interior nodes. Also serves the
/// tensor grid, where eigenvalues are the sums `λ_i + λ_j`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    grid: Grid1D,
    eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors in Euclidean norm; column `j` holds mode `j`,
    /// stored row-major (`vectors[i * n + j]`).
    vectors: Vec<f64>,
    closed_form: bool,
}

impl SpectralBasis {
    pub fn new(op: &EllipticOperator) -> Result<Self> {
        match op.kind() {
            OperatorKind::Laplacian => Ok(Self::sine(*op.grid())),
            OperatorKind::DivergenceForm => Self::dense(op),
        }
    }

    /// Discrete sine modes of the Dirichlet Laplacian.
    pub fn sine(grid: Grid1D) -> Self {
        let n = grid.n();
        let h = grid.h();
        let np1 = (n + 1) as f64;
        let norm = (2.0 / np1).sqrt();
        let eigenvalues = (1..=n)
            .map(|j| {
                let s = (j as f64 * std::f64::consts::PI / (2.0 * np1)).sin();
                4.0 / (h * h) * s * s
            })
            .collect();
        let mut vectors = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let arg = ((j + 1) * (i + 1)) as f64 * std::f64::consts::PI / np1;
                vectors[i * n + j] = norm * arg.sin();
            }
        }
        SpectralBasis { grid, eigenvalues, vectors, closed_form: true }
    }

    fn dense(op: &EllipticOperator) -> Result<Self> {
        let grid = *op.grid();
        let n = grid.n();
        let neg: Vec<f64> = op.matrix().into_iter().map(|v| -v).collect();
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &neg));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        if eigenvalues[0] <= 0.0 {
            return Err(Error::Domain(format!("operator not negative definite: eigenvalue {}", -eigenvalues[0])));
        }
        let mut vectors = vec![0.0; n * n];
        for (j, &k) in order.iter().enumerate() {
            let col = eig.eigenvectors.column(k);
            // fix the sign so the first non-negligible entry is positive
            let sign = col.iter().find(|v| v.abs() > 1e-8).map_or(1.0, |v| v.signum());
            for i in 0..n {
                vectors[i * n + j] = sign * col[i];
            }
        }
        Ok(SpectralBasis { grid, eigenvalues, vectors, closed_form: false })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Eigenvalues of `−A`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn is_closed_form(&self) -> bool {
        self.closed_form
    }

    /// Euclidean-normalized mode `j` as nodal values.
    pub fn mode(&self, j: usize) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|i| self.vectors[i * n + j]).collect()
    }

    /// Mode `j` normalized in discrete `L²(Λ)`.
    pub fn mode_field(&self, j: usize) -> Field {
        let s = 1.0 / self.grid.h().sqrt();
        Field::from_raw(self.grid, self.mode(j).into_iter().map(|v| v * s).collect())
    }

    /// Coefficients `f̂_j = √h Σ_i e_j(i) f_i`, so that `Σ f̂² = ‖f‖²_{L²}`.
    pub fn coefficients(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n();
        let s = self.grid.h().sqrt();
        let mut out = vec![0.0; n];
        for (i, &fi) in f.iter().enumerate() {
            let row = &self.vectors[i * n..(i + 1) * n];
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v * fi;
            }
        }
        out.iter_mut().for_each(|o| *o *= s);
        out
    }

    /// First `count` coefficients only; used for regression features.
    pub fn leading_coefficients(&self, f: &[f64], count: usize) -> Vec<f64> {
        let n = self.n();
        let count = count.min(n);
        let s = self.grid.h().sqrt();
        let mut out = vec![0.0; count];
        for (i, &fi) in f.iter().enumerate() {
            let row = &self.vectors[i * n..i * n + count];
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v * fi;
            }
        }
        out.iter_mut().for_each(|o| *o *= s);
        out
    }

    /// Inverse of [`coefficients`](Self::coefficients).
    pub fn synthesize(&self, coef: &[f64]) -> Vec<f64> {
        let n = self.n();
        let s = 1.0 / self.grid.h().sqrt();
        (0..n)
            .map(|i| {
                let row = &self.vectors[i * n..(i + 1) * n];
                s * row.iter().zip(coef).map(|(v, c)| v * c).sum::<f64>()
            })
            .collect()
    }

    /// Tensor coefficients `ŵ = h Vᵀ W V`, row-major over mode pairs.
    pub fn coefficients2(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n();
        let h = self.grid.h();
        // t = Vᵀ W
        let mut t = vec![0.0; n * n];
        for a in 0..n {
            let vrow = &self.vectors[a * n..(a + 1) * n];
            let wrow = &w[a * n..(a + 1) * n];
            for (i, &via) in vrow.iter().enumerate() {
                let trow = &mut t[i * n..(i + 1) * n];
                for (tb, &wb) in trow.iter_mut().zip(wrow) {
                    *tb += via * wb;
                }
            }
        }
        // out = t V
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let trow = &t[i * n..(i + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (b, &tib) in trow.iter().enumerate() {
                let vrow = &self.vectors[b * n..(b + 1) * n];
                for (o, &v) in orow.iter_mut().zip(vrow) {
                    *o += tib * v;
                }
            }
        }
        out.iter_mut().for_each(|o| *o *= h);
        out
    }

    /// Inverse of [`coefficients2`](Self::coefficients2): `W = h⁻¹ V ŵ Vᵀ`.
    pub fn synthesize2(&self, coef: &[f64]) -> Vec<f64> {
        let n = self.n();
        let h = self.grid.h();
        // t = V ŵ
        let mut t = vec![0.0; n * n];
        for a in 0..n {
            let vrow = &self.vectors[a * n..(a + 1) * n];
            let trow = &mut t[a * n..(a + 1) * n];
            for (i, &vai) in vrow.iter().enumerate() {
                let crow = &coef[i * n..(i + 1) * n];
                for (tb, &c) in trow.iter_mut().zip(crow) {
                    *tb += vai * c;
                }
            }
        }
        // out = t Vᵀ
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            let trow = &t[a * n..(a + 1) * n];
            for b in 0..n {
                let vrow = &self.vectors[b * n..(b + 1) * n];
                out[a * n + b] = trow.iter().zip(vrow).map(|(x, y)| x * y).sum::<f64>() / h;
            }
        }
        out
    }

    fn weight(&self, lambda: f64, gamma: f64) -> f64 {
        if gamma == 0.0 {
            1.0
        } else {
            lambda.powf(gamma)
        }
    }

    fn check_gamma(gamma: f64) -> Result<()> {
        if (-2.0..=1.0).contains(&gamma) {
            Ok(())
        } else {
            Err(Error::Domain(format!("Sobolev order {gamma} outside [-2, 1]")))
        }
    }

    /// `Σ λ_j^γ f̂_j ĝ_j`.
    pub fn sobolev_inner(&self, f: &Field, g: &Field, gamma: f64) -> Result<f64> {
        Self::check_gamma(gamma)?;
        self.grid.ensure_same(f.grid())?;
        self.grid.ensure_same(g.grid())?;
        let (fh, gh) = (self.coefficients(f.values()), self.coefficients(g.values()));
        Ok(self.eigenvalues.iter().zip(fh.iter().zip(&gh)).map(|(&l, (a, b))| self.weight(l, gamma) * a * b).sum())
    }

    /// `Σ (λ_i + λ_j)^γ ŵ_ij v̂_ij`.
    pub fn sobolev_inner2(&self, w: &TensorField, v: &TensorField, gamma: f64) -> Result<f64> {
        Self::check_gamma(gamma)?;
        self.grid.ensure_same(w.grid().base())?;
        self.grid.ensure_same(v.grid().base())?;
        Ok(self.sobolev_inner2_raw(&self.coefficients2(w.values()), &self.coefficients2(v.values()), gamma))
    }

    pub(crate) fn sobolev_inner2_raw(&self, wh: &[f64], vh: &[f64], gamma: f64) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                acc += self.weight(self.eigenvalues[i] + self.eigenvalues[j], gamma) * wh[k] * vh[k];
            }
        }
        acc
    }

    /// Discrete `H^γ` norm; `gamma` must lie in `[−2, 1]`.
    pub fn sobolev_norm<F: SobolevArg + ?Sized>(&self, f: &F, gamma: f64) -> Result<f64> {
        f.sobolev_norm_in(self, gamma)
    }
}

/// Field types with a discrete Sobolev norm.
pub trait SobolevArg {
    fn sobolev_norm_in(&self, basis: &SpectralBasis, gamma: f64) -> Result<f64>;
}

impl SobolevArg for Field {
    fn sobolev_norm_in(&self, basis: &SpectralBasis, gamma: f64) -> Result<f64> {
        Ok(basis.sobolev_inner(self, self, gamma)?.max(0.0).sqrt())
    }
}

impl SobolevArg for TensorField {
    fn sobolev_norm_in(&self, basis: &SpectralBasis, gamma: f64) -> Result<f64> {
        Ok(basis.sobolev_inner2(self, self, gamma)?.max(0.0).sqrt())
    }
}

/// Free-function form of [`SpectralBasis::sobolev_norm`].
pub fn sobolev_norm<F: SobolevArg + ?Sized>(f: &F, basis: &SpectralBasis, gamma: f64) -> Result<f64> {
    f.sobolev_norm_in(basis, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_modes_are_orthonormal() {
        let b = SpectralBasis::sine(Grid1D::unit(11).unwrap());
        for j in 0..11 {
            for k in 0..11 {
                let d: f64 = b.mode(j).iter().zip(b.mode(k)).map(|(x, y)| x * y).sum();
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12);
            }
        }
        assert!(b.eigenvalues().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn dense_basis_agrees_with_closed_form_for_constant_coefficient() {
        let g = Grid1D::new(-1.0, 2.0, 10).unwrap();
        let op = EllipticOperator::divergence_form_fn(g, |_| 1.0, 0.5).unwrap();
        let dense = SpectralBasis::new(&op).unwrap();
        let sine = SpectralBasis::sine(g);
        for (a, b) in dense.eigenvalues().iter().zip(sine.eigenvalues()) {
            assert!((a - b).abs() < 1e-9 * b);
        }
    }

    #[test]
    fn synthesize_inverts_coefficients() {
        let g = Grid1D::unit(7).unwrap();
        let b = SpectralBasis::sine(g);
        let f: Vec<f64> = (0..7).map(|i| (i as f64).cos()).collect();
        let back = b.synthesize(&b.coefficients(&f));
        for (x, y) in f.iter().zip(&back) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesize2_inverts_coefficients2() {
        let b = SpectralBasis::sine(Grid1D::unit(5).unwrap());
        let w: Vec<f64> = (0..25).map(|i| ((i * 7 % 11) as f64).sin()).collect();
        let back = b.synthesize2(&b.coefficients2(&w));
        for (x, y) in w.iter().zip(&back) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_norm() {
        let g = Grid1D::unit(9).unwrap();
        let b = SpectralBasis::sine(g);
        let f = b.mode_field(2);
        let c = -1.7;
        let f = Field::new(g, f.values().iter().map(|v| c * v).collect()).unwrap();
        for gamma in [-1.0, 0.0, 0.5, 1.0] {
            let expect = c.abs() * b.eigenvalues()[2].powf(gamma / 2.0);
            assert!((b.sobolev_norm(&f, gamma).unwrap() - expect).abs() < 1e-10 * expect.max(1.0));
        }
    }
}
