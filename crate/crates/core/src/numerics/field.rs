use super::grid::{Grid1D, Grid2D};
use crate::error::{Error, Result};

/// Real function on the interior nodes of a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::Structural(format!(
                "field has {} values on a grid with {} nodes",
                values.len(),
                grid.n()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite field value at node {i}")));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Field { grid, values: vec![0.0; grid.n()] }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Field { grid, values: grid.nodes().into_iter().map(f).collect() }
    }

    pub(crate) fn from_raw(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Discrete `L^2(Λ)` inner product `h Σ f_i g_i`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self.grid.h() * dot(&self.values, &other.values))
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.h() * dot(&self.values, &self.values)).sqrt()
    }

    /// Outer product `f(λ) g(μ)`.
    pub fn outer(&self, other: &Field) -> Result<TensorField> {
        self.grid.ensure_same(&other.grid)?;
        let n = self.grid.n();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = self.values[i] * other.values[j];
            }
        }
        Ok(TensorField::from_raw(Grid2D::new(self.grid), values))
    }
}

/// Real function on the interior nodes of a [`Grid2D`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: Grid2D,
    values: Vec<f64>,
    symmetric: bool,
}

/// Tolerance behind the `symmetric` flag.
pub const SYMMETRY_TOL: f64 = 1e-12;

impl TensorField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Structural(format!(
                "tensor field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite tensor value at index {i}")));
        }
        Ok(TensorField { grid, values, symmetric: false })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        TensorField { grid, values: vec![0.0; grid.len()], symmetric: true }
    }

    pub(crate) fn from_raw(grid: Grid2D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        TensorField { grid, values, symmetric: false }
    }

    /// Set the symmetric flag after checking it within [`SYMMETRY_TOL`].
    pub fn mark_symmetric(mut self) -> Result<Self> {
        let asym = self.max_asymmetry();
        if asym > SYMMETRY_TOL {
            return Err(Error::Domain(format!("tensor not symmetric: max |w_ij - w_ji| = {asym:e}")));
        }
        self.symmetric = true;
        Ok(self)
    }

    pub(crate) fn with_symmetric_flag(mut self) -> Self {
        self.symmetric = true;
        self
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn max_asymmetry(&self) -> f64 {
        max_asymmetry(&self.values, self.grid.n())
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.symmetric = false;
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn transpose(&self) -> TensorField {
        let n = self.grid.n();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[j * n + i] = self.values[i * n + j];
            }
        }
        TensorField { grid: self.grid, values, symmetric: self.symmetric }
    }

    /// Discrete `L^2(Λ²)` inner product `h² Σ w_ij v_ij`.
    pub fn inner(&self, other: &TensorField) -> Result<f64> {
        self.grid.base().ensure_same(other.grid.base())?;
        Ok(self.grid.cell_area() * dot(&self.values, &other.values))
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_area() * dot(&self.values, &self.values)).sqrt()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn max_asymmetry(values: &[f64], n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((values[i * n + j] - values[j * n + i]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_and_finiteness_are_enforced() {
        let g = Grid1D::unit(4).unwrap();
        assert!(Field::new(g, vec![0.0; 3]).is_err());
        assert!(Field::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(TensorField::new(Grid2D::new(g), vec![0.0; 15]).is_err());
    }

    #[test]
    fn outer_product_is_row_major() {
        let g = Grid1D::unit(3).unwrap();
        let f = Field::new(g, vec![1.0, 2.0, 3.0]).unwrap();
        let e = Field::new(g, vec![1.0, 0.0, -1.0]).unwrap();
        let w = f.outer(&e).unwrap();
        assert_eq!(w.get(1, 2), -2.0);
        assert_eq!(w.get(2, 0), 3.0);
    }

    #[test]
    fn symmetric_flag_is_checked() {
        let g = Grid2D::new(Grid1D::unit(2).unwrap());
        let w = TensorField::new(g, vec![1.0, 2.0, 2.0 + 1e-9, 1.0]).unwrap();
        assert!(w.clone().mark_symmetric().is_err());
        let w = TensorField::new(g, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(w.mark_symmetric().unwrap().is_symmetric());
    }
}
