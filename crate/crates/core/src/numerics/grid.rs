use crate::error::{Error, Result};

/// Uniform grid of interior nodes on an interval with homogeneous
/// Dirichlet boundary values (never stored).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    a: f64,
    b: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation("grid", format!("need n >= 2 interior nodes, got {n}")));
        }
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::validation("grid", format!("need a < b, got [{a}, {b}]")));
        }
        Ok(Grid1D { a, b, n })
    }

    /// Unit interval with `n` interior nodes.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(0.0, 1.0, n)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.n + 1) as f64
    }

    /// Coordinate of interior node `j` (0-based).
    pub fn node(&self, j: usize) -> f64 {
        self.a + (j + 1) as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    pub(crate) fn ensure_same(&self, other: &Grid1D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Structural(format!(
                "grid mismatch: {} nodes on [{}, {}] vs {} nodes on [{}, {}]",
                self.n, self.a, self.b, other.n, other.a, other.b
            )))
        }
    }
}

/// Tensor grid `base x base`; node `(i, j)` is stored at `i * n + j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    base: Grid1D,
}

impl Grid2D {
    pub fn new(base: Grid1D) -> Self {
        Grid2D { base }
    }

    pub fn base(&self) -> &Grid1D {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.base.n
    }

    pub fn len(&self) -> usize {
        self.base.n * self.base.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.base.n + j
    }

    /// Quadrature weight of one node on the square.
    pub fn cell_area(&self) -> f64 {
        let h = self.base.h();
        h * h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_interior_and_uniform() {
        let g = Grid1D::new(-1.0, 2.0, 5).unwrap();
        assert!((g.h() - 0.5).abs() < 1e-15);
        assert!((g.node(0) + 0.5).abs() < 1e-15);
        assert!((g.node(4) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid1D::new(0.0, 1.0, 1).is_err());
        assert!(Grid1D::new(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn row_major_layout() {
        let g = Grid2D::new(Grid1D::unit(4).unwrap());
        assert_eq!(g.index(2, 3), 11);
        assert_eq!(g.len(), 16);
    }
}
