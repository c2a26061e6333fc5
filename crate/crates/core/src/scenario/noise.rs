use crate::error::{Error, Result};
use crate::numerics::{Field, Grid1D, SpectralBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeShapes {
    /// Every mode acts as a spatially constant multiplier.
    Flat,
    /// Mode `m` is the `m`-th eigenfunction, normalized in `L²(Λ)`.
    Sine,
}

/// Truncation of the cylindrical Wiener process to `K` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    k: usize,
    kind: ModeShapes,
    /// `K × n` row-major spatial profiles `g_m(λ_i)`.
    profiles: Vec<f64>,
    shapes: Option<Vec<Field>>,
}

impl NoiseModel {
    pub fn new(grid: Grid1D, k: usize, kind: ModeShapes) -> Result<Self> {
        if k == 0 {
            return Err(Error::validation("noise", "need at least one noise mode"));
        }
        let n = grid.n();
        match kind {
            ModeShapes::Flat => Ok(NoiseModel { k, kind, profiles: vec![1.0; k * n], shapes: None }),
            ModeShapes::Sine => {
                if k > n {
                    return Err(Error::validation("noise", format!("{k} sine modes exceed {n} grid nodes")));
                }
                let basis = SpectralBasis::sine(grid);
                let shapes: Vec<Field> = (0..k).map(|m| basis.mode_field(m)).collect();
                let profiles = shapes.iter().flat_map(|f| f.values().to_vec()).collect();
                Ok(NoiseModel { k, kind, profiles, shapes: Some(shapes) })
            }
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> ModeShapes {
        self.kind
    }

    /// Orthonormal mode shapes, when the noise is not flat.
    pub fn shapes(&self) -> Option<&[Field]> {
        self.shapes.as_deref()
    }

    /// `g_m(λ_i)` for all nodes.
    pub fn profile(&self, m: usize) -> &[f64] {
        let n = self.profiles.len() / self.k;
        &self.profiles[m * n..(m + 1) * n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_shapes_are_orthonormal_in_l2() {
        let g = Grid1D::new(0.0, 2.0, 10).unwrap();
        let noise = NoiseModel::new(g, 3, ModeShapes::Sine).unwrap();
        let shapes = noise.shapes().unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let ip = shapes[a].inner(&shapes[b]).unwrap();
                assert!((ip - if a == b { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn needs_a_mode() {
        assert!(NoiseModel::new(Grid1D::unit(4).unwrap(), 0, ModeShapes::Flat).is_err());
    }
}
