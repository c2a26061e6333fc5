use super::field::{Field, TensorField};
use super::grid::Grid2D;
use crate::error::{Error, Result};

/// Diagonal trace `δ(w)(λ) = w(λ, λ)`.
pub fn delta_trace(w: &TensorField) -> Field {
    let n = w.grid().n();
    Field::from_raw(*w.grid().base(), (0..n).map(|i| w.values()[i * n + i]).collect())
}

/// Discrete adjoint of [`delta_trace`]: mass `f_i / h` at `(i, i)`.
pub fn delta_star(f: &Field) -> TensorField {
    let grid = Grid2D::new(*f.grid());
    let mut w = TensorField::zeros(grid);
    delta_star_add(f.values(), f.grid().h(), 1.0, w.values_mut());
    w.with_symmetric_flag()
}

/// `w += scale · δ*(f)` on raw storage.
pub(crate) fn delta_star_add(f: &[f64], h: f64, scale: f64, w: &mut [f64]) {
    let n = f.len();
    let s = scale / h;
    for (i, &fi) in f.iter().enumerate() {
        w[i * n + i] += s * fi;
    }
}

/// Smallest η the grid resolves; narrower kernels only log a warning.
pub fn resolved_eta(h: f64) -> f64 {
    4.0 * h * h
}

/// Heat-kernel mollification of `δ*(hxx ∘ x̄_T)`:
/// `½(hxx(x̄(λ_i)) + hxx(x̄(λ_j))) (4πη)^{-1/2} exp(−(λ_i − λ_j)² / 4η)`.
pub fn heat_mollifier(xbar_t: &Field, hxx: impl Fn(f64) -> f64, eta: f64) -> Result<TensorField> {
    let vals: Vec<f64> = xbar_t.values().iter().map(|&x| hxx(x)).collect();
    heat_mollifier_values(xbar_t, &vals, eta)
}

/// Same as [`heat_mollifier`] with `hxx ∘ x̄_T` already evaluated.
pub(crate) fn heat_mollifier_values(like: &Field, hxx_vals: &[f64], eta: f64) -> Result<TensorField> {
    let grid = *like.grid();
    let mut out = vec![0.0; grid.n() * grid.n()];
    heat_mollifier_into(&grid.nodes(), hxx_vals, eta, grid.h(), &mut out)?;
    Ok(TensorField::from_raw(Grid2D::new(grid), out).with_symmetric_flag())
}

pub(crate) fn heat_mollifier_into(nodes: &[f64], hxx_vals: &[f64], eta: f64, h: f64, out: &mut [f64]) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Domain(format!("mollifier width must be positive, got {eta}")));
    }
    if eta < resolved_eta(h) * (1.0 - 1e-12) {
        log::warn!("mollifier width {eta:e} below grid resolution (2h)^2 = {:e}", resolved_eta(h));
    }
    let n = nodes.len();
    let c = 1.0 / (4.0 * std::f64::consts::PI * eta).sqrt();
    for i in 0..n {
        for j in i..n {
            let d = nodes[i] - nodes[j];
            let v = 0.5 * (hxx_vals[i] + hxx_vals[j]) * c * (-d * d / (4.0 * eta)).exp();
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grid::Grid1D;

    #[test]
    fn indicator_maps_to_single_diagonal_entry() {
        let g = Grid1D::unit(5).unwrap();
        let mut v = vec![0.0; 5];
        v[3] = 1.0;
        let w = delta_star(&Field::new(g, v).unwrap());
        for i in 0..5 {
            for j in 0..5 {
                let expect = if (i, j) == (3, 3) { 1.0 / g.h() } else { 0.0 };
                assert_eq!(w.get(i, j), expect);
            }
        }
        assert!(w.is_symmetric());
    }

    #[test]
    fn outer_product_trace_is_pointwise_product() {
        let g = Grid1D::unit(4).unwrap();
        let f = Field::new(g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let e = Field::new(g, vec![0.5, -1.0, 2.0, 0.0]).unwrap();
        assert_eq!(delta_trace(&f.outer(&e).unwrap()).values(), &[0.5, -2.0, 6.0, 0.0]);
    }

    #[test]
    fn mollifier_diagonal_and_errors() {
        let g = Grid1D::unit(8).unwrap();
        let x = Field::from_fn(g, |l| l * l);
        let eta = 0.01;
        let m = heat_mollifier(&x, |v| 2.0 + v, eta).unwrap();
        let c = 1.0 / (4.0 * std::f64::consts::PI * eta).sqrt();
        for i in 0..8 {
            assert!((m.get(i, i) - (2.0 + x.values()[i]) * c).abs() < 1e-12);
        }
        assert!(m.is_symmetric());
        assert!(heat_mollifier(&x, |_| 1.0, 0.0).is_err());
        assert!(heat_mollifier(&x, |_| 1.0, -1.0).is_err());
        let zero = heat_mollifier(&x, |_| 0.0, eta).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }
}
