//! Structural identities and invariants over random inputs.

mod common;

use proptest::prelude::*;
use smplab_core::adjoint::{solve_adjoint1, solve_adjoint2_mollified, EvalScratch, RegressionBasis};
use smplab_core::forward::{simulate_linear, simulate_state, PathEnsemble, TensorStep};
use smplab_core::numerics::{delta_star, delta_trace, EllipticOperator, Field, Grid1D, Grid2D, SpectralBasis, TensorField};
use smplab_core::verification::smp_gap;
use smplab_core::Execution;

fn grid_and_values(max_n: usize) -> impl Strategy<Value = (Grid1D, Vec<f64>, Vec<f64>)> {
    (2..=max_n, -2.0..0.0f64, 0.5..3.0f64).prop_flat_map(|(n, a, len)| {
        let grid = Grid1D::new(a, a + len, n).unwrap();
        (Just(grid), prop::collection::vec(-1.0..1.0f64, n), prop::collection::vec(-1.0..1.0f64, n * n))
    })
}

fn operator(grid: Grid1D, wiggle: f64) -> EllipticOperator {
    EllipticOperator::divergence_form_fn(grid, move |x| 1.5 + wiggle * (3.0 * x).sin(), 0.4).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn delta_star_is_the_adjoint_of_the_diagonal_trace((grid, f, w) in grid_and_values(24)) {
        let f = Field::new(grid, f).unwrap();
        let w = TensorField::new(Grid2D::new(grid), w).unwrap();
        let lhs = delta_star(&f).inner(&w).unwrap();
        let rhs = f.inner(&delta_trace(&w)).unwrap();
        prop_assert!(close(lhs, rhs, 1e-10), "{lhs} vs {rhs}");
    }

    #[test]
    fn tensor_dissipation_identity_in_h_minus_one((grid, _f, w) in grid_and_values(16), wiggle in 0.0..0.4f64) {
        let op = operator(grid, wiggle);
        let basis = SpectralBasis::new(&op).unwrap();
        let w = TensorField::new(Grid2D::new(grid), w).unwrap();
        let aw = op.apply2(&w).unwrap();
        let lhs = basis.sobolev_inner2(&aw, &w, -1.0).unwrap();
        let rhs = -w.l2_norm().powi(2);
        prop_assert!(close(lhs, rhs, 1e-10), "{lhs} vs {rhs}");
    }

    #[test]
    fn field_dissipation_identity_in_h_minus_one((grid, f, _w) in grid_and_values(24), wiggle in 0.0..0.4f64) {
        let op = operator(grid, wiggle);
        let basis = SpectralBasis::new(&op).unwrap();
        let f = Field::new(grid, f).unwrap();
        let lhs = basis.sobolev_inner(&op.apply(&f).unwrap(), &f, -1.0).unwrap();
        prop_assert!(close(lhs, -f.l2_norm().powi(2), 1e-10));
    }

    #[test]
    fn operator_is_symmetric((grid, f, w) in grid_and_values(24), wiggle in 0.0..0.4f64) {
        let op = operator(grid, wiggle);
        let f = Field::new(grid, f).unwrap();
        let g = Field::new(grid, w[..grid.n()].to_vec()).unwrap();
        let lhs = op.apply(&f).unwrap().inner(&g).unwrap();
        let rhs = f.inner(&op.apply(&g).unwrap()).unwrap();
        prop_assert!(close(lhs, rhs, 1e-10));
    }

    #[test]
    fn discrete_poincare_inequality((grid, f, _w) in grid_and_values(24), wiggle in 0.0..0.4f64) {
        let basis = SpectralBasis::new(&operator(grid, wiggle)).unwrap();
        let f = Field::new(grid, f).unwrap();
        let lmin = basis.eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        let h1 = basis.sobolev_norm(&f, 1.0).unwrap();
        let l2 = basis.sobolev_norm(&f, 0.0).unwrap();
        let hm1 = basis.sobolev_norm(&f, -1.0).unwrap();
        prop_assert!(lmin.sqrt() * l2 <= h1 * (1.0 + 1e-12));
        prop_assert!(lmin.sqrt() * hm1 <= l2 * (1.0 + 1e-12));
    }

    #[test]
    fn trace_of_a_symmetric_tensor_ignores_transposition((grid, _f, w) in grid_and_values(24)) {
        let n = grid.n();
        let sym: Vec<f64> = (0..n * n).map(|a| 0.5 * (w[a] + w[(a % n) * n + a / n])).collect();
        let t = TensorField::new(Grid2D::new(grid), sym).unwrap();
        let (a, b) = (delta_trace(&t), delta_trace(&t.transpose()));
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn implicit_step_is_a_contraction((grid, f, _w) in grid_and_values(24), wiggle in 0.0..0.4f64, dt in 1e-4..1.0f64) {
        let step = operator(grid, wiggle).implicit_step(dt).unwrap();
        let mut x = f.clone();
        step.solve_in_place(&mut x);
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        prop_assert!(norm(&x) <= norm(&f) * (1.0 + 1e-12));
    }

    #[test]
    fn factored_tensor_step_maps_outer_products_to_outer_products((grid, f, w) in grid_and_values(16), dt in 1e-3..0.5f64) {
        let n = grid.n();
        let step = operator(grid, 0.2).implicit_step(dt).unwrap();
        let g = &w[..n];
        let mut outer: Vec<f64> = (0..n * n).map(|a| f[a / n] * g[a % n]).collect();
        step.solve2_in_place(&mut outer, &mut Vec::new());
        let (mut bf, mut bg) = (f.clone(), g.to_vec());
        step.solve_in_place(&mut bf);
        step.solve_in_place(&mut bg);
        for a in 0..n * n {
            prop_assert!((outer[a] - bf[a / n] * bg[a % n]).abs() < 1e-12);
        }
    }
}

const SMALL: &str = r#"
[grid]
n = 8
[coefficients]
preset = "bilinear"
beta = -0.5
c = 1.0
s = [0.5, 0.3]
kappa = 1.0
x_ref = 0.0
r = 0.1
w = 1.0
x_target = 0.5
[controls]
points = [-1.0, 1.0]
reference = [1.0, -1.0]
[noise]
shapes = "sine"
[time]
t = 1.0
steps = 16
[run]
seed = 2
paths = 400
x0_amplitude = 0.5
"#;

fn small(x_target: f64, x_ref: f64) -> smplab_core::scenario::Scenario {
    common::scenario(
        &SMALL.replace("x_target = 0.5", &format!("x_target = {x_target}")).replace("x_ref = 0.0", &format!("x_ref = {x_ref}")),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linear_equation_is_linear_in_its_sources(alpha in -2.0..2.0f64, beta in -2.0..2.0f64, seed in 0u64..1000) {
        let s = small(0.5, 0.0);
        let exec = Execution::Sequential;
        let e = PathEnsemble::generate(seed, 20, s.n_t, s.k(), s.dt(), exec).unwrap();
        let xbar = simulate_state(&s, &s.reference, &e, exec).unwrap();
        let (n, kk) = (s.n(), s.k());
        let src = move |which: usize, scale: f64| {
            move |p: usize, k: usize, phi: &mut [f64], psi: &mut [f64]| {
                for (i, f) in phi.iter_mut().enumerate().take(n) {
                    *f = scale * ((which + 1) as f64 * (i + k) as f64 * 0.3 + p as f64).sin();
                }
                for m in 0..kk {
                    for i in 0..n {
                        psi[m * n + i] = scale * ((which + m + 2) as f64 * (i * k) as f64 * 0.1).cos();
                    }
                }
            }
        };
        let a = simulate_linear(&s, &xbar, &e, &src(0, 1.0), exec).unwrap();
        let b = simulate_linear(&s, &xbar, &e, &src(1, 1.0), exec).unwrap();
        let both = |p: usize, k: usize, phi: &mut [f64], psi: &mut [f64]| {
            let (mut p1, mut q1) = (vec![0.0; n], vec![0.0; kk * n]);
            src(0, alpha)(p, k, &mut p1, &mut q1);
            src(1, beta)(p, k, phi, psi);
            for (x, y) in phi.iter_mut().zip(&p1) {
                *x += y;
            }
            for (x, y) in psi.iter_mut().zip(&q1) {
                *x += y;
            }
        };
        let c = simulate_linear(&s, &xbar, &e, &both, exec).unwrap();
        for p in 0..e.paths() {
            for k in 0..=s.n_t {
                for i in 0..n {
                    let want = alpha * a.at(p, k)[i] + beta * b.at(p, k)[i];
                    prop_assert!((c.at(p, k)[i] - want).abs() <= 1e-9 * want.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn backward_map_is_affine_in_the_cost_data(theta in -1.0..2.0f64, a in -1.0..1.0f64, b in -1.0..1.0f64) {
        // (x_target, x_ref) enter h_x and l_x affinely, so an affine
        // combination of the data gives the same combination of (p, q)
        let exec = Execution::Sequential;
        let s0 = small(a, b);
        let s1 = small(b, a);
        let mix = small(theta * a + (1.0 - theta) * b, theta * b + (1.0 - theta) * a);
        let e = PathEnsemble::generate(s0.seed, s0.run.paths, s0.n_t, s0.k(), s0.dt(), exec).unwrap();
        let xbar = simulate_state(&s0, &s0.reference, &e, exec).unwrap();
        let solve = |s| solve_adjoint1(s, &xbar, &e, RegressionBasis::default(), exec).unwrap();
        let (p0, p1, pm) = (solve(&s0), solve(&s1), solve(&mix));
        let (n, kk) = (s0.n(), s0.k());
        let mut sc = EvalScratch::default();
        let mut buf = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; kk * n], vec![0.0; kk * n], vec![0.0; kk * n]];
        for p in [0, 199, 399] {
            for k in 0..s0.n_t {
                let [a0, a1, am, b0, b1, bm] = &mut buf;
                p0.pq_at(&xbar, p, k, &mut sc, a0, b0);
                p1.pq_at(&xbar, p, k, &mut sc, a1, b1);
                pm.pq_at(&xbar, p, k, &mut sc, am, bm);
                for (got, (x, y)) in am.iter().chain(bm.iter()).zip(a0.iter().chain(b0.iter()).zip(a1.iter().chain(b1.iter()))) {
                    let want = theta * x + (1.0 - theta) * y;
                    prop_assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "path {p} step {k}: {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn gap_vanishes_exactly_at_the_reference_control() {
    let s = small(0.5, 0.0);
    let exec = Execution::Sequential;
    let e = PathEnsemble::generate(s.seed, s.run.paths, s.n_t, s.k(), s.dt(), exec).unwrap();
    let xbar = simulate_state(&s, &s.reference, &e, exec).unwrap();
    let rb = RegressionBasis::default();
    let pq = solve_adjoint1(&s, &xbar, &e, rb, exec).unwrap();
    let step = TensorStep::factored(&s).unwrap();
    let big = solve_adjoint2_mollified(&s, &xbar, &e, &pq, 0.1, rb, &step, exec).unwrap();
    for p in [0, 17, 399] {
        for k in [0, 7, 15] {
            let u = xbar.control(p, k).to_vec();
            assert_eq!(smp_gap(&s, &xbar, &pq, &big, p, k, &u).unwrap(), 0.0);
        }
    }
}
