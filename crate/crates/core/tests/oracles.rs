//! Estimators against independent noise-free and affine oracles.

mod common;

use common::{affine_ansatz, relative, scenario, DeterministicOracle, PTerminal};
use smplab_core::adjoint::{solve_adjoint1, solve_adjoint2, solve_adjoint2_mollified, EvalScratch, RegressionBasis, Terminal};
use smplab_core::forward::{simulate_state, PathEnsemble, TensorStep};
use smplab_core::numerics::{Field, Grid2D, SpectralBasis, TensorField};
use smplab_core::verification::{hamiltonian, noise_free_oracle, oracle_check};
use smplab_core::Execution;

/// Logistic drift without noise, with data compatible with the Dirichlet
/// boundary (no forcing, zero targets), so the scheme keeps its full order.
fn logistic(steps: usize) -> String {
    format!(
        r#"
[grid]
n = 16
[coefficients]
preset = "logistic-drift"
c1 = 1.0
c = 0.0
s = [0.0]
kappa = 0.5
rho = 0.5
x_ref = 0.0
r = 0.1
w = 1.0
x_target = 0.0
[controls]
points = [-1.0, 1.0]
reference = [1.0, -1.0]
[noise]
shapes = "sine"
[time]
t = 1.0
steps = {steps}
[run]
seed = 1
paths = 20
x0_amplitude = 0.5
"#
    )
}

struct NoiseFree {
    p: Vec<Vec<f64>>,
    big_p: Vec<Vec<f64>>,
}

fn noise_free(steps: usize, eta: impl Fn(f64) -> f64) -> (smplab_core::scenario::Scenario, NoiseFree) {
    let s = scenario(&logistic(steps));
    let exec = Execution::Sequential;
    let e = PathEnsemble::zeros(20, s.n_t, s.k(), s.dt()).unwrap();
    let xbar = simulate_state(&s, &s.reference, &e, exec).unwrap();
    let pq = solve_adjoint1(&s, &xbar, &e, RegressionBasis::default(), exec).unwrap();
    let step = TensorStep::factored(&s).unwrap();
    let big = solve_adjoint2_mollified(&s, &xbar, &e, &pq, eta(s.grid.h()), RegressionBasis::default(), &step, exec).unwrap();
    let p = (0..steps).map(|k| pq.mean_p(k).values().to_vec()).collect();
    let big_p = (0..steps).map(|k| big.mean_p(k).values().to_vec()).collect();
    (s, NoiseFree { p, big_p })
}

#[test]
fn noise_free_adjoints_match_the_backward_pde_oracle() {
    // Both schemes are first order in Δt; one Richardson step on the pair
    // (N, 2N) removes that term before comparing with the RK4 oracle.
    let eta = |h: f64| 4.0 * h * h;
    let coarse_n = 2048;
    let (_, coarse) = noise_free(coarse_n, eta);
    let (s, fine) = noise_free(2 * coarse_n, eta);
    let oracle = DeterministicOracle::solve(&s, 2, PTerminal::Mollified(eta(s.grid.h())));
    let extrapolate = |f: &[f64], c: &[f64]| -> Vec<f64> { f.iter().zip(c).map(|(a, b)| 2.0 * a - b).collect() };
    let (mut worst_p, mut worst_big) = (0.0f64, 0.0f64);
    for k in [0, coarse_n / 4, coarse_n / 2, 3 * coarse_n / 4, coarse_n - 1] {
        worst_p = worst_p.max(relative(&extrapolate(&fine.p[2 * k], &coarse.p[k]), &oracle.p[2 * k]));
        worst_big = worst_big.max(relative(&extrapolate(&fine.big_p[2 * k], &coarse.big_p[k]), &oracle.big_p[2 * k]));
    }
    assert!(worst_p < 1e-3, "p: {worst_p:.3e}");
    assert!(worst_big < 1e-3, "P: {worst_big:.3e}");
}

#[test]
fn diagonal_terminal_matches_the_delta_star_oracle_in_h_minus_one() {
    let steps = 1024;
    let s = scenario(&logistic(steps));
    let exec = Execution::Sequential;
    let e = PathEnsemble::zeros(20, s.n_t, s.k(), s.dt()).unwrap();
    let xbar = simulate_state(&s, &s.reference, &e, exec).unwrap();
    let pq = solve_adjoint1(&s, &xbar, &e, RegressionBasis::default(), exec).unwrap();
    let step = TensorStep::factored(&s).unwrap();
    let diag = solve_adjoint2(&s, &xbar, &e, &pq, Terminal::Diagonal, RegressionBasis::default(), &step, exec).unwrap();
    let oracle = DeterministicOracle::solve(&s, 2, PTerminal::Diagonal);
    let basis = SpectralBasis::new(&s.op).unwrap();
    let g2 = Grid2D::new(s.grid);
    let norm = |a: Vec<f64>| basis.sobolev_norm(&TensorField::new(g2, a).unwrap(), -1.0).unwrap();
    for k in [0, steps / 4, steps / 2, 3 * steps / 4, steps - 1] {
        let o = &oracle.big_p[k];
        let d: Vec<f64> = diag.mean_p(k).values().iter().zip(o).map(|(a, b)| a - b).collect();
        let rel = norm(d) / norm(o.clone());
        assert!(rel < 0.05, "step {k}: {rel:.3e}");
    }
}

fn additive(steps: usize) -> String {
    format!(
        r#"
[grid]
n = 32
[coefficients]
preset = "additive"
beta = -1.0
c = 1.0
s = [0.4, 0.2]
kappa = 0.5
x_ref = 0.0
r = 0.1
w = 1.0
x_target = 0.0
[controls]
points = [-1.0, 1.0]
reference = [1.0, -1.0]
[noise]
shapes = "sine"
[time]
t = 1.0
steps = {steps}
[run]
seed = 11
paths = 2000
x0_amplitude = 0.5
"#
    )
}

#[test]
fn additive_adjoint_matches_the_affine_ansatz() {
    let steps = 1024;
    let s = scenario(&additive(steps));
    let exec = Execution::default();
    let m = s.run.paths;
    let e = PathEnsemble::generate(s.seed, m, s.n_t, s.k(), s.dt(), exec).unwrap();
    let xbar = simulate_state(&s, &s.reference, &e, exec).unwrap();
    let pq = solve_adjoint1(&s, &xbar, &e, RegressionBasis::default(), exec).unwrap();
    let (ms, vs) = affine_ansatz(&s, -1.0, &[1.0], 0.0, 1.0, 0.0, 1);
    let (n, h) = (s.n(), s.grid.h());
    let mut sc = EvalScratch::default();
    let mut fitted = vec![0.0; n];
    for k in [0, steps / 4, steps / 2, 3 * steps / 4, steps - 1] {
        let (mut num, mut den) = (0.0, 0.0);
        for p in 0..m {
            pq.p_at(&s, &xbar, p, k, &mut sc, &mut fitted);
            let x = xbar.state(p, k);
            let (mut d2, mut o2) = (0.0, 0.0);
            for a in 0..n {
                let exact: f64 = (0..n).map(|b| ms[k][a * n + b] * x[b]).sum::<f64>() + vs[k][a];
                d2 += h * (fitted[a] - exact).powi(2);
                o2 += h * exact * exact;
            }
            num += d2.sqrt();
            den += o2.sqrt();
        }
        assert!(num / den < 0.02, "step {k}: {:.3e}", num / den);
    }
}

#[test]
fn hamiltonian_at_the_initial_time_matches_a_hand_evaluation() {
    let s = scenario(&additive(64));
    let (ms, vs) = affine_ansatz(&s, -1.0, &[1.0], 0.0, 1.0, 0.0, 1);
    let (n, h) = (s.n(), s.grid.h());
    let x = s.x0.values();
    let p: Vec<f64> = (0..n).map(|a| (0..n).map(|b| ms[0][a * n + b] * x[b]).sum::<f64>() + vs[0][a]).collect();
    let amp = [0.4, 0.2];
    let profile = |m: usize, i: usize| 2f64.sqrt() * ((m + 1) as f64 * std::f64::consts::PI * (i + 1) as f64 * h).sin();
    for v in [-1.0, 1.0] {
        // dp = M dx, so q_m = M σ_m g_m
        let q: Vec<Field> = (0..2)
            .map(|m| {
                let sg: Vec<f64> = (0..n).map(|i| amp[m] * (1.0 + 0.5 * v) * profile(m, i)).collect();
                let qm = (0..n).map(|a| (0..n).map(|b| ms[0][a * n + b] * sg[b]).sum()).collect();
                Field::new(s.grid, qm).unwrap()
            })
            .collect();
        let mut hand = 0.0;
        for i in 0..n {
            hand += h * (0.5 * x[i] * x[i] + 0.1 * v * v + p[i] * (-x[i] + v));
            for m in 0..2 {
                hand += h * q[m].values()[i] * amp[m] * (1.0 + 0.5 * v) * profile(m, i);
            }
        }
        let got = hamiltonian(&s, &s.x0, &[v], &Field::new(s.grid, p.clone()).unwrap(), &q).unwrap();
        assert!((got - hand).abs() <= 1e-6 * hand.abs().max(1.0), "v={v}: {got} vs {hand}");
    }
}

fn fixture(name: &str) -> smplab_core::scenario::Scenario {
    smplab_core::scenario::load_scenario(format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn library_oracle_agrees_with_the_second_difference_oracle() {
    let s = scenario(&logistic(1024));
    let eta = 4.0 * s.grid.h().powi(2);
    let lib = noise_free_oracle(&s, eta).unwrap();
    let own = DeterministicOracle::solve(&s, 4, PTerminal::Mollified(eta));
    // the two integrators use different sub-steps; next to the terminal the
    // stiff high modes of the mollified data separate them slightly
    for k in [0, 256, 512, 1023] {
        assert!(relative(&lib.p[k], &own.p[k]) < 1e-6, "p at {k}: {:e}", relative(&lib.p[k], &own.p[k]));
        assert!(relative(&lib.big_p[k], &own.big_p[k]) < 1e-4, "P at {k}: {:e}", relative(&lib.big_p[k], &own.big_p[k]));
    }
}

#[test]
fn oracle_check_passes_on_the_oracle_fixture() {
    let s = fixture("oracle.cfg");
    let r = oracle_check(&s, s.run.eta.resolve(s.grid.h()), Execution::default()).unwrap();
    assert!(r.worst_p() < 1e-3 && r.worst_big_p() < 1e-3, "{r:?}");
}

#[test]
fn oracle_rejects_noisy_scenarios() {
    assert!(noise_free_oracle(&fixture("bilinear16.cfg"), 0.01).is_err());
}
