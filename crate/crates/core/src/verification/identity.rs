//! `Y^ε_T` against the outer product `y^ε_T ⊗ y^ε_T` on shared noise.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forward::{simulate_state, simulate_tensor, PathEnsemble, Spike, TensorStep};
use crate::scenario::Scenario;

/// Distances between the simulated tensor process and the outer product
/// of the simulated first variation, in the plain Frobenius norm on the
/// node grid (the factor `h` cancels in every ratio).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorIdentityReport {
    /// `E‖Y_T − y_T⊗y_T‖ / E‖y_T⊗y_T‖`.
    pub pathwise: f64,
    /// `(E‖Y_T − y_T⊗y_T‖² / E‖y_T⊗y_T‖²)^{1/2}`.
    pub rms: f64,
    /// `‖E Y_T − E y_T⊗y_T‖ / ‖E y_T⊗y_T‖`.
    pub in_mean: f64,
    pub max_asymmetry: f64,
    pub paths: usize,
}

impl TensorIdentityReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.pathwise <= tol
    }
}

/// Tensor identity for the spike configured in the scenario.
pub fn tensor_identity(s: &Scenario, e: &PathEnsemble, step: &TensorStep, exec: Execution) -> Result<TensorIdentityReport> {
    let sp = s.run.spike.clone().ok_or_else(|| Error::validation("spike", "the scenario configures no spike"))?;
    let spike = Spike::new(s, sp.v, sp.tau, sp.eps)?;
    let xbar = simulate_state(s, &s.reference, e, exec)?;
    let out = simulate_tensor(s, &xbar, e, &spike, step, exec)?;
    let (n, m) = (s.n(), e.paths());
    let nn = n * n;
    let mut mean_y2 = vec![0.0; nn];
    let mut mean_yy = vec![0.0; nn];
    let (mut d1, mut o1, mut d2, mut o2) = (0.0, 0.0, 0.0, 0.0);
    for p in 0..m {
        let (y, y2) = (out.y(p), out.y2(p));
        let (mut d, mut o) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let a = i * n + j;
                let yy = y[i] * y[j];
                mean_y2[a] += y2[a];
                mean_yy[a] += yy;
                d += (y2[a] - yy).powi(2);
                o += yy * yy;
            }
        }
        d1 += d.sqrt();
        o1 += o.sqrt();
        d2 += d;
        o2 += o;
    }
    let num = mean_y2.iter().zip(&mean_yy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den = mean_yy.iter().map(|b| b * b).sum::<f64>().sqrt();
    let ratio = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a / b.max(f64::MIN_POSITIVE) };
    Ok(TensorIdentityReport {
        pathwise: ratio(d1, o1),
        rms: ratio(d2.sqrt(), o2.sqrt()),
        in_mean: ratio(num, den),
        max_asymmetry: out.max_asymmetry,
        paths: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    const ZERO_NOISE: &str = r#"
[grid]
n = 8
[coefficients]
preset = "bilinear"
beta = -0.5
c = 1.0
s = [0.0]
kappa = 1.0
x_ref = 0.0
r = 0.1
w = 1.0
x_target = 0.5
[controls]
points = [-1.0, 1.0]
reference = [1.0]
[time]
t = 1.0
steps = 32
[run]
seed = 3
paths = 4
spike_tau = 0.25
spike_eps = 0.125
spike_v = -1.0
"#;

    fn zero_noise(steps: usize) -> TensorIdentityReport {
        let s = parse_scenario(&ZERO_NOISE.replace("steps = 32", &format!("steps = {steps}"))).unwrap();
        let e = PathEnsemble::generate(s.seed, 4, s.n_t, s.k(), s.dt(), Execution::Sequential).unwrap();
        tensor_identity(&s, &e, &TensorStep::factored(&s).unwrap(), Execution::Sequential).unwrap()
    }

    #[test]
    fn without_noise_the_gap_is_first_order_in_the_step() {
        // With σ ≡ 0 the gap is the Δt²φ⊗φ term of the spike window plus
        // the drift splitting, O(Δt/ε) relative.
        let (coarse, fine) = (zero_noise(32), zero_noise(128));
        assert!((coarse.pathwise - coarse.in_mean).abs() < 1e-12, "{coarse:?}");
        let ratio = coarse.pathwise / fine.pathwise;
        assert!((3.5..4.5).contains(&ratio), "{coarse:?} {fine:?}");
        assert!(fine.pathwise < 0.1);
        assert!(fine.max_asymmetry < 1e-15);
    }
}
