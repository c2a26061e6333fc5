use super::state::StateEnsemble;
use crate::exec::Execution;
use crate::scenario::Scenario;

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    /// Mean and standard error of the mean from per-path samples.
    pub fn from_samples(xs: &[f64]) -> Self {
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        if xs.len() < 2 {
            return Estimate { mean, std_err: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        Estimate { mean, std_err: (var / m).sqrt() }
    }

    /// From `Σx` and `Σx²` over `m` samples.
    pub fn from_sums(sum: f64, sum_sq: f64, m: usize) -> Self {
        let mf = m as f64;
        let mean = sum / mf;
        if m < 2 {
            return Estimate { mean, std_err: 0.0 };
        }
        let var = ((sum_sq - mf * mean * mean) / (mf - 1.0)).max(0.0);
        Estimate { mean, std_err: (var / mf).sqrt() }
    }
}

/// `∫∫ l dλ dt + ∫ h dλ` on one path, left-endpoint rule in time.
pub fn path_cost(s: &Scenario, xs: &StateEnsemble, p: usize) -> f64 {
    let (h, dt, c) = (s.grid.h(), s.dt(), &s.coeffs);
    let mut running = 0.0;
    for k in 0..s.n_t {
        let u = xs.control(p, k);
        running += xs.state(p, k).iter().map(|&x| c.l(x, u)).sum::<f64>();
    }
    let terminal: f64 = xs.state(p, s.n_t).iter().map(|&x| c.h(x)).sum();
    h * (dt * running + terminal)
}

/// Per-path costs, in path order.
pub fn path_costs(s: &Scenario, xs: &StateEnsemble, exec: Execution) -> Vec<f64> {
    exec.map(xs.paths(), |p| path_cost(s, xs, p))
}

/// `J(u)` with its standard error.
pub fn cost(s: &Scenario, xs: &StateEnsemble, exec: Execution) -> Estimate {
    Estimate::from_samples(&path_costs(s, xs, exec))
}
