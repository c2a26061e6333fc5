//! Nemytskii coefficient presets and their derivatives.

use crate::error::{Error, Result};

/// Drift and diffusion presets. Control coupling is through the dot
/// products `c·u` and `κ·u`, with `c` and `κ` of the control dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    /// `b = βx + c·u`, `σ_m = s_m (1 + κ·u)`.
    Additive { beta: f64, c: Vec<f64>, s: Vec<f64>, kappa: Vec<f64> },
    /// `b = βx + (c·u) x`, `σ_m = s_m (κ·u) x`.
    Bilinear { beta: f64, c: Vec<f64>, s: Vec<f64>, kappa: Vec<f64> },
    /// `b = c₁ x(1 − x) + c·u`, `σ_m = s_m (1 + κ·u)(1 + ρ tanh x)`.
    LogisticDrift { c1: f64, c: Vec<f64>, s: Vec<f64>, kappa: Vec<f64>, rho: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cost {
    /// `l = ½(x − x_ref)² + r‖u‖²`, `h = ½ w (x − x_target)²`.
    Quadratic { x_ref: f64, r: f64, w: f64, x_target: f64 },
    Zero,
    /// `l ≡ 1`, `h ≡ 0`.
    UnitRunning,
}

/// Which coefficient [`CoefficientSet::eval`] should evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coef {
    B,
    Bx,
    Bxx,
    Sigma,
    SigmaX,
    SigmaXx,
    L,
    Lx,
    Lxx,
    H,
    Hx,
    Hxx,
}

impl Coef {
    pub fn is_sigma(self) -> bool {
        matches!(self, Coef::Sigma | Coef::SigmaX | Coef::SigmaXx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    dynamics: Dynamics,
    cost: Cost,
    dim: usize,
    /// Multiplies the analytic `b_x`; anything but 1 is a deliberately
    /// inconsistent preset used to exercise the load-time check.
    b_x_scale: f64,
}

fn dot(a: &[f64], u: &[f64]) -> f64 {
    a.iter().zip(u).map(|(x, y)| x * y).sum()
}

impl CoefficientSet {
    pub fn new(dynamics: Dynamics, cost: Cost, control_dim: usize) -> Result<Self> {
        let (c, s, kappa) = match &dynamics {
            Dynamics::Additive { c, s, kappa, .. }
            | Dynamics::Bilinear { c, s, kappa, .. }
            | Dynamics::LogisticDrift { c, s, kappa, .. } => (c, s, kappa),
        };
        if s.is_empty() {
            return Err(Error::validation("noise", "need at least one diffusion amplitude"));
        }
        for (name, v) in [("c", c), ("kappa", kappa)] {
            if v.len() != control_dim {
                return Err(Error::validation(
                    "control dimension",
                    format!("`{name}` has length {}, controls have dimension {control_dim}", v.len()),
                ));
            }
        }
        Ok(CoefficientSet { dynamics, cost, dim: control_dim, b_x_scale: 1.0 })
    }

    pub fn with_b_x_scale(mut self, scale: f64) -> Self {
        self.b_x_scale = scale;
        self
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn cost_preset(&self) -> &Cost {
        &self.cost
    }

    pub fn control_dim(&self) -> usize {
        self.dim
    }

    /// Number of retained noise modes.
    pub fn k(&self) -> usize {
        self.s().len()
    }

    fn s(&self) -> &[f64] {
        match &self.dynamics {
            Dynamics::Additive { s, .. } | Dynamics::Bilinear { s, .. } | Dynamics::LogisticDrift { s, .. } => s,
        }
    }

    pub fn b(&self, x: f64, u: &[f64]) -> f64 {
        match &self.dynamics {
            Dynamics::Additive { beta, c, .. } => beta * x + dot(c, u),
            Dynamics::Bilinear { beta, c, .. } => beta * x + dot(c, u) * x,
            Dynamics::LogisticDrift { c1, c, .. } => c1 * x * (1.0 - x) + dot(c, u),
        }
    }

    pub fn b_x(&self, x: f64, u: &[f64]) -> f64 {
        let exact = match &self.dynamics {
            Dynamics::Additive { beta, .. } => *beta,
            Dynamics::Bilinear { beta, c, .. } => beta + dot(c, u),
            Dynamics::LogisticDrift { c1, .. } => c1 * (1.0 - 2.0 * x),
        };
        self.b_x_scale * exact
    }

    pub fn b_xx(&self, _x: f64, _u: &[f64]) -> f64 {
        match &self.dynamics {
            Dynamics::LogisticDrift { c1, .. } => -2.0 * c1,
            _ => 0.0,
        }
    }

    /// Scalar factor of mode `m` before the spatial profile is applied.
    pub fn sigma(&self, x: f64, u: &[f64], m: usize) -> f64 {
        match &self.dynamics {
            Dynamics::Additive { s, kappa, .. } => s[m] * (1.0 + dot(kappa, u)),
            Dynamics::Bilinear { s, kappa, .. } => s[m] * dot(kappa, u) * x,
            Dynamics::LogisticDrift { s, kappa, rho, .. } => s[m] * (1.0 + dot(kappa, u)) * (1.0 + rho * x.tanh()),
        }
    }

    pub fn sigma_x(&self, x: f64, u: &[f64], m: usize) -> f64 {
        match &self.dynamics {
            Dynamics::Additive { .. } => 0.0,
            Dynamics::Bilinear { s, kappa, .. } => s[m] * dot(kappa, u),
            Dynamics::LogisticDrift { s, kappa, rho, .. } => {
                let sech = 1.0 / x.cosh();
                s[m] * (1.0 + dot(kappa, u)) * rho * sech * sech
            }
        }
    }

    pub fn sigma_xx(&self, x: f64, u: &[f64], m: usize) -> f64 {
        match &self.dynamics {
            Dynamics::LogisticDrift { s, kappa, rho, .. } => {
                let sech = 1.0 / x.cosh();
                -2.0 * s[m] * (1.0 + dot(kappa, u)) * rho * x.tanh() * sech * sech
            }
            _ => 0.0,
        }
    }

    /// True when no diffusion coefficient depends on the state.
    pub fn sigma_state_free(&self) -> bool {
        matches!(self.dynamics, Dynamics::Additive { .. })
            || self.s().iter().all(|&s| s == 0.0)
            || matches!(&self.dynamics, Dynamics::LogisticDrift { rho, .. } if *rho == 0.0)
    }

    /// True when every diffusion amplitude is zero.
    pub fn is_noise_free(&self) -> bool {
        self.s().iter().all(|&s| s == 0.0)
    }

    pub fn l(&self, x: f64, u: &[f64]) -> f64 {
        match &self.cost {
            Cost::Quadratic { x_ref, r, .. } => 0.5 * (x - x_ref).powi(2) + r * dot(u, u),
            Cost::Zero => 0.0,
            Cost::UnitRunning => 1.0,
        }
    }

    pub fn l_x(&self, x: f64, _u: &[f64]) -> f64 {
        match &self.cost {
            Cost::Quadratic { x_ref, .. } => x - x_ref,
            _ => 0.0,
        }
    }

    pub fn l_xx(&self, _x: f64, _u: &[f64]) -> f64 {
        match &self.cost {
            Cost::Quadratic { .. } => 1.0,
            _ => 0.0,
        }
    }

    pub fn h(&self, x: f64) -> f64 {
        match &self.cost {
            Cost::Quadratic { w, x_target, .. } => 0.5 * w * (x - x_target).powi(2),
            _ => 0.0,
        }
    }

    pub fn h_x(&self, x: f64) -> f64 {
        match &self.cost {
            Cost::Quadratic { w, x_target, .. } => w * (x - x_target),
            _ => 0.0,
        }
    }

    pub fn h_xx(&self, _x: f64) -> f64 {
        match &self.cost {
            Cost::Quadratic { w, .. } => *w,
            _ => 0.0,
        }
    }

    /// Scalar value of any coefficient; `m` selects the mode for the
    /// σ family and is ignored otherwise.
    pub fn value(&self, which: Coef, x: f64, u: &[f64], m: usize) -> f64 {
        match which {
            Coef::B => self.b(x, u),
            Coef::Bx => self.b_x(x, u),
            Coef::Bxx => self.b_xx(x, u),
            Coef::Sigma => self.sigma(x, u, m),
            Coef::SigmaX => self.sigma_x(x, u, m),
            Coef::SigmaXx => self.sigma_xx(x, u, m),
            Coef::L => self.l(x, u),
            Coef::Lx => self.l_x(x, u),
            Coef::Lxx => self.l_xx(x, u),
            Coef::H => self.h(x),
            Coef::Hx => self.h_x(x),
            Coef::Hxx => self.h_xx(x),
        }
    }

    /// Central-difference check of every derivative pair on
    /// `x ∈ [−2, 2]` against the given control points.
    pub fn check_derivatives(&self, controls: &[Vec<f64>]) -> Result<DerivativeReport> {
        const STEP: f64 = 1e-4;
        const TOL: f64 = 1e-5;
        let mut report = DerivativeReport::default();
        let mut worst: (f64, &'static str) = (0.0, "");
        let mut record = |name: &'static str, fd: f64, an: f64| {
            let dev = (fd - an).abs() / an.abs().max(1.0);
            if dev > worst.0 {
                worst = (dev, name);
            }
        };
        let xs: Vec<f64> = (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect();
        let fd = |f: &dyn Fn(f64) -> f64, x: f64| (f(x + STEP) - f(x - STEP)) / (2.0 * STEP);
        for u in controls {
            for &x in &xs {
                record("b_x", fd(&|y| self.b(y, u), x), self.b_x(x, u));
                record("b_xx", fd(&|y| self.b_x(y, u) / self.b_x_scale_or_one(), x), self.b_xx(x, u));
                for m in 0..self.k() {
                    record("sigma_x", fd(&|y| self.sigma(y, u, m), x), self.sigma_x(x, u, m));
                    record("sigma_xx", fd(&|y| self.sigma_x(y, u, m), x), self.sigma_xx(x, u, m));
                }
                record("l_x", fd(&|y| self.l(y, u), x), self.l_x(x, u));
                record("l_xx", fd(&|y| self.l_x(y, u), x), self.l_xx(x, u));
                record("h_x", fd(&|y| self.h(y), x), self.h_x(x));
                record("h_xx", fd(&|y| self.h_x(y), x), self.h_xx(x));

                let growth = self.b(x, u).abs() / (1.0 + x.abs() + dot(u, u).sqrt());
                report.growth_constant = report.growth_constant.max(growth);
                let bounded = [
                    self.b_x(x, u),
                    self.b_xx(x, u),
                    self.l_xx(x, u),
                    self.h_xx(x),
                ];
                for v in bounded {
                    report.derivative_bound = report.derivative_bound.max(v.abs());
                }
                for m in 0..self.k() {
                    report.derivative_bound =
                        report.derivative_bound.max(self.sigma_x(x, u, m).abs()).max(self.sigma_xx(x, u, m).abs());
                }
            }
        }
        report.max_relative_deviation = worst.0;
        report.worst = worst.1;
        if worst.0 > TOL {
            return Err(Error::validation(
                "derivative consistency",
                format!("{} deviates from central differences by max relative {:.3e}", worst.1, worst.0),
            ));
        }
        if !(report.growth_constant.is_finite() && report.derivative_bound.is_finite()) {
            return Err(Error::validation("growth", "coefficient or derivative not finite on the sampled box"));
        }
        Ok(report)
    }

    // b_xx is checked against the analytic b_x, so undo the diagnostic scale.
    fn b_x_scale_or_one(&self) -> f64 {
        if self.b_x_scale == 0.0 {
            1.0
        } else {
            self.b_x_scale
        }
    }
}

/// Outcome of [`CoefficientSet::check_derivatives`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DerivativeReport {
    pub max_relative_deviation: f64,
    pub worst: &'static str,
    /// Sampled `max |b| / (1 + |x| + ‖u‖)`.
    pub growth_constant: f64,
    /// Sampled sup of the bounded-derivative family.
    pub derivative_bound: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistic() -> CoefficientSet {
        CoefficientSet::new(
            Dynamics::LogisticDrift { c1: 1.5, c: vec![0.7], s: vec![0.3, 0.1], kappa: vec![0.2], rho: 0.5 },
            Cost::Quadratic { x_ref: 0.2, r: 0.1, w: 2.0, x_target: -0.3 },
            1,
        )
        .unwrap()
    }

    #[test]
    fn all_presets_pass_the_derivative_check() {
        let u = vec![vec![-1.0], vec![0.5], vec![1.0]];
        logistic().check_derivatives(&u).unwrap();
        for d in [
            Dynamics::Additive { beta: -0.5, c: vec![1.0], s: vec![0.2], kappa: vec![0.3] },
            Dynamics::Bilinear { beta: 0.3, c: vec![0.8], s: vec![0.4], kappa: vec![1.0] },
        ] {
            CoefficientSet::new(d, Cost::UnitRunning, 1).unwrap().check_derivatives(&u).unwrap();
        }
    }

    #[test]
    fn scaled_b_x_is_rejected_with_deviation() {
        let err = logistic().with_b_x_scale(1.1).check_derivatives(&[vec![0.0]]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("derivative consistency") && msg.contains("b_x"), "{msg}");
    }

    #[test]
    fn bilinear_sigma_vanishes_at_zero_state() {
        let c = CoefficientSet::new(
            Dynamics::Bilinear { beta: 0.0, c: vec![1.0], s: vec![0.4], kappa: vec![1.0] },
            Cost::Zero,
            1,
        )
        .unwrap();
        assert_eq!(c.sigma(0.0, &[0.7], 0), 0.0);
    }

    #[test]
    fn control_dimension_is_checked() {
        let d = Dynamics::Additive { beta: 0.0, c: vec![1.0, 2.0], s: vec![0.1], kappa: vec![0.0] };
        assert!(CoefficientSet::new(d, Cost::Zero, 1).is_err());
    }
}
