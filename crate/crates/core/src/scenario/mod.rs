//! Control problems: coefficients, control sets, noise, time grid.

pub mod coefficients;
pub mod config;
pub mod control;
pub mod noise;

pub use coefficients::{Coef, CoefficientSet, Cost, DerivativeReport, Dynamics};
pub use config::{load_scenario, parse_scenario, EtaSpec, RunSettings, X0Shape};
pub use control::{spike_window, ControlPoint, ControlProcess, ControlSet, PathContext};
pub use noise::{ModeShapes, NoiseModel};

use crate::error::{Error, Result};
use crate::numerics::{EllipticOperator, Field, Grid1D};

/// A fully validated control problem.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: Grid1D,
    pub op: EllipticOperator,
    pub coeffs: CoefficientSet,
    pub controls: ControlSet,
    pub noise: NoiseModel,
    pub t_final: f64,
    pub n_t: usize,
    pub x0: Field,
    pub seed: u64,
    /// The candidate optimal control `ū`.
    pub reference: ControlProcess,
    pub run: RunSettings,
    pub derivatives: DerivativeReport,
}

impl Scenario {
    /// Validate every invariant and run the derivative-consistency check.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        op: EllipticOperator,
        coeffs: CoefficientSet,
        controls: ControlSet,
        noise: NoiseModel,
        t_final: f64,
        n_t: usize,
        x0: Field,
        seed: u64,
        reference: ControlProcess,
        run: RunSettings,
    ) -> Result<Self> {
        let grid = *op.grid();
        if n_t < 2 {
            return Err(Error::validation("time grid", format!("need at least 2 steps, got {n_t}")));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::validation("time grid", format!("horizon must be positive, got {t_final}")));
        }
        grid.ensure_same(x0.grid())
            .map_err(|_| Error::validation("initial state", "x0 is not on the scenario grid"))?;
        if noise.k() != coeffs.k() {
            return Err(Error::validation(
                "noise",
                format!("noise has {} modes, coefficients have {}", noise.k(), coeffs.k()),
            ));
        }
        if controls.dim() != coeffs.control_dim() {
            return Err(Error::validation("control dimension", "control set and coefficients disagree"));
        }
        reference.check_against(&controls, n_t)?;
        let derivatives = coeffs.check_derivatives(&controls.lattice())?;
        let scenario = Scenario {
            grid,
            op,
            coeffs,
            controls,
            noise,
            t_final,
            n_t,
            x0,
            seed,
            reference,
            run,
            derivatives,
        };
        if let Some(spike) = &scenario.run.spike {
            scenario.spike_of(&scenario.reference, spike.v.clone(), spike.tau, spike.eps)?;
        }
        Ok(scenario)
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_t as f64
    }

    pub fn k(&self) -> usize {
        self.noise.k()
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Spike variation of `base` on this scenario's time grid.
    pub fn spike_of(&self, base: &ControlProcess, v: ControlPoint, tau: f64, eps: f64) -> Result<ControlProcess> {
        if !self.controls.contains(&v) {
            return Err(Error::validation("spike", format!("spike point {v:?} not in U")));
        }
        ControlProcess::spike(base.clone(), v, tau, eps, self.dt(), self.t_final)
    }

    /// Path-context for a state vector on this grid.
    pub fn context<'a>(&self, state: &'a [f64]) -> PathContext<'a> {
        PathContext { state, h: self.grid.h(), length: self.grid.length() }
    }

    /// Pointwise evaluation; the σ family returns one field per mode with
    /// the spatial profile applied, everything else a single field.
    pub fn eval_coefficient(&self, which: Coef, x: &Field, u: &[f64]) -> Vec<Field> {
        if which.is_sigma() {
            (0..self.k())
                .map(|m| {
                    let g = self.noise.profile(m);
                    let v = x.values().iter().zip(g).map(|(&xi, &gi)| self.coeffs.value(which, xi, u, m) * gi).collect();
                    Field::from_raw(*x.grid(), v)
                })
                .collect()
        } else {
            vec![Field::from_raw(*x.grid(), x.values().iter().map(|&xi| self.coeffs.value(which, xi, u, 0)).collect())]
        }
    }

    /// Same scenario on a time grid `factor` times finer. Needs a
    /// deterministic reference, which is held on each refined step.
    pub fn refined_in_time(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::validation("time grid", "refinement factor must be positive"));
        }
        let points = (0..self.n_t)
            .map(|k| self.reference.deterministic_at(k).map(<[f64]>::to_vec))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::validation("time grid", "only a deterministic reference can be refined"))?;
        let mut s = self.clone();
        s.n_t = self.n_t * factor;
        s.reference = ControlProcess::blocks(&points, s.n_t)?;
        Ok(s)
    }

    /// Same scenario with a different reference control.
    pub fn with_reference(&self, reference: ControlProcess) -> Result<Self> {
        reference.check_against(&self.controls, self.n_t)?;
        let mut s = self.clone();
        s.reference = reference;
        Ok(s)
    }
}

/// Evaluate a control at step `k` for a concrete state.
pub fn evaluate_control<'u>(s: &Scenario, u: &'u ControlProcess, k: usize, state: &[f64]) -> &'u [f64] {
    u.evaluate(k, &s.context(state))
}
