//! Control sets and adapted control processes.

use crate::error::{Error, Result};

/// A point of `U ⊂ ℝ^m`.
pub type ControlPoint = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub enum ControlSet {
    Finite(Vec<ControlPoint>),
    /// Interval product with `lattice` points per dimension.
    Box { lo: Vec<f64>, hi: Vec<f64>, lattice: usize },
}

impl ControlSet {
    pub fn finite(points: Vec<ControlPoint>) -> Result<Self> {
        let set = ControlSet::Finite(points);
        set.validate()?;
        Ok(set)
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>, lattice: usize) -> Result<Self> {
        let set = ControlSet::Box { lo, hi, lattice };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        match self {
            ControlSet::Finite(points) => {
                let Some(first) = points.first() else {
                    return Err(Error::validation("control set", "finite control set is empty"));
                };
                if first.is_empty() || points.iter().any(|p| p.len() != first.len()) {
                    return Err(Error::validation("control set", "control points must share a positive dimension"));
                }
                if points.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::validation("control set", "control points must be finite"));
                }
            }
            ControlSet::Box { lo, hi, lattice } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::validation("control set", "box bounds must share a positive dimension"));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
                    return Err(Error::validation("control set", "box needs lo <= hi in every dimension"));
                }
                if *lattice < 1 {
                    return Err(Error::validation("control set", "box lattice needs at least one point"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ControlSet::Finite(p) => p[0].len(),
            ControlSet::Box { lo, .. } => lo.len(),
        }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        const TOL: f64 = 1e-12;
        match self {
            ControlSet::Finite(p) => p.iter().any(|q| q.iter().zip(u).all(|(a, b)| (a - b).abs() <= TOL)),
            ControlSet::Box { lo, hi, .. } => {
                u.len() == lo.len() && u.iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| *x >= a - TOL && *x <= b + TOL)
            }
        }
    }

    /// All points of a finite set, or the tensor lattice of a box.
    pub fn lattice(&self) -> Vec<ControlPoint> {
        match self {
            ControlSet::Finite(p) => p.clone(),
            ControlSet::Box { lo, hi, lattice } => {
                let axis = |d: usize| -> Vec<f64> {
                    if *lattice == 1 {
                        vec![0.5 * (lo[d] + hi[d])]
                    } else {
                        (0..*lattice).map(|i| lo[d] + (hi[d] - lo[d]) * i as f64 / (*lattice - 1) as f64).collect()
                    }
                };
                let mut points = vec![Vec::new()];
                for d in 0..lo.len() {
                    let ax = axis(d);
                    points = points
                        .into_iter()
                        .flat_map(|p: Vec<f64>| {
                            ax.iter().map(move |&v| {
                                let mut q = p.clone();
                                q.push(v);
                                q
                            })
                        })
                        .collect();
                }
                points
            }
        }
    }
}

/// Information a control may read at step `k`: only the current state.
#[derive(Debug, Clone, Copy)]
pub struct PathContext<'a> {
    pub state: &'a [f64],
    /// Quadrature weight of the grid.
    pub h: f64,
    /// Length of the spatial interval.
    pub length: f64,
}

impl PathContext<'_> {
    /// Spatial mean `|Λ|^{-1} ∫ x dλ`, the statistic binned by feedback controls.
    pub fn spatial_mean(&self) -> f64 {
        self.h * self.state.iter().sum::<f64>() / self.length
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlProcess {
    /// One control point per time step.
    Deterministic(Vec<ControlPoint>),
    /// `v` on the steps `k` with `t_k ∈ [τ, τ + ε)`, the base elsewhere.
    Spike { base: Box<ControlProcess>, v: ControlPoint, tau: f64, eps: f64, window: (usize, usize) },
    /// Per-step table indexed by the bin of the spatial mean of the state.
    /// `edges` are the interior bin boundaries, ascending.
    Feedback { edges: Vec<f64>, table: Vec<Vec<ControlPoint>> },
}

/// Steps `k` with `k Δt ∈ [τ, τ + ε)`, tolerant to round-off in `τ/Δt`.
pub fn spike_window(tau: f64, eps: f64, dt: f64) -> (usize, usize) {
    const SNAP: f64 = 1e-9;
    let lo = (tau / dt - SNAP).ceil().max(0.0) as usize;
    let hi = ((tau + eps) / dt - SNAP).ceil().max(0.0) as usize;
    (lo, hi.max(lo))
}

impl ControlProcess {
    pub fn constant(u: ControlPoint, steps: usize) -> Self {
        ControlProcess::Deterministic(vec![u; steps])
    }

    /// Piecewise-constant control with `blocks.len()` equal blocks.
    pub fn blocks(blocks: &[ControlPoint], steps: usize) -> Result<Self> {
        if blocks.is_empty() || !steps.is_multiple_of(blocks.len()) {
            return Err(Error::validation(
                "control blocks",
                format!("{} blocks do not divide {steps} steps", blocks.len()),
            ));
        }
        let per = steps / blocks.len();
        Ok(ControlProcess::Deterministic((0..steps).map(|k| blocks[k / per].clone()).collect()))
    }

    /// Spike variation of `base`; requires `0 < τ` and `τ + ε ≤ T`.
    pub fn spike(base: ControlProcess, v: ControlPoint, tau: f64, eps: f64, dt: f64, t_final: f64) -> Result<Self> {
        const TOL: f64 = 1e-12;
        if !(tau > 0.0 && eps >= 0.0 && tau + eps <= t_final * (1.0 + TOL)) {
            return Err(Error::validation(
                "spike",
                format!("need 0 < tau and tau + eps <= T, got tau = {tau}, eps = {eps}, T = {t_final}"),
            ));
        }
        if tau >= t_final {
            return Err(Error::validation("spike", format!("tau = {tau} must lie before T = {t_final}")));
        }
        let window = spike_window(tau, eps, dt);
        Ok(ControlProcess::Spike { base: Box::new(base), v, tau, eps, window })
    }

    pub fn feedback(edges: Vec<f64>, table: Vec<Vec<ControlPoint>>) -> Result<Self> {
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("feedback", "bin edges must be strictly ascending"));
        }
        if table.iter().any(|row| row.len() != edges.len() + 1) {
            return Err(Error::validation("feedback", "every step needs one control per bin"));
        }
        Ok(ControlProcess::Feedback { edges, table })
    }

    /// Control applied at step `k`.
    pub fn evaluate(&self, k: usize, ctx: &PathContext<'_>) -> &[f64] {
        match self {
            ControlProcess::Deterministic(u) => &u[k],
            ControlProcess::Spike { base, v, window, .. } => {
                if (window.0..window.1).contains(&k) {
                    v
                } else {
                    base.evaluate(k, ctx)
                }
            }
            ControlProcess::Feedback { edges, table } => {
                let s = ctx.spatial_mean();
                let bin = edges.partition_point(|&e| e <= s);
                &table[k][bin]
            }
        }
    }

    /// Control at step `k` when it does not depend on the state.
    pub fn deterministic_at(&self, k: usize) -> Option<&[f64]> {
        match self {
            ControlProcess::Deterministic(u) => Some(&u[k]),
            ControlProcess::Spike { base, v, window, .. } => {
                if (window.0..window.1).contains(&k) {
                    Some(v)
                } else {
                    base.deterministic_at(k)
                }
            }
            ControlProcess::Feedback { .. } => None,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            ControlProcess::Deterministic(_) => true,
            ControlProcess::Spike { base, .. } => base.is_deterministic(),
            ControlProcess::Feedback { .. } => false,
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            ControlProcess::Deterministic(u) => u.len(),
            ControlProcess::Spike { base, .. } => base.steps(),
            ControlProcess::Feedback { table, .. } => table.len(),
        }
    }

    /// Steps on which a spike is active, or an empty range.
    pub fn spike_window(&self) -> (usize, usize) {
        match self {
            ControlProcess::Spike { window, .. } => *window,
            _ => (0, 0),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ControlProcess::Deterministic(u) => u.first().map_or(0, Vec::len),
            ControlProcess::Spike { v, .. } => v.len(),
            ControlProcess::Feedback { table, .. } => table.first().and_then(|r| r.first()).map_or(0, Vec::len),
        }
    }

    pub(crate) fn check_against(&self, set: &ControlSet, steps: usize) -> Result<()> {
        if self.steps() != steps {
            return Err(Error::validation(
                "control",
                format!("control has {} steps, time grid has {steps}", self.steps()),
            ));
        }
        let points: Vec<&ControlPoint> = match self {
            ControlProcess::Deterministic(u) => u.iter().collect(),
            ControlProcess::Spike { base, v, .. } => {
                base.check_against(set, steps)?;
                vec![v]
            }
            ControlProcess::Feedback { table, .. } => table.iter().flatten().collect(),
        };
        if let Some(p) = points.into_iter().find(|p| !set.contains(p)) {
            return Err(Error::validation("control", format!("control point {p:?} not in U")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(state: &[f64]) -> PathContext<'_> {
        PathContext { state, h: 0.25, length: 1.0 }
    }

    #[test]
    fn spike_narrower_than_a_step_hits_the_contained_grid_point() {
        let dt = 0.1;
        let base = ControlProcess::constant(vec![0.0], 10);
        let s = ControlProcess::spike(base, vec![1.0], 0.29, 0.02, dt, 1.0).unwrap();
        let x = [0.0; 3];
        let hits: Vec<usize> = (0..10).filter(|&k| s.evaluate(k, &ctx(&x))[0] == 1.0).collect();
        assert_eq!(hits, vec![3]);
    }

    #[test]
    fn spike_window_is_left_closed() {
        assert_eq!(spike_window(0.3, 0.2, 0.1), (3, 5));
        assert_eq!(spike_window(0.25, 0.0, 0.125), (2, 2));
    }

    #[test]
    fn zero_width_spike_equals_base() {
        let base = ControlProcess::blocks(&[vec![-1.0], vec![1.0]], 8).unwrap();
        let s = ControlProcess::spike(base.clone(), vec![5.0], 0.5, 0.0, 0.125, 1.0).unwrap();
        let x = [0.0];
        for k in 0..8 {
            assert_eq!(s.evaluate(k, &ctx(&x)), base.evaluate(k, &ctx(&x)));
        }
    }

    #[test]
    fn spike_past_horizon_is_rejected() {
        let base = ControlProcess::constant(vec![0.0], 4);
        let err = ControlProcess::spike(base, vec![1.0], 0.8, 0.3, 0.25, 1.0).unwrap_err();
        assert!(err.to_string().contains("spike"));
    }

    #[test]
    fn single_bin_feedback_is_deterministic() {
        let table: Vec<Vec<ControlPoint>> = (0..4).map(|k| vec![vec![k as f64]]).collect();
        let fb = ControlProcess::feedback(vec![], table).unwrap();
        for k in 0..4 {
            assert_eq!(fb.evaluate(k, &ctx(&[9.0, -3.0]))[0], k as f64);
        }
    }

    #[test]
    fn feedback_reads_the_spatial_mean() {
        let fb = ControlProcess::feedback(vec![0.0], vec![vec![vec![-1.0], vec![1.0]]]).unwrap();
        assert_eq!(fb.evaluate(0, &ctx(&[1.0, 1.0]))[0], 1.0);
        assert_eq!(fb.evaluate(0, &ctx(&[-1.0, 0.5]))[0], -1.0);
    }

    #[test]
    fn box_lattice_covers_corners() {
        let b = ControlSet::boxed(vec![0.0, -1.0], vec![1.0, 1.0], 3).unwrap();
        let l = b.lattice();
        assert_eq!(l.len(), 9);
        assert!(l.contains(&vec![1.0, -1.0]));
        assert!(ControlSet::finite(vec![]).is_err());
    }
}
