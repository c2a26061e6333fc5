//! State equation and path storage.

use std::io::{Read, Write};

use super::ensemble::PathEnsemble;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::numerics::io::{read_f64s, read_u64, write_f64s};
use crate::numerics::{Field, Grid1D, ImplicitStep};
use crate::scenario::{ControlProcess, Scenario};

/// `M` paths of `n_t + 1` snapshots of width `width`, path-major.
#[derive(Debug, Clone)]
pub struct PathSet {
    m: usize,
    n_t: usize,
    width: usize,
    values: Vec<f64>,
}

impl PathSet {
    pub fn zeros(m: usize, n_t: usize, width: usize) -> Self {
        PathSet { m, n_t, width, values: vec![0.0; m * (n_t + 1) * width] }
    }

    pub fn paths(&self) -> usize {
        self.m
    }

    pub fn steps(&self) -> usize {
        self.n_t
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn at(&self, path: usize, step: usize) -> &[f64] {
        let o = (path * (self.n_t + 1) + step) * self.width;
        &self.values[o..o + self.width]
    }

    pub fn path(&self, path: usize) -> &[f64] {
        let len = (self.n_t + 1) * self.width;
        &self.values[path * len..(path + 1) * len]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn path_len(&self) -> usize {
        (self.n_t + 1) * self.width
    }
}

/// Simulated states of every path together with the controls applied.
#[derive(Debug, Clone)]
pub struct StateEnsemble {
    grid: Grid1D,
    states: PathSet,
    /// Path-major, then step, then control component.
    controls: Vec<f64>,
    dim: usize,
    crn_id: u64,
}

impl StateEnsemble {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn paths(&self) -> usize {
        self.states.m
    }

    pub fn steps(&self) -> usize {
        self.states.n_t
    }

    pub fn states(&self) -> &PathSet {
        &self.states
    }

    pub fn state(&self, path: usize, step: usize) -> &[f64] {
        self.states.at(path, step)
    }

    pub fn field(&self, path: usize, step: usize) -> Field {
        Field::from_raw(self.grid, self.state(path, step).to_vec())
    }

    /// Control applied on `[t_k, t_{k+1})`.
    pub fn control(&self, path: usize, step: usize) -> &[f64] {
        let o = (path * self.states.n_t + step) * self.dim;
        &self.controls[o..o + self.dim]
    }

    /// Identifier of the noise ensemble that drove these paths.
    pub fn crn_id(&self) -> u64 {
        self.crn_id
    }

    pub fn trajectory(&self, path: usize) -> Trajectory {
        let n_t = self.steps();
        Trajectory {
            grid: self.grid,
            n_t,
            values: self.states.path(path).to_vec(),
            controls: (0..n_t).map(|k| self.control(path, k).to_vec()).collect(),
        }
    }
}

/// One path: `n_t + 1` fields and the `n_t` controls applied between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid1D,
    pub n_t: usize,
    pub values: Vec<f64>,
    pub controls: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn field(&self, step: usize) -> Field {
        let n = self.grid.n();
        Field::from_raw(self.grid, self.values[step * n..(step + 1) * n].to_vec())
    }
}

pub(crate) fn check_finite(values: &[f64], path: usize, step: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite() && v.abs() < 1e150) {
        Ok(())
    } else {
        Err(Error::BlowUp { path, step })
    }
}

/// One semi-implicit step `(I − ΔtA) x⁺ = x + Δt b(x,u) + Σ_m σ_m(x,u) ΔW^m`.
pub(crate) fn state_step(s: &Scenario, step: &ImplicitStep, x: &mut [f64], u: &[f64], dw: &[f64]) {
    let dt = step.dt();
    let c = &s.coeffs;
    for (i, xi) in x.iter_mut().enumerate() {
        let v = *xi;
        let mut next = v + dt * c.b(v, u);
        for (m, &d) in dw.iter().enumerate() {
            next += c.sigma(v, u, m) * s.noise.profile(m)[i] * d;
        }
        *xi = next;
    }
    step.solve_in_place(x);
}

/// Simulate `x^u` on every path of `e`.
pub fn simulate_state(s: &Scenario, u: &ControlProcess, e: &PathEnsemble, exec: Execution) -> Result<StateEnsemble> {
    check_ensemble(s, e)?;
    if u.steps() != s.n_t {
        return Err(Error::Structural(format!("control has {} steps, scenario {}", u.steps(), s.n_t)));
    }
    simulate_with(s, e, exec, |_, k, x| u.evaluate(k, &s.context(x)).to_vec())
}

/// Simulate with an arbitrary adapted control rule `(path, step, state) ↦ u`.
pub fn simulate_with<F>(s: &Scenario, e: &PathEnsemble, exec: Execution, control: F) -> Result<StateEnsemble>
where
    F: Fn(usize, usize, &[f64]) -> Vec<f64> + Sync + Send,
{
    check_ensemble(s, e)?;
    let (n, n_t, m) = (s.n(), s.n_t, e.paths());
    let dim = s.controls.dim();
    let step = s.op.implicit_step(s.dt())?;
    let mut states = PathSet::zeros(m, n_t, n);
    let mut controls = vec![0.0; m * n_t * dim];
    let len = states.path_len();
    let results = exec.map_rows(states.values_mut(), len, |p, buf| simulate_path(s, &step, e, p, buf, &control));
    for (p, r) in results.into_iter().enumerate() {
        let us = r?;
        controls[p * n_t * dim..(p + 1) * n_t * dim].copy_from_slice(&us);
    }
    Ok(StateEnsemble { grid: s.grid, states, controls, dim, crn_id: e.crn_id() })
}

fn simulate_path<F>(s: &Scenario, step: &ImplicitStep, e: &PathEnsemble, p: usize, buf: &mut [f64], control: &F) -> Result<Vec<f64>>
where
    F: Fn(usize, usize, &[f64]) -> Vec<f64>,
{
    let n = s.n();
    let mut applied = Vec::with_capacity(s.n_t * s.controls.dim());
    buf[..n].copy_from_slice(s.x0.values());
    for k in 0..s.n_t {
        let (head, tail) = buf.split_at_mut((k + 1) * n);
        let x = &head[k * n..];
        let u = control(p, k, x);
        let next = &mut tail[..n];
        next.copy_from_slice(x);
        state_step(s, step, next, &u, e.dw(p, k));
        check_finite(next, p, k + 1)?;
        applied.extend_from_slice(&u);
    }
    Ok(applied)
}

pub(crate) fn check_ensemble(s: &Scenario, e: &PathEnsemble) -> Result<()> {
    if e.steps() != s.n_t || e.k() != s.k() || (e.dt() - s.dt()).abs() > 1e-14 * s.dt() {
        return Err(Error::Structural(format!(
            "ensemble ({} steps, K = {}, dt = {}) does not match scenario ({} steps, K = {}, dt = {})",
            e.steps(),
            e.k(),
            e.dt(),
            s.n_t,
            s.k(),
            s.dt()
        )));
    }
    Ok(())
}

/// Binary trajectory dump: magic, then `u64` n, n_t, K, kind, then per
/// step the main block followed by `modes` blocks. Block length is `n`
/// or `n²` depending on `kind`.
pub const TRAJECTORY_MAGIC: &[u8; 8] = b"SMPTRJ01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    State = 0,
    Adjoint1 = 1,
    Tensor = 2,
    Adjoint2 = 3,
}

impl TrajectoryKind {
    fn from_code(c: u64) -> Result<Self> {
        Ok(match c {
            0 => TrajectoryKind::State,
            1 => TrajectoryKind::Adjoint1,
            2 => TrajectoryKind::Tensor,
            3 => TrajectoryKind::Adjoint2,
            _ => return Err(Error::Structural(format!("unknown trajectory kind {c}"))),
        })
    }

    pub fn block_len(self, n: usize) -> usize {
        match self {
            TrajectoryKind::State | TrajectoryKind::Adjoint1 => n,
            TrajectoryKind::Tensor | TrajectoryKind::Adjoint2 => n * n,
        }
    }

    pub fn modes(self, k: usize) -> usize {
        match self {
            TrajectoryKind::State | TrajectoryKind::Tensor => 0,
            TrajectoryKind::Adjoint1 | TrajectoryKind::Adjoint2 => k,
        }
    }
}

/// Decoded trajectory dump.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDump {
    pub kind: TrajectoryKind,
    pub n: usize,
    pub n_t: usize,
    pub k: usize,
    /// `n_t + 1` records of `(1 + modes) · block_len` values.
    pub records: Vec<f64>,
}

impl TrajectoryDump {
    pub fn record_len(&self) -> usize {
        (1 + self.kind.modes(self.k)) * self.kind.block_len(self.n)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        if self.records.len() != (self.n_t + 1) * self.record_len() {
            return Err(Error::Structural("trajectory record count does not match header".into()));
        }
        out.write_all(TRAJECTORY_MAGIC)?;
        for v in [self.n as u64, self.n_t as u64, self.k as u64, self.kind as u64] {
            out.write_all(&v.to_le_bytes())?;
        }
        write_f64s(&mut out, &self.records)
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != TRAJECTORY_MAGIC {
            return Err(Error::Structural("not a trajectory dump".into()));
        }
        let n = read_u64(&mut input)? as usize;
        let n_t = read_u64(&mut input)? as usize;
        let k = read_u64(&mut input)? as usize;
        let kind = TrajectoryKind::from_code(read_u64(&mut input)?)?;
        let mut d = TrajectoryDump { kind, n, n_t, k, records: Vec::new() };
        d.records = read_f64s(&mut input, (n_t + 1) * d.record_len())?;
        Ok(d)
    }
}

impl From<&Trajectory> for TrajectoryDump {
    fn from(t: &Trajectory) -> Self {
        TrajectoryDump { kind: TrajectoryKind::State, n: t.grid.n(), n_t: t.n_t, k: 0, records: t.values.clone() }
    }
}
