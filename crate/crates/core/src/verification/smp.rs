//! Hamiltonian and the second-order maximum-principle gap.

use super::report::{GapCell, SMPReport};
use crate::adjoint::{BackwardPair1, BackwardPair2, EvalScratch};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forward::{Estimate, StateEnsemble};
use crate::numerics::Field;
use crate::scenario::{ControlPoint, Scenario};

/// `∫ l(x, u) dλ + ⟨p, b(x, u)⟩ + Σ_m ⟨q_m, σ_m(x, u) g_m⟩` on raw values.
pub(crate) fn hamiltonian_raw(s: &Scenario, x: &[f64], u: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let c = &s.coeffs;
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += c.l(x[i], u) + p[i] * c.b(x[i], u);
    }
    for m in 0..s.k() {
        let g = s.noise.profile(m);
        for i in 0..n {
            acc += q[m * n + i] * c.sigma(x[i], u, m) * g[i];
        }
    }
    s.grid.h() * acc
}

/// The Hamiltonian at `(x, v, p, q)`; `q` holds one field per noise mode.
pub fn hamiltonian(s: &Scenario, x: &Field, v: &[f64], p: &Field, q: &[Field]) -> Result<f64> {
    for f in [x, p].into_iter().chain(q) {
        s.grid.ensure_same(f.grid())?;
    }
    if q.len() != s.k() {
        return Err(Error::Structural(format!("q has {} modes, the noise model has {}", q.len(), s.k())));
    }
    if v.len() != s.controls.dim() {
        return Err(Error::Structural(format!("control point has dimension {}, expected {}", v.len(), s.controls.dim())));
    }
    let qs: Vec<f64> = q.iter().flat_map(|f| f.values().iter().copied()).collect();
    Ok(hamiltonian_raw(s, x.values(), v, p.values(), &qs))
}

/// Gap on raw per-path values: `ℋ(x,v,p,q) − ℋ(x,ū,p,q) + ½⟨P, Σ_v⟩`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gap_raw(s: &Scenario, x: &[f64], ubar: &[f64], v: &[f64], p1: &[f64], q1: &[f64], p2: &[f64], d: &mut [f64]) -> f64 {
    if v == ubar {
        return 0.0;
    }
    let c = &s.coeffs;
    let n = x.len();
    let h = s.grid.h();
    let mut gap = hamiltonian_raw(s, x, v, p1, q1) - hamiltonian_raw(s, x, ubar, p1, q1);
    let mut quad = 0.0;
    for m in 0..s.k() {
        let g = s.noise.profile(m);
        for i in 0..n {
            d[i] = (c.sigma(x[i], v, m) - c.sigma(x[i], ubar, m)) * g[i];
        }
        if d.iter().all(|&v| v == 0.0) {
            continue;
        }
        for i in 0..n {
            let row = &p2[i * n..(i + 1) * n];
            quad += d[i] * row.iter().zip(&d[..n]).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    gap += 0.5 * h * h * quad;
    gap
}

/// Per-path gap at step `k < n_t` for the control point `v`.
pub fn smp_gap(
    s: &Scenario,
    xbar: &StateEnsemble,
    pq: &BackwardPair1,
    big: &BackwardPair2,
    path: usize,
    k: usize,
    v: &[f64],
) -> Result<f64> {
    if k >= s.n_t {
        return Err(Error::Domain("the gap is evaluated before the terminal step".into()));
    }
    let (n, kk) = (s.n(), s.k());
    let mut sc = EvalScratch::default();
    let (mut p1, mut q1) = (vec![0.0; n], vec![0.0; kk * n]);
    let (mut p2, mut q2) = (vec![0.0; n * n], vec![0.0; kk * n * n]);
    pq.pq_at(xbar, path, k, &mut sc, &mut p1, &mut q1);
    big.pq_at(xbar, path, k, &mut sc, &mut p2, &mut q2);
    let mut d = vec![0.0; n];
    Ok(gap_raw(s, xbar.state(path, k), xbar.control(path, k), v, &p1, &q1, &p2, &mut d))
}

/// `count` interior sample steps at the midpoints of equal blocks.
pub fn sample_steps(n_t: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..count).map(|i| ((2 * i + 1) * n_t) / (2 * count)).filter(|&k| k < n_t).collect();
    out.dedup();
    out
}

fn percentile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = q * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (pos - lo as f64) * (values[hi] - values[lo])
}

/// Gap over a `(t, v)` lattice: the ensemble mean with its standard error
/// and the 5th percentile of the per-path values.
pub fn gap_lattice(
    s: &Scenario,
    xbar: &StateEnsemble,
    pq: &BackwardPair1,
    big: &BackwardPair2,
    steps: &[usize],
    lattice: &[ControlPoint],
    exec: Execution,
) -> Result<SMPReport> {
    if steps.iter().any(|&k| k >= s.n_t) {
        return Err(Error::Domain("gap sample steps must precede the terminal step".into()));
    }
    let (n, kk, m) = (s.n(), s.k(), xbar.paths());
    let nv = lattice.len();
    let mut cells = Vec::with_capacity(steps.len() * nv);
    for &k in steps {
        let per_path: Vec<Vec<f64>> = exec.map(m, |p| {
            let mut sc = EvalScratch::default();
            let (mut p1, mut q1) = (vec![0.0; n], vec![0.0; kk * n]);
            let (mut p2, mut q2) = (vec![0.0; n * n], vec![0.0; kk * n * n]);
            pq.pq_at(xbar, p, k, &mut sc, &mut p1, &mut q1);
            big.pq_at(xbar, p, k, &mut sc, &mut p2, &mut q2);
            let mut d = vec![0.0; n];
            let (x, u) = (xbar.state(p, k), xbar.control(p, k));
            lattice.iter().map(|v| gap_raw(s, x, u, v, &p1, &q1, &p2, &mut d)).collect()
        });
        for (j, v) in lattice.iter().enumerate() {
            let mut vals: Vec<f64> = per_path.iter().map(|r| r[j]).collect();
            if let Some(path) = vals.iter().position(|g| !g.is_finite()) {
                return Err(Error::BlowUp { path, step: k });
            }
            let mean = Estimate::from_samples(&vals);
            let p05 = percentile(&mut vals, 0.05);
            cells.push(GapCell { step: k, t: k as f64 * s.dt(), v: v.clone(), mean, p05 });
        }
    }
    Ok(SMPReport { cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_steps_are_interior_block_midpoints() {
        assert_eq!(sample_steps(32, 8), vec![2, 6, 10, 14, 18, 22, 26, 30]);
        assert!(sample_steps(128, 8).iter().all(|&k| k > 0 && k < 128));
    }

    #[test]
    fn percentile_interpolates() {
        let mut v: Vec<f64> = (0..=100).map(f64::from).collect();
        assert!((percentile(&mut v, 0.05) - 5.0).abs() < 1e-12);
    }
}
