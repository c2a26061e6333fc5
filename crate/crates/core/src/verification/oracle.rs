//! Noise-free oracle: the continuous backward equations for `p` and
//! `P^η` along the deterministic state, integrated by RK4 in the method of
//! lines, against a Richardson-extrapolated pair of estimator runs.

use crate::adjoint::{solve_adjoint1, solve_adjoint2_mollified, RegressionBasis};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forward::{simulate_state, PathEnsemble, TensorStep};
use crate::numerics::{heat_mollifier, Field, Grid2D, SpectralBasis, TensorField};
use crate::scenario::Scenario;

/// Real-axis stability limit of classical RK4, with margin.
const RK4_REAL_LIMIT: f64 = 2.5;

/// Identical noise-free paths: enough for the constant regression basis.
const ORACLE_PATHS: usize = 20;

/// One classical RK4 step; `f` is called at the left end, twice at the
/// midpoint, then at the right end.
fn rk4(mut f: impl FnMut(&[f64], &mut [f64]), y: &mut [f64], dt: f64) {
    let n = y.len();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    f(y, &mut k[0]);
    for (stage, frac) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
        for i in 0..n {
            tmp[i] = y[i] + frac * dt * k[stage - 1][i];
        }
        f(&tmp, &mut k[stage]);
    }
    for i in 0..n {
        y[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
}

/// `p` and `P^η` of a noise-free scenario at every scheme step.
#[derive(Debug, Clone)]
pub struct NoiseFreeOracle {
    pub p: Vec<Vec<f64>>,
    pub big_p: Vec<Vec<f64>>,
    /// RK4 sub-steps per scheme step.
    pub sub: usize,
}

/// Integrates `ẋ = Ax + b(x, ū)` forward at half sub-steps, then
/// `−ṗ = Ap + b_x p + l_x` and
/// `−Ṗ = (A⊗I + I⊗A)P + (b_x ⊕ b_x)P + δ*(l_xx + b_xx p)` backward from
/// `h_x(x_T)` and `h^η_xx`.
pub fn noise_free_oracle(s: &Scenario, eta: f64) -> Result<NoiseFreeOracle> {
    if !s.coeffs.is_noise_free() {
        return Err(Error::validation("oracle", "the scenario has noise; the oracle needs σ ≡ 0"));
    }
    let ubar = (0..s.n_t)
        .map(|k| s.reference.deterministic_at(k).map(<[f64]>::to_vec))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::validation("oracle", "the oracle needs a deterministic reference control"))?;
    let basis = SpectralBasis::new(&s.op)?;
    let lmax = basis.eigenvalues().iter().cloned().fold(0.0, f64::max);
    let sub = 2usize.max((s.dt() * 2.0 * lmax / RK4_REAL_LIMIT).ceil() as usize);
    let (n, h, c) = (s.n(), s.grid.h(), &s.coeffs);
    let dt = s.dt() / sub as f64;
    let g2 = Grid2D::new(s.grid);
    let apply = |v: &[f64]| s.op.apply(&Field::from_raw(s.grid, v.to_vec())).map(Field::into_values);
    let apply2 = |v: &[f64]| s.op.apply2(&TensorField::from_raw(g2, v.to_vec())).map(TensorField::into_values);

    let half = 2 * s.n_t * sub;
    let mut xs = Vec::with_capacity(half + 1);
    let mut x = s.x0.values().to_vec();
    xs.push(x.clone());
    for j in 0..half {
        let u = &ubar[j / (2 * sub)];
        rk4(
            |y, out| {
                let ay = apply(y).expect("state stays on the grid");
                for i in 0..n {
                    out[i] = ay[i] + c.b(y[i], u);
                }
            },
            &mut x,
            0.5 * dt,
        );
        xs.push(x.clone());
    }

    let nn = n * n;
    let xt = Field::from_raw(s.grid, xs[half].clone());
    let mut y = vec![0.0; n + nn];
    for (yi, &x) in y.iter_mut().zip(xt.values()) {
        *yi = c.h_x(x);
    }
    y[n..].copy_from_slice(heat_mollifier(&xt, |v| c.h_xx(v), eta)?.values());
    let mut p = vec![y[..n].to_vec()];
    let mut big_p = vec![y[n..].to_vec()];
    for j in (0..s.n_t * sub).rev() {
        let u = &ubar[j / sub];
        // backward in time, the stages sit at the right end, the midpoint
        // and the left end of the sub-step
        let idx = [2 * (j + 1), 2 * j + 1, 2 * j + 1, 2 * j];
        let mut stage = 0usize;
        let rhs = |v: &[f64], out: &mut [f64]| {
            let xk = &xs[idx[stage]];
            stage += 1;
            let ap = apply(&v[..n]).expect("p stays on the grid");
            let aw = apply2(&v[n..]).expect("P stays on the grid");
            for i in 0..n {
                out[i] = ap[i] + c.b_x(xk[i], u) * v[i] + c.l_x(xk[i], u);
            }
            for a in 0..n {
                for b in 0..n {
                    out[n + a * n + b] = aw[a * n + b] + (c.b_x(xk[a], u) + c.b_x(xk[b], u)) * v[n + a * n + b];
                }
                out[n + a * n + a] += (c.l_xx(xk[a], u) + c.b_xx(xk[a], u) * v[a]) / h;
            }
        };
        rk4(rhs, &mut y, dt);
        if j % sub == 0 {
            p.push(y[..n].to_vec());
            big_p.push(y[n..].to_vec());
        }
    }
    p.reverse();
    big_p.reverse();
    Ok(NoiseFreeOracle { p, big_p, sub })
}

/// Relative errors of the extrapolated estimator against the oracle at a
/// few sample steps.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub eta: f64,
    pub steps: Vec<usize>,
    pub p_error: Vec<f64>,
    pub big_p_error: Vec<f64>,
}

impl OracleReport {
    pub fn worst_p(&self) -> f64 {
        self.p_error.iter().cloned().fold(0.0, f64::max)
    }

    pub fn worst_big_p(&self) -> f64 {
        self.big_p_error.iter().cloned().fold(0.0, f64::max)
    }
}

fn relative(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    if num == 0.0 {
        0.0
    } else {
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    }
}

/// Per-step mean fields of `p̂` and `P̂^η`.
type StepMeans = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Mean `p̂` and `P̂^η` of a noise-free estimator run at every step.
fn estimator_means(s: &Scenario, eta: f64, exec: Execution) -> Result<StepMeans> {
    let e = PathEnsemble::zeros(ORACLE_PATHS, s.n_t, s.k(), s.dt())?;
    let xbar = simulate_state(s, &s.reference, &e, exec)?;
    let rbasis = RegressionBasis::constant();
    let pq = solve_adjoint1(s, &xbar, &e, rbasis, exec)?;
    let step = TensorStep::factored(s)?;
    let big = solve_adjoint2_mollified(s, &xbar, &e, &pq, eta, rbasis, &step, exec)?;
    Ok((
        (0..s.n_t).map(|k| pq.mean_p(k).values().to_vec()).collect(),
        (0..s.n_t).map(|k| big.mean_p(k).values().to_vec()).collect(),
    ))
}

/// Runs the estimator on the scenario's grid and on one twice as fine,
/// extrapolates `2·X(Δt/2) − X(Δt)` to cancel the first-order time error
/// and compares with the oracle at five sample steps.
pub fn oracle_check(s: &Scenario, eta: f64, exec: Execution) -> Result<OracleReport> {
    let oracle = noise_free_oracle(s, eta)?;
    let (p0, b0) = estimator_means(s, eta, exec)?;
    let (p1, b1) = estimator_means(&s.refined_in_time(2)?, eta, exec)?;
    let nt = s.n_t;
    let steps = vec![0, nt / 4, nt / 2, 3 * nt / 4, nt - 1];
    let extrapolate = |f: &[f64], c: &[f64]| -> Vec<f64> { f.iter().zip(c).map(|(a, b)| 2.0 * a - b).collect() };
    let p_error = steps.iter().map(|&k| relative(&extrapolate(&p1[2 * k], &p0[k]), &oracle.p[k])).collect();
    let big_p_error = steps.iter().map(|&k| relative(&extrapolate(&b1[2 * k], &b0[k]), &oracle.big_p[k])).collect();
    Ok(OracleReport { eta, steps, p_error, big_p_error })
}
