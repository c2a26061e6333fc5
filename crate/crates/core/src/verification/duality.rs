//! Duality checks: the cost-sensitivity side of each adjoint state property
//! against its pairing with the adjoint pair, path by path on one ensemble.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::report::DualityReport;
use super::sum_paths;
use crate::adjoint::first::check_pairing;
use crate::adjoint::second::second_order_source;
use crate::adjoint::{BackwardPair1, BackwardPair2, EvalScratch, Terminal};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forward::linear::{first_variation_sources, LinearKernel, LinearScratch};
use crate::forward::tensor::{tensor_advance, tensor_sources, TensorCoefficients, TensorStep};
use crate::forward::{Estimate, PathEnsemble, Spike, StateEnsemble};
use crate::numerics::field::dot;
use crate::scenario::Scenario;

/// Number of sine modes in a random smooth probe.
const PROBE_MODES: usize = 3;

/// Source pair `(φ, ψ)` for the first-order check.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe1 {
    Zero,
    /// Smooth deterministic space-time profiles drawn from `seed`.
    Deterministic { seed: u64 },
    /// A deterministic profile times `W^0` at `t_{k+1−lag}`; `lag ≥ 1`
    /// keeps the source adapted.
    PastNoise { seed: u64, lag: usize },
    /// The first-variation sources of a spike.
    Spike { v: Vec<f64>, tau: f64, eps: f64 },
}

/// Source pair `(Φ, Ψ)` on `Λ²` for the second-order check.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe2 {
    Zero,
    Deterministic { seed: u64 },
    PastNoise { seed: u64, lag: usize },
    /// `(Φ^ε, Ψ^ε)` built from the first variation of a spike.
    Spike { v: Vec<f64>, tau: f64, eps: f64 },
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0
}

/// `Σ_j a_j sin(jπξ) (1 + b_j cos(πt/T))` for one random draw.
#[derive(Debug, Clone)]
struct SmoothProfile {
    a: [f64; PROBE_MODES],
    b: [f64; PROBE_MODES],
}

impl SmoothProfile {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let mut p = SmoothProfile { a: [0.0; PROBE_MODES], b: [0.0; PROBE_MODES] };
        for j in 0..PROBE_MODES {
            p.a[j] = uniform(rng) / (j + 1) as f64;
            p.b[j] = 0.5 * uniform(rng);
        }
        p
    }

    fn time_weights(&self, t: f64, t_final: f64) -> [f64; PROBE_MODES] {
        let c = (std::f64::consts::PI * t / t_final).cos();
        std::array::from_fn(|j| self.a[j] * (1.0 + self.b[j] * c))
    }
}

/// Precomputed `sin(jπξ_i)` on the grid.
fn sine_table(s: &Scenario) -> Vec<[f64; PROBE_MODES]> {
    let (a, len) = (s.grid.a(), s.grid.length());
    s.grid
        .nodes()
        .iter()
        .map(|&x| std::array::from_fn(|j| ((j + 1) as f64 * std::f64::consts::PI * (x - a) / len).sin()))
        .collect()
}

/// Profiles for `φ` and each `ψ_m`, in that order.
fn draw_profiles(seed: u64, k: usize) -> Vec<SmoothProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..=k).map(|_| SmoothProfile::draw(&mut rng)).collect()
}

fn check_lag(lag: usize) -> Result<()> {
    if lag == 0 {
        return Err(Error::Structural(
            "probe depends on the current noise increment (lag 0) and is not adapted".into(),
        ));
    }
    Ok(())
}

/// `W^0(t_{k+1−lag})` accumulated along the path.
fn past_noise(wsum: &[f64], k: usize, lag: usize) -> f64 {
    if k + 1 >= lag {
        wsum[k + 1 - lag]
    } else {
        0.0
    }
}

enum Prepared1 {
    Zero,
    Smooth { profiles: Vec<SmoothProfile>, lag: Option<usize> },
    Spike(Spike),
}

fn prepare1(s: &Scenario, probe: &Probe1) -> Result<Prepared1> {
    Ok(match probe {
        Probe1::Zero => Prepared1::Zero,
        Probe1::Deterministic { seed } => Prepared1::Smooth { profiles: draw_profiles(*seed, s.k()), lag: None },
        Probe1::PastNoise { seed, lag } => {
            check_lag(*lag)?;
            Prepared1::Smooth { profiles: draw_profiles(*seed, s.k()), lag: Some(*lag) }
        }
        Probe1::Spike { v, tau, eps } => Prepared1::Spike(Spike::new(s, v.clone(), *tau, *eps)?),
    })
}

fn label1(probe: &Probe1) -> String {
    match probe {
        Probe1::Zero => "zero".into(),
        Probe1::Deterministic { seed } => format!("deterministic-{seed}"),
        Probe1::PastNoise { seed, lag } => format!("past-noise-{seed}-lag{lag}"),
        Probe1::Spike { tau, eps, .. } => format!("spike-tau{tau}-eps{eps}"),
    }
}

fn label2(probe: &Probe2) -> String {
    match probe {
        Probe2::Zero => "zero".into(),
        Probe2::Deterministic { seed } => format!("deterministic-{seed}"),
        Probe2::PastNoise { seed, lag } => format!("past-noise-{seed}-lag{lag}"),
        Probe2::Spike { tau, eps, .. } => format!("spike-tau{tau}-eps{eps}"),
    }
}

/// Random smooth first-order probes from consecutive seeds.
pub fn random_probes1(seed: u64, count: usize) -> Vec<Probe1> {
    (0..count as u64).map(|i| Probe1::Deterministic { seed: seed.wrapping_add(i) }).collect()
}

/// Random smooth second-order probes from consecutive seeds.
pub fn random_probes2(seed: u64, count: usize) -> Vec<Probe2> {
    (0..count as u64).map(|i| Probe2::Deterministic { seed: seed.wrapping_add(i) }).collect()
}

/// Accumulator width of one report.
const W: usize = 8;

fn report(label: String, sums: &[f64], m: usize) -> DualityReport {
    let lhs = Estimate::from_sums(sums[0], sums[1], m);
    let rhs = Estimate::from_sums(sums[2], sums[3], m);
    let diff = Estimate::from_sums(sums[4], sums[5], m);
    let rhs_plain = Estimate::from_sums(sums[6], sums[7], m);
    DualityReport { label, lhs, rhs, rhs_plain, diff_std_err: diff.std_err, paths: m, crn: true }
}

fn accumulate(acc: &mut [f64], lhs: f64, rhs: f64, cv: f64) {
    let adj = rhs + cv;
    let d = lhs - adj;
    acc[0] += lhs;
    acc[1] += lhs * lhs;
    acc[2] += adj;
    acc[3] += adj * adj;
    acc[4] += d;
    acc[5] += d * d;
    acc[6] += rhs;
    acc[7] += rhs * rhs;
}

/// One step of the martingale control variate. With `z = a + Σ_m c_m ΔW^m`
/// the pre-solve update and `Π ≈ p̂ + Σ_m q^m ΔW^m`, the variate is
/// `Σ_m ΔW^m (⟨q^m, a⟩ + ⟨p̂, c_m⟩) + Σ_{m,m'} ⟨q^m, c_{m'}⟩ (ΔW^m ΔW^{m'} − δ_{mm'} Δt)`.
/// Every term has conditional mean zero given `ℱ_{t_k}` because the
/// coefficients are adapted and `ΔW_k` is independent of them, so adding it
/// leaves the expectation of the pairing unchanged whatever the quality of
/// the regression.
fn control_variate(weight: f64, phat: &[f64], q: &[f64], a: &[f64], c: &[f64], dw: &[f64], dt: f64) -> f64 {
    let len = a.len();
    let mut cv = 0.0;
    for (m, &dm) in dw.iter().enumerate() {
        let qm = &q[m * len..(m + 1) * len];
        cv += dm * (dot(qm, a) + dot(phat, &c[m * len..(m + 1) * len]));
        for (m2, &dm2) in dw.iter().enumerate() {
            let kron = if m == m2 { dt } else { 0.0 };
            cv += dot(qm, &c[m2 * len..(m2 + 1) * len]) * (dm * dm2 - kron);
        }
    }
    weight * cv
}

/// First-order check: `E[Σ Δt ⟨l_x, y_k⟩ + ⟨h_x, y_N⟩]` against
/// `Σ Δt E[⟨p̂_k, φ_k⟩ + ⟨q_k, ψ_k⟩]` for each probe.
pub fn check_duality1(
    s: &Scenario,
    xbar: &StateEnsemble,
    e: &PathEnsemble,
    pq: &BackwardPair1,
    probes: &[Probe1],
    exec: Execution,
) -> Result<Vec<DualityReport>> {
    check_pairing(xbar, e)?;
    if pq.crn_id() != e.crn_id() {
        return Err(Error::Structural("adjoint pair was trained on a different ensemble".into()));
    }
    let prepared = probes.iter().map(|p| prepare1(s, p)).collect::<Result<Vec<_>>>()?;
    let kernel = LinearKernel::new(s, xbar, e)?;
    let (n, kk, n_t, dt, h) = (s.n(), s.k(), s.n_t, s.dt(), s.grid.h());
    let table = sine_table(s);
    let np = prepared.len();
    let sums = sum_paths(exec, e.paths(), W * np, |p, acc| {
        let mut sc = EvalScratch::default();
        let mut ls = LinearScratch::new(n, kk);
        let (mut p1, mut q1) = (vec![0.0; n], vec![0.0; kk * n]);
        let mut ys = vec![vec![0.0; n]; np];
        let mut lhs = vec![0.0; np];
        let mut rhs = vec![0.0; np];
        let mut cv = vec![0.0; np];
        let (mut a, mut c) = (vec![0.0; n], vec![0.0; kk * n]);
        let mut wsum = vec![0.0; n_t + 1];
        for k in 0..n_t {
            let dw = e.dw(p, k);
            wsum[k + 1] = wsum[k] + dw[0];
            pq.pq_at(xbar, p, k, &mut sc, &mut p1, &mut q1);
            kernel.coefficients(p, k, &mut ls.beta, &mut ls.sx);
            let x = xbar.state(p, k);
            let u = xbar.control(p, k);
            let lx: Vec<f64> = x.iter().map(|&xi| s.coeffs.l_x(xi, u)).collect();
            let tw = (k as f64) * dt;
            for (j, probe) in prepared.iter().enumerate() {
                let y = &mut ys[j];
                lhs[j] += dt * h * dot(&lx, y);
                match probe {
                    Prepared1::Zero => {
                        ls.phi.fill(0.0);
                        ls.psi.fill(0.0);
                    }
                    Prepared1::Smooth { profiles, lag } => {
                        let scale = lag.map_or(1.0, |l| past_noise(&wsum, k, l));
                        for (b, prof) in profiles.iter().enumerate() {
                            let w = prof.time_weights(tw, s.t_final);
                            let out = if b == 0 { &mut ls.phi[..] } else { &mut ls.psi[(b - 1) * n..b * n] };
                            for (o, sines) in out.iter_mut().zip(&table) {
                                *o = scale * (0..PROBE_MODES).map(|i| w[i] * sines[i]).sum::<f64>();
                            }
                        }
                    }
                    Prepared1::Spike(spike) => first_variation_sources(&kernel, spike, p, k, &mut ls.phi, &mut ls.psi),
                }
                let mut r = dot(&p1, &ls.phi);
                for m in 0..kk {
                    r += dot(&q1[m * n..(m + 1) * n], &ls.psi[m * n..(m + 1) * n]);
                }
                rhs[j] += dt * h * r;
                for i in 0..n {
                    a[i] = (1.0 + dt * ls.beta[i]) * y[i] + dt * ls.phi[i];
                }
                for m in 0..kk {
                    for i in 0..n {
                        c[m * n + i] = ls.sx[m * n + i] * y[i] + ls.psi[m * n + i];
                    }
                }
                cv[j] += control_variate(h, &p1, &q1, &a, &c, dw, dt);
                kernel.advance(y, &ls.beta, &ls.sx, &ls.phi, &ls.psi, dw);
                crate::forward::state::check_finite(y, p, k + 1)?;
            }
        }
        let xt = xbar.state(p, n_t);
        let hx: Vec<f64> = xt.iter().map(|&x| s.coeffs.h_x(x)).collect();
        for j in 0..np {
            lhs[j] += h * dot(&hx, &ys[j]);
            accumulate(&mut acc[W * j..W * (j + 1)], lhs[j], rhs[j], cv[j]);
        }
        Ok(())
    })?;
    let m = e.paths();
    Ok(probes.iter().enumerate().map(|(j, pr)| report(label1(pr), &sums[W * j..W * (j + 1)], m)).collect())
}

enum Prepared2 {
    Zero,
    Smooth { profiles: Vec<SmoothProfile>, lag: Option<usize> },
    Spike(Spike),
}

fn prepare2(s: &Scenario, probe: &Probe2) -> Result<Prepared2> {
    Ok(match probe {
        Probe2::Zero => Prepared2::Zero,
        Probe2::Deterministic { seed } => Prepared2::Smooth { profiles: draw_profiles(*seed, s.k()), lag: None },
        Probe2::PastNoise { seed, lag } => {
            check_lag(*lag)?;
            Prepared2::Smooth { profiles: draw_profiles(*seed, s.k()), lag: Some(*lag) }
        }
        Probe2::Spike { v, tau, eps } => Prepared2::Spike(Spike::new(s, v.clone(), *tau, *eps)?),
    })
}

/// Symmetric smooth tensor `f(λ) f(μ)` from a one-dimensional profile.
fn outer_into(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = f[i] * f[j];
        }
    }
}

/// Second-order check: `E[Σ Δt ⟨c_k, δY_k⟩ + ⟨h^η, Y_N⟩]` against
/// `Σ Δt E[⟨P̂_k, Φ_k⟩ + ⟨Q_k, Ψ_k⟩]`, with `Y` driven by each probe through
/// the tensor scheme. Spike probes also report the direct evaluation with
/// `y^ε ⊗ y^ε` in place of `Y^ε`, labelled `…/direct`.
#[allow(clippy::too_many_arguments)]
pub fn check_duality2(
    s: &Scenario,
    xbar: &StateEnsemble,
    e: &PathEnsemble,
    pq: &BackwardPair1,
    big: &BackwardPair2,
    step: &TensorStep,
    probes: &[Probe2],
    exec: Execution,
) -> Result<Vec<DualityReport>> {
    check_pairing(xbar, e)?;
    if pq.crn_id() != e.crn_id() || big.crn_id() != e.crn_id() {
        return Err(Error::Structural("adjoint pairs were trained on a different ensemble".into()));
    }
    let prepared = probes.iter().map(|p| prepare2(s, p)).collect::<Result<Vec<_>>>()?;
    let kernel = LinearKernel::new(s, xbar, e)?;
    let (n, kk, n_t, dt, h) = (s.n(), s.k(), s.n_t, s.dt(), s.grid.h());
    let nn = n * n;
    let table = sine_table(s);
    let np = prepared.len();
    // per probe: tensor-scheme report, then the direct report
    let width = 2 * W * np;
    let sums = sum_paths(exec, e.paths(), width, |p, acc| {
        let mut sc = EvalScratch::default();
        let mut sc2 = EvalScratch::default();
        let mut ls = LinearScratch::new(n, kk);
        let mut coef = TensorCoefficients::new(n);
        let (mut p1, mut q1) = (vec![0.0; n], vec![0.0; kk * n]);
        let (mut p2, mut q2) = (vec![0.0; nn], vec![0.0; kk * nn]);
        let mut cvec = vec![0.0; n];
        let mut ys = vec![vec![0.0; n]; np];
        let mut y2s = vec![vec![0.0; nn]; np];
        let (mut phi2, mut psi2) = (vec![0.0; nn], vec![0.0; kk * nn]);
        let mut prof = vec![0.0; n];
        let mut scratch = Vec::new();
        let mut lhs = vec![0.0; np];
        let mut direct = vec![0.0; np];
        let mut rhs = vec![0.0; np];
        let mut cv = vec![0.0; np];
        let (mut a2, mut c2) = (vec![0.0; nn], vec![0.0; kk * nn]);
        let mut wsum = vec![0.0; n_t + 1];
        for k in 0..n_t {
            let dw = e.dw(p, k);
            wsum[k + 1] = wsum[k] + dw[0];
            pq.pq_at(xbar, p, k, &mut sc, &mut p1, &mut q1);
            big.pq_at(xbar, p, k, &mut sc2, &mut p2, &mut q2);
            second_order_source(s, xbar.state(p, k), xbar.control(p, k), &p1, &q1, &mut cvec);
            kernel.coefficients(p, k, &mut ls.beta, &mut ls.sx);
            coef.build(&ls.beta, &ls.sx, kk);
            let tw = (k as f64) * dt;
            for (j, probe) in prepared.iter().enumerate() {
                let y2 = &mut y2s[j];
                lhs[j] += dt * h * (0..n).map(|i| cvec[i] * y2[i * n + i]).sum::<f64>();
                match probe {
                    Prepared2::Zero => {
                        phi2.fill(0.0);
                        psi2.fill(0.0);
                    }
                    Prepared2::Smooth { profiles, lag } => {
                        let scale = lag.map_or(1.0, |l| past_noise(&wsum, k, l));
                        for (b, pr) in profiles.iter().enumerate() {
                            let w = pr.time_weights(tw, s.t_final);
                            for (o, sines) in prof.iter_mut().zip(&table) {
                                *o = (0..PROBE_MODES).map(|i| w[i] * sines[i]).sum::<f64>();
                            }
                            let out = if b == 0 { &mut phi2[..] } else { &mut psi2[(b - 1) * nn..b * nn] };
                            outer_into(&prof, out);
                            out.iter_mut().for_each(|v| *v *= scale);
                        }
                    }
                    Prepared2::Spike(spike) => {
                        let y = &mut ys[j];
                        direct[j] += dt * h * (0..n).map(|i| cvec[i] * y[i] * y[i]).sum::<f64>();
                        first_variation_sources(&kernel, spike, p, k, &mut ls.phi, &mut ls.psi);
                        tensor_sources(y, &ls.sx, &ls.phi, &ls.psi, kk, &mut phi2, &mut psi2);
                        kernel.advance(y, &ls.beta, &ls.sx, &ls.phi, &ls.psi, dw);
                    }
                }
                let mut r = dot(&p2, &phi2);
                for m in 0..kk {
                    r += dot(&q2[m * nn..(m + 1) * nn], &psi2[m * nn..(m + 1) * nn]);
                }
                rhs[j] += dt * h * h * r;
                for i in 0..n {
                    for l in 0..n {
                        let idx = i * n + l;
                        a2[idx] = (1.0 + dt * coef.beta2[idx]) * y2[idx] + dt * phi2[idx];
                        for m in 0..kk {
                            c2[m * nn + idx] = (ls.sx[m * n + i] + ls.sx[m * n + l]) * y2[idx] + psi2[m * nn + idx];
                        }
                    }
                }
                cv[j] += control_variate(h * h, &p2, &q2, &a2, &c2, dw, dt);
                tensor_advance(step, dt, y2, &coef, &ls.sx, &phi2, &psi2, dw, &mut scratch);
                crate::forward::state::check_finite(y2, p, k + 1)?;
            }
        }
        let mut term = vec![0.0; nn];
        big.sweep_terminal_into(s, xbar.state(p, n_t), &mut term)?;
        let mut yy = vec![0.0; nn];
        for j in 0..np {
            lhs[j] += h * h * dot(&term, &y2s[j]);
            accumulate(&mut acc[2 * W * j..2 * W * j + W], lhs[j], rhs[j], cv[j]);
            outer_into(&ys[j], &mut yy);
            direct[j] += h * h * dot(&term, &yy);
            accumulate(&mut acc[2 * W * j + W..2 * W * (j + 1)], direct[j], rhs[j], cv[j]);
        }
        Ok(())
    })?;
    let m = e.paths();
    let mut out = Vec::new();
    for (j, pr) in probes.iter().enumerate() {
        out.push(report(label2(pr), &sums[2 * W * j..2 * W * j + W], m));
        if matches!(pr, Probe2::Spike { .. }) {
            out.push(report(format!("{}/direct", label2(pr)), &sums[2 * W * j + W..2 * W * (j + 1)], m));
        }
    }
    Ok(out)
}

/// Limit check for a spike: `E[Σ Δt ⟨c_k, (y^ε_k)²⟩ + ⟨h_xx(x̄_T), (y^ε_T)²⟩]`
/// against `Σ Δt E[⟨P_k, Φ^ε_k⟩ + ⟨Q_k, Ψ^ε_k⟩]` for a limit pair.
#[allow(clippy::too_many_arguments)]
pub fn check_limit_spike(
    s: &Scenario,
    xbar: &StateEnsemble,
    e: &PathEnsemble,
    pq: &BackwardPair1,
    limit: &BackwardPair2,
    v: Vec<f64>,
    tau: f64,
    eps: f64,
    exec: Execution,
) -> Result<DualityReport> {
    if !matches!(limit.terminal(), Terminal::Limit(_) | Terminal::Diagonal) {
        return Err(Error::Structural("limit check needs a pair tagged as the limit".into()));
    }
    check_pairing(xbar, e)?;
    if pq.crn_id() != e.crn_id() || limit.crn_id() != e.crn_id() {
        return Err(Error::Structural("adjoint pairs were trained on a different ensemble".into()));
    }
    let spike = Spike::new(s, v, tau, eps)?;
    let kernel = LinearKernel::new(s, xbar, e)?;
    let (n, kk, n_t, dt, h) = (s.n(), s.k(), s.n_t, s.dt(), s.grid.h());
    let nn = n * n;
    let sums = sum_paths(exec, e.paths(), W, |p, acc| {
        let mut sc = EvalScratch::default();
        let mut sc2 = EvalScratch::default();
        let mut ls = LinearScratch::new(n, kk);
        let mut coef = TensorCoefficients::new(n);
        let (mut a2, mut c2) = (vec![0.0; nn], vec![0.0; kk * nn]);
        let mut cv = 0.0;
        let (mut p1, mut q1) = (vec![0.0; n], vec![0.0; kk * n]);
        let (mut p2, mut q2) = (vec![0.0; nn], vec![0.0; kk * nn]);
        let (mut phi2, mut psi2) = (vec![0.0; nn], vec![0.0; kk * nn]);
        let mut cvec = vec![0.0; n];
        let mut y = vec![0.0; n];
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for k in 0..n_t {
            let x = xbar.state(p, k);
            pq.pq_at(xbar, p, k, &mut sc, &mut p1, &mut q1);
            second_order_source(s, x, xbar.control(p, k), &p1, &q1, &mut cvec);
            lhs += dt * h * (0..n).map(|i| cvec[i] * y[i] * y[i]).sum::<f64>();
            kernel.coefficients(p, k, &mut ls.beta, &mut ls.sx);
            first_variation_sources(&kernel, &spike, p, k, &mut ls.phi, &mut ls.psi);
            if spike.active(k) || y.iter().any(|&v| v != 0.0) {
                limit.pq_at(xbar, p, k, &mut sc2, &mut p2, &mut q2);
                tensor_sources(&y, &ls.sx, &ls.phi, &ls.psi, kk, &mut phi2, &mut psi2);
                let mut r = dot(&p2, &phi2);
                for m in 0..kk {
                    r += dot(&q2[m * nn..(m + 1) * nn], &psi2[m * nn..(m + 1) * nn]);
                }
                rhs += dt * h * h * r;
                coef.build(&ls.beta, &ls.sx, kk);
                for i in 0..n {
                    for l in 0..n {
                        let idx = i * n + l;
                        let yy = y[i] * y[l];
                        a2[idx] = (1.0 + dt * coef.beta2[idx]) * yy + dt * phi2[idx];
                        for m in 0..kk {
                            c2[m * nn + idx] = (ls.sx[m * n + i] + ls.sx[m * n + l]) * yy + psi2[m * nn + idx];
                        }
                    }
                }
                cv += control_variate(h * h, &p2, &q2, &a2, &c2, e.dw(p, k), dt);
            }
            kernel.advance(&mut y, &ls.beta, &ls.sx, &ls.phi, &ls.psi, e.dw(p, k));
            crate::forward::state::check_finite(&y, p, k + 1)?;
        }
        let xt = xbar.state(p, n_t);
        lhs += h * xt.iter().zip(&y).map(|(&x, &yi)| s.coeffs.h_xx(x) * yi * yi).sum::<f64>();
        accumulate(acc, lhs, rhs, cv);
        Ok(())
    })?;
    Ok(report(format!("limit-spike-tau{tau}-eps{eps}"), &sums, e.paths()))
}
