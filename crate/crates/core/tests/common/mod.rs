//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use smplab_core::numerics::heat_mollifier;
use smplab_core::scenario::{evaluate_control, parse_scenario, Scenario};

pub fn scenario(text: &str) -> Scenario {
    parse_scenario(text).expect("test scenario parses")
}

/// Dirichlet Laplacian by second differences, applied to `v`.
pub fn laplacian(v: &[f64], h: f64, out: &mut [f64]) {
    let n = v.len();
    for i in 0..n {
        let left = if i > 0 { v[i - 1] } else { 0.0 };
        let right = if i + 1 < n { v[i + 1] } else { 0.0 };
        out[i] = (left - 2.0 * v[i] + right) / (h * h);
    }
}

/// `A⊗I + I⊗A` applied to a row-major `n×n` array.
pub fn laplacian2(w: &[f64], n: usize, h: f64, out: &mut [f64]) {
    let at = |i: isize, j: isize| if i < 0 || j < 0 || i >= n as isize || j >= n as isize { 0.0 } else { w[i as usize * n + j as usize] };
    for i in 0..n as isize {
        for j in 0..n as isize {
            let c = at(i, j);
            out[i as usize * n + j as usize] = (at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1) - 4.0 * c) / (h * h);
        }
    }
}

/// Sub-steps per scheme step keeping RK4 inside its stability region for
/// operators up to `A⊗I + I⊗A`, whose spectrum reaches `8/h²`.
pub fn stable_sub(s: &Scenario, sub: usize) -> usize {
    let h = s.grid.h();
    sub.max((s.dt() * 8.0 / (h * h)).ceil() as usize)
}

fn rk4<F: Fn(f64, &[f64], &mut [f64])>(f: F, t: f64, y: &mut [f64], dt: f64) {
    let n = y.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    f(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    f(t + 0.5 * dt, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    f(t + 0.5 * dt, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    f(t + dt, &tmp, &mut k4);
    for i in 0..n {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Terminal data of the oracle's `P`.
#[derive(Debug, Clone, Copy)]
pub enum PTerminal {
    Skip,
    Mollified(f64),
    /// `δ*(h_xx)`: mass `h_xx/h` on the diagonal.
    Diagonal,
}

/// Noise-free state and adjoints from the continuous-time equations by RK4
/// with `sub` steps per scheme step.
pub struct DeterministicOracle {
    pub n: usize,
    pub sub: usize,
    /// State at every half sub-step, `2·N·sub + 1` entries.
    pub x: Vec<Vec<f64>>,
    /// `p` and `P` at the scheme steps `t_k`.
    pub p: Vec<Vec<f64>>,
    pub big_p: Vec<Vec<f64>>,
}

impl DeterministicOracle {
    pub fn solve(s: &Scenario, sub: usize, terminal: PTerminal) -> Self {
        let sub = stable_sub(s, sub);
        let n = s.n();
        let h = s.grid.h();
        let dt = s.dt() / sub as f64;
        let c = &s.coeffs;
        let control = |k: usize| evaluate_control(s, &s.reference, k.min(s.n_t - 1), s.x0.values()).to_vec();
        let half = 2 * s.n_t * sub;

        let mut x = vec![s.x0.values().to_vec()];
        let mut cur = s.x0.values().to_vec();
        for j in 0..half {
            let u = control(j / (2 * sub));
            rk4(
                |_, y, out| {
                    laplacian(y, h, out);
                    for i in 0..n {
                        out[i] += c.b(y[i], &u);
                    }
                },
                0.0,
                &mut cur,
                0.5 * dt,
            );
            x.push(cur.clone());
        }

        // backward in τ = T − t; state at τ read from the half-step table
        let width = if matches!(terminal, PTerminal::Skip) { n } else { n + n * n };
        let mut y = vec![0.0; width];
        let xt = &x[half];
        for i in 0..n {
            y[i] = c.h_x(xt[i]);
        }
        match terminal {
            PTerminal::Skip => {}
            PTerminal::Mollified(eta) => {
                let xt_field = smplab_core::numerics::Field::new(s.grid, xt.clone()).unwrap();
                let hx = heat_mollifier(&xt_field, |v| c.h_xx(v), eta).unwrap();
                y[n..].copy_from_slice(hx.values());
            }
            PTerminal::Diagonal => {
                for i in 0..n {
                    y[n + i * n + i] = c.h_xx(xt[i]) / h;
                }
            }
        }
        let mut p = vec![y[..n].to_vec()];
        let mut big_p = vec![y[n..].to_vec()];
        for j in (0..s.n_t * sub).rev() {
            let k = j / sub;
            let u = control(k);
            let rhs = |tau: f64, v: &[f64], out: &mut [f64]| {
                // τ measured from the right end of this sub-step in half steps
                let idx = 2 * (j + 1) - (tau / (0.5 * dt)).round() as usize;
                let xs = &x[idx];
                laplacian(&v[..n], h, &mut out[..n]);
                for i in 0..n {
                    out[i] += c.b_x(xs[i], &u) * v[i] + c.l_x(xs[i], &u);
                }
                if width > n {
                    let (pv, bigv) = (&v[..n], &v[n..]);
                    let outp = &mut out[n..];
                    laplacian2(bigv, n, h, outp);
                    for a in 0..n {
                        for b in 0..n {
                            outp[a * n + b] += (c.b_x(xs[a], &u) + c.b_x(xs[b], &u)) * bigv[a * n + b];
                        }
                        outp[a * n + a] += (c.l_xx(xs[a], &u) + c.b_xx(xs[a], &u) * pv[a]) / h;
                    }
                }
            };
            rk4(rhs, 0.0, &mut y, dt);
            if j % sub == 0 {
                p.push(y[..n].to_vec());
                big_p.push(y[n..].to_vec());
            }
        }
        p.reverse();
        big_p.reverse();
        DeterministicOracle { n, sub, x, p, big_p }
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.x[2 * self.sub * k]
    }
}

/// `‖a − b‖ / ‖b‖` in the Euclidean norm.
pub fn relative(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// `p_t = M_t x̄_t + m_t` for additive dynamics `b = βx + c·u` and the
/// quadratic cost: `−Ṁ = M(A+β) + (A+β)M + I`, `M_T = wI` and
/// `−ṁ = M c·u + (A+β)m − x_ref`, `m_T = −w x_target`, by RK4 with `sub`
/// steps per scheme step. Returns `(M_k, m_k)` at the scheme steps.
pub fn affine_ansatz(s: &Scenario, beta: f64, c: &[f64], x_ref: f64, w: f64, x_target: f64, sub: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let sub = stable_sub(s, sub);
    let n = s.n();
    let h = s.grid.h();
    let dt = s.dt() / sub as f64;
    let nn = n * n;
    let mut y = vec![0.0; nn + n];
    for i in 0..n {
        y[i * n + i] = w;
        y[nn + i] = -w * x_target;
    }
    let apply_a = |v: &[f64], out: &mut [f64]| {
        laplacian(v, h, out);
        for (o, &x) in out.iter_mut().zip(v) {
            *o += beta * x;
        }
    };
    let mut ms = vec![y[..nn].to_vec()];
    let mut vs = vec![y[nn..].to_vec()];
    for j in (0..s.n_t * sub).rev() {
        let k = j / sub;
        let u = evaluate_control(s, &s.reference, k, s.x0.values());
        let cu: f64 = c.iter().zip(u).map(|(a, b)| a * b).sum();
        rk4(
            |_, v, out| {
                let (m, mv) = (&v[..nn], &v[nn..]);
                let (om, ov) = out.split_at_mut(nn);
                // (A+β)M column by column, M(A+β) row by row; M stays symmetric
                let mut col = vec![0.0; n];
                let mut tmp = vec![0.0; n];
                for b in 0..n {
                    for a in 0..n {
                        col[a] = m[a * n + b];
                    }
                    apply_a(&col, &mut tmp);
                    for a in 0..n {
                        om[a * n + b] = tmp[a];
                    }
                }
                for a in 0..n {
                    apply_a(&m[a * n..(a + 1) * n], &mut tmp);
                    for b in 0..n {
                        om[a * n + b] += tmp[b];
                    }
                    om[a * n + a] += 1.0;
                }
                apply_a(mv, ov);
                for a in 0..n {
                    let row_sum: f64 = m[a * n..(a + 1) * n].iter().sum();
                    ov[a] += row_sum * cu - x_ref;
                }
            },
            0.0,
            &mut y,
            dt,
        );
        if j % sub == 0 {
            ms.push(y[..nn].to_vec());
            vs.push(y[nn..].to_vec());
        }
    }
    ms.reverse();
    vs.reverse();
    (ms, vs)
}
