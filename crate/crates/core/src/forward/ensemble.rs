//! Counter-addressable Brownian increments.
//!
//! Path `p` draws from the ChaCha8 stream `p` of the base seed. Every
//! standard normal consumes exactly two `u64` words (Box–Muller, cosine
//! branch), so increment `(p, k, m)` starts at word `4 (k K + m)` of that
//! stream and can be regenerated on its own.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::exec::Execution;

/// `M` paths of `n_t` steps of `K` independent `N(0, Δt)` increments.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    seed: u64,
    m: usize,
    n_t: usize,
    k: usize,
    dt: f64,
    /// Path-major, then step, then mode.
    dw: Vec<f64>,
    zero: bool,
    crn_id: u64,
}

fn unit_open(word: u64) -> f64 {
    // (0, 1]: never zero, so the logarithm is finite
    ((word >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = unit_open(rng.next_u64());
    let u2 = unit_open(rng.next_u64());
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn stream(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

impl PathEnsemble {
    pub fn generate(seed: u64, m: usize, n_t: usize, k: usize, dt: f64, exec: Execution) -> Result<Self> {
        Self::check(m, n_t, k, dt)?;
        let sd = dt.sqrt();
        let mut dw = vec![0.0; m * n_t * k];
        exec.for_each_row(&mut dw, n_t * k, |p, row| {
            let mut rng = stream(seed, p);
            for v in row.iter_mut() {
                *v = sd * box_muller(&mut rng);
            }
        });
        Ok(PathEnsemble { seed, m, n_t, k, dt, dw, zero: false, crn_id: crn_id(seed, m, n_t, k, dt, false) })
    }

    /// All increments forced to zero.
    pub fn zeros(m: usize, n_t: usize, k: usize, dt: f64) -> Result<Self> {
        Self::check(m, n_t, k, dt)?;
        Ok(PathEnsemble { seed: 0, m, n_t, k, dt, dw: vec![0.0; m * n_t * k], zero: true, crn_id: crn_id(0, m, n_t, k, dt, true) })
    }

    fn check(m: usize, n_t: usize, k: usize, dt: f64) -> Result<()> {
        if m == 0 || n_t == 0 || k == 0 {
            return Err(Error::validation("ensemble", format!("empty ensemble: M = {m}, n_t = {n_t}, K = {k}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        Ok(())
    }

    /// Regenerate one increment from its address alone.
    pub fn regenerate(seed: u64, path: usize, step: usize, mode: usize, k: usize, dt: f64) -> f64 {
        let mut rng = stream(seed, path);
        rng.set_word_pos(4 * (step * k + mode) as u128);
        dt.sqrt() * box_muller(&mut rng)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn paths(&self) -> usize {
        self.m
    }

    pub fn steps(&self) -> usize {
        self.n_t
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// True for an ensemble built by [`PathEnsemble::zeros`].
    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// Identifies the noise realization; equal ids mean common random numbers.
    pub fn crn_id(&self) -> u64 {
        self.crn_id
    }

    /// The `K` increments of `path` over step `k`.
    pub fn dw(&self, path: usize, step: usize) -> &[f64] {
        let o = (path * self.n_t + step) * self.k;
        &self.dw[o..o + self.k]
    }

    pub fn path(&self, path: usize) -> &[f64] {
        &self.dw[path * self.n_t * self.k..(path + 1) * self.n_t * self.k]
    }

    /// z-scores of the sample mean and variance of all increments against
    /// `0` and `Δt`.
    pub fn sanity(&self) -> (f64, f64) {
        let n = self.dw.len() as f64;
        let mean = self.dw.iter().sum::<f64>() / n;
        let var = self.dw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let z_mean = mean / (self.dt / n).sqrt();
        // Var of the sample variance of normals is 2σ⁴/(n−1)
        let z_var = (var - self.dt) / (self.dt * (2.0 / (n - 1.0)).sqrt());
        (z_mean, z_var)
    }

    /// Sub-ensemble of the first `m` paths.
    pub fn truncated(&self, m: usize) -> Self {
        let m = m.min(self.m);
        let mut e = self.clone();
        e.m = m;
        e.dw.truncate(m * self.n_t * self.k);
        e.crn_id = crn_id(self.seed, m, self.n_t, self.k, self.dt, self.zero);
        e
    }
}

fn crn_id(seed: u64, m: usize, n_t: usize, k: usize, dt: f64, zero: bool) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    (seed, m, n_t, k, dt.to_bits(), zero).hash(&mut h);
    h.finish()
}
