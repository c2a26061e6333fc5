//! Least-squares conditional expectations on spectral features of `x̄_k`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::numerics::SpectralBasis;

/// Ratio below which a standardized Gram matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e10;
/// Minimum paths per feature.
/// Columns whose residual variance after projection on the earlier
/// columns falls below this fraction are dropped.
const COLLINEAR_TOL: f64 = 1e-8;

pub const PATHS_PER_FEATURE: usize = 20;

/// Feature family: a constant, the first `modes` spectral coefficients of
/// the state and, optionally, all their pairwise products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegressionBasis {
    pub modes: usize,
    pub products: bool,
}

impl Default for RegressionBasis {
    fn default() -> Self {
        RegressionBasis { modes: 4, products: true }
    }
}

impl RegressionBasis {
    pub fn new(modes: usize, products: bool) -> Self {
        RegressionBasis { modes, products }
    }

    /// Constant only: conditional expectations become plain means.
    pub fn constant() -> Self {
        RegressionBasis { modes: 0, products: false }
    }

    /// Features excluding the constant.
    pub fn raw_count(&self, n: usize) -> usize {
        let j = self.modes.min(n);
        j + if self.products { j * (j + 1) / 2 } else { 0 }
    }

    /// Features including the constant.
    pub fn count(&self, n: usize) -> usize {
        1 + self.raw_count(n)
    }

    /// Raw (non-constant) features of one state.
    pub fn features(&self, basis: &SpectralBasis, x: &[f64], out: &mut [f64]) {
        let c = basis.leading_coefficients(x, self.modes);
        let j = c.len();
        out[..j].copy_from_slice(&c);
        if self.products {
            let mut o = j;
            for a in 0..j {
                for b in a..j {
                    out[o] = c[a] * c[b];
                    o += 1;
                }
            }
        }
    }

    pub fn check_paths(&self, n: usize, m: usize) -> Result<()> {
        let f = self.count(n);
        if m < PATHS_PER_FEATURE * f {
            return Err(Error::validation(
                "regression basis",
                format!("{f} features need at least {} paths, have {m}", PATHS_PER_FEATURE * f),
            ));
        }
        Ok(())
    }
}

/// Diagnostics of one regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    pub step: usize,
    pub condition: f64,
    /// Pooled coefficient of determination over all targets of the first
    /// stage (the continuation value).
    pub r2: f64,
    /// Columns actually used, constant included.
    pub features: usize,
}

/// Fitted coefficients of one backward step.
#[derive(Debug, Clone)]
pub struct StepFit {
    kept: Vec<usize>,
    means: Vec<f64>,
    scales: Vec<f64>,
    /// `cols × targets`, row-major.
    coef: Vec<f64>,
    targets: usize,
    /// `ZᵀZ / M` of the standardized design.
    gram: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

/// Standardized design shared by the stages of one backward step.
pub(crate) struct Design {
    kept: Vec<usize>,
    means: Vec<f64>,
    scales: Vec<f64>,
    /// `M × cols`, first column all ones.
    z: Vec<f64>,
    cols: usize,
    m: usize,
    gram: Vec<f64>,
    condition: f64,
}

impl Design {
    /// Build the design from raw features (`M × raw`, row-major).
    pub fn new(raw: &[f64], m: usize, raw_count: usize, step: usize, exec: Execution) -> Result<Self> {
        let mut kept = Vec::new();
        let mut means = Vec::new();
        let mut scales = Vec::new();
        for f in 0..raw_count {
            let mean = (0..m).map(|p| raw[p * raw_count + f]).sum::<f64>() / m as f64;
            let var = (0..m).map(|p| (raw[p * raw_count + f] - mean).powi(2)).sum::<f64>() / m as f64;
            let sd = var.sqrt();
            if sd > 1e-10 * mean.abs().max(1e-300) && sd > 1e-13 {
                kept.push(f);
                means.push(mean);
                scales.push(sd);
            }
        }
        let full = 1 + kept.len();
        let mut z = vec![0.0; m * full];
        for p in 0..m {
            z[p * full] = 1.0;
            for (c, &f) in kept.iter().enumerate() {
                z[p * full + 1 + c] = (raw[p * raw_count + f] - means[c]) / scales[c];
            }
        }
        let sums = exec.chunked_sum(m, full * full, |p, acc| {
            let row = &z[p * full..(p + 1) * full];
            for a in 0..full {
                for b in 0..full {
                    acc[a * full + b] += row[a] * row[b];
                }
            }
        });
        let full_gram: Vec<f64> = sums.iter().map(|v| v / m as f64).collect();
        // a column that the earlier ones already explain carries no
        // information; products of a random and a constant coefficient do this
        let mut select = vec![0usize];
        for c in 1..full {
            let mut trial = select.clone();
            trial.push(c);
            let sub = DMatrix::from_fn(trial.len(), trial.len(), |i, j| full_gram[trial[i] * full + trial[j]]);
            let last = trial.len() - 1;
            let resid = match sub.clone().cholesky() {
                Some(ch) => ch.l()[(last, last)].powi(2),
                None => 0.0,
            };
            if resid > COLLINEAR_TOL * full_gram[c * full + c] {
                select = trial;
            }
        }
        let cols = select.len();
        let kept: Vec<usize> = select[1..].iter().map(|&c| kept[c - 1]).collect();
        let means: Vec<f64> = select[1..].iter().map(|&c| means[c - 1]).collect();
        let scales: Vec<f64> = select[1..].iter().map(|&c| scales[c - 1]).collect();
        let z = if cols == full {
            z
        } else {
            let mut out = vec![0.0; m * cols];
            for p in 0..m {
                for (j, &c) in select.iter().enumerate() {
                    out[p * cols + j] = z[p * full + c];
                }
            }
            out
        };
        let gram: Vec<f64> = select.iter().flat_map(|&a| select.iter().map(move |&b| (a, b))).map(|(a, b)| full_gram[a * full + b]).collect();
        let g = DMatrix::from_row_slice(cols, cols, &gram);
        let eig = SymmetricEigen::new(g.clone());
        let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            return Err(Error::Regression {
                step,
                detail: format!("Gram condition number {condition:.3e} exceeds {MAX_CONDITION:e}; use fewer features"),
            });
        }
        g.cholesky().ok_or_else(|| Error::Regression {
            step,
            detail: "Gram matrix is not positive definite; use fewer features".into(),
        })?;
        Ok(Design { kept, means, scales, z, cols, m, gram, condition })
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.z[p * self.cols..(p + 1) * self.cols]
    }

    /// Fit targets (`M × t`, row-major), returning coefficients and `R²`.
    #[cfg(test)]
    pub fn solve(&self, targets: &[f64], t: usize, exec: Execution) -> (Vec<f64>, f64) {
        let cols = self.cols;
        let sums = exec.chunked_sum(self.m, cols * t + 2 * t, |p, acc| {
            let row = self.row(p);
            let y = &targets[p * t..(p + 1) * t];
            for (a, &za) in row.iter().enumerate() {
                let dst = &mut acc[a * t..(a + 1) * t];
                for (d, &v) in dst.iter_mut().zip(y) {
                    *d += za * v;
                }
            }
            let (s1, s2) = acc[cols * t..].split_at_mut(t);
            for j in 0..t {
                s1[j] += y[j];
                s2[j] += y[j] * y[j];
            }
        });
        let mf = self.m as f64;
        let rhs = DMatrix::from_row_slice(cols, t, &sums[..cols * t]).map(|v| v / mf);
        let g = DMatrix::from_row_slice(cols, cols, &self.gram);
        let coef = g.clone().cholesky().expect("checked at construction").solve(&rhs);
        // explained Σŷ² = M Σ_t c_tᵀ G c_t, and least squares gives Σŷy = Σŷ²
        let gc = &g * &coef;
        let explained: f64 = coef.iter().zip(gc.iter()).map(|(a, b)| a * b).sum::<f64>() * mf;
        let sum_y = &sums[cols * t..cols * t + t];
        let sum_y2 = &sums[cols * t + t..];
        let total_sq: f64 = sum_y2.iter().sum();
        let mean_sq: f64 = sum_y.iter().map(|s| s * s / mf).sum();
        let ss_tot = total_sq - mean_sq;
        let ss_res = (total_sq - explained).max(0.0);
        let r2 = if ss_tot > 1e-300 { 1.0 - ss_res / ss_tot } else { 1.0 };
        let mut flat = vec![0.0; cols * t];
        for a in 0..cols {
            for j in 0..t {
                flat[a * t + j] = coef[(a, j)];
            }
        }
        (flat, r2)
    }

    /// Fit `Π ≈ p̂ + Σ_m q^m ΔW^m` in one least-squares problem on the columns
    /// `z` and `z·ΔW^m/√Δt`. The residual is then orthogonal in-sample to
    /// the features and to their products with every increment. Returns
    /// coefficients laid out as `cols × (t + K·t)` (p̂ then each `q^m`) and
    /// the `R²` of the joint fit.
    #[allow(clippy::too_many_arguments)]
    pub fn solve_joint<'a>(
        &self,
        targets: &[f64],
        t: usize,
        kk: usize,
        dt: f64,
        dw: impl Fn(usize) -> &'a [f64] + Sync,
        step: usize,
        exec: Execution,
    ) -> Result<(Vec<f64>, f64)> {
        let cols = self.cols;
        let scale = 1.0 / dt.sqrt();
        // modes whose increments vanish identically carry no martingale part
        let energy = exec.chunked_sum(self.m, kk, |p, acc| {
            for (a, &d) in acc.iter_mut().zip(dw(p)) {
                *a += d * d;
            }
        });
        let active: Vec<usize> = (0..kk).filter(|&mode| energy[mode] > 0.0).collect();
        let width = cols * (1 + active.len());
        let sums = exec.chunked_sum(self.m, width * width + width * t + 2 * t, |p, acc| {
            let z = self.row(p);
            let d = dw(p);
            let mut row = Vec::with_capacity(width);
            row.extend_from_slice(z);
            for &mode in &active {
                let xi = d[mode] * scale;
                row.extend(z.iter().map(|v| v * xi));
            }
            let (g, rest) = acc.split_at_mut(width * width);
            for a in 0..width {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..width {
                    g[a * width + b] += ra * row[b];
                }
            }
            let y = &targets[p * t..(p + 1) * t];
            let (zy, stats) = rest.split_at_mut(width * t);
            for (a, &ra) in row.iter().enumerate() {
                let dst = &mut zy[a * t..(a + 1) * t];
                for (o, &v) in dst.iter_mut().zip(y) {
                    *o += ra * v;
                }
            }
            let (s1, s2) = stats.split_at_mut(t);
            for j in 0..t {
                s1[j] += y[j];
                s2[j] += y[j] * y[j];
            }
        });
        let mf = self.m as f64;
        let g = DMatrix::from_fn(width, width, |a, b| sums[a.min(b) * width + a.max(b)] / mf);
        let eig = SymmetricEigen::new(g.clone());
        let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            return Err(Error::Regression {
                step,
                detail: format!("joint Gram condition number {condition:.3e} exceeds {MAX_CONDITION:e}; use fewer features or more paths"),
            });
        }
        let chol = g.clone().cholesky().ok_or_else(|| Error::Regression {
            step,
            detail: "joint Gram matrix is not positive definite; use fewer features".into(),
        })?;
        let rhs = DMatrix::from_row_slice(width, t, &sums[width * width..width * width + width * t]).map(|v| v / mf);
        let coef = chol.solve(&rhs);
        let gc = &g * &coef;
        let explained: f64 = coef.iter().zip(gc.iter()).map(|(a, b)| a * b).sum::<f64>() * mf;
        let stats = &sums[width * width + width * t..];
        let total_sq: f64 = stats[t..].iter().sum();
        let mean_sq: f64 = stats[..t].iter().map(|s| s * s / mf).sum();
        let ss_tot = total_sq - mean_sq;
        let ss_res = (total_sq - explained).max(0.0);
        let r2 = if ss_tot > 1e-300 { 1.0 - ss_res / ss_tot } else { 1.0 };

        let tw = t * (1 + kk);
        let mut flat = vec![0.0; cols * tw];
        for a in 0..cols {
            for j in 0..t {
                flat[a * tw + j] = coef[(a, j)];
            }
            for (slot, &mode) in active.iter().enumerate() {
                let src = (1 + slot) * cols + a;
                for j in 0..t {
                    flat[a * tw + t + mode * t + j] = coef[(src, j)] * scale;
                }
            }
        }
        Ok((flat, r2))
    }

    /// Evaluate coefficients (`cols × t`) on path `p`.
    pub fn predict(&self, coef: &[f64], t: usize, p: usize, out: &mut [f64]) {
        predict_row(self.row(p), coef, t, out);
    }

    pub fn into_fit(self, coef: Vec<f64>, targets: usize, diagnostics: FitDiagnostics) -> StepFit {
        StepFit {
            kept: self.kept,
            means: self.means,
            scales: self.scales,
            coef,
            targets,
            gram: self.gram,
            diagnostics,
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }
}

fn predict_row(row: &[f64], coef: &[f64], t: usize, out: &mut [f64]) {
    out[..t].copy_from_slice(&coef[..t]);
    for (a, &za) in row.iter().enumerate().skip(1) {
        let c = &coef[a * t..(a + 1) * t];
        for (o, &v) in out.iter_mut().zip(c) {
            *o += za * v;
        }
    }
}

impl StepFit {
    pub fn cols(&self) -> usize {
        1 + self.kept.len()
    }

    pub fn targets(&self) -> usize {
        self.targets
    }

    /// Standardized design row for raw features.
    pub fn design_row(&self, raw: &[f64], row: &mut Vec<f64>) {
        row.clear();
        row.push(1.0);
        for (c, &f) in self.kept.iter().enumerate() {
            row.push((raw[f] - self.means[c]) / self.scales[c]);
        }
    }

    /// Evaluate targets `range` for a standardized design row.
    pub fn predict(&self, row: &[f64], start: usize, len: usize, out: &mut [f64]) {
        out[..len].fill(0.0);
        for (a, &za) in row.iter().enumerate() {
            let c = &self.coef[a * self.targets + start..a * self.targets + start + len];
            for (o, &v) in out.iter_mut().zip(c) {
                *o += za * v;
            }
        }
    }

    /// Coefficient vector of design column `c` restricted to targets `range`.
    pub fn column(&self, c: usize, start: usize, len: usize) -> &[f64] {
        &self.coef[c * self.targets + start..c * self.targets + start + len]
    }

    /// Sample mean of `B(ŷ, ŷ)` for a symmetric bilinear form `B` on target
    /// blocks `[start, start + len)`, computed in coefficient space. With
    /// `minus`, `ŷ` is the difference of the two fitted predictors, which
    /// must share their design.
    /// `map` is applied to each coefficient column first, so expensive
    /// transforms run once per column rather than once per pair.
    pub fn mean_form(
        &self,
        minus: Option<&StepFit>,
        start: usize,
        len: usize,
        map: impl Fn(Vec<f64>) -> Vec<f64>,
        form: impl Fn(&[f64], &[f64]) -> f64,
    ) -> Result<f64> {
        let cols = self.cols();
        let columns: Vec<Vec<f64>> = match minus {
            None => (0..cols).map(|c| self.column(c, start, len).to_vec()).collect(),
            Some(o) => {
                if o.kept != self.kept || o.means != self.means || o.scales != self.scales {
                    return Err(Error::Structural("fits compared on different designs".into()));
                }
                (0..cols)
                    .map(|c| self.column(c, start, len).iter().zip(o.column(c, start, len)).map(|(a, b)| a - b).collect())
                    .collect()
            }
        };
        let columns: Vec<Vec<f64>> = columns.into_iter().map(map).collect();
        let mut total = 0.0;
        for a in 0..cols {
            for b in a..cols {
                let g = self.gram[a * cols + b];
                if g == 0.0 {
                    continue;
                }
                let v = form(&columns[a], &columns[b]);
                total += if a == b { g * v } else { 2.0 * g * v };
            }
        }
        Ok(total)
    }
}
