//! Report types and the single-line verdict record.

use std::fmt;

use crate::forward::Estimate;

/// Outcome of one duality check.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    pub label: String,
    /// Cost-sensitivity side.
    pub lhs: Estimate,
    /// Pairing side, with a zero-mean martingale control variate added
    /// path by path.
    pub rhs: Estimate,
    /// Pairing side without the control variate.
    pub rhs_plain: Estimate,
    /// Standard error of the per-path difference `lhs − rhs`.
    pub diff_std_err: f64,
    pub paths: usize,
    /// Both sides were evaluated on one noise ensemble.
    pub crn: bool,
}

impl DualityReport {
    /// `|lhs − rhs| / |rhs|`; zero when both sides vanish.
    pub fn relative_gap(&self) -> f64 {
        let d = (self.lhs.mean - self.rhs.mean).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.rhs.mean.abs().max(f64::MIN_POSITIVE)
        }
    }

    /// Relative gap widened by two standard errors of the difference.
    pub fn statistic(&self) -> f64 {
        let scale = self.rhs.mean.abs();
        if scale == 0.0 {
            return if self.lhs.mean == 0.0 && self.diff_std_err == 0.0 { 0.0 } else { f64::INFINITY };
        }
        self.relative_gap() + 2.0 * self.diff_std_err / scale
    }

    /// Pass requires common random numbers and the widened gap within `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.crn && self.statistic() <= tol
    }
}

/// Fitted log-log slope of a statistic against `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub kind: String,
    pub ladder: Vec<f64>,
    pub values: Vec<Estimate>,
    /// `None` when the statistic vanishes on some rung.
    pub slope: Option<SlopeFit>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence interval for the slope.
    pub ci: (f64, f64),
}

impl RateReport {
    /// Every rung produced an exactly zero statistic.
    pub fn identically_zero(&self) -> bool {
        self.values.iter().all(|v| v.mean == 0.0)
    }

    /// Slope at least `min` with a confidence interval excluding zero.
    pub fn passes(&self, min: f64) -> bool {
        match self.slope {
            Some(f) => f.slope >= min && (f.ci.0 > 0.0 || f.ci.1 < 0.0),
            None => false,
        }
    }
}

/// One `(t, v)` lattice cell of the maximum-principle check.
#[derive(Debug, Clone, PartialEq)]
pub struct GapCell {
    pub step: usize,
    pub t: f64,
    pub v: Vec<f64>,
    pub mean: Estimate,
    /// 5th percentile of the per-path gap.
    pub p05: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SMPReport {
    pub cells: Vec<GapCell>,
}

impl SMPReport {
    /// Cell with the smallest mean gap.
    pub fn minimum(&self) -> Option<&GapCell> {
        self.cells.iter().min_by(|a, b| a.mean.mean.total_cmp(&b.mean.mean))
    }

    /// `max |mean gap|` over the lattice.
    pub fn scale(&self) -> f64 {
        self.cells.iter().map(|c| c.mean.mean.abs()).fold(0.0, f64::max)
    }

    /// `min mean gap / scale`, or zero for an identically zero lattice.
    pub fn normalized_minimum(&self) -> f64 {
        let scale = self.scale();
        match self.minimum() {
            Some(c) if scale > 0.0 => c.mean.mean / scale,
            _ => 0.0,
        }
    }
}

/// `VERDICT id=... status=pass|fail statistic=... tolerance=...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub id: String,
    pub pass: bool,
    pub statistic: f64,
    pub tolerance: f64,
    pub note: Option<String>,
}

impl Verdict {
    pub fn new(id: impl Into<String>, pass: bool, statistic: f64, tolerance: f64) -> Self {
        Verdict { id: id.into(), pass, statistic, tolerance, note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "VERDICT id={} status={} statistic={:.6e} tolerance={:.6e}",
            self.id,
            if self.pass { "pass" } else { "fail" },
            self.statistic,
            self.tolerance
        )?;
        if let Some(n) = &self.note {
            write!(f, " note=\"{n}\"")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(mean: f64, std_err: f64) -> Estimate {
        Estimate { mean, std_err }
    }

    #[test]
    fn zero_sides_give_a_zero_statistic() {
        let r = DualityReport {
            label: "zero".into(),
            lhs: est(0.0, 0.0),
            rhs: est(0.0, 0.0),
            rhs_plain: est(0.0, 0.0),
            diff_std_err: 0.0,
            paths: 10,
            crn: true,
        };
        assert_eq!(r.statistic(), 0.0);
        assert!(r.passes(0.05));
    }

    #[test]
    fn noise_widens_the_gap_and_crn_is_required() {
        let mut r = DualityReport {
            label: "x".into(),
            lhs: est(1.02, 0.1),
            rhs: est(1.0, 0.1),
            rhs_plain: est(1.0, 0.1),
            diff_std_err: 0.02,
            paths: 10,
            crn: true,
        };
        assert!((r.statistic() - 0.06).abs() < 1e-12);
        assert!(!r.passes(0.05));
        assert!(r.passes(0.07));
        r.crn = false;
        assert!(!r.passes(0.07));
    }

    #[test]
    fn verdict_line_format() {
        let v = Verdict::new("duality1", true, 0.01, 0.05);
        assert_eq!(v.to_string(), "VERDICT id=duality1 status=pass statistic=1.000000e-2 tolerance=5.000000e-2");
    }
}
