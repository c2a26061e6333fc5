//! Convergence rates of spike-variation statistics in `ε`.

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::report::{RateReport, SlopeFit};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forward::{variation_stats, Estimate, PathEnsemble, Spike, StateEnsemble, VariationStats};
use crate::scenario::Scenario;

/// Smallest ladder that supports a slope with a confidence interval.
pub const MIN_LADDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    /// `sup_t E‖y^ε_t‖²`.
    YMoment,
    /// `sup_t E‖z^ε_t‖`.
    ZMoment,
    /// `sup_t E‖x^ε_t − x̄_t − y^ε_t − z^ε_t‖²`.
    Residual,
    /// `E‖y^ε_T‖²_{H^{1/4}}`.
    HGamma,
}

impl RateKind {
    pub const ALL: [RateKind; 4] = [RateKind::YMoment, RateKind::ZMoment, RateKind::Residual, RateKind::HGamma];

    pub fn name(self) -> &'static str {
        match self {
            RateKind::YMoment => "y_moment",
            RateKind::ZMoment => "z_moment",
            RateKind::Residual => "residual",
            RateKind::HGamma => "hgamma",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        RateKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Domain(format!("unknown rate statistic '{name}'")))
    }

    fn pick(self, st: &VariationStats) -> Estimate {
        match self {
            RateKind::YMoment => st.y_moment,
            RateKind::ZMoment => st.z_moment,
            RateKind::Residual => st.residual,
            RateKind::HGamma => st.hgamma,
        }
    }
}

/// OLS fit of `ln y = a + b ln x` with a 95% t-interval for `b`. `None`
/// when fewer than three points or any value is not positive.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    if x.len() != y.len() || x.len() < 3 || x.iter().chain(y).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 2.0).ok()?.inverse_cdf(0.975);
    Some(SlopeFit { slope, intercept, ci: (slope - t * se, slope + t * se) })
}

/// Absolute spike widths for a ladder of fractions of `T`, validated.
pub fn ladder_widths(s: &Scenario, fractions: &[f64], tau: f64) -> Result<Vec<f64>> {
    if fractions.len() < MIN_LADDER {
        return Err(Error::Domain(format!("rate ladder needs at least {MIN_LADDER} widths, got {}", fractions.len())));
    }
    if fractions.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Domain("rate ladder must be strictly decreasing".into()));
    }
    let dt = s.dt();
    let mut out = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let eps = f * s.t_final;
        let steps = eps / dt;
        if !(f > 0.0) || (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Domain(format!("spike width {eps} is not a positive multiple of Δt = {dt}")));
        }
        if !(tau + eps < s.t_final) {
            return Err(Error::Domain(format!("spike [τ, τ+ε] = [{tau}, {}] leaves no room before T", tau + eps)));
        }
        out.push(eps);
    }
    Ok(out)
}

/// All four rate statistics over one ladder, sharing the spike passes.
#[allow(clippy::too_many_arguments)]
pub fn rate_suite(
    s: &Scenario,
    xbar: &StateEnsemble,
    e: &PathEnsemble,
    v: &[f64],
    tau: f64,
    fractions: &[f64],
    exec: Execution,
) -> Result<Vec<RateReport>> {
    let widths = ladder_widths(s, fractions, tau)?;
    let mut stats = Vec::with_capacity(widths.len());
    for &eps in &widths {
        let spike = Spike::new(s, v.to_vec(), tau, eps)?;
        stats.push(variation_stats(s, xbar, e, &spike, exec)?);
    }
    Ok(RateKind::ALL
        .into_iter()
        .map(|kind| {
            let values: Vec<Estimate> = stats.iter().map(|st| kind.pick(st)).collect();
            let means: Vec<f64> = values.iter().map(|v| v.mean).collect();
            RateReport { kind: kind.name().into(), ladder: widths.clone(), slope: fit_slope(&widths, &means), values }
        })
        .collect())
}

/// One rate statistic over the ladder.
#[allow(clippy::too_many_arguments)]
pub fn rate_experiment(
    kind: RateKind,
    s: &Scenario,
    xbar: &StateEnsemble,
    e: &PathEnsemble,
    v: &[f64],
    tau: f64,
    fractions: &[f64],
    exec: Execution,
) -> Result<RateReport> {
    let all = rate_suite(s, xbar, e, v, tau, fractions, exec)?;
    Ok(all.into_iter().find(|r| r.kind == kind.name()).expect("suite covers every kind"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_an_exact_power_law() {
        let x = [0.5, 0.25, 0.125, 0.0625];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        let f = fit_slope(&x, &y).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.ci.1 - f.ci.0).abs() < 1e-9);
    }

    #[test]
    fn zero_statistics_have_no_slope() {
        assert!(fit_slope(&[0.5, 0.25, 0.125, 0.0625], &[0.0; 4]).is_none());
    }

    #[test]
    fn interval_covers_a_noisy_fit() {
        let x = [0.5, 0.25, 0.125, 0.0625, 0.03125];
        let noise = [1.05, 0.97, 1.02, 0.99, 1.01];
        let y: Vec<f64> = x.iter().zip(noise).map(|(v, n): (&f64, f64)| v * n).collect();
        let f = fit_slope(&x, &y).unwrap();
        assert!(f.ci.0 < f.slope && f.slope < f.ci.1);
        assert!(f.ci.0 < 1.0 && 1.0 < f.ci.1);
    }

    #[test]
    fn kinds_round_trip_through_names() {
        for k in RateKind::ALL {
            assert_eq!(RateKind::parse(k.name()).unwrap(), k);
        }
        assert!(RateKind::parse("nope").is_err());
    }
}
