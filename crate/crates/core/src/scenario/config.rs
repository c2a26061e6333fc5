//! TOML scenario files.
//!
//! ```toml
//! [grid]
//! a = 0.0
//! b = 1.0
//! n = 16
//!
//! [operator]
//! kind = "laplacian"          # or "divergence_form" with a_mean, a_amplitude, a_wavenumber, a0
//!
//! [coefficients]
//! preset = "bilinear"         # additive | bilinear | logistic-drift
//! cost = "quadratic-cost"     # quadratic-cost | zero | unit-running
//! beta = 0.0
//! c = 1.0
//! s = [0.4]
//!
//! [controls]
//! kind = "finite"
//! points = [-1.0, 1.0]
//! reference = [1.0]           # 1 entry, one per step, or one per equal block
//!
//! [noise]
//! shapes = "flat"             # or "sine"
//!
//! [time]
//! t = 1.0
//! steps = 64
//!
//! [run]
//! seed = 7
//! paths = 10000
//! ```
//!
//! Unknown keys are errors. `SMPLAB_SEED` overrides `run.seed` and
//! `SMPLAB_OUT` sets `run.out`.

use std::path::Path;

use serde::Deserialize;

use super::coefficients::{CoefficientSet, Cost, Dynamics};
use super::control::{ControlPoint, ControlProcess, ControlSet};
use super::noise::{ModeShapes, NoiseModel};
use super::Scenario;
use crate::error::{Error, Result};
use crate::numerics::{EllipticOperator, Field, Grid1D};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    grid: GridSection,
    #[serde(default)]
    operator: OperatorSection,
    coefficients: CoefficientSection,
    controls: ControlSection,
    #[serde(default)]
    noise: NoiseSection,
    time: TimeSection,
    #[serde(default)]
    run: RunSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    #[serde(default)]
    a: f64,
    #[serde(default = "one")]
    b: f64,
    n: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorSection {
    #[serde(default = "laplacian")]
    kind: String,
    #[serde(default = "one")]
    a_mean: f64,
    #[serde(default)]
    a_amplitude: f64,
    #[serde(default = "one")]
    a_wavenumber: f64,
    a0: Option<f64>,
}

impl Default for OperatorSection {
    fn default() -> Self {
        OperatorSection { kind: laplacian(), a_mean: 1.0, a_amplitude: 0.0, a_wavenumber: 1.0, a0: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

impl ScalarOrVec {
    fn into_vec(self) -> Vec<f64> {
        match self {
            ScalarOrVec::Scalar(v) => vec![v],
            ScalarOrVec::Vec(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientSection {
    preset: String,
    #[serde(default = "quadratic_cost")]
    cost: String,
    #[serde(default)]
    beta: f64,
    c: Option<ScalarOrVec>,
    #[serde(default = "one")]
    c1: f64,
    s: Vec<f64>,
    kappa: Option<ScalarOrVec>,
    #[serde(default)]
    rho: f64,
    #[serde(default)]
    x_ref: f64,
    #[serde(default)]
    r: f64,
    #[serde(default = "one")]
    w: f64,
    #[serde(default)]
    x_target: f64,
    b_x_scale: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControlSection {
    #[serde(default = "finite")]
    kind: String,
    points: Option<Vec<ScalarOrVec>>,
    lo: Option<ScalarOrVec>,
    hi: Option<ScalarOrVec>,
    #[serde(default = "nine")]
    lattice: usize,
    reference: Vec<ScalarOrVec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    k: Option<usize>,
    #[serde(default = "flat")]
    shapes: String,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { k: None, shapes: flat() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    t: f64,
    steps: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_paths")]
    paths: usize,
    #[serde(default = "sine")]
    x0: String,
    #[serde(default = "one")]
    x0_amplitude: f64,
    #[serde(default = "one_usize")]
    x0_mode: usize,
    spike_tau: Option<f64>,
    spike_eps: Option<f64>,
    spike_v: Option<ScalarOrVec>,
    eta: Option<EtaValue>,
    eps_ladder: Option<Vec<f64>>,
    #[serde(default = "four")]
    basis_modes: usize,
    #[serde(default = "yes")]
    basis_products: bool,
    out: Option<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        toml::from_str("").expect("run defaults")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum EtaValue {
    Number(f64),
    Text(String),
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn four() -> usize {
    4
}
fn nine() -> usize {
    9
}
fn yes() -> bool {
    true
}
fn default_paths() -> usize {
    10_000
}
fn laplacian() -> String {
    "laplacian".into()
}
fn quadratic_cost() -> String {
    "quadratic-cost".into()
}
fn finite() -> String {
    "finite".into()
}
fn flat() -> String {
    "flat".into()
}
fn sine() -> String {
    "sine".into()
}

/// Mollifier width: absolute, or a multiple of `h²` written like `"4h2"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaSpec {
    Absolute(f64),
    GridMultiple(f64),
}

impl EtaSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some(mult) = t.strip_suffix("h2").or_else(|| t.strip_suffix("h^2")) {
            let m = if mult.is_empty() { 1.0 } else { mult.trim_end_matches('*').parse::<f64>().map_err(bad_eta(t))? };
            return Self::checked(EtaSpec::GridMultiple(m));
        }
        Self::checked(EtaSpec::Absolute(t.parse::<f64>().map_err(bad_eta(t))?))
    }

    fn checked(self) -> Result<Self> {
        let v = match self {
            EtaSpec::Absolute(v) | EtaSpec::GridMultiple(v) => v,
        };
        if v > 0.0 && v.is_finite() {
            Ok(self)
        } else {
            Err(Error::Domain(format!("mollifier width must be positive, got {v}")))
        }
    }

    pub fn resolve(self, h: f64) -> f64 {
        match self {
            EtaSpec::Absolute(v) => v,
            EtaSpec::GridMultiple(m) => m * h * h,
        }
    }
}

impl std::fmt::Display for EtaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EtaSpec::Absolute(v) => write!(f, "{v}"),
            EtaSpec::GridMultiple(m) => write!(f, "{m}h2"),
        }
    }
}

fn bad_eta(t: &str) -> impl Fn(std::num::ParseFloatError) -> Error + '_ {
    move |_| Error::Domain(format!("cannot read mollifier width `{t}`; use a number or e.g. `4h2`"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum X0Shape {
    /// `A sin(mπ(λ − a)/|Λ|)`.
    Sine,
    /// `A` at every interior node.
    Constant,
    /// `A` times the parabola `4(λ − a)(b − λ)/|Λ|²`.
    Bump,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSettings {
    pub tau: f64,
    pub eps: f64,
    pub v: ControlPoint,
}

/// Experiment settings carried by the `[run]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub paths: usize,
    pub spike: Option<SpikeSettings>,
    pub eta: EtaSpec,
    /// Spike widths as fractions of `T`.
    pub eps_ladder: Vec<f64>,
    pub basis_modes: usize,
    pub basis_products: bool,
    pub out: Option<String>,
    /// `(key, value)` pairs applied from the environment.
    pub overrides: Vec<(String, String)>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            paths: default_paths(),
            spike: None,
            eta: EtaSpec::GridMultiple(4.0),
            eps_ladder: default_ladder(),
            basis_modes: 4,
            basis_products: true,
            out: None,
            overrides: Vec::new(),
        }
    }
}

/// `ε/T ∈ {2⁻³, …, 2⁻⁷}`.
pub fn default_ladder() -> Vec<f64> {
    (3..=7).map(|k| 0.5f64.powi(k)).collect()
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn points(list: Vec<ScalarOrVec>) -> Vec<ControlPoint> {
    list.into_iter().map(ScalarOrVec::into_vec).collect()
}

/// Parse and validate a scenario from TOML text. Environment overrides
/// are not applied here.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let cfg: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    build(cfg)
}

/// Read, parse and validate a scenario file, then apply `SMPLAB_SEED`
/// and `SMPLAB_OUT`.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let mut s = parse_scenario(&text)?;
    if let Ok(seed) = std::env::var("SMPLAB_SEED") {
        s.seed = seed
            .trim()
            .parse()
            .map_err(|_| Error::validation("environment", format!("SMPLAB_SEED=`{seed}` is not an unsigned integer")))?;
        s.run.overrides.push(("seed".into(), seed));
    }
    if let Ok(out) = std::env::var("SMPLAB_OUT") {
        s.run.out = Some(out.clone());
        s.run.overrides.push(("out".into(), out));
    }
    Ok(s)
}

fn build(cfg: ConfigFile) -> Result<Scenario> {
    let grid = Grid1D::new(cfg.grid.a, cfg.grid.b, cfg.grid.n)?;

    let op = match cfg.operator.kind.as_str() {
        "laplacian" => EllipticOperator::laplacian(grid),
        "divergence_form" => {
            let o = &cfg.operator;
            let a0 = o.a0.unwrap_or(0.5 * (o.a_mean - o.a_amplitude.abs()));
            let (a, len, k) = (grid.a(), grid.length(), o.a_wavenumber);
            EllipticOperator::divergence_form_fn(
                grid,
                |x| o.a_mean + o.a_amplitude * (k * std::f64::consts::PI * (x - a) / len).sin(),
                a0,
            )?
        }
        other => return Err(Error::validation("operator", format!("unknown operator kind `{other}`"))),
    };

    let c = cfg.controls;
    let controls = match c.kind.as_str() {
        "finite" => ControlSet::finite(points(
            c.points.ok_or_else(|| Error::validation("control set", "finite set needs `points`"))?,
        ))?,
        "box" => {
            let lo = c.lo.ok_or_else(|| Error::validation("control set", "box needs `lo`"))?.into_vec();
            let hi = c.hi.ok_or_else(|| Error::validation("control set", "box needs `hi`"))?.into_vec();
            ControlSet::boxed(lo, hi, c.lattice)?
        }
        other => return Err(Error::validation("control set", format!("unknown control set kind `{other}`"))),
    };
    let dim = controls.dim();

    let co = cfg.coefficients;
    let coupling = |v: Option<ScalarOrVec>, default: f64| v.map_or(vec![default; dim], ScalarOrVec::into_vec);
    let dynamics = match co.preset.as_str() {
        "additive" => Dynamics::Additive { beta: co.beta, c: coupling(co.c, 1.0), s: co.s, kappa: coupling(co.kappa, 0.0) },
        "bilinear" => Dynamics::Bilinear { beta: co.beta, c: coupling(co.c, 1.0), s: co.s, kappa: coupling(co.kappa, 1.0) },
        "logistic-drift" => Dynamics::LogisticDrift {
            c1: co.c1,
            c: coupling(co.c, 1.0),
            s: co.s,
            kappa: coupling(co.kappa, 0.0),
            rho: co.rho,
        },
        other => return Err(Error::validation("preset", format!("unknown coefficient preset `{other}`"))),
    };
    let cost = match co.cost.as_str() {
        "quadratic-cost" => Cost::Quadratic { x_ref: co.x_ref, r: co.r, w: co.w, x_target: co.x_target },
        "zero" => Cost::Zero,
        "unit-running" => Cost::UnitRunning,
        other => return Err(Error::validation("preset", format!("unknown cost preset `{other}`"))),
    };
    let mut coeffs = CoefficientSet::new(dynamics, cost, dim)?;
    if let Some(scale) = co.b_x_scale {
        coeffs = coeffs.with_b_x_scale(scale);
    }

    let k = coeffs.k();
    if let Some(nk) = cfg.noise.k {
        if nk != k {
            return Err(Error::validation("noise", format!("noise.k = {nk} but {k} amplitudes in `s`")));
        }
    }
    let shapes = match cfg.noise.shapes.as_str() {
        "flat" => ModeShapes::Flat,
        "sine" => ModeShapes::Sine,
        other => return Err(Error::validation("noise", format!("unknown mode shapes `{other}`"))),
    };
    let noise = NoiseModel::new(grid, k, shapes)?;

    let steps = cfg.time.steps;
    let reference = points(c.reference);
    let reference = match reference.len() {
        0 => return Err(Error::validation("control", "`reference` is empty")),
        1 => ControlProcess::constant(reference[0].clone(), steps),
        len if steps > 0 && steps.is_multiple_of(len) => ControlProcess::blocks(&reference, steps)?,
        len => {
            return Err(Error::validation(
                "control",
                format!("`reference` has {len} entries; use 1, a divisor of {steps}, or {steps}"),
            ))
        }
    };

    let r = cfg.run;
    let x0_shape = match r.x0.as_str() {
        "sine" => X0Shape::Sine,
        "constant" => X0Shape::Constant,
        "bump" => X0Shape::Bump,
        other => return Err(Error::validation("initial state", format!("unknown x0 shape `{other}`"))),
    };
    let x0 = initial_state(grid, x0_shape, r.x0_amplitude, r.x0_mode);

    let spike = match (r.spike_tau, r.spike_eps, r.spike_v) {
        (None, None, None) => None,
        (Some(tau), Some(eps), Some(v)) => Some(SpikeSettings { tau, eps, v: v.into_vec() }),
        _ => return Err(Error::validation("spike", "spike_tau, spike_eps and spike_v go together")),
    };
    let eta = match r.eta {
        None => EtaSpec::GridMultiple(4.0),
        Some(EtaValue::Number(v)) => EtaSpec::Absolute(v).checked()?,
        Some(EtaValue::Text(t)) => EtaSpec::parse(&t)?,
    };
    let run = RunSettings {
        paths: r.paths,
        spike,
        eta,
        eps_ladder: r.eps_ladder.unwrap_or_else(default_ladder),
        basis_modes: r.basis_modes,
        basis_products: r.basis_products,
        out: r.out,
        overrides: Vec::new(),
    };
    if run.paths == 0 {
        return Err(Error::validation("run", "need at least one path"));
    }

    Scenario::new(op, coeffs, controls, noise, cfg.time.t, steps, x0, r.seed, reference, run)
}

pub fn initial_state(grid: Grid1D, shape: X0Shape, amplitude: f64, mode: usize) -> Field {
    let (a, len) = (grid.a(), grid.length());
    match shape {
        X0Shape::Sine => Field::from_fn(grid, |x| amplitude * (mode as f64 * std::f64::consts::PI * (x - a) / len).sin()),
        X0Shape::Constant => Field::from_fn(grid, |_| amplitude),
        X0Shape::Bump => Field::from_fn(grid, |x| amplitude * 4.0 * (x - a) * (a + len - x) / (len * len)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
n = 8

[coefficients]
preset = "bilinear"
s = [0.3]

[controls]
points = [-1.0, 1.0]
reference = [1.0]

[time]
t = 1.0
steps = 16
"#;

    #[test]
    fn minimal_bilinear_config() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.k(), 1);
        assert_eq!(s.n(), 8);
        assert_eq!(s.controls.lattice().len(), 2);
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let text = MINIMAL.replace("steps = 16", "steps = 16\nstepz = 3");
        match parse_scenario(&text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 16, "{message}");
                assert!(message.contains("stepz"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn spike_past_horizon_names_the_invariant() {
        let text = format!("{MINIMAL}\n[run]\nspike_tau = 0.9\nspike_eps = 0.2\nspike_v = -1.0\n");
        let err = parse_scenario(&text).unwrap_err();
        assert!(matches!(&err, Error::Validation { invariant, .. } if invariant == "spike"), "{err}");
    }

    #[test]
    fn mismatched_b_x_is_rejected() {
        let text = MINIMAL.replace("s = [0.3]", "s = [0.3]\nb_x_scale = 1.5");
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("b_x"), "{err}");
    }

    #[test]
    fn block_reference_expands() {
        let text = MINIMAL.replace("reference = [1.0]", "reference = [1.0, -1.0, 1.0, -1.0]");
        let s = parse_scenario(&text).unwrap();
        assert_eq!(s.reference.deterministic_at(4).unwrap(), &[-1.0]);
        let bad = MINIMAL.replace("reference = [1.0]", "reference = [1.0, -1.0, 1.0]");
        assert!(parse_scenario(&bad).is_err());
    }

    #[test]
    fn eta_spec_parsing() {
        assert_eq!(EtaSpec::parse("4h2").unwrap(), EtaSpec::GridMultiple(4.0));
        assert_eq!(EtaSpec::parse("0.01").unwrap(), EtaSpec::Absolute(0.01));
        assert!(EtaSpec::parse("-1").is_err());
        assert!(EtaSpec::parse("fourh2").is_err());
        assert!((EtaSpec::GridMultiple(16.0).resolve(0.5) - 4.0).abs() < 1e-15);
    }
}
