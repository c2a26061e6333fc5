//! `smplab`: runs the laboratory's experiments from scenario files.
//!
//! Exit codes: 0 on completion or pass, 1 when a check fails or a run
//! breaks down numerically, 2 on usage or configuration errors.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smplab_core::scenario::{load_scenario, EtaSpec, Scenario};

use crate::run::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "smplab", version, about = "Maximum-principle laboratory for controlled semilinear SPDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the reference state and estimate the cost.
    Simulate(Common),
    /// Solve the first-order adjoint pair, and the second-order one with `--order 2`.
    Adjoint {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        order: u8,
    },
    /// Check the duality identity that defines the adjoint pair.
    Duality {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        order: u8,
    },
    /// Fit convergence rates of spike-variation statistics in the spike width.
    Rates {
        #[command(flatten)]
        common: Common,
        /// y_moment, z_moment, residual, hgamma or all.
        #[arg(long, default_value = "all")]
        kind: String,
    },
    /// Maximum-principle gaps at the reference control, or at the
    /// brute-force optimum over `--blocks` piecewise-constant blocks.
    Smp {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        blocks: Option<usize>,
    },
    /// Compare noise-free adjoints with the continuous backward equations.
    Oracle(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    /// Root of the run directories.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mollifier width, absolute or like `4h2`.
    #[arg(long)]
    eta: Option<String>,
    /// Spike widths as fractions of the horizon, comma separated.
    #[arg(long, value_delimiter = ',')]
    eps_ladder: Option<Vec<f64>>,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

/// A configuration problem detected by the CLI itself.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// A loaded scenario with its flag overrides applied and its manifest.
pub struct Prepared {
    pub s: Scenario,
    pub manifest: RunManifest,
}

fn prepare(c: &Common, experiment: String) -> anyhow::Result<Prepared> {
    let bytes = std::fs::read(&c.scenario).map_err(|e| ConfigError(format!("cannot read {}: {e}", c.scenario.display())))?;
    let mut s = load_scenario(&c.scenario)?;
    let mut overrides = s.run.overrides.clone();
    if let Some(seed) = c.seed {
        s.seed = seed;
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(paths) = c.paths {
        if paths < 2 {
            return Err(ConfigError("--paths must be at least 2".into()).into());
        }
        s.run.paths = paths;
        overrides.push(("paths".into(), paths.to_string()));
    }
    if let Some(eta) = &c.eta {
        s.run.eta = EtaSpec::parse(eta)?;
        overrides.push(("eta".into(), s.run.eta.to_string()));
    }
    if let Some(ladder) = &c.eps_ladder {
        if ladder.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return Err(ConfigError("--eps-ladder fractions must lie in (0, 1)".into()).into());
        }
        s.run.eps_ladder = ladder.clone();
        overrides.push(("eps_ladder".into(), ladder.iter().map(f64::to_string).collect::<Vec<_>>().join(",")));
    }
    if let Some(t) = c.threads {
        overrides.push(("threads".into(), t.to_string()));
    }
    let root = c.out.clone().or_else(|| s.run.out.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("runs"));
    if let Some(out) = &c.out {
        overrides.push(("out".into(), out.display().to_string()));
    }
    // thread count never changes outputs, so it stays out of the run hash
    let hashed: Vec<(String, String)> = overrides.iter().filter(|(k, _)| k != "threads" && k != "out").cloned().collect();
    let mut manifest = RunManifest::new(&c.scenario, &bytes, experiment, s.seed, &root, hashed, c.threads);
    manifest.overrides = overrides;
    manifest.write()?;
    Ok(Prepared { s, manifest })
}

fn set_threads(c: &Common) -> anyhow::Result<()> {
    if let Some(t) = c.threads {
        if t == 0 {
            return Err(ConfigError("--threads must be positive".into()).into());
        }
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<smplab_core::Error>() {
        Some(smplab_core::Error::Parse { .. } | smplab_core::Error::Validation { .. } | smplab_core::Error::Io(_)) => 2,
        Some(smplab_core::Error::Domain(_)) => 2,
        _ => 1,
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Simulate(c) => {
            set_threads(&c)?;
            commands::simulate(prepare(&c, "simulate".into())?)
        }
        Command::Adjoint { common, order } => {
            set_threads(&common)?;
            commands::adjoint(prepare(&common, format!("adjoint-o{order}"))?, order)
        }
        Command::Duality { common, order } => {
            set_threads(&common)?;
            commands::duality(prepare(&common, format!("duality-o{order}"))?, order)
        }
        Command::Rates { common, kind } => {
            set_threads(&common)?;
            let kinds = commands::rate_kinds(&kind)?;
            commands::rates(prepare(&common, format!("rates-{kind}"))?, &kinds)
        }
        Command::Smp { common, blocks } => {
            set_threads(&common)?;
            let name = blocks.map_or("smp".to_string(), |b| format!("smp-brute{b}"));
            commands::smp(prepare(&common, name)?, blocks)
        }
        Command::Oracle(c) => {
            set_threads(&c)?;
            commands::oracle(prepare(&c, "oracle".into())?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
