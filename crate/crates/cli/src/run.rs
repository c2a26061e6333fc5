//! Run directories, manifests and versioned CSV output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use smplab_core::verification::Verdict;

/// Everything that determines the outputs of one run, plus when it ran.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub scenario: PathBuf,
    pub experiment: String,
    pub seed: u64,
    pub out: PathBuf,
    /// `(key, value)` in the order they were applied.
    pub overrides: Vec<(String, String)>,
    pub version: &'static str,
    pub timestamp: String,
    pub threads: Option<usize>,
}

impl RunManifest {
    /// The run directory is `<out>/<experiment>_<seed>_<hash>`, with the
    /// hash taken over the scenario bytes, the experiment and the overrides.
    pub fn new(
        scenario: &Path,
        scenario_bytes: &[u8],
        experiment: String,
        seed: u64,
        out_root: &Path,
        overrides: Vec<(String, String)>,
        threads: Option<usize>,
    ) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(scenario_bytes);
        hasher.update(experiment.as_bytes());
        hasher.update(seed.to_le_bytes());
        for (k, v) in &overrides {
            hasher.update(format!("\n{k}={v}").as_bytes());
        }
        let digest = hasher.finalize();
        let hash: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        RunManifest {
            scenario: scenario.to_path_buf(),
            out: out_root.join(format!("{experiment}_{seed}_{hash}")),
            experiment,
            seed,
            overrides,
            version: env!("CARGO_PKG_VERSION"),
            timestamp: humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string(),
            threads,
        }
    }

    /// Create the run directory and write `manifest.txt` into it.
    pub fn write(&self) -> Result<()> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let mut f = BufWriter::new(File::create(self.out.join("manifest.txt"))?);
        writeln!(f, "scenario={}", self.scenario.display())?;
        writeln!(f, "experiment={}", self.experiment)?;
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "out={}", self.out.display())?;
        for (k, v) in &self.overrides {
            writeln!(f, "override.{k}={v}")?;
        }
        writeln!(f, "version={}", self.version)?;
        writeln!(f, "timestamp={}", self.timestamp)?;
        if let Some(t) = self.threads {
            writeln!(f, "threads={t}")?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Write rows to `<dir>/<name>` after a `# smplab <schema> csv v1` line.
pub fn write_csv<R: Serialize>(dir: &RunManifest, name: &str, schema: &str, header: &[&str], rows: &[R]) -> Result<()> {
    let mut f = BufWriter::new(File::create(dir.path(name))?);
    writeln!(f, "# smplab {schema} csv v1")?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(f);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Print verdicts and keep a copy in the run directory.
pub fn emit_verdicts(dir: &RunManifest, verdicts: &[Verdict]) -> Result<()> {
    let mut f = BufWriter::new(File::create(dir.path("verdicts.txt"))?);
    for v in verdicts {
        println!("{v}");
        writeln!(f, "{v}")?;
    }
    f.flush()?;
    Ok(())
}

/// Write a field CSV through the core serializer.
pub fn write_with<F>(dir: &RunManifest, name: &str, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> smplab_core::Result<()>,
{
    let mut out = BufWriter::new(File::create(dir.path(name))?);
    f(&mut out)?;
    out.flush()?;
    Ok(())
}
