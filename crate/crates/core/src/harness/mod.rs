//! Configuration-driven experiment runner.
//!
//! A run reads an [`ExperimentConfig`], writes its artifacts into one
//! output directory and finishes by writing `manifest.json`, which lists
//! every artifact with its SHA-256 digest.

pub mod config;
pub mod expr;
pub mod presets;
mod scenarios;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use config::{
    AuditConfig, DriverConfig, DriverKind, ExperimentConfig, FieldsConfig, GridConfig, OutputConfig, Scenario,
    SolverConfig, StudyConfig, WongZakaiConfig, WongZakaiModel,
};
pub use scenarios::{refinement_study, RefinementTable};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const OUTPUT_ENV: &str = "ROUGHFLOW_OUT";

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// aborts, 4 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 4,
            Error::BlowUp { .. }
            | Error::Cfl { .. }
            | Error::Underresolved { .. }
            | Error::Factorization { .. }
            | Error::QuadratureNotConverged { .. } => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: Scenario,
    pub version: String,
    pub config: ExperimentConfig,
    pub wall_clock_seconds: f64,
    pub residuals: BTreeMap<String, serde_json::Value>,
    pub files: Vec<FileRecord>,
    /// Digest over the sorted `(path, sha256)` inventory; identical for
    /// reruns of the same configuration.
    pub inventory_sha256: String,
}

impl RunManifest {
    pub fn residual(&self, name: &str) -> Option<&serde_json::Value> {
        self.residuals.get(name)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write through a temporary sibling and rename into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Files written by one run.
pub(crate) struct Artifacts {
    dir: PathBuf,
    files: Vec<FileRecord>,
    csv: bool,
    binary: bool,
}

impl Artifacts {
    fn open(dir: &Path, output: &OutputConfig) -> Result<Self> {
        fs::create_dir_all(dir)?;
        // Artifacts of an earlier run in the same directory would otherwise
        // be left unlisted.
        let previous = dir.join(MANIFEST_NAME);
        if previous.exists() {
            let old: RunManifest = serde_json::from_slice(&fs::read(&previous)?)
                .map_err(|e| Error::Config(format!("unreadable manifest in {}: {e}", dir.display())))?;
            for f in old.files {
                let p = dir.join(&f.path);
                if p.exists() {
                    fs::remove_file(p)?;
                }
            }
            fs::remove_file(previous)?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            csv: output.csv,
            binary: output.binary,
        })
    }

    pub(crate) fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileRecord {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub(crate) fn csv(&mut self, name: &str, text: impl FnOnce() -> String) -> Result<()> {
        if self.csv {
            self.write(name, text().as_bytes())?;
        }
        Ok(())
    }

    pub(crate) fn binary(&mut self, name: &str, bytes: impl FnOnce() -> Result<Vec<u8>>) -> Result<()> {
        if self.binary {
            self.write(name, &bytes()?)?;
        }
        Ok(())
    }

    pub(crate) fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        self.write(name, text.as_bytes())
    }
}

pub(crate) type Residuals = BTreeMap<String, serde_json::Value>;

/// Output directory: explicit argument, then the `ROUGHFLOW_OUT`
/// environment variable, then `output.dir`, then `roughflow-out`.
pub fn output_dir(explicit: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUTPUT_ENV).filter(|p| !p.is_empty()) {
        return PathBuf::from(p);
    }
    cfg.output
        .dir
        .as_ref()
        .map_or_else(|| PathBuf::from("roughflow-out"), PathBuf::from)
}

/// Execute the configured scenario and write its artifacts and manifest
/// into `dir`.
pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let scenario = cfg.scenario()?;
    let started = Instant::now();
    let mut artifacts = Artifacts::open(dir, &cfg.output)?;
    let mut residuals = Residuals::new();
    info!("running {scenario} into {}", dir.display());
    scenarios::dispatch(scenario, cfg, &mut artifacts, &mut residuals)?;

    let mut files = artifacts.files;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let inventory: String = files.iter().map(|f| format!("{}  {}\n", f.sha256, f.path)).collect();
    let manifest = RunManifest {
        scenario,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        residuals,
        files,
        inventory_sha256: sha256_hex(inventory.as_bytes()),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    write_atomic(&dir.join(MANIFEST_NAME), text.as_bytes())?;
    Ok(manifest)
}

impl ExperimentConfig {
    /// Apply command-line overrides: scenario, seed and level count.
    pub fn with_overrides(mut self, scenario: Option<Scenario>, seed: Option<u64>, levels: Option<usize>) -> Result<Self> {
        if let Some(s) = scenario {
            self.scenario = Some(s);
        }
        if let Some(seed) = seed {
            self.seed = seed;
            self.driver.seed = None;
        }
        if let Some(l) = levels {
            if self.scenario == Some(Scenario::WongZakai) {
                self.wong_zakai.levels = l;
            } else {
                self.study.levels = Some(l);
            }
        }
        self.validate()?;
        Ok(self)
    }
}

/// Read a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    ExperimentConfig::from_toml_str(&text)
}
