//! Pipeline configuration file and session loading.

use std::fs;
use std::path::{Path, PathBuf};

use psm_core::survey::{read_attempts, SessionLog};
use psm_core::utility::DemandMode;
use psm_core::{Dataset, Design};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// One collected session: the design it ran on and its attempt log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEntry {
    pub design: PathBuf,
    pub log: PathBuf,
    /// Defaults to the model id of the first log record.
    #[serde(default)]
    pub model_id: Option<String>,
    /// Provider column of the rationality table.
    #[serde(default)]
    pub provider: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sessions: Vec<SessionEntry>,
    pub out_dir: Option<PathBuf>,
    /// Random datasets per rationality test.
    pub n_draws: usize,
    /// Rounds sampled per model for each synthetic dataset.
    pub rho: usize,
    /// Synthetic datasets behind the similarity matrix.
    pub permutation_draws: usize,
    /// Efficiency level for partitions.
    pub e: f64,
    pub alphas: Vec<f64>,
    pub demand_mode: DemandMode,
    pub restarts: usize,
    pub seed: u64,
    pub jobs: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sessions: Vec::new(),
            out_dir: None,
            n_draws: 1000,
            rho: 20,
            permutation_draws: 500,
            e: 0.333,
            alphas: vec![0.65, 0.70, 0.75],
            demand_mode: DemandMode::Lagrangian,
            restarts: 8,
            seed: 0,
            jobs: None,
        }
    }
}

impl PipelineConfig {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in &mut cfg.sessions {
            rebase(&mut s.design);
            rebase(&mut s.log);
        }
        if let Some(o) = &mut cfg.out_dir {
            rebase(o);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for s in &self.sessions {
            for p in [&s.design, &s.log] {
                if !p.is_file() {
                    return Err(CliError::Config(format!("{} does not exist", p.display())));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.e) {
            return Err(CliError::Config(format!("e = {} outside [0, 1]", self.e)));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(CliError::Config(format!("alpha {a} outside (0, 1)")));
        }
        if self.n_draws == 0 || self.permutation_draws == 0 || self.rho == 0 {
            return Err(CliError::Config("draw counts and rho must be positive".into()));
        }
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn read_design(path: &Path) -> Result<Design, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Design::from_json(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// A session replayed from disk.
pub struct Loaded {
    pub entry: SessionEntry,
    pub design: Design,
    pub dataset: Dataset,
}

pub fn load_session(entry: &SessionEntry) -> Result<Loaded, CliError> {
    let design = read_design(&entry.design)?;
    let file = fs::File::open(&entry.log).map_err(|e| CliError::Config(format!("{}: {e}", entry.log.display())))?;
    let attempts = read_attempts(std::io::BufReader::new(file))
        .map_err(|e| CliError::Parse(format!("{}: {e}", entry.log.display())))?;
    let model_id = match &entry.model_id {
        Some(m) => m.clone(),
        None => attempts
            .first()
            .map(|a| a.model_id.clone())
            .ok_or_else(|| CliError::Parse(format!("{} is empty", entry.log.display())))?,
    };
    let log = SessionLog::replay(&model_id, &design, attempts)
        .map_err(|e| CliError::Parse(format!("{}: {e}", entry.log.display())))?;
    let dataset = log.to_dataset(&design).map_err(|e| CliError::Parse(format!("{}: {e}", entry.log.display())))?;
    Ok(Loaded { entry: entry.clone(), design, dataset })
}
