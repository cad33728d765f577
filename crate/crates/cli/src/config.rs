//! The TOML file layout shared by all subcommands, plus the resolved-config
//! echo every subcommand performs before doing work.
//!
//! One file can carry any subset of the tables; each subcommand reads the
//! tables it needs and ignores the rest, so a single project file can drive
//! a whole simulate/train/eval pipeline. `--seed` overrides the seed of the
//! table the subcommand actually uses, and the echoed config always shows
//! the final value: replaying an echoed config reproduces the run
//! bit-exactly.

use std::path::{Path, PathBuf};

use bargebench::aec::{DEFAULT_EPS, DEFAULT_STEP, DEFAULT_TAPS};
use bargebench::model::{ModelConfig, TrainConfig};
use bargebench::room::DatasetConfig;
use bargebench::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aec: Option<AecSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportSection>,
}

/// `[train]`: optimizer settings plus the manifest to train on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub manifest: PathBuf,
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_val_fraction")]
    pub val_fraction: f64,
    #[serde(default)]
    pub val_every: usize,
}

fn d_steps() -> usize {
    TrainConfig::default().steps
}
fn d_batch() -> usize {
    TrainConfig::default().batch_size
}
fn d_lr() -> f64 {
    TrainConfig::default().lr
}
fn d_val_fraction() -> f64 {
    TrainConfig::default().val_fraction
}

impl TrainSection {
    pub fn optimizer(&self) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            batch_size: self.batch_size,
            lr: self.lr,
            seed: self.seed,
            val_fraction: self.val_fraction,
            val_every: self.val_every,
        }
    }
}

/// `[aec]`: NLMS inputs and filter settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AecSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mic: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    pub taps: usize,
    pub step: f64,
    pub eps: f64,
}

impl Default for AecSection {
    fn default() -> Self {
        AecSection {
            mic: None,
            reference: None,
            taps: DEFAULT_TAPS,
            step: DEFAULT_STEP,
            eps: DEFAULT_EPS,
        }
    }
}

/// `[eval]`: which checkpoint to score against which manifest.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

/// `[report]`: eval report JSON files to merge.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub inputs: Vec<PathBuf>,
}

impl FileConfig {
    /// Empty config for subcommands that run without `--config`.
    pub fn empty() -> Self {
        FileConfig::default()
    }

    /// Loads and rebases every relative path in the file onto the config
    /// file's directory, so configs work from any working directory and the
    /// echoed config carries fully materialized paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: FileConfig = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(d) = &mut cfg.dataset {
            rebase_opt(base, &mut d.music_pool);
            rebase_opt(base, &mut d.speech_pool);
        }
        if let Some(t) = &mut cfg.train {
            rebase(base, &mut t.manifest);
        }
        if let Some(a) = &mut cfg.aec {
            rebase_opt(base, &mut a.mic);
            rebase_opt(base, &mut a.reference);
        }
        if let Some(e) = &mut cfg.eval {
            rebase_opt(base, &mut e.checkpoint);
            rebase_opt(base, &mut e.manifest);
        }
        if let Some(r) = &mut cfg.report {
            for p in &mut r.inputs {
                rebase(base, p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("resolved config serializes")
    }

    /// Requires the named table to be present (`which` is the table name).
    pub fn require<'a, T>(section: &'a Option<T>, which: &str) -> Result<&'a T> {
        section
            .as_ref()
            .ok_or_else(|| Error::Config(format!("config file has no [{which}] table")))
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn rebase_opt(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(p) = p {
        rebase(base, p);
    }
}

/// Prints the resolved config to stderr, writes it to
/// `<out>/resolved.toml`, and returns that path. Machine output on stdout
/// stays key=value; humans and replay scripts get the TOML.
pub fn echo_resolved(cfg: &FileConfig, out_dir: &Path) -> Result<PathBuf> {
    let text = cfg.to_toml_string();
    eprint!("# resolved config\n{text}");
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("resolved.toml");
    std::fs::write(&path, &text)?;
    Ok(path)
}
