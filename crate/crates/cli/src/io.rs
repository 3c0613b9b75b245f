use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use diffgt::graph::{DataSplit, InteractionGraph, SideFeatures};
use diffgt::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;
pub const BUNDLE_VERSION: u32 = 1;
pub const BUNDLE_FILE: &str = "bundle.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const DUMP_FILE: &str = "divergence_dump.json";

/// Versioned run configuration; `data` is resolved against the config
/// file's directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub data: PathBuf,
    #[serde(default)]
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read(path)?;
        let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(diffgt::Error::from)?
        } else {
            toml::from_str(&text).map_err(|source| CliError::Toml {
                path: path.to_path_buf(),
                source,
            })?
        };
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Usage(format!(
                "{}: config version {} is not supported (expected {CONFIG_VERSION})",
                path.display(),
                cfg.version
            )));
        }
        if cfg.data.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.data = base.join(&cfg.data);
        }
        Ok(cfg)
    }
}

/// Ingested dataset: graph, side information and the fixed split.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bundle {
    pub version: u32,
    pub graph: InteractionGraph,
    pub side: SideFeatures,
    pub split: DataSplit,
}

impl Bundle {
    /// `path` is a bundle file or a directory holding one.
    pub fn load(path: &Path) -> CliResult<Self> {
        let file = if path.is_dir() { path.join(BUNDLE_FILE) } else { path.to_path_buf() };
        let bundle: Bundle = serde_json::from_str(&read(&file)?).map_err(diffgt::Error::from)?;
        if bundle.version != BUNDLE_VERSION {
            return Err(CliError::Usage(format!(
                "{}: bundle version {} is not supported",
                file.display(),
                bundle.version
            )));
        }
        Ok(bundle)
    }

    pub fn hash(&self) -> CliResult<String> {
        Ok(diffgt::training::dataset_hash(&self.graph, &self.side, &self.split)?)
    }
}

/// One record per command that wrote into the directory.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub runs: BTreeMap<String, RunRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub dataset_id: String,
    pub source_revision: String,
    pub output_dir: PathBuf,
    pub command_line: Vec<String>,
    pub variant: Option<String>,
    pub config: Option<TrainConfig>,
    pub artifacts: Vec<String>,
}

impl RunRecord {
    pub fn new(dataset_id: String, out: &Path, artifacts: Vec<String>) -> Self {
        Self {
            config_hash: None,
            seed: None,
            dataset_id,
            source_revision: concat!("diffgt ", env!("CARGO_PKG_VERSION")).to_string(),
            output_dir: out.to_path_buf(),
            command_line: std::env::args().collect(),
            variant: None,
            config: None,
            artifacts,
        }
    }
}

/// Adds or replaces the record for `command` in `out/manifest.json`.
pub fn record_run(out: &Path, command: &str, record: RunRecord) -> CliResult<()> {
    let path = out.join(MANIFEST_FILE);
    let mut manifest = if path.exists() {
        serde_json::from_str(&read(&path)?).map_err(diffgt::Error::from)?
    } else {
        Manifest::default()
    };
    manifest.runs.insert(command.to_string(), record);
    write(&path, &serde_json::to_string_pretty(&manifest).map_err(diffgt::Error::from)?)
}

pub fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Core(diffgt::Error::io(path, e)))
}

pub fn write(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Core(diffgt::Error::io(parent, e)))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Core(diffgt::Error::io(path, e)))
}

pub fn create_layout(out: &Path) -> CliResult<()> {
    for sub in ["logs", "reports", "figures"] {
        let dir = out.join(sub);
        fs::create_dir_all(&dir).map_err(|e| CliError::Core(diffgt::Error::io(&dir, e)))?;
    }
    Ok(())
}
