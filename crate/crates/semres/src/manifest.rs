use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::cli::Cli;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of a finished run, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Every resolved flag, defaults included.
    pub config: Cli,
    pub seed: Option<u64>,
    pub output_paths: Vec<PathBuf>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(cli: &Cli, output_paths: Vec<PathBuf>) -> Self {
        let mut config = cli.clone();
        config.out = Some(cli.out_dir());
        RunManifest {
            command: cli.command.name().to_string(),
            config,
            seed: cli.seed,
            output_paths,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}
