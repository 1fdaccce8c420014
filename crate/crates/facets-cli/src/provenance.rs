//! Run directories: archived config plus a manifest with version and seeds.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::config::ExperimentConfig;

pub const TOOL_VERSION: &str = concat!("facets ", env!("CARGO_PKG_VERSION"));

#[derive(Serialize)]
struct Manifest<'a> {
    tool_version: &'a str,
    command: &'a str,
    config_file: Option<&'a str>,
    config_sha256: Option<&'a str>,
    seed: Option<u64>,
    /// Random stream of each chain, all drawn from `seed`.
    streams: &'a [u64],
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    inputs: serde_json::Value,
}

pub struct RunDir {
    pub root: PathBuf,
    /// SHA-256 of the archived `config.json`, if there is one.
    pub config_hash: Option<String>,
}

impl RunDir {
    /// Creates `root`, archives `config` (without its output path, which is
    /// `root` itself) and writes `manifest.json`.
    pub fn create(
        root: &Path,
        command: &str,
        config: Option<&ExperimentConfig>,
        streams: &[u64],
        inputs: serde_json::Value,
    ) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let archived = config.map(|c| ExperimentConfig { out: None, ..c.clone() });
        let hash = archived.as_ref().map(|c| c.hash());
        if let Some(c) = &archived {
            fs::write(root.join("config.json"), c.to_archive())?;
        }
        let manifest = Manifest {
            tool_version: TOOL_VERSION,
            command,
            config_file: archived.as_ref().map(|_| "config.json"),
            config_sha256: hash.as_deref(),
            seed: archived.as_ref().map(|c| c.seed),
            streams,
            inputs,
        };
        write_json(&root.join("manifest.json"), &manifest)?;
        Ok(RunDir { root: root.to_path_buf(), config_hash: hash })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}
