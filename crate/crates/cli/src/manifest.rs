use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use sameproj_core::PipelineConfig;

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: PipelineConfig,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub tool_version: String,
    pub git_version: Option<String>,
    pub started: String,
    pub finished: String,
    pub exit_status: i32,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Files touched by a run, collected as commands execute.
#[derive(Debug, Default)]
pub struct RunLog {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub manifest_path: Option<PathBuf>,
    pub git_version: Option<String>,
}

impl RunLog {
    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Manifest goes inside an output directory, or next to an output file.
    pub fn manifest_beside(&mut self, out: &Path, is_dir: bool) {
        self.manifest_path = Some(if is_dir {
            out.join("run_manifest.json")
        } else {
            let mut name = out.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            out.with_file_name(name)
        });
    }

    fn digests(paths: &[PathBuf]) -> BTreeMap<String, String> {
        paths
            .iter()
            .filter(|p| p.is_file())
            .filter_map(|p| Some((p.display().to_string(), sha256_file(p).ok()?)))
            .collect()
    }

    pub fn finish(
        &self,
        command: String,
        config: &PipelineConfig,
        started: String,
        exit_status: i32,
    ) -> Result<()> {
        let Some(path) = &self.manifest_path else {
            return Ok(());
        };
        let manifest = RunManifest {
            command,
            config: config.clone(),
            inputs: Self::digests(&self.inputs),
            outputs: Self::digests(&self.outputs),
            tool_version: format!("sameproj {}", env!("CARGO_PKG_VERSION")),
            git_version: self.git_version.clone(),
            started,
            finished: now(),
            exit_status,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
