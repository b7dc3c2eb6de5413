//! Run manifest and the output directory it describes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use tbsim::model::ExperimentConfig;

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: &'static str,
    pub config_path: Option<String>,
    /// Digest of the config file as read from disk.
    pub config_sha256: Option<String>,
    /// Digest of the effective configuration after overrides.
    pub effective_config_sha256: Option<String>,
    pub overrides: Vec<String>,
    pub kind: Option<String>,
    pub seed: Option<u64>,
    pub engine: Option<String>,
    pub trials: Option<u64>,
    pub started: String,
    pub finished: String,
    pub artifacts: Vec<Artifact>,
    pub assumptions: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Collects the files of one run and writes `manifest.json` at the end.
pub struct RunDir {
    dir: PathBuf,
    manifest: RunManifest,
}

impl RunDir {
    pub fn create(dir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(RunDir {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION"),
                config_path: None,
                config_sha256: None,
                effective_config_sha256: None,
                overrides: Vec::new(),
                kind: None,
                seed: None,
                engine: None,
                trials: None,
                started: now(),
                finished: String::new(),
                artifacts: Vec::new(),
                assumptions: Vec::new(),
            },
        })
    }

    pub fn record_config(&mut self, path: &Path, overrides: &[String], cfg: &ExperimentConfig) -> Result<()> {
        let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let m = &mut self.manifest;
        m.config_path = Some(path.display().to_string());
        m.config_sha256 = Some(sha256_hex(&raw));
        m.effective_config_sha256 = Some(sha256_hex(cfg.to_toml().as_bytes()));
        m.overrides = overrides.to_vec();
        m.kind = Some(cfg.kind.name().to_string());
        m.seed = Some(cfg.seed);
        m.engine = Some(match cfg.engine {
            tbsim::model::EngineKind::Fock { truncation } => format!("fock(N={truncation})"),
            tbsim::model::EngineKind::Gaussian => "gaussian".to_string(),
        });
        m.trials = Some(cfg.trials);
        for a in &cfg.assumptions {
            if !m.assumptions.contains(a) {
                m.assumptions.push(a.clone());
            }
        }
        Ok(())
    }

    pub fn assume(&mut self, note: impl Into<String>) {
        self.manifest.assumptions.push(note.into());
    }

    /// Writes `name` into the run directory and lists it in the manifest.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.artifacts.push(Artifact { path: name.to_string(), sha256: sha256_hex(contents) });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.manifest.finished = now();
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_written_file_is_listed() {
        let tmp = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(tmp.path(), "test").unwrap();
        run.write("a.txt", b"alpha").unwrap();
        run.write_json("b.json", &serde_json::json!({"x": 1})).unwrap();
        let manifest = run.finish().unwrap();
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
        let listed: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|a| a["path"].as_str().unwrap()).collect();
        assert_eq!(listed, ["a.txt", "b.json"]);
        assert_eq!(m["artifacts"][0]["sha256"], sha256_hex(b"alpha"));
    }
}
