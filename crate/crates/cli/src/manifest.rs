use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use dasloc::experiment::Estimator;
use dasloc::SystemConfig;

/// Everything needed to reproduce one output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: SystemConfig,
    pub base_seed: u64,
    pub estimators: Vec<String>,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub outputs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// `results.csv` -> `results.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

impl Manifest {
    pub fn start(command: &str, cfg: &SystemConfig, estimators: &[Estimator]) -> Self {
        Manifest {
            tool: "dasloc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: cfg.clone(),
            base_seed: cfg.base_seed,
            estimators: estimators.iter().map(|e| e.name().to_string()).collect(),
            started_at: now(),
            finished_at: None,
            outputs: Vec::new(),
            extra: serde_json::Value::Null,
        }
    }

    /// Stamps the end time and writes the manifest beside `out`.
    pub fn finish(&mut self, out: &Path) -> anyhow::Result<()> {
        self.finished_at = Some(now());
        self.outputs = vec![out.to_path_buf()];
        let path = manifest_path(out);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("cannot write manifest {}", path.display()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))
    }
}
