//! Run manifests: every output file is accompanied by a JSON record of
//! the fully resolved configuration, tool version, command line and
//! timestamps, sufficient to reproduce the run.

use std::path::{Path, PathBuf};

use anyhow::Context as _;
use chrono::{DateTime, Utc};
use serde_json::json;

use gie_core::config::{BudgetConfig, ConfigFile};
use gie_core::params::{ExperimentParams, PhysicalConstants};

pub struct ManifestBuilder {
    started: DateTime<Utc>,
    command: Vec<String>,
    params: ExperimentParams,
    consts: PhysicalConstants,
    budget: BudgetConfig,
    seed: Option<u64>,
    strict_paper_moments: bool,
    extra: serde_json::Map<String, serde_json::Value>,
}

impl ManifestBuilder {
    pub fn new(
        params: &ExperimentParams,
        consts: &PhysicalConstants,
        budget: &BudgetConfig,
        seed: Option<u64>,
        strict_paper_moments: bool,
    ) -> Self {
        Self {
            started: Utc::now(),
            command: std::env::args().collect(),
            params: *params,
            consts: *consts,
            budget: *budget,
            seed,
            strict_paper_moments,
            extra: serde_json::Map::new(),
        }
    }

    /// Attaches command-specific settings (integrator horizon, sweep spec
    /// echo, ...).
    pub fn with(mut self, key: &str, value: serde_json::Value) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }

    /// Writes `<stem>.manifest.json` next to the named outputs.
    pub fn write(self, dir: &Path, stem: &str, outputs: &[&str]) -> anyhow::Result<PathBuf> {
        let mut doc = json!({
            "tool": "gie",
            "tool_version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "started_utc": self.started.to_rfc3339(),
            "finished_utc": Utc::now().to_rfc3339(),
            "config": ConfigFile::echo(&self.params, &self.consts),
            "budget": { "t_meas_factor": self.budget.t_meas_factor, "target_snr": self.budget.target_snr },
            "seed": self.seed,
            "strict_paper_moments": self.strict_paper_moments,
            "outputs": outputs,
        });
        if let Some(obj) = doc.as_object_mut() {
            for (k, v) in self.extra {
                obj.insert(k, v);
            }
        }
        let path = dir.join(format!("{stem}.manifest.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&doc)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
