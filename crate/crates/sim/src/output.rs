use std::path::Path;

use gatework_core::sha256_hex;
use serde::{Deserialize, Serialize};

use crate::record::{to_jsonl, SimRecord};
use crate::{Regime, Scenario, SimError};

pub const MANIFEST_LABEL: &str =
    "internal consistency check of the fitted model; not a real-world measurement";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub regime: Regime,
    pub n_tasks: u64,
    pub seed: u64,
    pub config_sha256: String,
    pub templates_sha256: String,
    pub records_sha256: String,
    pub code_version: String,
    pub label: String,
}

impl RunManifest {
    pub fn new(scenario: &Scenario, records_jsonl: &str) -> Self {
        let c = &scenario.config;
        RunManifest {
            regime: c.regime,
            n_tasks: c.n_tasks,
            seed: c.seed,
            config_sha256: sha256_hex(c.canonical_json().as_bytes()),
            templates_sha256: sha256_hex(scenario.templates_text.as_bytes()),
            records_sha256: sha256_hex(records_jsonl.as_bytes()),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            label: MANIFEST_LABEL.to_string(),
        }
    }
}

/// Write `records.jsonl` and `manifest.json` into `dir`.
pub fn write_run(dir: &Path, scenario: &Scenario, records: &[SimRecord]) -> Result<RunManifest, SimError> {
    let io = |e: std::io::Error| SimError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let jsonl = to_jsonl(records);
    let manifest = RunManifest::new(scenario, &jsonl);
    std::fs::write(dir.join("records.jsonl"), &jsonl).map_err(io)?;
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text).map_err(io)?;
    Ok(manifest)
}
