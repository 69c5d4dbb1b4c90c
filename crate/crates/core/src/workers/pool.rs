use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{SyntheticWorkerModel, WorkerProfile};

/// Worker pool config: profiles plus optional synthetic models keyed by worker id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkerPool {
    #[serde(default, rename = "worker")]
    pub workers: Vec<WorkerProfile>,
    #[serde(default)]
    pub models: BTreeMap<String, SyntheticWorkerModel>,
}

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("worker pool parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("worker {0}: {1}")]
    Invalid(String, String),
    #[error("duplicate worker id {0}")]
    Duplicate(String),
}

impl WorkerPool {
    pub fn validate(&self) -> Result<(), PoolError> {
        let mut seen = std::collections::BTreeSet::new();
        for w in &self.workers {
            if !seen.insert(w.worker_id.as_str()) {
                return Err(PoolError::Duplicate(w.worker_id.clone()));
            }
            if !(w.cost_rate.is_finite() && w.cost_rate >= 0.0) {
                return Err(PoolError::Invalid(w.worker_id.clone(), "cost_rate must be >= 0".into()));
            }
            if !(w.speed_factor.is_finite() && w.speed_factor > 0.0) {
                return Err(PoolError::Invalid(w.worker_id.clone(), "speed_factor must be > 0".into()));
            }
        }
        for (id, m) in &self.models {
            m.validate().map_err(|e| PoolError::Invalid(id.clone(), e.to_string()))?;
        }
        Ok(())
    }

    pub fn get(&self, worker_id: &str) -> Option<&WorkerProfile> {
        self.workers.iter().find(|w| w.worker_id == worker_id)
    }
}

pub fn load_pool(text: &str) -> Result<WorkerPool, PoolError> {
    let pool: WorkerPool = toml::from_str(text)?;
    pool.validate()?;
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let text = r#"
[[worker]]
worker_id = "ai-1"
kind = "ai"
skills = ["research"]
cost_rate = 1.0
speed_factor = 4.0

[[worker]]
worker_id = "exp-1"
kind = "expert"
skills = ["research", "review"]
cost_rate = 15.0
speed_factor = 1.0
availability_at = 3600000
"#;
        let pool = load_pool(text).unwrap();
        assert_eq!(pool.workers.len(), 2);
        assert_eq!(pool.get("exp-1").unwrap().availability_at, 3_600_000);
        let bad = text.replace("speed_factor = 4.0", "speed_factor = 0.0");
        assert!(matches!(load_pool(&bad), Err(PoolError::Invalid(..))));
    }
}
