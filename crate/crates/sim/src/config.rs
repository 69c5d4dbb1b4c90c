use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gatework_core::orchestrator::{LoopConfig, TemplateLibrary};
use gatework_core::taxonomy::{BENCHMARK_DISTRIBUTION, BENCHMARK_TOTAL};
use gatework_core::workers::SyntheticWorkerModel;
use gatework_core::Area;
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Hybrid,
    AiOnly,
    HumanOnly,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Hybrid, Regime::AiOnly, Regime::HumanOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Hybrid => "hybrid",
            Regime::AiOnly => "ai_only",
            Regime::HumanOnly => "human_only",
        }
    }

    /// Worker-model roles this regime draws from.
    pub fn roles(self) -> &'static [&'static str] {
        match self {
            Regime::Hybrid => &[ROLE_AI, ROLE_EXPERT, ROLE_QA],
            Regime::AiOnly => &[ROLE_AI],
            Regime::HumanOnly => &[ROLE_FREELANCER],
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == norm)
            .ok_or_else(|| format!("unknown regime `{s}` (hybrid, ai_only, human_only)"))
    }
}

pub const ROLE_AI: &str = "ai";
pub const ROLE_EXPERT: &str = "expert";
pub const ROLE_QA: &str = "qa_expert";
pub const ROLE_FREELANCER: &str = "freelancer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub area: Area,
    pub category: String,
    pub weight: f64,
}

/// Parameters of the two-stage hybrid quality model and of expert review time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridParams {
    /// Chance that a Mediocre AI draft shows disagreement among its samples.
    pub mediocre_detection: f64,
    /// At the first expert touch: chance Bad becomes Mediocre.
    pub repair_bad: f64,
    /// At the first expert touch, after the step above: chance Mediocre becomes Good.
    pub repair_mediocre: f64,
    /// Gate review time as a fraction of the expert's task effort.
    pub gate_review_share: f64,
}

impl Default for HybridParams {
    fn default() -> Self {
        HybridParams {
            mediocre_detection: 1.0,
            repair_bad: 0.0,
            repair_mediocre: 0.0,
            gate_review_share: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub regime: Regime,
    pub n_tasks: u64,
    pub seed: u64,
    /// Template library path, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<String>,
    pub worker_models: BTreeMap<String, SyntheticWorkerModel>,
    /// Defaults to the benchmark's area/category distribution.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub category_mix: Vec<CategoryShare>,
    #[serde(default, rename = "loop")]
    pub loop_config: LoopConfig,
    #[serde(default)]
    pub hybrid: HybridParams,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text used for hashing: the config re-serialized as JSON.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn model(&self, role: &str) -> Result<&SyntheticWorkerModel, SimError> {
        self.worker_models
            .get(role)
            .ok_or_else(|| SimError::ConfigInvalid(format!("worker_models.{role} missing for regime {}", self.regime)))
    }

    /// Effective category mix, normalised to probabilities.
    pub fn mix(&self) -> Vec<CategoryShare> {
        if self.category_mix.is_empty() {
            return BENCHMARK_DISTRIBUTION
                .iter()
                .map(|c| CategoryShare {
                    area: c.area,
                    category: c.category.to_string(),
                    weight: c.count as f64 / BENCHMARK_TOTAL as f64,
                })
                .collect();
        }
        self.category_mix.clone()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::ConfigInvalid(m));
        if self.n_tasks < 1 {
            return bad("n_tasks must be >= 1".into());
        }
        for role in self.regime.roles() {
            self.model(role)?
                .validate()
                .map_err(|e| SimError::ConfigInvalid(format!("worker_models.{role}: {e}")))?;
        }
        if !self.category_mix.is_empty() {
            if self.category_mix.iter().any(|c| !(c.weight.is_finite() && c.weight >= 0.0)) {
                return bad("category_mix weights must be non-negative".into());
            }
            let sum: f64 = self.category_mix.iter().map(|c| c.weight).sum();
            if (sum - 1.0).abs() > 1e-6 {
                return bad(format!("category_mix sums to {sum}, expected 1"));
            }
        }
        let h = &self.hybrid;
        for (name, p) in [
            ("mediocre_detection", h.mediocre_detection),
            ("repair_bad", h.repair_bad),
            ("repair_mediocre", h.repair_mediocre),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("hybrid.{name} = {p} is not a probability"));
            }
        }
        if !(h.gate_review_share.is_finite() && h.gate_review_share >= 0.0) {
            return bad("hybrid.gate_review_share must be >= 0".into());
        }
        if !(self.loop_config.sc_threshold > 0.0 && self.loop_config.sc_threshold <= 1.0) {
            return bad("loop.sc_threshold must be in (0, 1]".into());
        }
        Ok(())
    }
}

/// A config together with the template library it refers to.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SimConfig,
    pub templates: TemplateLibrary,
    pub templates_text: String,
}

impl Scenario {
    pub fn new(config: SimConfig, templates_text: &str) -> Result<Self, SimError> {
        config.validate()?;
        let templates =
            TemplateLibrary::from_toml(templates_text).map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        for c in config.mix() {
            if c.weight > 0.0 && templates.resolve(&c.category).is_none() {
                return Err(SimError::ConfigInvalid(format!("no template for category `{}`", c.category)));
            }
        }
        Ok(Scenario {
            config,
            templates,
            templates_text: templates_text.to_string(),
        })
    }

    /// Read a config file and the template library it names (default:
    /// `templates.toml` next to the config).
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        let config = SimConfig::from_toml(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let tpath: PathBuf = dir.join(config.templates.as_deref().unwrap_or("templates.toml"));
        let ttext = std::fs::read_to_string(&tpath).map_err(|e| SimError::Io(format!("{}: {e}", tpath.display())))?;
        Scenario::new(config, &ttext)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = r#"
regime = "human_only"
n_tasks = 1
seed = 7

[worker_models.freelancer]
decline_prob = 0.0
quality_dist = { good = 1.0, mediocre = 0.0, bad = 0.0 }
connect_time = { median = 1.0, sigma = 0.0 }
exec_time = { median = 2.0, sigma = 0.0 }
cost_model = { fixed_usd = 10.0, per_hour_usd = 0.0 }
"#;

    #[test]
    fn parses_minimal() {
        let c = SimConfig::from_toml(MIN).unwrap();
        assert_eq!(c.regime, Regime::HumanOnly);
        let mix = c.mix();
        assert_eq!(mix.len(), BENCHMARK_DISTRIBUTION.len());
        assert!((mix.iter().map(|m| m.weight).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid() {
        assert!(SimConfig::from_toml(&MIN.replace("n_tasks = 1", "n_tasks = 0")).is_err());
        assert!(SimConfig::from_toml(&MIN.replace("human_only", "hybrid")).is_err());
        let skewed = format!(
            "{MIN}\n[[category_mix]]\narea = \"Sales\"\ncategory = \"Collect Data\"\nweight = 0.5\n"
        );
        assert!(SimConfig::from_toml(&skewed).is_err());
    }

    #[test]
    fn regime_names() {
        for r in Regime::ALL {
            assert_eq!(r.as_str().parse::<Regime>().unwrap(), r);
        }
        assert_eq!("ai-only".parse::<Regime>().unwrap(), Regime::AiOnly);
    }
}
