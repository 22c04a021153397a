use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::IoError;
use crate::evaluation::{EvalConfig, EvalOptions, Technique};
use crate::features::{FeatureMask, SubgroupPlan};
use crate::learners::LearnerParams;
use crate::pipelines::{Approach, MethodSet};

/// Environment variable holding the default worker-thread count.
pub const WORKERS_ENV: &str = "CROWDAGG_WORKERS";

/// Run configuration, read from TOML. Every field has a default and
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; falls back to the environment, then to all cores.
    /// Never affects results, so it is left out of the config hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub approach: Approach,
    /// Technique used by `evaluate` and `ablate` for method prediction.
    pub amp_technique: String,
    /// Technique used by `evaluate` and `ablate` for answer prediction.
    pub dap_technique: String,
    pub methods: MethodSet,
    pub exclude_degenerate: bool,
    pub features: SubgroupPlan,
    pub mask: FeatureMask,
    pub learners: LearnerParams,
    pub evaluation: EvalOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            workers: None,
            approach: Approach::Amp,
            amp_technique: "BR+RF".into(),
            dap_technique: "RF".into(),
            methods: MethodSet::full(),
            exclude_degenerate: true,
            features: SubgroupPlan::default(),
            mask: FeatureMask::full(),
            learners: LearnerParams::default(),
            evaluation: EvalOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, IoError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| IoError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), IoError> {
        self.technique(Approach::Amp)?;
        self.technique(Approach::Dap)?;
        if self.evaluation.folds < 2 {
            return Err(IoError::Config(
                "evaluation.folds must be at least 2".into(),
            ));
        }
        if self.features.num_subgroups == 0
            || !(self.features.fraction > 0.0 && self.features.fraction <= 1.0)
        {
            return Err(IoError::Config(
                "features.num_subgroups must be positive and features.fraction in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// The configured technique for `approach`.
    pub fn technique(&self, approach: Approach) -> Result<Technique, IoError> {
        let name = match approach {
            Approach::Amp => &self.amp_technique,
            Approach::Dap => &self.dap_technique,
        };
        Technique::parse(approach, name).map_err(IoError::Config)
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            mask: self.mask.clone(),
            methods: self.methods.clone(),
            params: self.learners.clone(),
            options: self.evaluation.clone(),
        }
    }

    /// Worker threads to use: the config, else the environment, else 0
    /// (meaning one per core).
    pub fn effective_workers(&self) -> usize {
        self.workers
            .or_else(|| {
                std::env::var(WORKERS_ENV)
                    .ok()
                    .and_then(|v| v.trim().parse().ok())
            })
            .unwrap_or(0)
    }

    /// Hex SHA-256 of the canonical JSON form, excluding the worker count.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
