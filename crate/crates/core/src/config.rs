//! One TOML file for every section: spec distribution, rewards, curation,
//! gateways, prompts, self-play and the service. Every key is optional.
//!
//! ```toml
//! seed = 7
//!
//! [taskspec]
//! p_multi_turn = 0.1
//! [taskspec.domain_weights]
//! travel = 1.0
//!
//! [generator_reward.band]
//! sigma = 0.12
//!
//! [curation]
//! pool_size = 200
//! output_size = 50
//!
//! [gateway.solver]
//! kind = "scripted"
//! fixtures = "fixtures/solver"
//! ```

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curate::CurationConfig;
use crate::gateway::{Gateway, GatewayConfig, ModelBackend, RemoteBackend, RemoteConfig, ScriptedBackend};
use crate::genreward::GenRewardConfig;
use crate::service::RewardService;
use crate::solreward::SolverRewardConfig;
use crate::taskspec::{PromptBundle, SpecDistribution};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Scripted,
    Remote,
}

/// Where one role's completions come from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Scripted transcripts directory.
    pub fixtures: Option<PathBuf>,
    #[serde(flatten)]
    pub remote: RemoteConfig,
}

impl BackendConfig {
    pub fn scripted(dir: impl Into<PathBuf>) -> Self {
        Self {
            kind: BackendKind::Scripted,
            fixtures: Some(dir.into()),
            remote: RemoteConfig::default(),
        }
    }

    /// Relative fixture paths resolve against `base`. Remote backends pick
    /// up endpoint and token overrides from the environment.
    pub fn build(&self, base: &Path) -> Result<Arc<dyn ModelBackend>, ConfigError> {
        match self.kind {
            BackendKind::Scripted => {
                let dir = self
                    .fixtures
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("scripted backend needs `fixtures`".into()))?;
                let dir = if dir.is_absolute() { dir.clone() } else { base.join(dir) };
                Ok(Arc::new(
                    ScriptedBackend::from_dir(&dir).map_err(|e| ConfigError::Invalid(e.to_string()))?,
                ))
            }
            BackendKind::Remote => Ok(Arc::new(
                RemoteBackend::new(self.remote.clone().with_env()).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            )),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySection {
    #[serde(flatten)]
    pub settings: GatewayConfig,
    pub generator: Option<BackendConfig>,
    pub solver: Option<BackendConfig>,
    /// Defaults to the generator backend.
    pub judge: Option<BackendConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptsSection {
    /// Directory with replacement template files; bundled text otherwise.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfPlaySection {
    pub iterations: u32,
    /// Generator rollouts scored per iteration in the generator phase.
    pub generator_batch: usize,
    pub out_dir: PathBuf,
}

impl Default for SelfPlaySection {
    fn default() -> Self {
        Self {
            iterations: 3,
            generator_batch: 64,
            out_dir: PathBuf::from("selfplay_out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSection {
    pub bind: SocketAddr,
}

impl Default for ServiceSection {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub taskspec: SpecDistribution,
    pub generator_reward: GenRewardConfig,
    pub solver_reward: SolverRewardConfig,
    pub curation: CurationConfig,
    pub gateway: GatewaySection,
    pub prompts: PromptsSection,
    pub selfplay: SelfPlaySection,
    pub service: ServiceSection,
    /// Directory relative paths resolve against; the config file's parent.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml(&text).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.taskspec.validate().map_err(|e| invalid(e.to_string()))?;
        self.generator_reward.validate().map_err(|e| invalid(e.to_string()))?;
        self.curation.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }

    pub fn prompts(&self) -> Result<PromptBundle, ConfigError> {
        match &self.prompts.dir {
            None => Ok(PromptBundle::default()),
            Some(dir) => PromptBundle::from_dir(&self.base_dir.join(dir)).map_err(|e| ConfigError::Invalid(e.to_string())),
        }
    }

    fn gateway_for(&self, backend: &BackendConfig, prompts: &Arc<PromptBundle>) -> Result<Gateway, ConfigError> {
        Gateway::new(backend.build(&self.base_dir)?, prompts.clone(), self.gateway.settings)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn generator_gateway(&self) -> Result<Option<Gateway>, ConfigError> {
        let prompts = Arc::new(self.prompts()?);
        self.gateway.generator.as_ref().map(|b| self.gateway_for(b, &prompts)).transpose()
    }

    pub fn solver_gateway(&self) -> Result<Option<Gateway>, ConfigError> {
        let prompts = Arc::new(self.prompts()?);
        self.gateway.solver.as_ref().map(|b| self.gateway_for(b, &prompts)).transpose()
    }

    pub fn judge_gateway(&self) -> Result<Option<Gateway>, ConfigError> {
        let prompts = Arc::new(self.prompts()?);
        self.gateway
            .judge
            .as_ref()
            .or(self.gateway.generator.as_ref())
            .map(|b| self.gateway_for(b, &prompts))
            .transpose()
    }

    /// Reward service wired to the configured solver and judge backends.
    pub fn reward_service(&self) -> Result<RewardService, ConfigError> {
        Ok(RewardService {
            generator: self.generator_reward,
            solver: self.solver_reward,
            solver_gateway: self.solver_gateway()?,
            judge_gateway: self.judge_gateway()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_partial_sections() {
        let cfg = Config::from_toml("").unwrap();
        assert_eq!(cfg.generator_reward.validity.lambda_menu, 0.4);
        assert_eq!(cfg.curation.output_size, 2000);
        let cfg = Config::from_toml(
            "seed = 3\n[generator_reward.band]\nsigma = 0.2\n[curation]\npool_size = 200\noutput_size = 50\n[gateway]\nmax_in_flight = 2\n[gateway.probe]\ntemperature = 0.5\nmax_tokens = 10\n[gateway.solver]\nkind = \"remote\"\nendpoint = \"http://x\"\nmodel = \"m\"\n",
        )
        .unwrap();
        assert_eq!(cfg.generator_reward.band.sigma, 0.2);
        assert_eq!(cfg.generator_reward.band.p_low, 0.25);
        assert_eq!(cfg.gateway.settings.max_in_flight, 2);
        assert_eq!(cfg.gateway.settings.probe.temperature, 0.5);
        assert_eq!(cfg.gateway.solver.unwrap().remote.endpoint, "http://x");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::from_toml("[taskspec.domain_weights]\na = 0.0\n").is_err());
        assert!(Config::from_toml("[curation]\noutput_size = 5\npool_size = 4\n").is_err());
        assert!(Config::from_toml("bogus = 1\n").is_err());
    }
}
