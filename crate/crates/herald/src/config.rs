//! Pipeline configuration: one TOML file, every key optional.
//!
//! Relative paths resolve against the directory holding the file. Input
//! paths that are set must exist when the file is loaded. The digest of the
//! effective configuration (after command-line overrides) is recorded in
//! every manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use herald_core::augment::AugmentationStrategy;
use herald_core::dataset::Ratio3;
use herald_core::digest::digest;
use herald_core::prompt::{PromptError, TemplateRegistry};
use herald_core::retrieval::{EmbeddingProvider, MockEmbedder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{CompilerBackend, MockBackend, ReplBackend};
use crate::gateway::{Gateway, GatewayConfig, HttpEmbedder, HttpProvider, MockBehaviour, MockProvider, Provider, RoleClient};
use crate::jsonl::{read_json, JsonlError};

pub const DEFAULT_TEMPLATES: &str = include_str!("../data/templates.json");
pub const DEFAULT_TACTIC_NOTES: &str = include_str!("../data/tactic_notes.json");

pub const ROLES: [&str; 4] = ["translator", "back_translator", "nli_judge", "informalizer"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("`{key}` points at {path}, which does not exist")]
    MissingPath { key: String, path: PathBuf },
    #[error("invalid setting: {0}")]
    Knob(String),
    #[error(transparent)]
    File(#[from] JsonlError),
    #[error("template registry: {0}")]
    Templates(#[from] PromptError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Mock,
    Openai,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub tactic_notes: Option<PathBuf>,
    pub example_store: Option<PathBuf>,
    pub general: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoleConfig {
    pub provider: ProviderKind,
    pub model_id: String,
    pub base_url: Option<String>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Mock translator only: share of malformed candidates, per mille.
    pub corrupt_per_mille: u32,
    pub seed: u64,
}

impl Default for RoleConfig {
    fn default() -> Self {
        RoleConfig {
            provider: ProviderKind::Mock,
            model_id: "mock".into(),
            base_url: None,
            temperature: 1.0,
            max_output_tokens: 1024,
            corrupt_per_mille: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Roles {
    pub translator: RoleConfig,
    pub back_translator: RoleConfig,
    pub nli_judge: RoleConfig,
    pub informalizer: RoleConfig,
}

impl Roles {
    pub fn get(&self, role: &str) -> Option<&RoleConfig> {
        match role {
            "translator" => Some(&self.translator),
            "back_translator" => Some(&self.back_translator),
            "nli_judge" => Some(&self.nli_judge),
            "informalizer" => Some(&self.informalizer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub provider: ProviderKind,
    pub model_id: String,
    pub base_url: Option<String>,
    pub dim: usize,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig { provider: ProviderKind::Mock, model_id: "mock".into(), base_url: None, dim: 64, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySection {
    pub max_in_flight: usize,
    pub retry_limit: u32,
    pub backoff_base_ms: u64,
    pub cache_dir: Option<PathBuf>,
    pub sample_cap: u32,
    pub request_budget: Option<u64>,
    pub http_timeout_ms: u64,
}

impl Default for GatewaySection {
    fn default() -> Self {
        let g = GatewayConfig::default();
        GatewaySection {
            max_in_flight: g.max_in_flight,
            retry_limit: g.retry_limit,
            backoff_base_ms: g.backoff_base_ms,
            cache_dir: None,
            sample_cap: g.sample_cap,
            request_budget: None,
            http_timeout_ms: 120_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Repl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub command: Option<String>,
    pub timeout_ms: u64,
    pub header_prelude: String,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig { kind: BackendKind::Mock, command: None, timeout_ms: 60_000, header_prelude: "import Mathlib\n".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Knobs {
    pub retrieval_k: usize,
    pub batch_size: usize,
    pub pass_k: u32,
    pub neighbor_limit: usize,
    pub max_prompt_chars: usize,
    pub dedup_seed: u64,
    pub mix_seed: u64,
    pub ratio: Ratio3,
    pub dirmix: Ratio3,
    pub mix_total: Option<u64>,
    pub short_circuit: bool,
    pub candidate_parallelism: usize,
    pub item_parallelism: usize,
    pub strategies: Vec<AugmentationStrategy>,
}

impl Default for Knobs {
    fn default() -> Self {
        Knobs {
            retrieval_k: 1,
            batch_size: 16,
            pass_k: 128,
            neighbor_limit: 8,
            max_prompt_chars: 24_000,
            dedup_seed: 0,
            mix_seed: 0,
            ratio: Ratio3::PROVENANCE_DEFAULT,
            dirmix: Ratio3::DIRECTION_DEFAULT,
            mix_total: None,
            short_circuit: true,
            candidate_parallelism: 8,
            item_parallelism: 4,
            strategies: AugmentationStrategy::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub roles: Roles,
    pub embedding: EmbeddingConfig,
    pub gateway: GatewaySection,
    pub backend: BackendConfig,
    pub knobs: Knobs,
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl PipelineConfig {
    /// Reads and checks a config file; `None` gives the all-mock defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let Some(path) = path else {
            let cfg = PipelineConfig::default();
            cfg.validate()?;
            return Ok(cfg);
        };
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let de = toml::Deserializer::new(&text);
        let mut cfg: PipelineConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| ConfigError::Parse { path: path.into(), message: format!("at `{}`: {}", e.path(), e.inner()) })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for p in [
            &mut cfg.paths.corpus,
            &mut cfg.paths.templates,
            &mut cfg.paths.tactic_notes,
            &mut cfg.paths.example_store,
            &mut cfg.paths.general,
            &mut cfg.paths.output_dir,
            &mut cfg.gateway.cache_dir,
        ] {
            rebase(&base, p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inputs = [
            ("paths.corpus", &self.paths.corpus),
            ("paths.templates", &self.paths.templates),
            ("paths.tactic_notes", &self.paths.tactic_notes),
            ("paths.example_store", &self.paths.example_store),
            ("paths.general", &self.paths.general),
        ];
        for (key, p) in inputs {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(ConfigError::MissingPath { key: key.into(), path: p.clone() });
                }
            }
        }
        let k = &self.knobs;
        let knob = |m: String| Err(ConfigError::Knob(m));
        if !(1..=256).contains(&k.pass_k) || k.pass_k > self.gateway.sample_cap {
            return knob(format!("knobs.pass_k = {} must lie in 1..=256 and within gateway.sample_cap", k.pass_k));
        }
        if k.retrieval_k == 0 {
            return knob("knobs.retrieval_k must be at least 1".into());
        }
        if k.batch_size == 0 || k.candidate_parallelism == 0 || k.item_parallelism == 0 {
            return knob("batch_size and parallelism knobs must be at least 1".into());
        }
        if self.embedding.dim == 0 {
            return knob("embedding.dim must be at least 1".into());
        }
        for role in ROLES {
            let r = self.roles.get(role).expect("known role");
            if !(r.temperature.is_finite() && r.temperature >= 0.0) {
                return knob(format!("roles.{role}.temperature must be finite and non-negative"));
            }
            if r.provider == ProviderKind::Openai && r.base_url.is_none() {
                return knob(format!("roles.{role}.base_url is required for provider `openai`"));
            }
        }
        if self.embedding.provider == ProviderKind::Openai && self.embedding.base_url.is_none() {
            return knob("embedding.base_url is required for provider `openai`".into());
        }
        if self.backend.kind == BackendKind::Repl && self.backend.command.is_none() {
            return knob("backend.command is required for kind `repl`".into());
        }
        Ok(())
    }

    /// Hex digest of the effective configuration.
    pub fn digest(&self) -> String {
        digest(&serde_json::to_string(self).expect("config serializes"))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths.output_dir.clone().unwrap_or_else(|| PathBuf::from("herald-out"))
    }

    pub fn templates(&self) -> Result<TemplateRegistry, ConfigError> {
        let reg: TemplateRegistry = match &self.paths.templates {
            Some(p) => read_json(p)?,
            None => serde_json::from_str(DEFAULT_TEMPLATES).expect("bundled templates parse"),
        };
        reg.validate()?;
        Ok(reg)
    }

    pub fn tactic_notes(&self) -> Result<BTreeMap<String, String>, ConfigError> {
        Ok(match &self.paths.tactic_notes {
            Some(p) => read_json(p)?,
            None => serde_json::from_str(DEFAULT_TACTIC_NOTES).expect("bundled notes parse"),
        })
    }

    fn gateway_config(&self) -> GatewayConfig {
        let g = &self.gateway;
        GatewayConfig {
            max_in_flight: g.max_in_flight,
            retry_limit: g.retry_limit,
            backoff_base_ms: g.backoff_base_ms,
            cache_dir: g.cache_dir.clone(),
            sample_cap: g.sample_cap,
            request_budget: g.request_budget,
        }
    }

    /// Client for one of [`ROLES`]. Remote roles read their key from
    /// `HERALD_API_KEY_<ROLE>`.
    pub fn role_client(&self, role: &str) -> RoleClient {
        let rc = self.roles.get(role).unwrap_or_else(|| panic!("unknown role `{role}`"));
        let provider: Arc<dyn Provider> = match rc.provider {
            ProviderKind::Mock => {
                let mut behaviour = MockBehaviour::for_role(role).expect("known role");
                if let MockBehaviour::Translator { corrupt_per_mille } = &mut behaviour {
                    *corrupt_per_mille = rc.corrupt_per_mille;
                }
                Arc::new(MockProvider::new(format!("mock-{role}"), behaviour, rc.seed))
            }
            ProviderKind::Openai => Arc::new(HttpProvider::new(
                rc.base_url.clone().unwrap_or_default(),
                api_key(role),
                Duration::from_millis(self.gateway.http_timeout_ms),
            )),
        };
        RoleClient {
            role: role.into(),
            gateway: Arc::new(Gateway::new(provider, self.gateway_config())),
            model_id: rc.model_id.clone(),
            temperature: rc.temperature,
            max_output_tokens: rc.max_output_tokens,
        }
    }

    pub fn embedder(&self) -> Box<dyn EmbeddingProvider + Send + Sync> {
        let e = &self.embedding;
        match e.provider {
            ProviderKind::Mock => Box::new(MockEmbedder::new(e.dim, e.seed)),
            ProviderKind::Openai => Box::new(HttpEmbedder::new(
                e.base_url.clone().unwrap_or_default(),
                e.model_id.clone(),
                api_key("embedding"),
                e.dim,
                Duration::from_millis(self.gateway.http_timeout_ms),
            )),
        }
    }

    pub fn backend(&self) -> Box<dyn CompilerBackend> {
        match self.backend.kind {
            BackendKind::Mock => Box::new(MockBackend::new()),
            BackendKind::Repl => {
                let cmd = self.backend.command.as_deref().unwrap_or_default();
                Box::new(ReplBackend::from_command(cmd).unwrap_or_else(|| ReplBackend::new(cmd, vec![])))
            }
        }
    }

    pub fn compile_timeout(&self) -> Duration {
        Duration::from_millis(self.backend.timeout_ms)
    }
}

pub fn api_key(role: &str) -> Option<String> {
    std::env::var(format!("HERALD_API_KEY_{}", role.to_ascii_uppercase())).ok()
}
