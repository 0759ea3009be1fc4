//! Provider profile file: one TOML document describing every endpoint the
//! run may touch plus the role each one plays.
//!
//! Secrets never appear here. A profile names the environment variable that
//! holds its token (`auth_env`); the value is read at request time.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use transeval_core::providers::{
    Cache, DeterministicMockTransport, HttpTransport, MockBehavior, Provider, ProviderConfig,
    ProviderKind, RetryPolicy, Transport, WireDialect,
};

use crate::commands::CliError;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub resamples: Option<u32>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Roles {
    /// Translation providers; each name doubles as the corpus version it fills.
    #[serde(default)]
    pub translators: Vec<String>,
    pub embeddings: Option<String>,
    pub sentiment: Option<String>,
    /// Defaults to the `embeddings` provider when unset.
    pub token_embeddings: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderProfile {
    pub kind: String,
    pub dialect: String,
    pub endpoint: String,
    #[serde(default)]
    pub transport: TransportChoice,
    #[serde(default)]
    pub model: String,
    pub auth_env: Option<String>,
    pub system_prompt: Option<String>,
    pub timeout_secs: Option<u64>,
    pub max_parallel: Option<usize>,
    pub mock: Option<MockProfile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TransportChoice {
    #[default]
    Http,
    Mock,
}

/// Tuning for the deterministic in-process transport.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MockProfile {
    pub seed: Option<u64>,
    pub dimension: Option<usize>,
    pub refuse_containing: Option<String>,
    pub refusal_text: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    #[serde(default)]
    pub defaults: Defaults,
    #[serde(default)]
    pub roles: Roles,
    #[serde(default)]
    pub providers: BTreeMap<String, ProviderProfile>,
}

impl ProfileFile {
    pub fn load(path: &Path) -> Result<ProfileFile, CliError> {
        let raw = fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read provider profile {}: {e}", path.display()))
        })?;
        toml::from_str(&raw).map_err(|e| {
            CliError::Usage(format!("invalid provider profile {}: {e}", path.display()))
        })
    }

    pub fn provider_configs(&self) -> Result<Vec<ProviderConfig>, CliError> {
        self.providers
            .iter()
            .map(|(name, profile)| profile.to_config(name))
            .collect()
    }
}

impl ProviderProfile {
    fn to_config(&self, name: &str) -> Result<ProviderConfig, CliError> {
        let kind = match self.kind.as_str() {
            "translation" => ProviderKind::Translation,
            "embedding" => ProviderKind::Embedding,
            "sentiment" => ProviderKind::Sentiment,
            other => {
                return Err(CliError::Usage(format!(
                    "provider '{name}': unknown kind '{other}' \
                     (expected translation, embedding, or sentiment)"
                )))
            }
        };
        let dialect = match self.dialect.as_str() {
            "chat" => WireDialect::Chat,
            "google_translate_v3" => WireDialect::GoogleTranslateV3,
            "embeddings" => WireDialect::Embeddings,
            "score_map" => WireDialect::ScoreMap,
            other => {
                return Err(CliError::Usage(format!(
                    "provider '{name}': unknown dialect '{other}'"
                )))
            }
        };
        let mut config = ProviderConfig::new(name, kind, dialect, &self.endpoint, &self.model);
        if let Some(var) = &self.auth_env {
            config = config.with_auth_env(var);
        }
        if let Some(prompt) = &self.system_prompt {
            config = config.with_system_prompt(Some(prompt.clone()));
        }
        if let Some(secs) = self.timeout_secs {
            config = config.with_timeout(Duration::from_secs(secs));
        }
        if let Some(par) = self.max_parallel {
            config = config.with_max_parallel(par);
        }
        config
            .validate()
            .map_err(|e| CliError::Usage(format!("provider '{name}': {e}")))?;
        Ok(config)
    }

    fn transport(&self) -> Result<Arc<dyn Transport>, CliError> {
        match self.transport {
            TransportChoice::Http => {
                let http = HttpTransport::new()
                    .map_err(|e| CliError::Usage(format!("http transport: {e}")))?;
                Ok(Arc::new(http))
            }
            TransportChoice::Mock => {
                let opts = self.mock.clone().unwrap_or_default();
                let mut behavior = MockBehavior::default();
                if let Some(seed) = opts.seed {
                    behavior.seed = seed;
                }
                if let Some(dimension) = opts.dimension {
                    behavior.dimension = dimension;
                }
                behavior.refuse_containing = opts.refuse_containing;
                if let Some(text) = opts.refusal_text {
                    behavior.refusal_text = text;
                }
                Ok(Arc::new(DeterministicMockTransport::new(behavior)))
            }
        }
    }

    /// Builds the runnable provider. Mock transports never fail transiently,
    /// so they skip the retry delays.
    pub fn build(&self, name: &str, cache_root: Option<&Path>) -> Result<Provider, CliError> {
        let config = self.to_config(name)?;
        let transport = self.transport()?;
        let mut provider = Provider::new(config, transport)
            .map_err(|e| CliError::Usage(format!("provider '{name}': {e}")))?;
        if self.transport == TransportChoice::Mock {
            provider = provider.with_retry(RetryPolicy::no_delay());
        }
        if let Some(root) = cache_root {
            provider = provider.with_cache(Cache::new(root));
        }
        Ok(provider)
    }
}

/// Providers resolved to their roles for one run.
pub struct Runtime {
    /// Keyed by provider name, which is also the corpus version it fills.
    pub translators: BTreeMap<String, Provider>,
    pub embeddings: Option<Provider>,
    pub sentiment: Option<Provider>,
    pub token_embeddings: Option<Provider>,
}

impl Runtime {
    pub fn from_profile(profile: &ProfileFile, cache_root: Option<&Path>) -> Result<Runtime, CliError> {
        let lookup = |name: &str| -> Result<&ProviderProfile, CliError> {
            profile.providers.get(name).ok_or_else(|| {
                CliError::Usage(format!("role references unknown provider '{name}'"))
            })
        };
        let expect_kind = |name: &str, p: &ProviderProfile, kind: &str| -> Result<(), CliError> {
            if p.kind == kind {
                Ok(())
            } else {
                Err(CliError::Usage(format!(
                    "provider '{name}' has kind '{}', role needs '{kind}'",
                    p.kind
                )))
            }
        };

        let mut translators = BTreeMap::new();
        for name in &profile.roles.translators {
            let p = lookup(name)?;
            expect_kind(name, p, "translation")?;
            translators.insert(name.clone(), p.build(name, cache_root)?);
        }
        let build_role = |role: &Option<String>, kind: &str| -> Result<Option<Provider>, CliError> {
            match role {
                None => Ok(None),
                Some(name) => {
                    let p = lookup(name)?;
                    expect_kind(name, p, kind)?;
                    Ok(Some(p.build(name, cache_root)?))
                }
            }
        };
        let embeddings = build_role(&profile.roles.embeddings, "embedding")?;
        let token_role = profile
            .roles
            .token_embeddings
            .clone()
            .or_else(|| profile.roles.embeddings.clone());
        let token_embeddings = build_role(&token_role, "embedding")?;
        let sentiment = build_role(&profile.roles.sentiment, "sentiment")?;
        Ok(Runtime {
            translators,
            embeddings,
            sentiment,
            token_embeddings,
        })
    }
}
