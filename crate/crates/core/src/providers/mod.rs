//! Remote model access: translation, sentence and token embeddings, and
//! emotion scoring.
//!
//! A [`Provider`] binds one endpoint configuration to a [`Transport`] and
//! layers the shared behavior every operation needs: response caching keyed
//! by the full request identity, bounded request parallelism with batch
//! deduplication, retry with exponential backoff on transient failures, and
//! refusal detection on translations. Secrets never live in configuration;
//! only the *name* of the environment variable holding the bearer token is
//! stored, and the token is read at request time.

pub mod cache;
pub mod mock;
pub mod parallel;
pub mod transport;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexical::tokenize;
use crate::semantic::EmbeddingVector;
use crate::sentiment::EmotionCategory;
use crate::tokenmatch::TokenEmbeddingSequence;

pub use cache::{Cache, CacheKey};
pub use mock::{
    DeterministicMockTransport, FixedEmbedder, HashClassifier, HashEmbedder, MockBehavior,
    MockTranslator, DEFAULT_REFUSAL_TEXT,
};
pub use parallel::bounded_parallel_map;
pub use transport::{
    classify_payload, decode_embeddings, decode_scores, decode_translation, embeddings_payload,
    translation_payload, BearerToken, CountingTransport, FlakyMode, FlakyTransport, HttpTransport,
    Transport, TransportError, WireDialect, WireRequest, WireResponse, FORBID_NETWORK_ENV,
};

/// Instruction sent with every chat-dialect translation request unless the
/// profile overrides it.
pub const DEFAULT_TRANSLATION_PROMPT: &str = "Please translate the following Chinese text into \
English, it should be in the original meaning and style to render the translation consistent";

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider configuration invalid: {message}")]
    Config { message: String },
    #[error("authentication failed: {message}")]
    Auth { message: String },
    #[error("network failure after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },
    #[error("network access forbidden: {message}")]
    NetworkForbidden { message: String },
    #[error("endpoint returned status {status}: {message}")]
    Endpoint { status: u16, message: String },
    #[error("could not decode response: {message}")]
    Decode { message: String },
    #[error("model refused the request: {payload}")]
    Refusal { payload: String },
    #[error("classifier response missing category {category}")]
    MissingCategory { category: String },
    #[error("embedding dimension drifted: expected {expected}, found {found}")]
    DimensionDrift { expected: usize, found: usize },
    #[error("cache failure at {path}: {message}")]
    Cache { path: String, message: String },
}

/// What a provider is for. Doubles as the cache namespace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Translation,
    Embedding,
    Sentiment,
}

impl ProviderKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProviderKind::Translation => "translation",
            ProviderKind::Embedding => "embedding",
            ProviderKind::Sentiment => "sentiment",
        }
    }
}

pub trait Translator: Send + Sync {
    fn translate(&self, source: &str) -> Result<String, ProviderError>;
}

pub trait SentenceEmbedder: Send + Sync {
    fn embed_sentences(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError>;
}

pub trait TokenEmbedder: Send + Sync {
    fn embed_tokens(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddingSequence>, ProviderError>;
}

pub trait SentimentScorer: Send + Sync {
    fn classify(
        &self,
        sentences: &[&str],
    ) -> Result<Vec<BTreeMap<EmotionCategory, f64>>, ProviderError>;
}

/// Everything needed to reach one endpoint. Carries no secret material:
/// `auth_env` is the name of the environment variable holding the token.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub name: String,
    pub kind: ProviderKind,
    pub dialect: WireDialect,
    pub endpoint: String,
    pub model: String,
    pub auth_env: Option<String>,
    pub system_prompt: Option<String>,
    pub timeout: Duration,
    pub max_parallel: usize,
}

impl ProviderConfig {
    /// Chat-dialect translation profiles get the default system prompt;
    /// everything else starts without one.
    pub fn new(
        name: &str,
        kind: ProviderKind,
        dialect: WireDialect,
        endpoint: &str,
        model: &str,
    ) -> ProviderConfig {
        let system_prompt = match (kind, dialect) {
            (ProviderKind::Translation, WireDialect::Chat) => {
                Some(DEFAULT_TRANSLATION_PROMPT.to_string())
            }
            _ => None,
        };
        ProviderConfig {
            name: name.to_string(),
            kind,
            dialect,
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            auth_env: None,
            system_prompt,
            timeout: Duration::from_secs(60),
            max_parallel: 4,
        }
    }

    pub fn with_auth_env(mut self, var: &str) -> ProviderConfig {
        self.auth_env = Some(var.to_string());
        self
    }

    pub fn with_system_prompt(mut self, prompt: Option<String>) -> ProviderConfig {
        self.system_prompt = prompt;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> ProviderConfig {
        self.timeout = timeout;
        self
    }

    pub fn with_max_parallel(mut self, max_parallel: usize) -> ProviderConfig {
        self.max_parallel = max_parallel;
        self
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let fail = |message: String| Err(ProviderError::Config { message });
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
        {
            return fail(format!(
                "provider name {:?} must be non-empty lowercase [a-z0-9_-]",
                self.name
            ));
        }
        if let Err(err) = url::Url::parse(&self.endpoint) {
            return fail(format!("endpoint {:?}: {err}", self.endpoint));
        }
        if self.model.is_empty() && self.dialect != WireDialect::GoogleTranslateV3 {
            return fail(format!("provider {} needs a model name", self.name));
        }
        if self.max_parallel == 0 {
            return fail(format!("provider {}: max_parallel must be at least 1", self.name));
        }
        if self.timeout.is_zero() {
            return fail(format!("provider {}: timeout must be positive", self.name));
        }
        let compatible = matches!(
            (self.kind, self.dialect),
            (ProviderKind::Translation, WireDialect::Chat)
                | (ProviderKind::Translation, WireDialect::GoogleTranslateV3)
                | (ProviderKind::Embedding, WireDialect::Embeddings)
                | (ProviderKind::Sentiment, WireDialect::ScoreMap)
        );
        if !compatible {
            return fail(format!(
                "provider {}: dialect {} cannot serve {}",
                self.name,
                self.dialect.as_str(),
                self.kind.as_str()
            ));
        }
        Ok(())
    }
}

/// Retry schedule for transient failures: connection errors, timeouts, 429,
/// and 5xx responses. Refusals and other 4xx are never retried.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> RetryPolicy {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(4),
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// Same attempt budget with zero sleeps. For tests.
    pub fn no_delay() -> RetryPolicy {
        RetryPolicy {
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
            jitter: false,
            ..RetryPolicy::default()
        }
    }

    fn delay_before(&self, next_attempt: u32) -> Duration {
        let exponent = next_attempt.saturating_sub(2).min(16);
        let base = self
            .base_delay
            .saturating_mul(2u32.saturating_pow(exponent))
            .min(self.max_delay);
        if self.jitter && !base.is_zero() {
            let jitter = rand::Rng::gen_range(&mut rand::thread_rng(), 0.0..=0.5);
            base + base.mul_f64(jitter)
        } else {
            base
        }
    }
}

/// Returns true when a translation is the model declining rather than a
/// translation: an apology opening plus an explicit can't-assist marker.
pub fn detect_refusal(text: &str) -> bool {
    let lowered = text.trim().to_lowercase().replace('’', "'");
    let normalized = lowered
        .trim_matches(|c| matches!(c, '"' | '\'' | '“' | '”' | '‘' | '「' | '」' | '«' | '»'))
        .trim_start();
    const OPENINGS: [&str; 4] = ["sorry", "i'm sorry", "i am sorry", "i apologize"];
    const MARKERS: [&str; 10] = [
        "can't assist",
        "cannot assist",
        "can't help",
        "cannot help",
        "unable to assist",
        "unable to help",
        "not able to assist",
        "not able to help",
        "won't assist",
        "won't help",
    ];
    OPENINGS.iter().any(|o| normalized.starts_with(o))
        && MARKERS.iter().any(|m| normalized.contains(m))
}

/// One configured endpoint with caching, retries, dedup, and bounded
/// parallelism. Implements the operation traits its kind supports.
pub struct Provider {
    config: ProviderConfig,
    transport: Arc<dyn Transport>,
    cache: Option<Cache>,
    retry: RetryPolicy,
    /// First embedding dimension seen this run; later responses must agree.
    dimension_witness: Mutex<Option<usize>>,
}

impl Provider {
    pub fn new(config: ProviderConfig, transport: Arc<dyn Transport>) -> Result<Provider, ProviderError> {
        config.validate()?;
        Ok(Provider {
            config,
            transport,
            cache: None,
            retry: RetryPolicy::default(),
            dimension_witness: Mutex::new(None),
        })
    }

    pub fn with_cache(mut self, cache: Cache) -> Provider {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Provider {
        self.retry = retry;
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn bearer(&self) -> Result<Option<BearerToken>, ProviderError> {
        match &self.config.auth_env {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(token) => Ok(Some(BearerToken::new(token))),
                Err(_) => Err(ProviderError::Auth {
                    message: format!("environment variable {var} is not set"),
                }),
            },
        }
    }

    /// Cache-through request: identical payloads to the same endpoint are
    /// answered from disk without touching the transport.
    fn request_value(&self, payload: &serde_json::Value) -> Result<serde_json::Value, ProviderError> {
        let key = CacheKey::compute(
            self.config.kind,
            &self.config.endpoint,
            &self.config.model,
            self.config.system_prompt.as_deref(),
            payload,
        );
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(self.config.kind, &key)? {
                return Ok(hit);
            }
        }
        let request = WireRequest {
            endpoint: self.config.endpoint.clone(),
            bearer: self.bearer()?,
            body: payload.clone(),
            timeout: self.config.timeout,
        };
        let response = self.execute_with_retry(&request)?;
        if let Some(cache) = &self.cache {
            cache.put(self.config.kind, &key, &response.body)?;
        }
        Ok(response.body)
    }

    fn execute_with_retry(&self, request: &WireRequest) -> Result<WireResponse, ProviderError> {
        let attempts = self.retry.attempts.max(1);
        let mut last_failure = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                let delay = self.retry.delay_before(attempt);
                if !delay.is_zero() {
                    std::thread::sleep(delay);
                }
            }
            match self.transport.execute(request) {
                Ok(response) if (200..300).contains(&response.status) => return Ok(response),
                Ok(response) if response.status == 401 || response.status == 403 => {
                    return Err(ProviderError::Auth {
                        message: format!(
                            "endpoint returned status {} for provider {}",
                            response.status, self.config.name
                        ),
                    });
                }
                Ok(response) if response.status == 429 || response.status >= 500 => {
                    last_failure = format!("status {}", response.status);
                }
                Ok(response) => {
                    let rendered = response.body.to_string();
                    let excerpt: String = rendered.chars().take(160).collect();
                    return Err(ProviderError::Endpoint {
                        status: response.status,
                        message: excerpt,
                    });
                }
                Err(TransportError::Network { message }) => last_failure = message,
                Err(TransportError::Forbidden { message }) => {
                    return Err(ProviderError::NetworkForbidden { message });
                }
            }
        }
        Err(ProviderError::Network {
            attempts,
            message: last_failure,
        })
    }

    /// Fetches a value per distinct text with bounded parallelism, then lets
    /// the caller fan results back out to the original order.
    fn fetch_distinct<R, F>(
        &self,
        texts: &[&str],
        fetch: F,
    ) -> Result<BTreeMap<String, R>, ProviderError>
    where
        R: Send,
        F: Fn(&str) -> Result<R, ProviderError> + Sync,
    {
        let mut seen = BTreeSet::new();
        let mut distinct: Vec<&str> = Vec::new();
        for text in texts {
            if seen.insert(*text) {
                distinct.push(text);
            }
        }
        let fetched = bounded_parallel_map(distinct, self.config.max_parallel, |text| {
            (text, fetch(text))
        });
        let mut by_text = BTreeMap::new();
        for (text, result) in fetched {
            by_text.insert(text.to_string(), result?);
        }
        Ok(by_text)
    }

    fn embedding_for(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let payload = embeddings_payload(&self.config.model, &[text]);
        let body = self.request_value(&payload)?;
        let mut vectors = decode_embeddings(&body, 1)?;
        Ok(vectors.remove(0))
    }

    fn scores_for(&self, sentence: &str) -> Result<BTreeMap<EmotionCategory, f64>, ProviderError> {
        let payload = classify_payload(&self.config.model, &[sentence]);
        let body = self.request_value(&payload)?;
        let mut maps = decode_scores(&body, 1)?;
        Ok(maps.remove(0))
    }

    fn witness_dimensions(
        &self,
        dims: impl Iterator<Item = usize>,
    ) -> Result<(), ProviderError> {
        let mut witness = self
            .dimension_witness
            .lock()
            .unwrap_or_else(|poisoned| poisoned.into_inner());
        for found in dims {
            match *witness {
                None => *witness = Some(found),
                Some(expected) if expected != found => {
                    return Err(ProviderError::DimensionDrift { expected, found });
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Raw embedding vectors for `texts`, in order. Duplicate texts share
    /// one upstream request.
    pub fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let by_text = self.fetch_distinct(texts, |text| self.embedding_for(text))?;
        let vectors: Vec<Vec<f64>> = texts
            .iter()
            .map(|text| by_text[*text].clone())
            .collect();
        self.witness_dimensions(vectors.iter().map(Vec::len))?;
        Ok(vectors)
    }

    pub fn translate_one(&self, source: &str) -> Result<String, ProviderError> {
        let payload = translation_payload(
            self.config.dialect,
            &self.config.model,
            self.config.system_prompt.as_deref(),
            source,
        )?;
        let body = self.request_value(&payload)?;
        let text = decode_translation(self.config.dialect, &body)?;
        if detect_refusal(&text) {
            return Err(ProviderError::Refusal { payload: text });
        }
        Ok(text)
    }

    /// Translates every source, one result per input. Refusals surface as
    /// per-item errors without aborting the batch.
    pub fn translate_batch(&self, sources: &[&str]) -> Vec<Result<String, ProviderError>> {
        bounded_parallel_map(sources.to_vec(), self.config.max_parallel, |source| {
            self.translate_one(source)
        })
    }
}

impl Translator for Provider {
    fn translate(&self, source: &str) -> Result<String, ProviderError> {
        self.translate_one(source)
    }
}

impl SentenceEmbedder for Provider {
    fn embed_sentences(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        Ok(self
            .embed_texts(texts)?
            .into_iter()
            .map(EmbeddingVector::new)
            .collect())
    }
}

impl TokenEmbedder for Provider {
    fn embed_tokens(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddingSequence>, ProviderError> {
        let token_lists: Vec<Vec<String>> = texts.iter().map(|text| tokenize(text).tokens).collect();
        let all_tokens: Vec<&str> = token_lists
            .iter()
            .flatten()
            .map(String::as_str)
            .collect();
        let by_token = if all_tokens.is_empty() {
            BTreeMap::new()
        } else {
            self.fetch_distinct(&all_tokens, |token| self.embedding_for(token))?
        };
        self.witness_dimensions(by_token.values().map(Vec::len))?;
        token_lists
            .into_iter()
            .map(|tokens| {
                let vectors = tokens
                    .iter()
                    .map(|token| EmbeddingVector::new(by_token[token.as_str()].clone()))
                    .collect();
                TokenEmbeddingSequence::new(tokens, vectors).map_err(|err| ProviderError::Decode {
                    message: format!("assembling token sequence: {err}"),
                })
            })
            .collect()
    }
}

impl SentimentScorer for Provider {
    fn classify(
        &self,
        sentences: &[&str],
    ) -> Result<Vec<BTreeMap<EmotionCategory, f64>>, ProviderError> {
        if sentences.is_empty() {
            return Ok(Vec::new());
        }
        let by_text = self.fetch_distinct(sentences, |sentence| self.scores_for(sentence))?;
        Ok(sentences
            .iter()
            .map(|sentence| by_text[*sentence].clone())
            .collect())
    }
}
