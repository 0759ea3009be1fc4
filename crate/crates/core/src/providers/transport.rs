//! Wire-level request execution and payload dialects.
//!
//! A [`Transport`] turns one JSON request into one JSON response; everything
//! above it (caching, retries, refusal detection) is transport-agnostic.
//! Payload construction and decoding live here too, keyed by [`WireDialect`],
//! so mock transports exercise the exact encode/decode path the HTTP
//! transport uses.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::sentiment::EmotionCategory;

use super::ProviderError;

/// Setting this environment variable (to any value) makes the HTTP transport
/// refuse to open connections. Used to prove that warm-cache runs are fully
/// offline.
pub const FORBID_NETWORK_ENV: &str = "TRANSEVAL_FORBID_NETWORK";

/// Bearer token resolved from the environment. Never serialized; the debug
/// form is redacted so it cannot leak through logs or error text.
#[derive(Clone)]
pub struct BearerToken(String);

impl BearerToken {
    pub fn new(token: String) -> BearerToken {
        BearerToken(token)
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for BearerToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BearerToken(<redacted>)")
    }
}

/// One outbound request, fully resolved.
#[derive(Debug, Clone)]
pub struct WireRequest {
    pub endpoint: String,
    pub bearer: Option<BearerToken>,
    pub body: Value,
    pub timeout: Duration,
}

/// One inbound response. Any HTTP status is a *response*; only transport
/// failures (connect, timeout) are errors.
#[derive(Debug, Clone, PartialEq)]
pub struct WireResponse {
    pub status: u16,
    pub body: Value,
}

/// Transport-level failures, before any HTTP status exists.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    /// Connection, DNS, or timeout failure. Retryable.
    #[error("network failure: {message}")]
    Network { message: String },
    /// The harness forbids network access in this run. Never retried.
    #[error("network access forbidden: {message}")]
    Forbidden { message: String },
}

pub trait Transport: Send + Sync {
    fn execute(&self, request: &WireRequest) -> Result<WireResponse, TransportError>;
}

/// Blocking HTTP transport. POSTs JSON, attaches a bearer header when one is
/// supplied, and returns whatever status the endpoint produced.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<HttpTransport, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|err| ProviderError::Config {
                message: format!("building http client: {err}"),
            })?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn execute(&self, request: &WireRequest) -> Result<WireResponse, TransportError> {
        if std::env::var_os(FORBID_NETWORK_ENV).is_some() {
            return Err(TransportError::Forbidden {
                message: format!("{FORBID_NETWORK_ENV} is set"),
            });
        }
        let mut builder = self
            .client
            .post(&request.endpoint)
            .timeout(request.timeout)
            .json(&request.body);
        if let Some(token) = &request.bearer {
            builder = builder.bearer_auth(token.expose());
        }
        let response = builder.send().map_err(|err| TransportError::Network {
            message: err.to_string(),
        })?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|err| TransportError::Network {
            message: format!("reading response body: {err}"),
        })?;
        let body = serde_json::from_str(&text).unwrap_or(Value::String(text));
        Ok(WireResponse { status, body })
    }
}

/// Request/response shapes the pipeline can speak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireDialect {
    /// Chat-completion endpoints: system + user messages in, assistant
    /// message text out.
    Chat,
    /// Google Cloud Translation v3: bare source text in, `translatedText`
    /// out. No prompt.
    GoogleTranslateV3,
    /// Embedding endpoints: text list in, one vector per text out.
    Embeddings,
    /// Emotion classifiers: sentence list in, per-category score map out.
    ScoreMap,
}

impl WireDialect {
    pub fn as_str(&self) -> &'static str {
        match self {
            WireDialect::Chat => "chat",
            WireDialect::GoogleTranslateV3 => "google_translate_v3",
            WireDialect::Embeddings => "embeddings",
            WireDialect::ScoreMap => "score_map",
        }
    }
}

/// Builds a translation request body for the given dialect.
pub fn translation_payload(
    dialect: WireDialect,
    model: &str,
    system_prompt: Option<&str>,
    source: &str,
) -> Result<Value, ProviderError> {
    match dialect {
        WireDialect::Chat => {
            let mut messages = Vec::new();
            if let Some(prompt) = system_prompt {
                messages.push(json!({"role": "system", "content": prompt}));
            }
            messages.push(json!({"role": "user", "content": source}));
            Ok(json!({"model": model, "messages": messages}))
        }
        WireDialect::GoogleTranslateV3 => Ok(json!({
            "contents": [source],
            "sourceLanguageCode": "zh",
            "targetLanguageCode": "en",
        })),
        other => Err(ProviderError::Config {
            message: format!("dialect {} cannot carry a translation request", other.as_str()),
        }),
    }
}

/// Extracts the translated text from a translation response.
pub fn decode_translation(dialect: WireDialect, body: &Value) -> Result<String, ProviderError> {
    match dialect {
        WireDialect::Chat => body
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| decode_error("missing choices[0].message.content", body)),
        WireDialect::GoogleTranslateV3 => body
            .pointer("/translations/0/translatedText")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| decode_error("missing translations[0].translatedText", body)),
        other => Err(ProviderError::Config {
            message: format!("dialect {} cannot carry a translation response", other.as_str()),
        }),
    }
}

/// Builds an embedding request body for one batch of texts.
pub fn embeddings_payload(model: &str, texts: &[&str]) -> Value {
    json!({"model": model, "input": texts})
}

/// Decodes an embedding response into one vector per input text, in input
/// order. Honors an explicit per-item `index` field when present.
pub fn decode_embeddings(body: &Value, expected: usize) -> Result<Vec<Vec<f64>>, ProviderError> {
    let data = body
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| decode_error("missing data array", body))?;
    if data.len() != expected {
        return Err(ProviderError::Decode {
            message: format!("expected {} embeddings, endpoint returned {}", expected, data.len()),
        });
    }
    let mut ordered: Vec<Option<Vec<f64>>> = vec![None; expected];
    for (position, item) in data.iter().enumerate() {
        let index = item
            .get("index")
            .and_then(Value::as_u64)
            .map(|i| i as usize)
            .unwrap_or(position);
        if index >= expected {
            return Err(decode_error(&format!("embedding index {index} out of range"), body));
        }
        let vector = item
            .get("embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| decode_error("missing embedding array", body))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| decode_error("non-numeric embedding value", body)))
            .collect::<Result<Vec<f64>, _>>()?;
        if ordered[index].replace(vector).is_some() {
            return Err(decode_error(&format!("duplicate embedding index {index}"), body));
        }
    }
    Ok(ordered
        .into_iter()
        .map(|slot| slot.expect("all indices filled exactly once"))
        .collect())
}

/// Builds a sentiment-classification request body.
pub fn classify_payload(model: &str, sentences: &[&str]) -> Value {
    json!({"model": model, "inputs": sentences})
}

/// Decodes a classification response into one score map per sentence.
/// Unknown category names are ignored; a missing category is an error.
pub fn decode_scores(
    body: &Value,
    expected: usize,
) -> Result<Vec<BTreeMap<EmotionCategory, f64>>, ProviderError> {
    let results = body
        .get("results")
        .and_then(Value::as_array)
        .ok_or_else(|| decode_error("missing results array", body))?;
    if results.len() != expected {
        return Err(ProviderError::Decode {
            message: format!("expected {} score maps, endpoint returned {}", expected, results.len()),
        });
    }
    let mut decoded = Vec::with_capacity(expected);
    for item in results {
        let scores = item
            .get("scores")
            .and_then(Value::as_object)
            .ok_or_else(|| decode_error("missing scores object", body))?;
        let mut map = BTreeMap::new();
        for (name, value) in scores {
            let Some(category) = EmotionCategory::parse(name) else {
                continue;
            };
            let score = value
                .as_f64()
                .ok_or_else(|| decode_error(&format!("non-numeric score for {name}"), body))?;
            map.insert(category, score);
        }
        for category in EmotionCategory::ALL {
            if !map.contains_key(&category) {
                return Err(ProviderError::MissingCategory {
                    category: category.as_str().to_string(),
                });
            }
        }
        decoded.push(map);
    }
    Ok(decoded)
}

fn decode_error(message: &str, body: &Value) -> ProviderError {
    let rendered = body.to_string();
    let excerpt: String = rendered.chars().take(160).collect();
    ProviderError::Decode {
        message: format!("{message} in response {excerpt}"),
    }
}

/// Wraps a transport and counts calls that reach it. Test scaffolding for
/// proving cache hits never touch the wire.
pub struct CountingTransport<T> {
    inner: T,
    calls: AtomicUsize,
}

impl<T> CountingTransport<T> {
    pub fn new(inner: T) -> CountingTransport<T> {
        CountingTransport {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<T: Transport> Transport for CountingTransport<T> {
    fn execute(&self, request: &WireRequest) -> Result<WireResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.execute(request)
    }
}

/// Fails the first `failures` calls, then delegates. Test scaffolding for
/// the retry policy.
pub struct FlakyTransport<T> {
    inner: T,
    failures: AtomicUsize,
    mode: FlakyMode,
}

#[derive(Debug, Clone, Copy)]
pub enum FlakyMode {
    /// Connection-level failure.
    NetworkError,
    /// HTTP response with the given status.
    Status(u16),
}

impl<T> FlakyTransport<T> {
    pub fn new(inner: T, failures: usize, mode: FlakyMode) -> FlakyTransport<T> {
        FlakyTransport {
            inner,
            failures: AtomicUsize::new(failures),
            mode,
        }
    }
}

impl<T: Transport> Transport for FlakyTransport<T> {
    fn execute(&self, request: &WireRequest) -> Result<WireResponse, TransportError> {
        let remaining = self.failures.load(Ordering::SeqCst);
        if remaining > 0 {
            self.failures.store(remaining - 1, Ordering::SeqCst);
            return match self.mode {
                FlakyMode::NetworkError => Err(TransportError::Network {
                    message: "injected failure".to_string(),
                }),
                FlakyMode::Status(status) => Ok(WireResponse {
                    status,
                    body: json!({"error": "injected failure"}),
                }),
            };
        }
        self.inner.execute(request)
    }
}
