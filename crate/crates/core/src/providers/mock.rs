//! Deterministic stand-ins for remote models.
//!
//! [`DeterministicMockTransport`] answers the same wire shapes a live
//! endpoint would, so the full encode/decode/cache path runs unchanged; the
//! content is a pure function of (seed, model, text). The direct mock
//! providers below skip the wire entirely for unit tests that only need the
//! traits.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::lexical::tokenize;
use crate::semantic::EmbeddingVector;
use crate::sentiment::EmotionCategory;
use crate::tokenmatch::TokenEmbeddingSequence;

use super::transport::{Transport, TransportError, WireRequest, WireResponse};
use super::{ProviderError, SentenceEmbedder, SentimentScorer, TokenEmbedder, Translator};

/// Refusal payload the mock translator emits when its refusal rule fires.
pub const DEFAULT_REFUSAL_TEXT: &str = "Sorry, but I can't assist with that.";

const MOCK_LEXICON: [&str; 24] = [
    "river", "mountain", "soldier", "lantern", "harvest", "winter", "story", "village", "stone",
    "bridge", "morning", "shadow", "letter", "garden", "thunder", "silence", "market", "journey",
    "window", "forest", "evening", "courage", "memory", "festival",
];

fn seeded_rng(seed: u64, namespace: &str, text: &str) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0]);
    hasher.update(namespace.as_bytes());
    hasher.update([0]);
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(bytes)
}

/// Pseudo-random embedding in [-1, 1]^dimension, a pure function of the
/// inputs.
pub fn mock_vector(seed: u64, namespace: &str, text: &str, dimension: usize) -> Vec<f64> {
    let mut rng = seeded_rng(seed, namespace, text);
    (0..dimension).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Pseudo-random emotion scores in [0, 1], one per category.
pub fn mock_scores(seed: u64, namespace: &str, text: &str) -> BTreeMap<EmotionCategory, f64> {
    let mut rng = seeded_rng(seed, namespace, text);
    EmotionCategory::ALL
        .into_iter()
        .map(|category| (category, rng.gen_range(0.0..=1.0)))
        .collect()
}

/// Pseudo-English rendering of a source text: one or two sentences built
/// from a fixed lexicon, deterministic per (seed, namespace, source).
pub fn mock_translation(seed: u64, namespace: &str, source: &str) -> String {
    let mut rng = seeded_rng(seed, namespace, source);
    let sentence_count = 1 + rng.gen_range(0..2usize);
    let mut sentences = Vec::with_capacity(sentence_count);
    for _ in 0..sentence_count {
        let word_count = 4 + rng.gen_range(0..6usize);
        let mut words: Vec<&str> = (0..word_count)
            .map(|_| MOCK_LEXICON[rng.gen_range(0..MOCK_LEXICON.len())])
            .collect();
        let mut sentence = String::new();
        let first = words.remove(0);
        let mut chars = first.chars();
        if let Some(c) = chars.next() {
            sentence.extend(c.to_uppercase());
            sentence.push_str(chars.as_str());
        }
        for word in words {
            sentence.push(' ');
            sentence.push_str(word);
        }
        sentence.push('.');
        sentences.push(sentence);
    }
    sentences.join(" ")
}

/// Tunable behavior for [`DeterministicMockTransport`].
#[derive(Debug, Clone)]
pub struct MockBehavior {
    pub seed: u64,
    pub dimension: usize,
    /// Translation requests whose source contains this marker are refused.
    pub refuse_containing: Option<String>,
    pub refusal_text: String,
}

impl Default for MockBehavior {
    fn default() -> MockBehavior {
        MockBehavior {
            seed: 0,
            dimension: 16,
            refuse_containing: None,
            refusal_text: DEFAULT_REFUSAL_TEXT.to_string(),
        }
    }
}

/// Answers chat, translate, embedding, and score-map payloads with
/// deterministic fabricated content. Recognizes the request shape from the
/// body, exactly as the corresponding endpoints would.
pub struct DeterministicMockTransport {
    behavior: MockBehavior,
}

impl DeterministicMockTransport {
    pub fn new(behavior: MockBehavior) -> DeterministicMockTransport {
        DeterministicMockTransport { behavior }
    }

    fn should_refuse(&self, source: &str) -> bool {
        self.behavior
            .refuse_containing
            .as_deref()
            .is_some_and(|marker| source.contains(marker))
    }

    fn translate(&self, namespace: &str, source: &str) -> String {
        if self.should_refuse(source) {
            self.behavior.refusal_text.clone()
        } else {
            mock_translation(self.behavior.seed, namespace, source)
        }
    }
}

impl Transport for DeterministicMockTransport {
    fn execute(&self, request: &WireRequest) -> Result<WireResponse, TransportError> {
        // The mock stands in for the wire, so it refuses under the same flag
        // as the real transport. A warm-cache run that sets the flag proves
        // every answer came from the cache.
        if std::env::var_os(super::transport::FORBID_NETWORK_ENV).is_some() {
            return Err(TransportError::Forbidden {
                message: format!("{} is set", super::transport::FORBID_NETWORK_ENV),
            });
        }
        let body = &request.body;
        let model = body.get("model").and_then(Value::as_str).unwrap_or("mock");
        if let Some(messages) = body.get("messages").and_then(Value::as_array) {
            let source = messages
                .iter()
                .rev()
                .find(|m| m.get("role").and_then(Value::as_str) == Some("user"))
                .and_then(|m| m.get("content"))
                .and_then(Value::as_str)
                .unwrap_or("");
            let text = self.translate(model, source);
            return Ok(WireResponse {
                status: 200,
                body: json!({"choices": [{"message": {"role": "assistant", "content": text}}]}),
            });
        }
        if let Some(contents) = body.get("contents").and_then(Value::as_array) {
            let translations: Vec<Value> = contents
                .iter()
                .map(|c| {
                    let source = c.as_str().unwrap_or("");
                    json!({"translatedText": self.translate("google_v3", source)})
                })
                .collect();
            return Ok(WireResponse {
                status: 200,
                body: json!({"translations": translations}),
            });
        }
        if let Some(input) = body.get("input").and_then(Value::as_array) {
            let data: Vec<Value> = input
                .iter()
                .enumerate()
                .map(|(index, text)| {
                    let vector = mock_vector(
                        self.behavior.seed,
                        model,
                        text.as_str().unwrap_or(""),
                        self.behavior.dimension,
                    );
                    json!({"index": index, "embedding": vector})
                })
                .collect();
            return Ok(WireResponse { status: 200, body: json!({"data": data}) });
        }
        if let Some(inputs) = body.get("inputs").and_then(Value::as_array) {
            let results: Vec<Value> = inputs
                .iter()
                .map(|text| {
                    let scores = mock_scores(self.behavior.seed, model, text.as_str().unwrap_or(""));
                    let map: serde_json::Map<String, Value> = scores
                        .into_iter()
                        .map(|(category, score)| (category.as_str().to_string(), json!(score)))
                        .collect();
                    json!({"scores": map})
                })
                .collect();
            return Ok(WireResponse { status: 200, body: json!({"results": results}) });
        }
        Ok(WireResponse {
            status: 400,
            body: json!({"error": "unrecognized request shape"}),
        })
    }
}

/// Embeds every text as a deterministic pseudo-random vector. Implements the
/// sentence and token traits directly, bypassing the wire.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    pub seed: u64,
    pub dimension: usize,
}

impl HashEmbedder {
    pub fn new(seed: u64, dimension: usize) -> HashEmbedder {
        HashEmbedder { seed, dimension }
    }
}

impl SentenceEmbedder for HashEmbedder {
    fn embed_sentences(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        Ok(texts
            .iter()
            .map(|text| EmbeddingVector::new(mock_vector(self.seed, "sentence", text, self.dimension)))
            .collect())
    }
}

impl TokenEmbedder for HashEmbedder {
    fn embed_tokens(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddingSequence>, ProviderError> {
        texts
            .iter()
            .map(|text| {
                let tokens = tokenize(text).tokens;
                let vectors = tokens
                    .iter()
                    .map(|token| {
                        EmbeddingVector::new(mock_vector(self.seed, "token", token, self.dimension))
                    })
                    .collect();
                TokenEmbeddingSequence::new(tokens, vectors).map_err(|err| ProviderError::Decode {
                    message: format!("assembling token sequence: {err}"),
                })
            })
            .collect()
    }
}

/// Looks texts up in a fixed table. Unknown texts are an error, which makes
/// accidental fixture gaps loud in tests.
#[derive(Debug, Clone, Default)]
pub struct FixedEmbedder {
    vectors: BTreeMap<String, Vec<f64>>,
}

impl FixedEmbedder {
    pub fn new() -> FixedEmbedder {
        FixedEmbedder::default()
    }

    pub fn insert(mut self, text: &str, vector: Vec<f64>) -> FixedEmbedder {
        self.vectors.insert(text.to_string(), vector);
        self
    }

    fn lookup(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        self.vectors
            .get(text)
            .map(|v| EmbeddingVector::new(v.clone()))
            .ok_or_else(|| ProviderError::Decode {
                message: format!("no fixed embedding for {text:?}"),
            })
    }
}

impl SentenceEmbedder for FixedEmbedder {
    fn embed_sentences(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        texts.iter().map(|text| self.lookup(text)).collect()
    }
}

impl TokenEmbedder for FixedEmbedder {
    fn embed_tokens(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddingSequence>, ProviderError> {
        texts
            .iter()
            .map(|text| {
                let tokens = tokenize(text).tokens;
                let vectors = tokens
                    .iter()
                    .map(|token| self.lookup(token))
                    .collect::<Result<Vec<_>, _>>()?;
                TokenEmbeddingSequence::new(tokens, vectors).map_err(|err| ProviderError::Decode {
                    message: format!("assembling token sequence: {err}"),
                })
            })
            .collect()
    }
}

/// Deterministic classifier over the nine emotion categories.
#[derive(Debug, Clone)]
pub struct HashClassifier {
    pub seed: u64,
}

impl SentimentScorer for HashClassifier {
    fn classify(
        &self,
        sentences: &[&str],
    ) -> Result<Vec<BTreeMap<EmotionCategory, f64>>, ProviderError> {
        Ok(sentences
            .iter()
            .map(|sentence| mock_scores(self.seed, "classify", sentence))
            .collect())
    }
}

/// Deterministic translator with an optional refusal rule.
#[derive(Debug, Clone)]
pub struct MockTranslator {
    pub seed: u64,
    pub refuse_containing: Option<String>,
    pub refusal_text: String,
}

impl MockTranslator {
    pub fn new(seed: u64) -> MockTranslator {
        MockTranslator {
            seed,
            refuse_containing: None,
            refusal_text: DEFAULT_REFUSAL_TEXT.to_string(),
        }
    }
}

impl Translator for MockTranslator {
    fn translate(&self, source: &str) -> Result<String, ProviderError> {
        if self
            .refuse_containing
            .as_deref()
            .is_some_and(|marker| source.contains(marker))
        {
            return Err(ProviderError::Refusal {
                payload: self.refusal_text.clone(),
            });
        }
        Ok(mock_translation(self.seed, "translate", source))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AlignedUnit, Chapter, Corpus, TextType, VersionId};
    use crate::providers::transport::{decode_embeddings, decode_scores, decode_translation, WireDialect};
    use crate::semantic::{score_corpus, SemanticError};
    use crate::tokenmatch::{score_pair, MatchStrategy};
    use std::time::Duration;

    fn request(body: Value) -> WireRequest {
        WireRequest {
            endpoint: "mock://unused".to_string(),
            bearer: None,
            body,
            timeout: Duration::from_secs(1),
        }
    }

    fn tiny_corpus() -> Corpus {
        let mt = VersionId::new("mt").unwrap();
        let unit = |chapter, verse, reference: &str, candidate: &str| AlignedUnit {
            chapter,
            verse,
            source_zh: "原文".to_string(),
            reference_en: reference.to_string(),
            candidates: BTreeMap::from([(mt.clone(), candidate.to_string())]),
        };
        Corpus {
            id: "tiny".to_string(),
            text_type: TextType::News,
            candidate_versions: vec![mt.clone()],
            chapters: vec![
                Chapter {
                    index: 1,
                    units: vec![
                        unit(1, 1, "the river ran east", "a river ran east"),
                        unit(1, 2, "snow fell all night", "snow fell overnight"),
                    ],
                },
                Chapter {
                    index: 2,
                    units: vec![unit(2, 1, "the market opened", "the market opened")],
                },
            ],
        }
    }

    #[test]
    fn vectors_are_deterministic_and_text_sensitive() {
        let a = mock_vector(7, "sentence", "hello world", 8);
        let b = mock_vector(7, "sentence", "hello world", 8);
        let c = mock_vector(7, "sentence", "hello there", 8);
        let d = mock_vector(8, "sentence", "hello world", 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_eq!(a.len(), 8);
        assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn translations_look_like_sentences() {
        let text = mock_translation(1, "gpt-mock", "他说今天下雪。");
        assert!(text.ends_with('.'));
        assert!(text.chars().next().unwrap().is_ascii_uppercase());
        assert!(text.split_whitespace().count() >= 4);
        assert_eq!(text, mock_translation(1, "gpt-mock", "他说今天下雪。"));
        assert_ne!(text, mock_translation(1, "gpt-mock", "他说今天下雨。"));
    }

    #[test]
    fn chat_shape_round_trips_through_the_decoder() {
        let transport = DeterministicMockTransport::new(MockBehavior::default());
        let body = json!({"model": "gpt-mock", "messages": [
            {"role": "system", "content": "translate"},
            {"role": "user", "content": "他说今天下雪。"},
        ]});
        let response = transport.execute(&request(body)).unwrap();
        assert_eq!(response.status, 200);
        let text = decode_translation(WireDialect::Chat, &response.body).unwrap();
        assert_eq!(text, mock_translation(0, "gpt-mock", "他说今天下雪。"));
    }

    #[test]
    fn google_shape_round_trips_through_the_decoder() {
        let transport = DeterministicMockTransport::new(MockBehavior::default());
        let body = json!({"contents": ["你好"], "targetLanguageCode": "en"});
        let response = transport.execute(&request(body)).unwrap();
        let text = decode_translation(WireDialect::GoogleTranslateV3, &response.body).unwrap();
        assert!(!text.is_empty());
    }

    #[test]
    fn refusal_rule_fires_only_on_the_marker() {
        let behavior = MockBehavior {
            refuse_containing: Some("禁".to_string()),
            ..MockBehavior::default()
        };
        let transport = DeterministicMockTransport::new(behavior);
        let refused = transport
            .execute(&request(json!({"model": "m", "messages": [
                {"role": "user", "content": "这是禁区。"},
            ]})))
            .unwrap();
        assert_eq!(
            decode_translation(WireDialect::Chat, &refused.body).unwrap(),
            DEFAULT_REFUSAL_TEXT
        );
        let normal = transport
            .execute(&request(json!({"model": "m", "messages": [
                {"role": "user", "content": "这是公园。"},
            ]})))
            .unwrap();
        assert_ne!(
            decode_translation(WireDialect::Chat, &normal.body).unwrap(),
            DEFAULT_REFUSAL_TEXT
        );
    }

    #[test]
    fn embedding_shape_round_trips_through_the_decoder() {
        let transport = DeterministicMockTransport::new(MockBehavior {
            dimension: 5,
            ..MockBehavior::default()
        });
        let body = json!({"model": "embed-mock", "input": ["one", "two"]});
        let response = transport.execute(&request(body)).unwrap();
        let vectors = decode_embeddings(&response.body, 2).unwrap();
        assert_eq!(vectors.len(), 2);
        assert!(vectors.iter().all(|v| v.len() == 5));
        assert_ne!(vectors[0], vectors[1]);
    }

    #[test]
    fn score_shape_round_trips_through_the_decoder() {
        let transport = DeterministicMockTransport::new(MockBehavior::default());
        let body = json!({"model": "senti-mock", "inputs": ["He smiled."]});
        let response = transport.execute(&request(body)).unwrap();
        let maps = decode_scores(&response.body, 1).unwrap();
        assert_eq!(maps[0].len(), 9);
        assert!(maps[0].values().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn unrecognized_shape_is_a_client_error() {
        let transport = DeterministicMockTransport::new(MockBehavior::default());
        let response = transport.execute(&request(json!({"weird": true}))).unwrap();
        assert_eq!(response.status, 400);
    }

    #[test]
    fn score_corpus_covers_every_unit_and_version() {
        let corpus = tiny_corpus();
        let embedder = HashEmbedder::new(3, 12);
        let scores = score_corpus(&corpus, &embedder).unwrap();
        assert_eq!(scores.records.len(), 3);
        assert!(scores.skipped.is_empty());
        assert!(scores.records.iter().all(|r| r.score.abs() <= 1.0 + 1e-9));
        // Identical reference and candidate text embeds identically.
        let exact = scores
            .records
            .iter()
            .find(|r| r.chapter == 2 && r.verse == 1)
            .unwrap();
        assert!((exact.score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn score_corpus_reports_the_failing_verse() {
        let corpus = tiny_corpus();
        // Table misses one candidate text, so the provider errors there.
        let embedder = FixedEmbedder::new()
            .insert("the river ran east", vec![1.0, 0.0])
            .insert("a river ran east", vec![1.0, 0.1])
            .insert("snow fell all night", vec![0.5, 0.5]);
        let err = score_corpus(&corpus, &embedder).unwrap_err();
        match err {
            SemanticError::Provider { chapter, verse, version, .. } => {
                assert_eq!((chapter, verse), (1, 2));
                assert_eq!(version.as_str(), "mt");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn score_corpus_skips_zero_vector_units() {
        let corpus = Corpus {
            chapters: vec![Chapter {
                index: 1,
                units: vec![AlignedUnit {
                    chapter: 1,
                    verse: 1,
                    source_zh: "原文".to_string(),
                    reference_en: "ref text".to_string(),
                    candidates: BTreeMap::from([(
                        VersionId::new("mt").unwrap(),
                        "cand text".to_string(),
                    )]),
                }],
            }],
            ..tiny_corpus()
        };
        let embedder = FixedEmbedder::new()
            .insert("ref text", vec![0.0, 0.0])
            .insert("cand text", vec![1.0, 0.0]);
        let scores = score_corpus(&corpus, &embedder).unwrap();
        assert!(scores.records.is_empty());
        assert_eq!(scores.skipped.len(), 1);
        assert!(scores.skipped[0].reason.contains("zero"), "{}", scores.skipped[0].reason);
    }

    #[test]
    fn score_pair_of_identical_texts_is_perfect() {
        let embedder = HashEmbedder::new(5, 10);
        let score = score_pair(
            "Commander Yu raised the lantern.",
            "Commander Yu raised the lantern.",
            &embedder,
            MatchStrategy::PerToken,
        )
        .unwrap();
        assert!((score.f1 - 1.0).abs() < 1e-12);
        let score = score_pair(
            "Commander Yu raised the lantern.",
            "Commander Yu raised the lantern.",
            &embedder,
            MatchStrategy::OneToOne,
        )
        .unwrap();
        assert!((score.f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mock_translator_refuses_with_verbatim_payload() {
        let translator = MockTranslator {
            refuse_containing: Some("敏感".to_string()),
            ..MockTranslator::new(0)
        };
        let err = translator.translate("这段敏感文字。").unwrap_err();
        match err {
            ProviderError::Refusal { payload } => assert_eq!(payload, DEFAULT_REFUSAL_TEXT),
            other => panic!("unexpected error {other}"),
        }
        assert!(translator.translate("普通文字。").is_ok());
    }

    #[test]
    fn classifier_is_deterministic() {
        let classifier = HashClassifier { seed: 9 };
        let a = classifier.classify(&["He laughed.", "She wept."]).unwrap();
        let b = classifier.classify(&["He laughed.", "She wept."]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }
}
