//! Generation backends and output validation.
//!
//! A backend turns a rendered prompt into raw model output. Two backends ship
//! with the crate: [`HttpGenerator`], which speaks the chat-completion wire
//! protocol served by most local and hosted LLM servers, and
//! [`MockGenerator`], a seeded class-conditional unigram sampler that needs no
//! network. Either way the raw text goes through [`parse_output`], which
//! enforces the fenced `TITLE:` / `KEYWORDS:` / `ABSTRACT:` contract and the
//! length targets before anything becomes a [`Proposal`].

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::tokenize;
use crate::corpus::{label_closure, LabeledCorpus, Proposal, Provenance, Source};
use crate::promptgen::{PromptSpec, RenderedPrompt, WordRange, ABSTRACT_FIELD, TITLE_FIELD};
use crate::taxonomy::Taxonomy;
use crate::util;

/// Accepted outputs may deviate from a length target by this fraction.
pub const LENGTH_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub spec: PromptSpec,
    pub prompt: RenderedPrompt,
    pub target_class: String,
    pub request_index: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Transport,
    MalformedOutput,
    LengthViolation,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub kind: FailureKind,
    pub detail: String,
}

impl GenerationFailure {
    fn new(kind: FailureKind, detail: impl Into<String>) -> Self {
        GenerationFailure {
            kind,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationOutcome {
    pub request_index: u64,
    pub target_class: String,
    pub seed: u64,
    pub result: Result<Proposal, GenerationFailure>,
}

/// One line of the failure log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub request_index: u64,
    pub target_class: String,
    pub seed: u64,
    pub kind: FailureKind,
    pub detail: String,
}

impl GenerationOutcome {
    pub fn failure_record(&self) -> Option<FailureRecord> {
        self.result.as_ref().err().map(|f| FailureRecord {
            request_index: self.request_index,
            target_class: self.target_class.clone(),
            seed: self.seed,
            kind: f.kind,
            detail: f.detail.clone(),
        })
    }
}

/// A backend error. Retryable errors are retried with exponential backoff.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendError {
    pub retryable: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOptions {
    pub max_concurrency: usize,
    pub max_retries: u32,
    pub backoff: Duration,
    pub retry_malformed: u32,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            max_concurrency: 1,
            max_retries: 0,
            backoff: Duration::from_millis(500),
            retry_malformed: 0,
        }
    }
}

pub trait TextGenerator: Sync {
    fn model_name(&self) -> &str;

    fn temperature(&self) -> Option<f64> {
        None
    }

    /// Raw model output for `request`, sampled with `seed`.
    fn complete(&self, request: &GenerationRequest, seed: u64) -> Result<String, BackendError>;

    fn batch_options(&self) -> BatchOptions {
        BatchOptions::default()
    }
}

/// Runs every request and returns one outcome per request, sorted by
/// `request_index`. Never fails: errors are recorded in the outcomes.
pub fn generate_batch(
    requests: &[GenerationRequest],
    backend: &dyn TextGenerator,
    taxonomy: &Taxonomy,
) -> Vec<GenerationOutcome> {
    let opts = backend.batch_options();
    let workers = opts.max_concurrency.max(1).min(requests.len());
    let mut outcomes = if workers <= 1 {
        requests
            .iter()
            .map(|r| run_request(r, backend, taxonomy, &opts))
            .collect()
    } else {
        let next = AtomicUsize::new(0);
        let collected = Mutex::new(Vec::with_capacity(requests.len()));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(request) = requests.get(i) else { break };
                    let outcome = run_request(request, backend, taxonomy, &opts);
                    collected.lock().expect("outcome lock").push(outcome);
                });
            }
        });
        collected.into_inner().expect("outcome lock")
    };
    outcomes.sort_by_key(|o: &GenerationOutcome| o.request_index);
    outcomes
}

fn run_request(
    request: &GenerationRequest,
    backend: &dyn TextGenerator,
    taxonomy: &Taxonomy,
    opts: &BatchOptions,
) -> GenerationOutcome {
    let mut transport_retries = 0;
    let mut malformed_retries = 0;
    let mut seed = request.seed;
    let result = loop {
        match backend.complete(request, seed) {
            Err(e) if e.retryable && transport_retries < opts.max_retries => {
                std::thread::sleep(opts.backoff * 2u32.pow(transport_retries));
                transport_retries += 1;
            }
            Err(e) => break Err(GenerationFailure::new(FailureKind::Transport, e.detail)),
            Ok(raw) => match parse_output(&raw, request, taxonomy, backend.model_name(), seed) {
                Ok(mut p) => {
                    if let Some(prov) = p.provenance.as_mut() {
                        prov.temperature = backend.temperature();
                    }
                    break Ok(p);
                }
                Err(_) if malformed_retries < opts.retry_malformed => {
                    malformed_retries += 1;
                    seed = util::derive_seed(request.seed, &["retry", &malformed_retries.to_string()]);
                }
                Err(f) => break Err(f),
            },
        }
    };
    GenerationOutcome {
        request_index: request.request_index,
        target_class: request.target_class.clone(),
        seed,
        result,
    }
}

/// Deterministic id for a generated proposal.
pub fn generated_id(target_class: &str, seed: u64) -> String {
    format!("gen-{target_class}-{seed:016x}")
}

fn within(words: usize, range: WordRange) -> bool {
    let lo = (range.min as f64 * (1.0 - LENGTH_TOLERANCE)).ceil() as usize;
    let hi = (range.max as f64 * (1.0 + LENGTH_TOLERANCE)).floor() as usize;
    (lo..=hi).contains(&words)
}

/// Validates raw model output against the format contract and builds a
/// generated [`Proposal`] labeled with the target class and its ancestors.
pub fn parse_output(
    raw: &str,
    request: &GenerationRequest,
    taxonomy: &Taxonomy,
    model: &str,
    seed: u64,
) -> Result<Proposal, GenerationFailure> {
    use FailureKind::*;
    if raw.trim().is_empty() {
        return Err(GenerationFailure::new(Empty, "empty output"));
    }
    let lines: Vec<&str> = raw.lines().collect();
    let open = lines
        .iter()
        .position(|l| l.trim_start().starts_with("```"))
        .ok_or_else(|| GenerationFailure::new(MalformedOutput, "no fenced block"))?;
    let close = lines[open + 1..]
        .iter()
        .position(|l| l.trim_start().starts_with("```"))
        .map(|i| open + 1 + i)
        .ok_or_else(|| GenerationFailure::new(MalformedOutput, "unterminated fenced block"))?;

    const FIELDS: [&str; 3] = ["TITLE:", "KEYWORDS:", "ABSTRACT:"];
    let mut fields: BTreeMap<&str, String> = BTreeMap::new();
    let mut current: Option<&str> = None;
    for line in &lines[open + 1..close] {
        let trimmed = line.trim();
        if let Some(name) = FIELDS.iter().find(|f| trimmed.starts_with(**f)) {
            let value = trimmed[name.len()..].trim().to_owned();
            if fields.insert(name, value).is_some() {
                return Err(GenerationFailure::new(
                    MalformedOutput,
                    format!("duplicate field {name}"),
                ));
            }
            current = Some(name);
        } else if !trimmed.is_empty() {
            let Some(name) = current else {
                return Err(GenerationFailure::new(MalformedOutput, "text before the first field"));
            };
            let value = fields.get_mut(name).expect("current field exists");
            if !value.is_empty() {
                value.push(' ');
            }
            value.push_str(trimmed);
        }
    }
    for name in FIELDS {
        if !fields.contains_key(name) {
            return Err(GenerationFailure::new(MalformedOutput, format!("missing field {name}")));
        }
    }
    let title = fields.remove("TITLE:").expect("checked");
    let abstract_text = fields.remove("ABSTRACT:").expect("checked");
    let keywords: Vec<String> = fields["KEYWORDS:"]
        .split(',')
        .map(str::trim)
        .filter(|k| !k.is_empty())
        .map(str::to_owned)
        .collect();
    if title.is_empty() || abstract_text.is_empty() {
        return Err(GenerationFailure::new(Empty, "empty title or abstract"));
    }

    for (field, text) in [(TITLE_FIELD, &title), (ABSTRACT_FIELD, &abstract_text)] {
        if let Some(range) = request.spec.length(field) {
            let words = text.split_whitespace().count();
            if !within(words, range) {
                return Err(GenerationFailure::new(
                    LengthViolation,
                    format!("{field} has {words} words, target {}-{}", range.min, range.max),
                ));
            }
        }
    }

    let mut proposal = Proposal {
        id: generated_id(&request.target_class, seed),
        title,
        abstract_text,
        keywords,
        labels: Default::default(),
        source: Source::Generated,
        provenance: Some(Provenance {
            prompt_hash: request.prompt.spec_hash.clone(),
            model: model.to_owned(),
            seed,
            temperature: None,
        }),
    };
    proposal.labels = taxonomy
        .closure([&request.target_class])
        .map_err(|e| GenerationFailure::new(MalformedOutput, e.to_string()))?;
    Ok(proposal)
}

/// Unigram counts for one class, in token order.
#[derive(Debug, Clone)]
struct Unigram {
    tokens: Vec<String>,
    weights: WeightedIndex<u64>,
}

/// Offline generator: samples abstracts from the unigram distribution of the
/// target class's original proposals (falling back to the nearest ancestor
/// with data), force-including the request's keywords.
#[derive(Debug, Clone)]
pub struct MockGenerator {
    model: String,
    taxonomy: Taxonomy,
    classes: BTreeMap<String, Unigram>,
}

pub const MOCK_MODEL_NAME: &str = "mock-unigram-v1";

impl MockGenerator {
    pub fn new(corpus: &LabeledCorpus, taxonomy: &Taxonomy) -> Self {
        let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        for p in corpus.originals() {
            let Ok(closure) = label_closure(p, taxonomy) else {
                continue;
            };
            let tokens = tokenize(&p.abstract_text);
            for code in closure {
                let entry = counts.entry(code).or_default();
                for t in &tokens {
                    *entry.entry(t.clone()).or_default() += 1;
                }
            }
        }
        let classes = counts
            .into_iter()
            .filter_map(|(code, hist)| {
                let (tokens, weights): (Vec<String>, Vec<u64>) = hist.into_iter().unzip();
                let weights = WeightedIndex::new(weights).ok()?;
                Some((code, Unigram { tokens, weights }))
            })
            .collect();
        MockGenerator {
            model: MOCK_MODEL_NAME.to_owned(),
            taxonomy: taxonomy.clone(),
            classes,
        }
    }

    fn model_for(&self, code: &str) -> Option<&Unigram> {
        if let Some(m) = self.classes.get(code) {
            return Some(m);
        }
        self.taxonomy
            .ancestors(code)
            .ok()?
            .into_iter()
            .find_map(|a| self.classes.get(a))
    }

    /// Token distribution of the class the mock would sample for `code`.
    pub fn class_distribution(&self, code: &str) -> Option<BTreeMap<String, f64>> {
        let m = self.model_for(code)?;
        let total: f64 = (0..m.tokens.len())
            .map(|i| m.weights.weight(i).unwrap_or(0) as f64)
            .sum();
        Some(
            m.tokens
                .iter()
                .enumerate()
                .map(|(i, t)| (t.clone(), m.weights.weight(i).unwrap_or(0) as f64 / total))
                .collect(),
        )
    }

    /// Raw output for `request` in the fenced-block format.
    pub fn mock_generate(&self, request: &GenerationRequest, seed: u64) -> Result<String, BackendError> {
        let model = self.model_for(&request.target_class).ok_or_else(|| BackendError {
            retryable: false,
            detail: format!("no exemplars reachable for class {}", request.target_class),
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |n: usize, rng: &mut ChaCha8Rng| -> Vec<String> {
            (0..n)
                .map(|_| model.tokens[model.weights.sample(rng)].clone())
                .collect()
        };

        let abstract_range = request.spec.length(ABSTRACT_FIELD).unwrap_or(WordRange::new(150, 250));
        let n_words = rng.random_range(abstract_range.min..=abstract_range.max) as usize;
        let mut words = draw(n_words, &mut rng);
        for kw in &request.spec.keywords {
            let at = rng.random_range(0..=words.len());
            words.splice(at..at, tokenize(kw));
        }
        let mut body = String::new();
        for (i, chunk) in words.chunks(16).enumerate() {
            if i > 0 {
                body.push(' ');
            }
            body.push_str(&capitalize(&chunk.join(" ")));
            body.push('.');
        }

        let title_len = rng.random_range(5..=9);
        let mut title_words = draw(title_len, &mut rng);
        if let Some(first) = request.spec.keywords.first() {
            title_words.extend(tokenize(first));
        }
        let title = title_words.iter().map(|w| capitalize(w)).collect::<Vec<_>>().join(" ");

        let keywords = if request.spec.keywords.is_empty() {
            draw(3, &mut rng)
        } else {
            request.spec.keywords.clone()
        };

        Ok(format!(
            "```\nTITLE: {title}\nKEYWORDS: {}\nABSTRACT: {body}\n```\n",
            keywords.join(", ")
        ))
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl TextGenerator for MockGenerator {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &GenerationRequest, seed: u64) -> Result<String, BackendError> {
        self.mock_generate(request, seed)
    }
}

/// Connection settings for a chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_concurrency: usize,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub temperature: f64,
    pub retry_malformed: u32,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://127.0.0.1:8000".into(),
            model_name: "local-llm".into(),
            api_key_env: "PROPAUG_API_KEY".into(),
            max_concurrency: 4,
            timeout_secs: 120.0,
            max_retries: 3,
            backoff_ms: 500,
            temperature: 0.8,
            retry_malformed: 0,
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_concurrency < 1 {
            return Err("max_concurrency must be at least 1".into());
        }
        if self.max_retries > 5 {
            return Err("max_retries must be at most 5".into());
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err("temperature must be non-negative".into());
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err("timeout must be positive".into());
        }
        reqwest::Url::parse(&self.base_url).map_err(|e| format!("invalid base_url: {e}"))?;
        Ok(())
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    seed: u64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    #[serde(default)]
    content: Option<String>,
}

/// Client for `POST {base_url}/v1/chat/completions`.
pub struct HttpGenerator {
    cfg: EndpointConfig,
    api_key: Option<String>,
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpGenerator {
    /// Reads the API key from the configured environment variable, if set.
    pub fn new(cfg: EndpointConfig) -> Result<Self, String> {
        cfg.validate()?;
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| e.to_string())?;
        let url = format!("{}/v1/chat/completions", cfg.base_url.trim_end_matches('/'));
        Ok(HttpGenerator {
            cfg,
            api_key,
            url,
            client,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }
}

impl TextGenerator for HttpGenerator {
    fn model_name(&self) -> &str {
        &self.cfg.model_name
    }

    fn temperature(&self) -> Option<f64> {
        Some(self.cfg.temperature)
    }

    fn complete(&self, request: &GenerationRequest, seed: u64) -> Result<String, BackendError> {
        let body = ChatRequest {
            model: &self.cfg.model_name,
            messages: [ChatMessage {
                role: "user",
                content: &request.prompt.text,
            }],
            temperature: self.cfg.temperature,
            seed,
        };
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let response = req.send().map_err(|e| BackendError {
            retryable: true,
            detail: e.to_string(),
        })?;
        let status = response.status();
        if !status.is_success() {
            return Err(BackendError {
                retryable: status.is_server_error() || status.as_u16() == 429,
                detail: format!("HTTP {status}"),
            });
        }
        let parsed: ChatResponse = response.json().map_err(|e| BackendError {
            retryable: false,
            detail: format!("bad response body: {e}"),
        })?;
        Ok(parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default())
    }

    fn batch_options(&self) -> BatchOptions {
        BatchOptions {
            max_concurrency: self.cfg.max_concurrency,
            max_retries: self.cfg.max_retries,
            backoff: Duration::from_millis(self.cfg.backoff_ms),
            retry_malformed: self.cfg.retry_malformed,
        }
    }
}
