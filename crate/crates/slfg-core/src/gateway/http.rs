//! Remote backends over the chat-completions and embeddings wire protocols.
//!
//! Describe, abstract, and answer go through `POST {base_url}/chat/completions`
//! (messages with interleaved image parts); embed goes through
//! `POST {base_url}/embeddings`. Credentials come from the environment
//! variable named in each endpoint config and are never logged.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gateway::prompts::PromptSet;
use crate::gateway::{
    validate_options, AnswerOption, CallKind, CallLedger, EmbeddingVector, ModelEndpointConfig,
    ModelGateway, ModelIds,
};
use crate::sampling::ImageRef;

/// Remote model endpoints for the four capabilities.
pub struct HttpGateway {
    describer: Endpoint,
    abstractor: Endpoint,
    embedder: Endpoint,
    answerer: Endpoint,
    prompts: PromptSet,
    ledger: CallLedger,
}

impl HttpGateway {
    pub fn new(
        describer: ModelEndpointConfig,
        abstractor: ModelEndpointConfig,
        embedder: ModelEndpointConfig,
        answerer: ModelEndpointConfig,
        prompts: PromptSet,
    ) -> Result<Self> {
        Ok(Self {
            describer: Endpoint::new(describer)?,
            abstractor: Endpoint::new(abstractor)?,
            embedder: Endpoint::new(embedder)?,
            answerer: Endpoint::new(answerer)?,
            prompts,
            ledger: CallLedger::new(),
        })
    }

    /// Runs the abstractor over a piece of text and parses the list reply,
    /// falling back to the whole reply as a single scene.
    fn text_to_scenes(&self, content: &str, prompt: &str) -> Result<Vec<String>> {
        if content.is_empty() {
            return Err(Error::invalid_arg("scene abstraction requires content"));
        }
        let text = self.abstractor.chat_completion(vec![
            json!({"role": "system", "content": prompt}),
            json!({"role": "user", "content": content}),
        ])?;
        let mut scenes = parse_numbered_list(&text);
        if scenes.is_empty() {
            tracing::debug!("abstractor reply had no list items; using whole reply as one scene");
            scenes.push(text.trim().to_string());
        }
        Ok(scenes)
    }

    /// Shrinks the retry backoff base; tests use this to keep retries fast.
    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        for e in [
            &mut self.describer,
            &mut self.abstractor,
            &mut self.embedder,
            &mut self.answerer,
        ] {
            e.backoff_base = base;
        }
        self
    }
}

impl ModelGateway for HttpGateway {
    fn describe_frames(
        &self,
        video_id: &str,
        frames: &[ImageRef],
        prompt: &str,
    ) -> Result<String> {
        let start = Instant::now();
        if frames.is_empty() {
            return Err(Error::invalid_arg("describe_frames requires frames"));
        }
        if prompt.is_empty() {
            return Err(Error::invalid_arg("describe_frames requires a prompt"));
        }
        let content = vision_content(prompt, frames)?;
        let text = self
            .describer
            .chat_completion(vec![json!({"role": "user", "content": content})])?;
        self.ledger
            .record(CallKind::Describe, video_id, start.elapsed());
        Ok(text)
    }

    fn abstract_scenes(&self, video_id: &str, content: &str, prompt: &str) -> Result<Vec<String>> {
        let start = Instant::now();
        let scenes = self.text_to_scenes(content, prompt)?;
        self.ledger
            .record(CallKind::Abstract, video_id, start.elapsed());
        Ok(scenes)
    }

    fn extract_query(&self, video_id: &str, question: &str, prompt: &str) -> Result<Vec<String>> {
        let start = Instant::now();
        let scenes = self.text_to_scenes(question, prompt)?;
        self.ledger
            .record(CallKind::Extract, video_id, start.elapsed());
        Ok(scenes)
    }

    fn embed(&self, video_id: &str, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let start = Instant::now();
        if texts.is_empty() {
            return Err(Error::invalid_arg("embed requires at least one text"));
        }
        if let Some(pos) = texts.iter().position(|t| t.is_empty()) {
            return Err(Error::invalid_arg(format!("embed input {pos} is empty")));
        }
        let body = json!({
            "model": self.embedder.config.model_name,
            "input": texts,
        });
        let reply = self.embedder.post_json("embeddings", &body)?;
        let vectors = parse_embeddings(&reply, texts.len())?;
        self.ledger
            .record(CallKind::Embed, video_id, start.elapsed());
        Ok(vectors)
    }

    fn answer(
        &self,
        video_id: &str,
        frames: &[ImageRef],
        question: &str,
        options: &[AnswerOption],
    ) -> Result<String> {
        let start = Instant::now();
        if frames.is_empty() {
            return Err(Error::invalid_arg("answer requires frames"));
        }
        validate_options(options)?;
        let prompt = self.prompts.answer_prompt(question, options);
        let content = vision_content(&prompt, frames)?;
        let text = self
            .answerer
            .chat_completion(vec![json!({"role": "user", "content": content})])?;
        self.ledger
            .record(CallKind::Answer, video_id, start.elapsed());
        Ok(text)
    }

    fn ledger(&self) -> &CallLedger {
        &self.ledger
    }

    fn model_ids(&self) -> ModelIds {
        ModelIds {
            describer: self.describer.config.model_name.clone(),
            abstractor: self.abstractor.config.model_name.clone(),
            embedder: self.embedder.config.model_name.clone(),
            answerer: self.answerer.config.model_name.clone(),
        }
    }

    fn max_concurrency(&self) -> usize {
        self.describer.config.max_in_flight
    }
}

struct Endpoint {
    config: ModelEndpointConfig,
    client: reqwest::blocking::Client,
    gate: Semaphore,
    backoff_base: Duration,
}

impl Endpoint {
    fn new(config: ModelEndpointConfig) -> Result<Self> {
        config.validate().map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", config.model_name)),
            other => other,
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let gate = Semaphore::new(config.max_in_flight);
        Ok(Self {
            config,
            client,
            gate,
            backoff_base: Duration::from_millis(250),
        })
    }

    fn chat_completion(&self, messages: Vec<Value>) -> Result<String> {
        let body = json!({
            "model": self.config.model_name,
            "messages": messages,
        });
        let reply = self.post_json("chat/completions", &body)?;
        let text = reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .unwrap_or("");
        if text.trim().is_empty() {
            return Err(Error::MalformedResponse(
                "chat completion had no message content".into(),
            ));
        }
        Ok(text.to_string())
    }

    /// POSTs with bounded concurrency and exponential-backoff retries on
    /// transport errors and retryable statuses.
    fn post_json(&self, path: &str, body: &Value) -> Result<Value> {
        let url = format!("{}/{}", self.config.base_url.trim_end_matches('/'), path);
        let api_key = if self.config.api_key_env.is_empty() {
            None
        } else {
            std::env::var(&self.config.api_key_env).ok()
        };

        let mut last_detail = String::new();
        let mut attempts = 0;
        while attempts <= self.config.max_retries {
            if attempts > 0 {
                let delay = self.backoff_base * 2u32.saturating_pow(attempts - 1);
                std::thread::sleep(delay);
            }
            attempts += 1;

            let _permit = self.gate.acquire();
            let mut req = self.client.post(&url).json(body);
            if let Some(key) = &api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp.json::<Value>().map_err(|e| {
                            Error::MalformedResponse(format!("invalid JSON body: {e}"))
                        });
                    }
                    let body = resp.text().unwrap_or_default();
                    let snippet: String = body.chars().take(200).collect();
                    last_detail = format!("{url}: HTTP {status}: {snippet}");
                    let retryable = status.as_u16() == 429 || status.is_server_error();
                    if !retryable {
                        break;
                    }
                }
                Err(e) => {
                    last_detail = format!("{url}: {e}");
                }
            }
        }
        Err(Error::BackendUnavailable {
            attempts,
            detail: last_detail,
        })
    }
}

/// Counting semaphore bounding in-flight requests per endpoint.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
        SemaphoreGuard { sem: self }
    }
}

struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.sem.permits.lock().unwrap() += 1;
        self.sem.available.notify_one();
    }
}

/// Text part followed by one image part per frame, as data URLs.
fn vision_content(prompt: &str, frames: &[ImageRef]) -> Result<Vec<Value>> {
    let mut parts = vec![json!({"type": "text", "text": prompt})];
    for frame in frames {
        let bytes = std::fs::read(frame.as_str()).map_err(|e| {
            Error::invalid_arg(format!("cannot read frame image {frame}: {e}"))
        })?;
        let encoded = base64::engine::general_purpose::STANDARD.encode(&bytes);
        let url = format!("data:{};base64,{encoded}", mime_of(frame.as_str()));
        parts.push(json!({"type": "image_url", "image_url": {"url": url}}));
    }
    Ok(parts)
}

fn mime_of(path: &str) -> &'static str {
    let lower = path.to_ascii_lowercase();
    if lower.ends_with(".png") {
        "image/png"
    } else if lower.ends_with(".webp") {
        "image/webp"
    } else {
        "image/jpeg"
    }
}

fn parse_embeddings(reply: &Value, expected: usize) -> Result<Vec<EmbeddingVector>> {
    let data = reply
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::MalformedResponse("embeddings reply has no data array".into()))?;
    if data.len() != expected {
        return Err(Error::MalformedResponse(format!(
            "expected {expected} embeddings, got {}",
            data.len()
        )));
    }
    let mut entries: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
    for (pos, item) in data.iter().enumerate() {
        let index = item
            .get("index")
            .and_then(Value::as_u64)
            .map(|i| i as usize)
            .unwrap_or(pos);
        let values: Vec<f64> = item
            .get("embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::MalformedResponse("embedding entry has no vector".into()))?
            .iter()
            .filter_map(Value::as_f64)
            .collect();
        if values.is_empty() {
            return Err(Error::MalformedResponse("embedding vector is empty".into()));
        }
        entries.push((index, values));
    }
    entries.sort_by_key(|(i, _)| *i);
    let dim = entries[0].1.len();
    if entries.iter().any(|(_, v)| v.len() != dim) {
        return Err(Error::MalformedResponse(format!(
            "embedding dimensions disagree within one batch (first is {dim})"
        )));
    }
    entries
        .into_iter()
        .map(|(_, v)| EmbeddingVector::new(v))
        .collect()
}

/// Items of a numbered or bulleted list reply. Unmarked lines before the first
/// item are treated as preamble; unmarked lines after an item continue it.
pub fn parse_numbered_list(text: &str) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(item) = strip_list_marker(line) {
            if !item.is_empty() {
                items.push(item.to_string());
            }
        } else if let Some(last) = items.last_mut() {
            last.push(' ');
            last.push_str(line);
        }
    }
    items
}

fn strip_list_marker(line: &str) -> Option<&str> {
    for bullet in ["- ", "* ", "• "] {
        if let Some(rest) = line.strip_prefix(bullet) {
            return Some(rest.trim());
        }
    }
    // "1." / "1)" / "(1)" enumerators
    let mut rest = line.strip_prefix('(').unwrap_or(line);
    let digits = rest.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    rest = &rest[digits..];
    let rest = rest
        .strip_prefix(')')
        .or_else(|| rest.strip_prefix('.'))?;
    Some(rest.trim())
}
