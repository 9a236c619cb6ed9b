//! Completion gateway: bounded concurrency, retries with exponential
//! backoff, a request budget and an optional content-addressed disk cache in
//! front of any [`Provider`].

mod http;
mod mock;

pub use http::{HttpEmbedder, HttpProvider};
pub use mock::{InFlightProbe, MockBehaviour, MockProvider};

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use herald_core::digest::digest;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SAMPLE_CAP: u32 = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt_text: String,
    pub sample_count: u32,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub model_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub finish_reason: FinishReason,
    #[serde(default)]
    pub provider_meta: BTreeMap<String, serde_json::Value>,
}

impl Completion {
    pub fn stop(text: impl Into<String>) -> Self {
        Completion { text: text.into(), finish_reason: FinishReason::Stop, provider_meta: BTreeMap::new() }
    }

    fn normalized(mut self) -> Self {
        if self.finish_reason == FinishReason::Error {
            self.text.clear();
        }
        self
    }
}

/// How a single provider call failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderFailure {
    /// Worth retrying (timeouts, rate limits, 5xx).
    #[error("transient: {0}")]
    Transient(String),
    /// Retrying cannot help (bad credentials, malformed request).
    #[error("fatal: {0}")]
    Fatal(String),
}

/// One backend able to produce the `index`-th sample for a request.
pub trait Provider: Send + Sync {
    fn id(&self) -> String;
    fn sample(&self, req: &CompletionRequest, index: u32) -> Result<Completion, ProviderFailure>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub max_in_flight: usize,
    pub retry_limit: u32,
    pub backoff_base_ms: u64,
    pub cache_dir: Option<PathBuf>,
    pub sample_cap: u32,
    /// Maximum provider calls over the gateway's lifetime (cache hits are free).
    pub request_budget: Option<u64>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            max_in_flight: 8,
            retry_limit: 3,
            backoff_base_ms: 200,
            cache_dir: None,
            sample_cap: DEFAULT_SAMPLE_CAP,
            request_budget: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider `{provider}` exhausted after {attempts} attempt(s): {last_error}")]
    ProviderExhausted { provider: String, attempts: u32, last_error: String },
    #[error("request budget of {0} provider calls exceeded")]
    BudgetExceeded(u64),
    #[error("cache {path}: {source}")]
    Cache { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GatewayStats {
    pub requests: u64,
    pub retries: u64,
    pub cache_hits: u64,
}

/// Counting semaphore over `Mutex` + `Condvar`.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slot lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("slot lock");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slot lock") += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    provider: Arc<dyn Provider>,
    config: GatewayConfig,
    slots: Slots,
    requests: AtomicU64,
    retries: AtomicU64,
    cache_hits: AtomicU64,
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>, mut config: GatewayConfig) -> Self {
        config.max_in_flight = config.max_in_flight.max(1);
        Gateway {
            provider,
            slots: Slots { free: Mutex::new(config.max_in_flight), cv: Condvar::new() },
            config,
            requests: AtomicU64::new(0),
            retries: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    pub fn provider_id(&self) -> String {
        self.provider.id()
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            requests: self.requests.load(Ordering::SeqCst),
            retries: self.retries.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
        }
    }

    fn check(&self, req: &CompletionRequest) -> Result<(), GatewayError> {
        let bad = |m: String| Err(GatewayError::InvalidRequest(m));
        if req.sample_count == 0 || req.sample_count > self.config.sample_cap {
            return bad(format!("sample_count {} outside 1..={}", req.sample_count, self.config.sample_cap));
        }
        if !(req.temperature.is_finite() && req.temperature >= 0.0) {
            return bad(format!("temperature {} must be finite and non-negative", req.temperature));
        }
        if req.max_output_tokens == 0 {
            return bad("max_output_tokens must be at least 1".into());
        }
        Ok(())
    }

    /// Exactly `sample_count` completions, in sample-index order.
    pub fn complete(&self, req: &CompletionRequest) -> Result<Vec<Completion>, GatewayError> {
        self.check(req)?;
        let n = req.sample_count as usize;
        let workers = self.config.max_in_flight.min(n);
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<Result<Completion, GatewayError>>>> = Mutex::new((0..n).map(|_| None).collect());
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= n {
                        break;
                    }
                    let r = self.one(req, i as u32);
                    let failed = r.is_err();
                    results.lock().expect("results lock")[i] = Some(r);
                    if failed {
                        // stop handing out further indices
                        next.store(n, Ordering::SeqCst);
                    }
                });
            }
        });
        let mut out = Vec::with_capacity(n);
        for r in results.into_inner().expect("results lock") {
            match r {
                Some(r) => out.push(r?),
                None => continue,
            }
        }
        if out.len() != n {
            // an error occurred in a slot after the first missing one
            unreachable!("missing completion without an error");
        }
        Ok(out)
    }

    fn cache_path(&self, req: &CompletionRequest, index: u32) -> Option<PathBuf> {
        let dir = self.config.cache_dir.as_ref()?;
        let key = digest(&format!(
            "{}\0{}\0{:016x}\0{}",
            digest(&req.prompt_text),
            req.model_id,
            req.temperature.to_bits(),
            index
        ));
        Some(dir.join(&key[..2]).join(format!("{key}.json")))
    }

    fn one(&self, req: &CompletionRequest, index: u32) -> Result<Completion, GatewayError> {
        let cache = self.cache_path(req, index);
        if let Some(path) = &cache {
            if let Ok(bytes) = fs::read(path) {
                if let Ok(hit) = serde_json::from_slice::<Completion>(&bytes) {
                    self.cache_hits.fetch_add(1, Ordering::SeqCst);
                    return Ok(hit);
                }
            }
        }
        let mut attempt = 0u32;
        let completion = loop {
            if let Some(budget) = self.config.request_budget {
                let used = self.requests.fetch_add(1, Ordering::SeqCst);
                if used >= budget {
                    self.requests.fetch_sub(1, Ordering::SeqCst);
                    return Err(GatewayError::BudgetExceeded(budget));
                }
            } else {
                self.requests.fetch_add(1, Ordering::SeqCst);
            }
            let result = {
                let _slot = self.slots.acquire();
                self.provider.sample(req, index)
            };
            match result {
                Ok(c) => break c.normalized(),
                Err(ProviderFailure::Transient(e)) if attempt < self.config.retry_limit => {
                    let wait = self.config.backoff_base_ms.saturating_mul(1u64 << attempt.min(20));
                    attempt += 1;
                    self.retries.fetch_add(1, Ordering::SeqCst);
                    let _ = e;
                    thread::sleep(Duration::from_millis(wait));
                }
                Err(e) => {
                    return Err(GatewayError::ProviderExhausted {
                        provider: self.provider.id(),
                        attempts: attempt + 1,
                        last_error: e.to_string(),
                    })
                }
            }
        };
        if let Some(path) = &cache {
            if completion.finish_reason != FinishReason::Error {
                write_cache(path, &completion)?;
            }
        }
        Ok(completion)
    }
}

fn write_cache(path: &PathBuf, c: &Completion) -> Result<(), GatewayError> {
    let err = |source| GatewayError::Cache { path: path.clone(), source };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(err)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, serde_json::to_vec(c).expect("completion serializes")).map_err(err)?;
    fs::rename(&tmp, path).map_err(err)
}

/// A gateway plus the sampling parameters of one pipeline role.
#[derive(Clone)]
pub struct RoleClient {
    pub role: String,
    pub gateway: Arc<Gateway>,
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl RoleClient {
    pub fn request(&self, prompt_text: &str, sample_count: u32) -> CompletionRequest {
        CompletionRequest {
            prompt_text: prompt_text.into(),
            sample_count,
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
            model_id: self.model_id.clone(),
        }
    }

    pub fn complete(&self, prompt_text: &str, sample_count: u32) -> Result<Vec<Completion>, GatewayError> {
        self.gateway.complete(&self.request(prompt_text, sample_count))
    }

    /// First sample's text.
    pub fn ask(&self, prompt_text: &str) -> Result<String, GatewayError> {
        Ok(self.complete(prompt_text, 1)?.remove(0).text)
    }
}
