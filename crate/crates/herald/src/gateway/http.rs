//! OpenAI-compatible chat-completion and embedding clients.

use std::collections::BTreeMap;
use std::time::Duration;

use herald_core::retrieval::EmbeddingProvider;
use serde_json::{json, Value};

use super::{Completion, CompletionRequest, FinishReason, Provider, ProviderFailure};

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::AgentBuilder::new().timeout(timeout).build()
}

fn post(agent: &ureq::Agent, url: &str, key: Option<&str>, body: Value) -> Result<Value, ProviderFailure> {
    let mut req = agent.post(url);
    if let Some(k) = key {
        req = req.set("Authorization", &format!("Bearer {k}"));
    }
    match req.send_json(body) {
        Ok(resp) => resp.into_json().map_err(|e| ProviderFailure::Transient(format!("reading response: {e}"))),
        Err(ureq::Error::Status(code, resp)) => {
            let detail = resp.into_string().unwrap_or_default();
            let msg = format!("HTTP {code}: {}", detail.chars().take(200).collect::<String>());
            if code == 429 || code >= 500 {
                Err(ProviderFailure::Transient(msg))
            } else {
                Err(ProviderFailure::Fatal(msg))
            }
        }
        Err(ureq::Error::Transport(t)) => Err(ProviderFailure::Transient(t.to_string())),
    }
}

pub struct HttpProvider {
    base_url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        HttpProvider { base_url: base_url.into().trim_end_matches('/').to_string(), api_key, agent: agent(timeout) }
    }
}

impl Provider for HttpProvider {
    fn id(&self) -> String {
        self.base_url.clone()
    }

    fn sample(&self, req: &CompletionRequest, index: u32) -> Result<Completion, ProviderFailure> {
        let body = json!({
            "model": req.model_id,
            "messages": [{"role": "user", "content": req.prompt_text}],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
            "n": 1,
            "seed": index,
        });
        let url = format!("{}/chat/completions", self.base_url);
        let value = post(&self.agent, &url, self.api_key.as_deref(), body)?;
        let choice = value
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| ProviderFailure::Transient("response has no choices".into()))?;
        let text = choice.pointer("/message/content").and_then(Value::as_str).unwrap_or("").to_string();
        let finish_reason = match choice.get("finish_reason").and_then(Value::as_str) {
            Some("stop") | None => FinishReason::Stop,
            Some("length") => FinishReason::Length,
            Some(_) => FinishReason::Error,
        };
        let mut provider_meta = BTreeMap::new();
        if let Some(usage) = value.get("usage") {
            provider_meta.insert("usage".into(), usage.clone());
        }
        Ok(Completion { text, finish_reason, provider_meta })
    }
}

pub struct HttpEmbedder {
    base_url: String,
    model_id: String,
    api_key: Option<String>,
    dim: usize,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(base_url: impl Into<String>, model_id: impl Into<String>, api_key: Option<String>, dim: usize, timeout: Duration) -> Self {
        HttpEmbedder {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model_id: model_id.into(),
            api_key,
            dim,
            agent: agent(timeout),
        }
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn provider_id(&self) -> String {
        format!("{}#{}", self.base_url, self.model_id)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, String> {
        let url = format!("{}/embeddings", self.base_url);
        let value = post(&self.agent, &url, self.api_key.as_deref(), json!({"model": self.model_id, "input": text}))
            .map_err(|e| e.to_string())?;
        let arr = value
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| "response has no embedding".to_string())?;
        arr.iter().map(|v| v.as_f64().ok_or_else(|| "non-numeric embedding entry".to_string())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unreachable_endpoint_is_transient() {
        let p = HttpProvider::new("http://127.0.0.1:9/", None, Duration::from_millis(200));
        let req = CompletionRequest { prompt_text: "x".into(), sample_count: 1, temperature: 0.0, max_output_tokens: 1, model_id: "m".into() };
        assert!(matches!(p.sample(&req, 0), Err(ProviderFailure::Transient(_))));
        let e = HttpEmbedder::new("http://127.0.0.1:9", "e", None, 4, Duration::from_millis(200));
        assert!(e.embed_text("x").is_err());
    }
}
