//! HTTP adapter for OpenAI-compatible chat-completions and embeddings APIs.
//!
//! Credentials are read from the environment variable `{PROVIDER_ID}_API_KEY`
//! with the provider id upper-cased (for example `OPENAI_API_KEY`). Status
//! 429 and 5xx responses and transport errors are reported as retryable so
//! the gateway's backoff loop handles them; 401/403 map to authentication
//! errors and other statuses are fatal provider errors.

use super::{ChatRequest, EmbedRequest, GatewayError, Provider, ProviderFailure};
use serde_json::json;

pub struct HttpProvider {
    id: String,
    base_url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    /// `base_url` is the API root, e.g. `https://api.openai.com/v1`.
    pub fn new(id: &str, base_url: &str) -> Self {
        let env_var = format!("{}_API_KEY", id.to_uppercase().replace('-', "_"));
        Self {
            id: id.to_string(),
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: std::env::var(env_var).ok(),
            client: reqwest::blocking::Client::new(),
        }
    }

    pub fn with_api_key(mut self, key: &str) -> Self {
        self.api_key = Some(key.to_string());
        self
    }

    fn post(&self, path: &str, body: serde_json::Value) -> Result<serde_json::Value, ProviderFailure> {
        let key = self.api_key.as_deref().ok_or_else(|| {
            ProviderFailure::Fatal(GatewayError::Auth(self.id.clone()))
        })?;
        let response = self
            .client
            .post(format!("{}{}", self.base_url, path))
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| ProviderFailure::Retryable(format!("transport: {e}")))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(ProviderFailure::Retryable(format!("status {status}")));
        }
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(ProviderFailure::Fatal(GatewayError::Auth(self.id.clone())));
        }
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(ProviderFailure::Fatal(GatewayError::Provider(format!(
                "status {status}: {text}"
            ))));
        }
        response
            .json()
            .map_err(|e| ProviderFailure::Fatal(GatewayError::Provider(format!("bad json: {e}"))))
    }
}

impl Provider for HttpProvider {
    fn chat_once(&self, request: &ChatRequest) -> Result<String, ProviderFailure> {
        let mut body = json!({
            "model": request.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        let payload = self.post("/chat/completions", body)?;
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                ProviderFailure::Fatal(GatewayError::Provider(
                    "response missing choices[0].message.content".into(),
                ))
            })
    }

    fn embed_once(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, ProviderFailure> {
        let body = json!({
            "model": request.model,
            "input": request.texts,
        });
        let payload = self.post("/embeddings", body)?;
        let data = payload["data"].as_array().ok_or_else(|| {
            ProviderFailure::Fatal(GatewayError::Provider("response missing data".into()))
        })?;
        let mut items: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
        for item in data {
            let index = item["index"].as_u64().unwrap_or(items.len() as u64) as usize;
            let vector = item["embedding"]
                .as_array()
                .ok_or_else(|| {
                    ProviderFailure::Fatal(GatewayError::Provider("missing embedding".into()))
                })?
                .iter()
                .map(|v| v.as_f64().unwrap_or(0.0))
                .collect();
            items.push((index, vector));
        }
        items.sort_by_key(|(i, _)| *i);
        Ok(items.into_iter().map(|(_, v)| v).collect())
    }
}
