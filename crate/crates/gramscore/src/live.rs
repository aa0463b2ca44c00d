//! HTTP client for an OpenAI-compatible chat completions endpoint.

use std::time::Duration;

use anyhow::{bail, Result};
use serde_json::{json, Value};

use gramscore_core::prompt::LlmClient;
use gramscore_core::Error;

pub const ENV_ENDPOINT: &str = "GRAMSCORE_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "GRAMSCORE_LLM_API_KEY";
pub const ENV_MODEL: &str = "GRAMSCORE_LLM_MODEL";

pub struct LiveClient {
    agent: ureq::Agent,
    endpoint: String,
    api_key: String,
    model: String,
}

impl std::fmt::Debug for LiveClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveClient")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl LiveClient {
    pub fn new(endpoint: String, api_key: String, model: String) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        LiveClient {
            agent,
            endpoint,
            api_key,
            model,
        }
    }

    /// Reads the endpoint, key and model name from the environment. Fails
    /// before any request is made if one is missing.
    pub fn from_env() -> Result<Self> {
        let get = |name: &str| std::env::var(name).ok().filter(|v| !v.trim().is_empty());
        let mut missing = Vec::new();
        let endpoint = get(ENV_ENDPOINT);
        let api_key = get(ENV_API_KEY);
        let model = get(ENV_MODEL);
        for (name, v) in [(ENV_ENDPOINT, &endpoint), (ENV_API_KEY, &api_key), (ENV_MODEL, &model)] {
            if v.is_none() {
                missing.push(name);
            }
        }
        if !missing.is_empty() {
            bail!("live backend needs environment variables {}", missing.join(", "));
        }
        Ok(LiveClient::new(endpoint.unwrap(), api_key.unwrap(), model.unwrap()))
    }

    fn request(&self, prompt: &str) -> Result<String> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{ "role": "user", "content": prompt }],
        });
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)?;
        let v: Value = resp.body_mut().read_json()?;
        match v.pointer("/choices/0/message/content").and_then(Value::as_str) {
            Some(s) => Ok(s.to_owned()),
            None => bail!("response has no choices[0].message.content"),
        }
    }
}

impl LlmClient for LiveClient {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str) -> gramscore_core::Result<String> {
        self.request(prompt).map_err(|e| Error::Client(format!("{e:#}")))
    }
}
