//! Chat-completion HTTP backend.
//!
//! Wire shape: request `{model, messages: [{role, content}], temperature,
//! max_tokens}`, response `{choices: [{message: {content}}]}`. Exploration
//! roles run at the exploration temperature, final answer generation at the
//! deterministic one. Structured roles get one repair re-prompt before a
//! schema error surfaces.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{render_prompt, RawBackend, ReasonerError, Role, RoleInputs};
use crate::config::BackendConfig;

/// Counting semaphore bounding in-flight requests.
struct Limiter {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Limiter {
        Limiter { permits: Mutex::new(n), cv: Condvar::new() }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut permits = self.permits.lock().expect("limiter lock");
        while *permits == 0 {
            permits = self.cv.wait(permits).expect("limiter wait");
        }
        *permits -= 1;
        LimiterGuard { limiter: self }
    }
}

struct LimiterGuard<'a> {
    limiter: &'a Limiter,
}

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.limiter.permits.lock().expect("limiter lock") += 1;
        self.limiter.cv.notify_one();
    }
}

pub struct HttpBackend {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    temperature_explore: f32,
    temperature_answer: f32,
    max_tokens: u32,
    timeout: Duration,
    limiter: Limiter,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f32,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: MessageBody,
}

#[derive(Deserialize)]
struct MessageBody {
    content: String,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> HttpBackend {
        Self::with_config(endpoint, model, &BackendConfig::default())
    }

    pub fn with_config(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        cfg: &BackendConfig,
    ) -> HttpBackend {
        let timeout = Duration::from_secs(cfg.timeout_secs.max(1));
        HttpBackend {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: std::env::var(&cfg.api_key_env).ok(),
            temperature_explore: cfg.temperature_explore,
            temperature_answer: cfg.temperature_answer,
            max_tokens: cfg.max_tokens,
            timeout,
            limiter: Limiter::new(cfg.max_in_flight.max(1)),
            client: reqwest::blocking::Client::builder()
                .timeout(timeout)
                .build()
                .expect("client builds"),
        }
    }

    fn temperature(&self, role: Role) -> f32 {
        if role.is_exploration() {
            self.temperature_explore
        } else {
            self.temperature_answer
        }
    }

    fn complete(&self, role: Role, prompt: &str) -> Result<String, ReasonerError> {
        let _permit = self.limiter.acquire();
        let body = ChatRequest {
            model: &self.model,
            messages: vec![ChatMessage { role: "user", content: prompt }],
            temperature: self.temperature(role),
            max_tokens: self.max_tokens,
        };
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                ReasonerError::Timeout(self.timeout)
            } else {
                ReasonerError::Transport(e.to_string())
            }
        })?;
        let resp = resp
            .error_for_status()
            .map_err(|e| ReasonerError::Transport(e.to_string()))?;
        let parsed: ChatResponse =
            resp.json().map_err(|e| ReasonerError::Transport(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| ReasonerError::Transport("response has no choices".to_string()))
    }
}

impl RawBackend for HttpBackend {
    fn name(&self) -> &'static str {
        "http"
    }

    fn respond(&self, role: Role, inputs: &RoleInputs) -> Result<String, ReasonerError> {
        self.complete(role, &render_prompt(role, inputs))
    }

    fn repair(
        &self,
        role: Role,
        inputs: &RoleInputs,
        error: &str,
    ) -> Option<Result<String, ReasonerError>> {
        let prompt = format!(
            "{}\n\nYour previous response could not be parsed ({error}). \
             Respond again following the required format exactly.",
            render_prompt(role, inputs)
        );
        Some(self.complete(role, &prompt))
    }
}
