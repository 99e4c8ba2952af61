use std::time::Duration;

use serde_json::{json, Value};

use super::{estimate_tokens, BackendKind, ChatBackend, ChatRequest, ChatResponse, GatewayError, ModelEndpoint};

const EXCERPT_CHARS: usize = 300;

/// OpenAI-compatible `POST {base_url}/chat/completions` client.
#[derive(Debug, Default, Clone)]
pub struct HttpBackend;

fn excerpt(body: &str) -> String {
    body.chars().take(EXCERPT_CHARS).collect()
}

pub(crate) fn request_body(endpoint: &ModelEndpoint, request: &ChatRequest) -> Value {
    json!({
        "model": endpoint.model_id,
        "messages": [
            {"role": "system", "content": request.system_instruction},
            {"role": "user", "content": request.user_message},
        ],
        "temperature": request.sampling.temperature,
        "top_p": request.sampling.top_p,
        "max_tokens": request.sampling.max_tokens,
    })
}

pub(crate) fn parse_completion(body: &str, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
    let v: Value = serde_json::from_str(body).map_err(|e| GatewayError::Malformed(format!("{e}: {}", excerpt(body))))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| GatewayError::Malformed(format!("missing choices[0].message.content: {}", excerpt(body))))?
        .to_string();
    let prompt_tokens = v
        .pointer("/usage/prompt_tokens")
        .and_then(Value::as_u64)
        .unwrap_or_else(|| estimate_tokens(&request.system_instruction) + estimate_tokens(&request.user_message));
    let completion_tokens = v.pointer("/usage/completion_tokens").and_then(Value::as_u64).unwrap_or_else(|| estimate_tokens(&text));
    Ok(ChatResponse { text, prompt_tokens, completion_tokens })
}

impl ChatBackend for HttpBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Http
    }

    fn call(&self, endpoint: &ModelEndpoint, request: &ChatRequest, _key: &str, _run_index: u32) -> Result<ChatResponse, GatewayError> {
        let api_key = match &endpoint.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| GatewayError::MissingKey { var: var.clone() })?),
            None => None,
        };
        let url = format!("{}/chat/completions", endpoint.base_url.trim_end_matches('/'));
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(endpoint.timeout_secs.max(1))))
            .build()
            .into();
        let mut req = agent.post(&url).header("Content-Type", "application/json");
        if let Some(k) = &api_key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = req
            .send(request_body(endpoint, request).to_string())
            .map_err(|e| GatewayError::Transport { attempts: 1, message: e.to_string() })?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| GatewayError::Transport { attempts: 1, message: e.to_string() })?;
        match status {
            200..=299 => parse_completion(&body, request),
            429 | 500..=599 => Err(GatewayError::Status { status, excerpt: excerpt(&body) }),
            _ => Err(GatewayError::Request { status, excerpt: excerpt(&body) }),
        }
    }
}
