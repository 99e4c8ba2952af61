use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{estimate_tokens, BackendKind, ChatBackend, ChatRequest, ChatResponse, GatewayError, ModelEndpoint};
use crate::error::{Error, Result};

/// A substring rule; every present condition must hold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StubRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_contains: Option<String>,
    /// Every listed substring must occur in the user message.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub user_contains_all: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_excludes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_excludes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_index: Option<u32>,
    pub response: String,
}

impl StubRule {
    fn matches(&self, model_id: &str, req: &ChatRequest, run_index: u32) -> bool {
        self.model_id.as_deref().is_none_or(|m| m == model_id)
            && self.system_contains.as_deref().is_none_or(|s| req.system_instruction.contains(s))
            && self.user_contains.as_deref().is_none_or(|s| req.user_message.contains(s))
            && self.user_contains_all.iter().all(|s| req.user_message.contains(s.as_str()))
            && self.system_excludes.as_deref().is_none_or(|s| !req.system_instruction.contains(s))
            && self.user_excludes.as_deref().is_none_or(|s| !req.user_message.contains(s))
            && self.run_index.is_none_or(|r| r == run_index)
    }
}

/// Scripted responses: exact cache keys first, then rules in order, then the default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StubScript {
    #[serde(default)]
    pub exact: BTreeMap<String, String>,
    #[serde(default)]
    pub rules: Vec<StubRule>,
    #[serde(default)]
    pub default: Option<String>,
}

impl StubScript {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn lookup(&self, model_id: &str, req: &ChatRequest, key: &str, run_index: u32) -> Option<&str> {
        if let Some(t) = self.exact.get(key) {
            return Some(t);
        }
        self.rules
            .iter()
            .find(|r| r.matches(model_id, req, run_index))
            .map(|r| r.response.as_str())
            .or(self.default.as_deref())
    }
}

#[derive(Debug, Clone, Default)]
pub struct StubBackend {
    pub script: StubScript,
}

impl StubBackend {
    pub fn new(script: StubScript) -> Self {
        StubBackend { script }
    }
}

impl ChatBackend for StubBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Stub
    }

    fn call(&self, endpoint: &ModelEndpoint, request: &ChatRequest, key: &str, run_index: u32) -> std::result::Result<ChatResponse, GatewayError> {
        let text = self
            .script
            .lookup(&endpoint.model_id, request, key, run_index)
            .ok_or_else(|| GatewayError::Stub(format!("no scripted response for key {key}")))?;
        Ok(ChatResponse {
            text: text.to_string(),
            prompt_tokens: estimate_tokens(&request.system_instruction) + estimate_tokens(&request.user_message),
            completion_tokens: estimate_tokens(text),
        })
    }
}
