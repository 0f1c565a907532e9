//! HTTP protocol for remote tool servers.
//!
//! `GET /cards` lists the server's cards. `POST /invoke` runs one tool; a
//! `200` body is a [`ToolResult`], a `422` body is `{"error": ToolError}`.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::frames::VisibleFrameDictionary;
use crate::model::{FrameIndex, QAInstance, SyntheticVideo};
use crate::registry::{RegistryError, ToolCard, ToolRegistry};
use crate::rng::StreamKey;
use crate::tool::{ToolBackend, ToolCall, ToolError, ToolResult};
use crate::trace::digest;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const CARDS_ROUTE: &str = "/cards";
pub const INVOKE_ROUTE: &str = "/invoke";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvokeRequest {
    pub tool: String,
    pub args: Value,
    /// Current keys of the visible frame dictionary.
    pub frames: Vec<FrameIndex>,
    pub context_digest: String,
    pub video_id: String,
    pub question_id: String,
    pub stream: StreamKey,
    /// Full dictionary snapshot; `context_digest` is its digest.
    pub dictionary: VisibleFrameDictionary,
}

impl InvokeRequest {
    pub fn from_call(call: &ToolCall<'_>) -> Self {
        Self {
            tool: call.tool.to_string(),
            args: call.args.clone(),
            frames: call.dict.keys().collect(),
            context_digest: dict_digest(call.dict),
            video_id: call.video.video_id.clone(),
            question_id: call.qa.question_id.clone(),
            stream: call.stream.clone(),
            dictionary: call.dict.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub error: ToolError,
}

pub fn dict_digest(dict: &VisibleFrameDictionary) -> String {
    digest(&serde_json::to_value(dict).unwrap_or(Value::Null))
}

#[derive(Debug, Error)]
pub enum HandshakeError {
    #[error("could not fetch cards from {endpoint}: {message}")]
    Unreachable { endpoint: String, message: String },
    #[error("card list from {endpoint} is malformed: {message}")]
    Malformed { endpoint: String, message: String },
    #[error("server advertises card `{0}` which is not registered locally")]
    UnknownCard(String),
    #[error("card `{0}` differs from the local card of the same name")]
    CardMismatch(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

impl HandshakeError {
    /// The offending card, when the error is about one.
    pub fn card(&self) -> Option<&str> {
        match self {
            HandshakeError::UnknownCard(c) | HandshakeError::CardMismatch(c) => Some(c),
            _ => None,
        }
    }
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into()
}

fn url(endpoint: &str, route: &str) -> String {
    format!("{}{route}", endpoint.trim_end_matches('/'))
}

/// Fetches the server's cards and checks each against the local card
/// with the same name, comparing serialized bytes.
pub fn handshake(endpoint: &str, local: &ToolRegistry, timeout: Duration) -> Result<Vec<ToolCard>, HandshakeError> {
    let unreachable = |message: String| HandshakeError::Unreachable { endpoint: endpoint.to_string(), message };
    let mut resp = agent(timeout).get(&url(endpoint, CARDS_ROUTE)).call().map_err(|e| unreachable(e.to_string()))?;
    let status = resp.status().as_u16();
    let body = resp.body_mut().read_to_string().map_err(|e| unreachable(e.to_string()))?;
    if status != 200 {
        return Err(unreachable(format!("HTTP {status}: {body}")));
    }
    let cards: Vec<ToolCard> = serde_json::from_str(&body)
        .map_err(|e| HandshakeError::Malformed { endpoint: endpoint.to_string(), message: e.to_string() })?;
    check_cards(&cards, local)?;
    Ok(cards)
}

pub fn check_cards(cards: &[ToolCard], local: &ToolRegistry) -> Result<(), HandshakeError> {
    for c in cards {
        let mine = local.card(&c.name).ok_or_else(|| HandshakeError::UnknownCard(c.name.clone()))?;
        let a = serde_json::to_vec(mine).expect("cards serialize");
        let b = serde_json::to_vec(c).expect("cards serialize");
        if a != b {
            return Err(HandshakeError::CardMismatch(c.name.clone()));
        }
    }
    Ok(())
}

/// Backend forwarding every call to a tool server.
#[derive(Debug, Clone)]
pub struct RemoteToolBackend {
    endpoint: String,
    agent: ureq::Agent,
    timeout: Duration,
    cards: BTreeMap<String, ToolCard>,
}

impl RemoteToolBackend {
    /// `cards` are the handshaken cards; responses are checked against them.
    pub fn new(endpoint: impl Into<String>, cards: Vec<ToolCard>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            agent: agent(timeout),
            timeout,
            cards: cards.into_iter().map(|c| (c.name.clone(), c)).collect(),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn card_names(&self) -> impl Iterator<Item = &str> {
        self.cards.keys().map(String::as_str)
    }

    pub fn remote_invoke(&self, request: &InvokeRequest) -> Result<ToolResult, ToolError> {
        let card = self.cards.get(&request.tool).ok_or_else(|| ToolError::ToolNotFound(request.tool.clone()))?;
        let sent = self.agent.post(&url(&self.endpoint, INVOKE_ROUTE)).send_json(request);
        let mut resp = match sent {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(ToolError::ToolTimeout(self.timeout.as_millis() as u64)),
            Err(e) => return Err(ToolError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        let body = match resp.body_mut().read_to_string() {
            Ok(b) => b,
            Err(ureq::Error::Timeout(_)) => return Err(ToolError::ToolTimeout(self.timeout.as_millis() as u64)),
            Err(e) => return Err(ToolError::Transport(e.to_string())),
        };
        match status {
            200 => {
                let result: ToolResult = serde_json::from_str(&body)
                    .map_err(|e| ToolError::ProtocolViolation(format!("response of {} is not a ToolResult: {e}", card.name)))?;
                if result.tool_name != card.name {
                    return Err(ToolError::ProtocolViolation(format!(
                        "asked for {} but the server answered as {}",
                        card.name, result.tool_name
                    )));
                }
                card.validate_output(&result.payload)
                    .map_err(|e| ToolError::ProtocolViolation(format!("output of {}: {e}", card.name)))?;
                Ok(result)
            }
            422 => match serde_json::from_str::<ErrorReply>(&body) {
                Ok(r) => Err(r.error),
                Err(_) => Err(ToolError::ProtocolViolation(format!("HTTP 422 without an error body: {body}"))),
            },
            s if s >= 500 => Err(ToolError::ToolServerError { status: s, body }),
            s => Err(ToolError::ProtocolViolation(format!("HTTP {s}: {body}"))),
        }
    }
}

impl ToolBackend for RemoteToolBackend {
    fn invoke(&self, call: &ToolCall<'_>) -> Result<ToolResult, ToolError> {
        self.remote_invoke(&InvokeRequest::from_call(call))
    }
}

/// Handshakes with `endpoint` and binds its cards to a remote backend.
/// Returns the names bound; an empty server binds nothing.
pub fn bind_remote(registry: &mut ToolRegistry, endpoint: &str, timeout: Duration) -> Result<Vec<String>, HandshakeError> {
    let cards = handshake(endpoint, registry, timeout)?;
    let names: Vec<String> = cards.iter().map(|c| c.name.clone()).collect();
    if names.is_empty() {
        return Ok(names);
    }
    let backend: std::sync::Arc<dyn ToolBackend> = std::sync::Arc::new(RemoteToolBackend::new(endpoint, cards, timeout));
    for n in &names {
        registry.bind(n, backend.clone())?;
    }
    Ok(names)
}

/// Server-side half for a mock server: answers an invoke request with an
/// in-process backend. Returns the HTTP status and JSON body.
pub fn serve_invoke(
    body: &str,
    videos: &BTreeMap<&str, &SyntheticVideo>,
    questions: &BTreeMap<&str, &QAInstance>,
    backend: &dyn ToolBackend,
) -> (u16, String) {
    let req: InvokeRequest = match serde_json::from_str(body) {
        Ok(r) => r,
        Err(e) => return (400, serde_json::json!({"message": e.to_string()}).to_string()),
    };
    let (Some(video), Some(qa)) = (videos.get(req.video_id.as_str()), questions.get(req.question_id.as_str())) else {
        return (400, serde_json::json!({"message": "unknown video or question"}).to_string());
    };
    if dict_digest(&req.dictionary) != req.context_digest {
        return (400, serde_json::json!({"message": "context digest does not match the dictionary"}).to_string());
    }
    let call = ToolCall { tool: &req.tool, args: &req.args, video, qa, dict: &req.dictionary, stream: &req.stream };
    match backend.invoke(&call) {
        Ok(r) => (200, serde_json::to_string(&r).expect("result serializes")),
        Err(error) => (422, serde_json::to_string(&ErrorReply { error }).expect("error serializes")),
    }
}
