//! Chat-completions requests, retries and tool-call extraction.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{GatewayConfig, API_KEY_ENV};
use crate::schema::ToolSchema;
use crate::GatewayError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    pub arguments: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub calls: Vec<ToolCall>,
    /// Free text the model returned alongside or instead of tool calls.
    pub content: Option<String>,
    pub attempts: u32,
    /// Set when the call list is empty because every attempt was unusable.
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout,
    Unreachable(String),
    /// Non-success HTTP status with the response body.
    Status(u16, String),
}

/// Sends one chat-completions request body and returns the decoded response body.
pub trait Transport: Send + Sync {
    fn post(&self, body: &Value, timeout: Duration) -> Result<Value, TransportError>;
}

/// Plain HTTP(S) transport. Picks up a bearer token from [`API_KEY_ENV`].
pub struct HttpTransport {
    endpoint: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        }
    }

    pub fn from_config(config: &GatewayConfig) -> Self {
        Self::new(config.endpoint.clone())
    }
}

impl Transport for HttpTransport {
    fn post(&self, body: &Value, timeout: Duration) -> Result<Value, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {k}"));
        }
        let mut resp = req.send(body.to_string()).map_err(classify)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(classify)?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status(status, text));
        }
        serde_json::from_str(&text).or(Ok(Value::String(text)))
    }
}

fn classify(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        ureq::Error::Io(io) if matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) => {
            TransportError::Timeout
        }
        other => TransportError::Unreachable(other.to_string()),
    }
}

fn request_body(config: &GatewayConfig, messages: &[ChatMessage], tools: &[ToolSchema]) -> Value {
    let mut body = json!({
        "model": config.model,
        "messages": messages,
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    });
    if !tools.is_empty() {
        body["tools"] = Value::Array(tools.iter().map(ToolSchema::to_json).collect());
        body["tool_choice"] = Value::from("auto");
    }
    body
}

enum Bad {
    Malformed(String),
    Schema(String),
}

/// Sends the conversation and returns the tool calls of the first usable answer.
///
/// Timeouts, 429 and 5xx answers, malformed payloads and schema violations
/// are retried up to `config.retries` extra times. When attempts run out the
/// result depends on the last failure: timeouts and transport faults give
/// `EndpointUnreachable`, schema violations give `SchemaViolation`, and
/// malformed payloads give an empty call list with a diagnostic.
pub fn complete(
    config: &GatewayConfig,
    transport: &dyn Transport,
    messages: &[ChatMessage],
    tools: &[ToolSchema],
) -> Result<Completion, GatewayError> {
    config.validate()?;
    let body = request_body(config, messages, tools);
    let mut last = None;
    let mut attempts = 0;
    for _ in 0..=config.retries {
        attempts += 1;
        match transport.post(&body, config.timeout()) {
            Ok(resp) => match parse_response(&resp, tools) {
                Ok((calls, content)) => {
                    return Ok(Completion {
                        calls,
                        content,
                        attempts,
                        diagnostic: None,
                    })
                }
                Err(b) => last = Some(Err(b)),
            },
            Err(TransportError::Unreachable(e)) => return Err(GatewayError::EndpointUnreachable(e)),
            Err(TransportError::Status(s, text)) if s != 429 && s < 500 => {
                return Err(GatewayError::EndpointUnreachable(format!("HTTP {s}: {}", truncate(&text, 200))))
            }
            Err(e) => last = Some(Ok(e)),
        }
    }
    match last {
        Some(Err(Bad::Malformed(d))) => Ok(Completion {
            calls: Vec::new(),
            content: None,
            attempts,
            diagnostic: Some(format!("no usable answer after {attempts} attempts: {d}")),
        }),
        Some(Err(Bad::Schema(d))) => Err(GatewayError::SchemaViolation(d)),
        Some(Ok(TransportError::Status(s, _))) => {
            Err(GatewayError::EndpointUnreachable(format!("HTTP {s} after {attempts} attempts")))
        }
        _ => Err(GatewayError::EndpointUnreachable(format!("timed out after {attempts} attempts"))),
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Extracts validated tool calls from a chat-completions response body.
pub fn parse_tool_calls(resp: &Value, tools: &[ToolSchema]) -> Result<Vec<ToolCall>, GatewayError> {
    match parse_response(resp, tools) {
        Ok((calls, _)) => Ok(calls),
        Err(Bad::Malformed(d)) | Err(Bad::Schema(d)) => Err(GatewayError::SchemaViolation(d)),
    }
}

fn parse_response(resp: &Value, tools: &[ToolSchema]) -> Result<(Vec<ToolCall>, Option<String>), Bad> {
    let msg = resp
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .ok_or_else(|| Bad::Malformed("response has no choices[0].message".into()))?;
    let content = msg.get("content").and_then(Value::as_str).map(str::to_string);

    if let Some(native) = msg.get("tool_calls").and_then(Value::as_array).filter(|a| !a.is_empty()) {
        let mut calls = Vec::new();
        for tc in native {
            let f = tc
                .get("function")
                .ok_or_else(|| Bad::Malformed("tool call without function".into()))?;
            calls.push(raw_call(f).ok_or_else(|| Bad::Malformed(format!("unreadable tool call {f}")))?);
        }
        return check_all(calls, tools).map(|c| (c, content));
    }

    let Some(text) = content.as_deref() else {
        return Ok((Vec::new(), None));
    };
    let blocks = fenced_blocks(text);
    if blocks.is_empty() {
        return Ok((Vec::new(), content));
    }
    let mut first_err = None;
    for b in blocks {
        let Ok(v) = serde_json::from_str::<Value>(b) else {
            continue;
        };
        let items = match v {
            Value::Array(items) => items,
            one => vec![one],
        };
        let calls: Option<Vec<ToolCall>> = items.iter().map(raw_call).collect();
        match calls.map(|c| check_all(c, tools)) {
            Some(Ok(c)) if !c.is_empty() => return Ok((c, content)),
            Some(Err(e)) => {
                first_err.get_or_insert(e);
            }
            _ => {}
        }
    }
    Err(first_err.unwrap_or_else(|| Bad::Malformed("fenced block is not a tool call".into())))
}

/// `{"name": .., "arguments": ..}` where arguments may be an object or a JSON string.
fn raw_call(v: &Value) -> Option<ToolCall> {
    let name = v.get("name")?.as_str()?.to_string();
    let arguments = match v.get("arguments").or_else(|| v.get("parameters")) {
        None | Some(Value::Null) => json!({}),
        Some(Value::String(s)) if s.trim().is_empty() => json!({}),
        Some(Value::String(s)) => serde_json::from_str(s).ok()?,
        Some(other) => other.clone(),
    };
    Some(ToolCall { name, arguments })
}

fn check_all(calls: Vec<ToolCall>, tools: &[ToolSchema]) -> Result<Vec<ToolCall>, Bad> {
    for c in &calls {
        let schema = tools
            .iter()
            .find(|t| t.name == c.name)
            .ok_or_else(|| Bad::Schema(format!("unknown tool {:?}", c.name)))?;
        schema.validate(&c.arguments).map_err(Bad::Schema)?;
    }
    Ok(calls)
}

/// Bodies of triple-backtick blocks, language tag stripped.
fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let body = &after[body_start..];
        match body.find("```") {
            Some(end) => {
                out.push(body[..end].trim());
                rest = &body[end + 3..];
            }
            None => break,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema;
    use std::sync::Mutex;

    struct Scripted {
        replies: Mutex<Vec<Result<Value, TransportError>>>,
    }

    impl Scripted {
        fn new(mut r: Vec<Result<Value, TransportError>>) -> Self {
            r.reverse();
            Self { replies: Mutex::new(r) }
        }
    }

    impl Transport for Scripted {
        fn post(&self, _: &Value, _: Duration) -> Result<Value, TransportError> {
            self.replies.lock().unwrap().pop().expect("script exhausted")
        }
    }

    fn cfg() -> GatewayConfig {
        GatewayConfig::deliberation("http://stub", "m")
    }

    fn vote_reply(args: &str) -> Value {
        json!({"choices": [{"message": {"content": null, "tool_calls": [
            {"id": "c1", "type": "function", "function": {"name": "vote_on_proposal", "arguments": args}}
        ]}}]})
    }

    #[test]
    fn native_call_with_string_arguments() {
        let t = Scripted::new(vec![Ok(vote_reply(r#"{"amendment_id":1,"vote":"NAY","reasoning":"no"}"#))]);
        let out = complete(&cfg(), &t, &[ChatMessage::user("hi")], &[schema::vote_on_proposal()]).unwrap();
        assert_eq!(out.calls.len(), 1);
        assert_eq!(out.calls[0].arguments["vote"], "NAY");
        assert_eq!(out.attempts, 1);
    }

    #[test]
    fn fenced_call_in_content() {
        let text = "Here is my vote:\n```json\n[{\"name\": \"vote_on_proposal\", \"arguments\": {\"amendment_id\": 0, \"vote\": \"YEA\", \"reasoning\": \"fine\"}}]\n```\n";
        let reply = json!({"choices": [{"message": {"content": text}}]});
        let calls = parse_tool_calls(&reply, &[schema::vote_on_proposal()]).unwrap();
        assert_eq!(calls[0].arguments["amendment_id"], 0);
    }

    #[test]
    fn plain_text_is_no_calls() {
        let reply = json!({"choices": [{"message": {"content": "I abstain from proposing."}}]});
        assert_eq!(parse_tool_calls(&reply, &[schema::propose_amendment()]).unwrap(), vec![]);
    }

    #[test]
    fn schema_violation_after_retries() {
        let bad = vote_reply(r#"{"amendment_id":1,"vote":"MAYBE","reasoning":"?"}"#);
        let t = Scripted::new(vec![Ok(bad.clone()), Ok(bad.clone()), Ok(bad.clone()), Ok(bad)]);
        let err = complete(&cfg(), &t, &[], &[schema::vote_on_proposal()]).unwrap_err();
        assert!(matches!(err, GatewayError::SchemaViolation(_)));
    }

    #[test]
    fn client_errors_are_not_retried() {
        let t = Scripted::new(vec![Err(TransportError::Status(401, "denied".into()))]);
        let err = complete(&cfg(), &t, &[], &[]).unwrap_err();
        assert_eq!(err, GatewayError::EndpointUnreachable("HTTP 401: denied".into()));
    }

    #[test]
    fn zero_retries_means_one_attempt() {
        let c = GatewayConfig { retries: 0, ..cfg() };
        let t = Scripted::new(vec![Err(TransportError::Timeout)]);
        assert!(matches!(complete(&c, &t, &[], &[]), Err(GatewayError::EndpointUnreachable(_))));
    }

    #[test]
    fn request_carries_tools_and_temperature() {
        let b = request_body(&cfg(), &[ChatMessage::system("s")], &[schema::debate_message()]);
        assert_eq!(b["temperature"], 0.7);
        assert_eq!(b["tools"][0]["function"]["name"], "debate_message");
        assert_eq!(b["messages"][0]["role"], "system");
    }
}
