//! Adapter between civitas agents and chat-completion model endpoints.
//!
//! Prompts are rendered from the shipped templates, requests go out over the
//! chat-completions wire format, and tool calls come back validated against
//! the offered schemas. Every consumer takes a [`Transport`], so tests and
//! offline runs plug in [`stub::StubServer`] or an in-process fake.

mod client;
mod config;
pub mod deliberation;
pub mod mutator;
pub mod policy;
pub mod schema;
pub mod stub;
pub mod template;

use thiserror::Error;

pub use client::{complete, parse_tool_calls, ChatMessage, Completion, HttpTransport, ToolCall, Transport, TransportError};
pub use config::{GatewayConfig, API_KEY_ENV};
pub use template::{constitution_block, render, TemplateId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("template placeholder {{{0}}} has no value")]
    MissingPlaceholder(String),
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("tool call violates schema: {0}")]
    SchemaViolation(String),
    #[error("invalid gateway config: {0}")]
    InvalidConfig(String),
}
