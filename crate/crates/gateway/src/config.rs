use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::GatewayError;

/// Environment variable holding the bearer credential, if the endpoint needs one.
pub const API_KEY_ENV: &str = "CIVITAS_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: f64,
    /// Extra attempts after the first one.
    pub retries: u32,
}

impl GatewayConfig {
    /// Settings for in-game agent actions.
    pub fn agent(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: 1.0,
            max_tokens: 4096,
            timeout_secs: 120.0,
            retries: 3,
        }
    }

    /// Same endpoint, cooler sampling for proposal and vote calls.
    pub fn deliberation(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            temperature: 0.7,
            ..Self::agent(endpoint, model)
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(GatewayError::InvalidConfig(format!("timeout must be positive, got {}", self.timeout_secs)));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidConfig(format!("temperature {} out of range", self.temperature)));
        }
        if self.endpoint.is_empty() {
            return Err(GatewayError::InvalidConfig("endpoint is empty".into()));
        }
        Ok(())
    }
}
