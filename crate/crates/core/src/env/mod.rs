//! The three environments and the message types they share.

pub mod gridworld;
pub mod public_goods;
pub mod trading;

use serde::{Deserialize, Serialize};

use crate::agents::AgentId;

/// An optional communication action, resolved before physical actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Communication {
    Broadcast(String),
    Private { to: AgentId, text: String },
}

/// A delivered message as it appears in a recipient's inbox.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub turn: u32,
    pub from: AgentId,
    pub text: String,
    pub private: bool,
}
