//! Tool schemas offered to the model and validation of returned arguments.

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    String { max_len: Option<usize> },
    /// A string or null.
    OptionalString,
    Integer { min: i64, max: i64 },
    Enum(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Field {
    pub name: &'static str,
    pub kind: FieldKind,
    pub description: &'static str,
    pub required: bool,
}

impl Field {
    const fn req(name: &'static str, kind: FieldKind, description: &'static str) -> Self {
        Self {
            name,
            kind,
            description,
            required: true,
        }
    }

    const fn opt(name: &'static str, kind: FieldKind, description: &'static str) -> Self {
        Self {
            name,
            kind,
            description,
            required: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolSchema {
    pub name: &'static str,
    pub description: &'static str,
    pub fields: Vec<Field>,
}

const TEXT: FieldKind = FieldKind::String { max_len: None };
const MESSAGE: FieldKind = FieldKind::String { max_len: Some(512) };
const AGENT: FieldKind = FieldKind::Integer { min: 1, max: 6 };
const UNITS: FieldKind = FieldKind::Integer { min: 1, max: 100 };
const RESOURCE: FieldKind = FieldKind::Enum(&["wood", "stone", "gems"]);
const GOOD: FieldKind = FieldKind::Enum(&["grain", "ore", "timber", "cloth", "spice"]);

impl ToolSchema {
    /// The `tools` entry of a chat-completions request.
    pub fn to_json(&self) -> Value {
        let mut props = Map::new();
        for f in &self.fields {
            let mut p = match f.kind {
                FieldKind::String { max_len: Some(n) } => json!({ "type": "string", "maxLength": n }),
                FieldKind::String { max_len: None } => json!({ "type": "string" }),
                FieldKind::OptionalString => json!({ "type": ["string", "null"] }),
                FieldKind::Integer { min, max } => json!({ "type": "integer", "minimum": min, "maximum": max }),
                FieldKind::Enum(vals) => json!({ "type": "string", "enum": vals }),
            };
            p["description"] = Value::from(f.description);
            props.insert(f.name.to_string(), p);
        }
        let required: Vec<&str> = self.fields.iter().filter(|f| f.required).map(|f| f.name).collect();
        json!({
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": props,
                    "required": required,
                    "additionalProperties": false,
                }
            }
        })
    }

    /// Checks `args` against the field list. Unknown keys are rejected.
    pub fn validate(&self, args: &Value) -> Result<(), String> {
        let obj = args
            .as_object()
            .ok_or_else(|| format!("{}: arguments must be an object", self.name))?;
        for key in obj.keys() {
            if !self.fields.iter().any(|f| f.name == key) {
                return Err(format!("{}: unexpected field {key:?}", self.name));
            }
        }
        for f in &self.fields {
            let v = match obj.get(f.name) {
                None if f.required => return Err(format!("{}: missing field {:?}", self.name, f.name)),
                None => continue,
                Some(v) => v,
            };
            let ok = match f.kind {
                FieldKind::String { max_len } => v
                    .as_str()
                    .is_some_and(|s| max_len.is_none_or(|n| s.chars().count() <= n)),
                FieldKind::OptionalString => v.is_null() || v.is_string(),
                FieldKind::Integer { min, max } => v.as_i64().is_some_and(|n| (min..=max).contains(&n)),
                FieldKind::Enum(vals) => v.as_str().is_some_and(|s| vals.contains(&s)),
            };
            if !ok {
                return Err(format!("{}: field {:?} has invalid value {v}", self.name, f.name));
            }
        }
        Ok(())
    }
}

pub fn propose_amendment() -> ToolSchema {
    use FieldKind::*;
    ToolSchema {
        name: "propose_amendment",
        description: "Propose adding, modifying or repealing a constitution rule.",
        fields: vec![
            Field::req("action", Enum(&["ADD", "MODIFY", "REPEAL"]), "Amendment type: ADD, MODIFY, or REPEAL"),
            Field::opt("target_rule", OptionalString, "Name of existing rule to modify or repeal (else null)"),
            Field::opt("new_rule_name", OptionalString, "Name for the new or modified rule"),
            Field::opt("new_rule_guidance", OptionalString, "Guidance text (verbatim text agents will read)"),
            Field::opt("new_rule_summary", OptionalString, "One-line summary"),
            Field::opt("new_rule_priority", Integer { min: 1, max: 5 }, "Priority level (lower = higher)"),
            Field::req("justification", TEXT, "Why this change would improve outcomes"),
        ],
    }
}

pub fn vote_on_proposal() -> ToolSchema {
    ToolSchema {
        name: "vote_on_proposal",
        description: "Cast a vote on one proposed amendment.",
        fields: vec![
            Field::req("amendment_id", FieldKind::Integer { min: 0, max: i64::from(u32::MAX) }, "ID of the amendment to vote on"),
            Field::req("vote", FieldKind::Enum(&["YEA", "NAY", "ABSTAIN"]), "YEA, NAY, or ABSTAIN"),
            Field::req("reasoning", TEXT, "Brief justification for the vote"),
        ],
    }
}

pub fn debate_message() -> ToolSchema {
    ToolSchema {
        name: "debate_message",
        description: "Argue about the open proposals.",
        fields: vec![Field::req("message", MESSAGE, "Argument about proposals (max 512 chars)")],
    }
}

fn broadcast() -> ToolSchema {
    ToolSchema {
        name: "broadcast_message",
        description: "Send a public message to all.",
        fields: vec![Field::req("message", MESSAGE, "Message text")],
    }
}

fn private() -> ToolSchema {
    ToolSchema {
        name: "send_private_message",
        description: "Send a private message to one agent.",
        fields: vec![
            Field::req("recipient", AGENT, "Recipient agent number"),
            Field::req("message", MESSAGE, "Message text"),
        ],
    }
}

pub fn public_goods_tools() -> Vec<ToolSchema> {
    vec![
        ToolSchema {
            name: "contribute",
            description: "Choose 0-10 tokens for the shared pool (required each round).",
            fields: vec![Field::req("amount", FieldKind::Integer { min: 0, max: 10 }, "Tokens to contribute")],
        },
        ToolSchema {
            name: "punish",
            description: "Spend 1-3 tokens to reduce another player's wealth by 3 per token.",
            fields: vec![
                Field::req("target", AGENT, "Player number to punish"),
                Field::req("amount", FieldKind::Integer { min: 1, max: 3 }, "Tokens to spend"),
            ],
        },
        broadcast(),
        private(),
    ]
}

pub fn gridworld_tools() -> Vec<ToolSchema> {
    vec![
        broadcast(),
        private(),
        ToolSchema {
            name: "move_resident",
            description: "Move one cell.",
            fields: vec![Field::req("direction", FieldKind::Enum(&["north", "south", "east", "west"]), "Direction")],
        },
        ToolSchema {
            name: "gather_resources",
            description: "Gather one unit from the current cell.",
            fields: vec![],
        },
        ToolSchema {
            name: "deposit_resources",
            description: "Deposit carried resources at your project site.",
            fields: vec![],
        },
        ToolSchema {
            name: "give_resource",
            description: "Give carried resources to an adjacent agent.",
            fields: vec![
                Field::req("target", AGENT, "Recipient agent number"),
                Field::req("resource", RESOURCE, "Resource type"),
                Field::req("amount", UNITS, "Units to give"),
            ],
        },
        ToolSchema {
            name: "attack_resident",
            description: "Attack an adjacent agent.",
            fields: vec![Field::req("target", AGENT, "Target agent number")],
        },
        ToolSchema {
            name: "steal_resource",
            description: "Try to steal one unit from an adjacent agent.",
            fields: vec![
                Field::req("target", AGENT, "Target agent number"),
                Field::req("resource", RESOURCE, "Resource type"),
            ],
        },
    ]
}

pub fn trading_tools() -> Vec<ToolSchema> {
    vec![
        ToolSchema {
            name: "propose_trade",
            description: "Offer resources to another trader in exchange for theirs.",
            fields: vec![
                Field::req("target", AGENT, "Trader number"),
                Field::req("offer_resource", GOOD, "Good you give"),
                Field::req("offer_amount", UNITS, "Units you give"),
                Field::req("request_resource", GOOD, "Good you receive"),
                Field::req("request_amount", UNITS, "Units you receive"),
            ],
        },
        ToolSchema {
            name: "accept_trade",
            description: "Accept a pending trade proposal directed at you.",
            fields: vec![Field::req("trade_id", FieldKind::Integer { min: 0, max: i64::from(u32::MAX) }, "Proposal id")],
        },
        ToolSchema {
            name: "reject_trade",
            description: "Reject a pending trade proposal.",
            fields: vec![Field::req("trade_id", FieldKind::Integer { min: 0, max: i64::from(u32::MAX) }, "Proposal id")],
        },
        ToolSchema {
            name: "hoard",
            description: "Do nothing this round.",
            fields: vec![],
        },
        broadcast(),
        private(),
    ]
}
