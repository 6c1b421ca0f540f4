//! Constitution data model, amendment algebra and the canonical document format.
//!
//! A constitution is an ordered list of named rules. Each rule carries the
//! verbatim guidance text an external model would read, and optionally a
//! structured [`Directive`] that scripted agents execute literally.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentId;

/// Lowest (most important) rule priority.
pub const PRIORITY_MIN: u32 = 1;
/// Highest numeric (least important) rule priority.
pub const PRIORITY_MAX: u32 = 5;

/// Machine-readable semantics attached to a rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Directive {
    /// Contribute exactly `amount` tokens each round.
    ContributeFixed { amount: u32 },
    /// Spend `tokens` punishing a player who contributed below the maximum
    /// last round, never more than `per_round_cap` tokens per round.
    PunishBelowMax { tokens: u32, per_round_cap: u32 },
    BroadcastEachRound { text: String },
    DepositFirst,
    GatherNeeded,
    MoveToLargestDeficit,
    ShareSurplus { max_units: u32 },
    ReportRichCluster { min_units: u32 },
    NoAggressionUnlessAttacked,
    NoDeceptiveProposals,
    AcceptIfNeededAndFulfillable,
    BroadcastNeeds,
    RejectOnlyIfCannotFulfill,
    AvoidHoarding,
}

impl Directive {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Directive::ContributeFixed { .. } => "ContributeFixed",
            Directive::PunishBelowMax { .. } => "PunishBelowMax",
            Directive::BroadcastEachRound { .. } => "BroadcastEachRound",
            Directive::DepositFirst => "DepositFirst",
            Directive::GatherNeeded => "GatherNeeded",
            Directive::MoveToLargestDeficit => "MoveToLargestDeficit",
            Directive::ShareSurplus { .. } => "ShareSurplus",
            Directive::ReportRichCluster { .. } => "ReportRichCluster",
            Directive::NoAggressionUnlessAttacked => "NoAggressionUnlessAttacked",
            Directive::NoDeceptiveProposals => "NoDeceptiveProposals",
            Directive::AcceptIfNeededAndFulfillable => "AcceptIfNeededAndFulfillable",
            Directive::BroadcastNeeds => "BroadcastNeeds",
            Directive::RejectOnlyIfCannotFulfill => "RejectOnlyIfCannotFulfill",
            Directive::AvoidHoarding => "AvoidHoarding",
        }
    }

    /// Checks numeric payloads against the action bounds of the environments.
    pub fn payload_in_bounds(&self) -> bool {
        match self {
            Directive::ContributeFixed { amount } => *amount <= 10,
            Directive::PunishBelowMax {
                tokens,
                per_round_cap,
            } => (1..=3).contains(tokens) && (1..=3).contains(per_round_cap),
            Directive::BroadcastEachRound { text } => !text.is_empty(),
            Directive::ShareSurplus { max_units } => (1..=3).contains(max_units),
            Directive::ReportRichCluster { min_units } => *min_units >= 1,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstitutionRule {
    pub name: String,
    pub guidance: String,
    pub summary: String,
    pub priority: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directive: Option<Directive>,
}

impl ConstitutionRule {
    pub fn new(
        name: impl Into<String>,
        guidance: impl Into<String>,
        summary: impl Into<String>,
        priority: u32,
    ) -> Self {
        Self {
            name: name.into(),
            guidance: guidance.into(),
            summary: summary.into(),
            priority,
            directive: None,
        }
    }

    pub fn with_directive(mut self, directive: Directive) -> Self {
        self.directive = Some(directive);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constitution {
    pub rules: Vec<ConstitutionRule>,
    pub version: u64,
}

impl Constitution {
    /// The blank seed constitution: no rules, version 0.
    pub fn blank() -> Self {
        Self::default()
    }

    /// Appends a rule without checking names; see [`validate_constitution`].
    pub fn with_rule(mut self, rule: ConstitutionRule) -> Self {
        self.rules.push(rule);
        self
    }

    pub fn is_blank(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rule(&self, name: &str) -> Option<&ConstitutionRule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.rule(name).is_some()
    }

    /// Rules in ascending priority, ties kept in list order.
    pub fn by_priority(&self) -> Vec<&ConstitutionRule> {
        let mut rules: Vec<&ConstitutionRule> = self.rules.iter().collect();
        rules.sort_by_key(|r| r.priority);
        rules
    }

    pub fn directives(&self) -> impl Iterator<Item = &Directive> {
        self.by_priority()
            .into_iter()
            .filter_map(|r| r.directive.as_ref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AmendmentAction {
    Add,
    Modify,
    Repeal,
}

impl fmt::Display for AmendmentAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AmendmentAction::Add => "ADD",
            AmendmentAction::Modify => "MODIFY",
            AmendmentAction::Repeal => "REPEAL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Amendment {
    pub action: AmendmentAction,
    pub target_rule: Option<String>,
    pub new_rule: Option<ConstitutionRule>,
    pub justification: String,
    pub proposer: AgentId,
}

impl Amendment {
    pub fn add(rule: ConstitutionRule, proposer: AgentId, justification: impl Into<String>) -> Self {
        Self {
            action: AmendmentAction::Add,
            target_rule: None,
            new_rule: Some(rule),
            justification: justification.into(),
            proposer,
        }
    }

    pub fn modify(
        target: impl Into<String>,
        rule: ConstitutionRule,
        proposer: AgentId,
        justification: impl Into<String>,
    ) -> Self {
        Self {
            action: AmendmentAction::Modify,
            target_rule: Some(target.into()),
            new_rule: Some(rule),
            justification: justification.into(),
            proposer,
        }
    }

    pub fn repeal(target: impl Into<String>, proposer: AgentId, justification: impl Into<String>) -> Self {
        Self {
            action: AmendmentAction::Repeal,
            target_rule: Some(target.into()),
            new_rule: None,
            justification: justification.into(),
            proposer,
        }
    }

    /// Shape check: which payload fields each action requires.
    pub fn check_shape(&self) -> Result<(), AmendmentError> {
        let ok = match self.action {
            AmendmentAction::Add => self.new_rule.is_some() && self.target_rule.is_none(),
            AmendmentAction::Modify => self.new_rule.is_some() && self.target_rule.is_some(),
            AmendmentAction::Repeal => self.new_rule.is_none() && self.target_rule.is_some(),
        };
        if ok {
            Ok(())
        } else {
            Err(AmendmentError::Malformed(self.action))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmendmentError {
    #[error("no rule named {0:?}")]
    UnknownTargetRule(String),
    #[error("a rule named {0:?} already exists")]
    DuplicateRuleName(String),
    #[error("malformed {0} amendment")]
    Malformed(AmendmentAction),
}

/// Applies one amendment, returning a new constitution. The version is left
/// untouched; deliberation bumps it once per adopted batch.
pub fn apply_amendment(c: &Constitution, a: &Amendment) -> Result<Constitution, AmendmentError> {
    a.check_shape()?;
    let mut out = c.clone();
    match a.action {
        AmendmentAction::Add => {
            let rule = a.new_rule.clone().expect("shape checked");
            if out.contains(&rule.name) {
                return Err(AmendmentError::DuplicateRuleName(rule.name));
            }
            out.rules.push(rule);
        }
        AmendmentAction::Modify => {
            let target = a.target_rule.as_deref().expect("shape checked");
            let rule = a.new_rule.clone().expect("shape checked");
            let idx = out
                .rules
                .iter()
                .position(|r| r.name == target)
                .ok_or_else(|| AmendmentError::UnknownTargetRule(target.to_string()))?;
            // renaming onto another existing rule would break uniqueness
            if rule.name != target && out.contains(&rule.name) {
                return Err(AmendmentError::DuplicateRuleName(rule.name));
            }
            out.rules[idx] = rule;
        }
        AmendmentAction::Repeal => {
            let target = a.target_rule.as_deref().expect("shape checked");
            let idx = out
                .rules
                .iter()
                .position(|r| r.name == target)
                .ok_or_else(|| AmendmentError::UnknownTargetRule(target.to_string()))?;
            out.rules.remove(idx);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation")]
pub enum Violation {
    EmptyName { index: usize },
    DuplicateRuleName { name: String },
    PriorityOutOfRange { name: String, priority: u32 },
    EmptyGuidance { name: String },
    DirectiveOutOfBounds { name: String, kind: String },
}

pub fn validate_constitution(c: &Constitution) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut reported = BTreeSet::new();
    for (index, rule) in c.rules.iter().enumerate() {
        if rule.name.trim().is_empty() {
            out.push(Violation::EmptyName { index });
        } else if !seen.insert(rule.name.as_str()) && reported.insert(rule.name.as_str()) {
            out.push(Violation::DuplicateRuleName {
                name: rule.name.clone(),
            });
        }
        if !(PRIORITY_MIN..=PRIORITY_MAX).contains(&rule.priority) {
            out.push(Violation::PriorityOutOfRange {
                name: rule.name.clone(),
                priority: rule.priority,
            });
        }
        if rule.guidance.trim().is_empty() {
            out.push(Violation::EmptyGuidance {
                name: rule.name.clone(),
            });
        }
        if let Some(d) = &rule.directive {
            if !d.payload_in_bounds() {
                out.push(Violation::DirectiveOutOfBounds {
                    name: rule.name.clone(),
                    kind: d.kind_name().to_string(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed constitution document at line {line}, column {column}: {message}")]
pub struct MalformedDocument {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Canonical pretty JSON with alphabetically ordered keys.
pub fn serialize_constitution(c: &Constitution) -> String {
    // serde_json's default Map is a BTreeMap, so going through Value sorts keys
    let value = serde_json::to_value(c).expect("constitution is always serializable");
    let mut text = serde_json::to_string_pretty(&value).expect("value is always serializable");
    text.push('\n');
    text
}

pub fn parse_constitution(text: &str) -> Result<Constitution, MalformedDocument> {
    serde_json::from_str(text).map_err(|e| MalformedDocument {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}
