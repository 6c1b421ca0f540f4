//! Model-backed proposers and voters for constitutional deliberation.

use std::collections::BTreeMap;
use std::sync::Arc;

use civitas_core::constitution::AmendmentAction;
use civitas_core::deliberation::{Proposal, ProposalContext, Proposer, Protocol, Vote, VoteContext, Voter};
use civitas_core::{AgentId, Amendment, ConstitutionRule};
use serde_json::Value;

use crate::client::{complete, ChatMessage, ToolCall, Transport};
use crate::config::GatewayConfig;
use crate::schema;
use crate::template::{constitution_block, render, subs, TemplateId};
use crate::GatewayError;

/// Text substituted for `{debate_summary}`; the debate phase never runs.
pub const NO_DEBATE: &str = "";

/// The summary line about `agent`, without its `Player n: ` prefix.
fn own_line(contributions: &str, agent: AgentId) -> String {
    let prefix = format!("{agent}: ");
    contributions
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or("none recorded")
        .to_string()
}

pub fn proposal_prompt(ctx: &ProposalContext<'_>) -> Result<String, GatewayError> {
    render(
        TemplateId::DelibPropose,
        &subs([
            ("agent_name", ctx.agent.to_string()),
            ("constitution_block", constitution_block(ctx.constitution)),
            ("performance_summary", ctx.summary.text.clone()),
            ("agent_contributions", own_line(&ctx.summary.agent_contributions, ctx.agent)),
            ("max_proposals", ctx.max_proposals.to_string()),
        ]),
    )
}

pub fn proposals_block(proposals: &[Proposal]) -> String {
    let mut out = Vec::new();
    for p in proposals {
        let a = &p.amendment;
        let mut head = format!("Amendment #{} (proposed by {}): {}", p.id, a.proposer, a.action);
        if let Some(t) = &a.target_rule {
            head.push_str(&format!(" \"{t}\""));
        }
        out.push(head);
        if let Some(r) = &a.new_rule {
            out.push(format!("  New rule: \"{}\" (priority {})", r.name, r.priority));
            out.push(format!("  Guidance: {}", r.guidance));
            out.push(format!("  Summary: {}", r.summary));
        }
        out.push(format!("  Justification: {}", a.justification));
    }
    out.join("\n")
}

pub fn vote_prompt(ctx: &VoteContext<'_>) -> Result<String, GatewayError> {
    render(
        TemplateId::DelibVote,
        &subs([
            ("agent_name", ctx.agent.to_string()),
            ("constitution_block", constitution_block(ctx.constitution)),
            ("proposals_block", proposals_block(ctx.all_proposals)),
            ("debate_summary", NO_DEBATE.to_string()),
        ]),
    )
}

fn field<'a>(args: &'a Value, key: &str) -> Option<&'a str> {
    args.get(key).and_then(Value::as_str).filter(|s| !s.trim().is_empty())
}

/// Converts one `propose_amendment` call into an amendment by `agent`.
pub fn amendment_from_call(call: &ToolCall, agent: AgentId) -> Result<Amendment, GatewayError> {
    let a = &call.arguments;
    let bad = |m: &str| GatewayError::SchemaViolation(format!("propose_amendment: {m}"));
    let justification = field(a, "justification").unwrap_or_default().to_string();
    let rule = |fallback_name: Option<&str>| -> Result<ConstitutionRule, GatewayError> {
        let name = field(a, "new_rule_name")
            .or(fallback_name)
            .ok_or_else(|| bad("new_rule_name is required"))?;
        let guidance = field(a, "new_rule_guidance").ok_or_else(|| bad("new_rule_guidance is required"))?;
        let summary = field(a, "new_rule_summary").unwrap_or_default();
        let priority = a.get("new_rule_priority").and_then(Value::as_u64).unwrap_or(1) as u32;
        Ok(ConstitutionRule::new(name, guidance, summary, priority))
    };
    let action = match field(a, "action") {
        Some("ADD") => AmendmentAction::Add,
        Some("MODIFY") => AmendmentAction::Modify,
        Some("REPEAL") => AmendmentAction::Repeal,
        _ => return Err(bad("action must be ADD, MODIFY or REPEAL")),
    };
    Ok(match action {
        AmendmentAction::Add => Amendment::add(rule(None)?, agent, justification),
        AmendmentAction::Modify => {
            let target = field(a, "target_rule").ok_or_else(|| bad("MODIFY needs target_rule"))?;
            Amendment::modify(target, rule(Some(target))?, agent, justification)
        }
        AmendmentAction::Repeal => {
            let target = field(a, "target_rule").ok_or_else(|| bad("REPEAL needs target_rule"))?;
            Amendment::repeal(target, agent, justification)
        }
    })
}

/// Proposes through the model. Unusable calls are skipped and noted.
pub struct ModelProposer {
    config: GatewayConfig,
    transport: Arc<dyn Transport>,
    pub diagnostics: Vec<String>,
}

impl ModelProposer {
    pub fn new(config: GatewayConfig, transport: Arc<dyn Transport>) -> Self {
        Self {
            config,
            transport,
            diagnostics: Vec::new(),
        }
    }
}

impl Proposer for ModelProposer {
    fn propose(&mut self, ctx: &ProposalContext<'_>) -> Result<Vec<Amendment>, String> {
        let prompt = proposal_prompt(ctx).map_err(|e| e.to_string())?;
        let out = complete(
            &self.config,
            self.transport.as_ref(),
            &[ChatMessage::system(prompt)],
            &[schema::propose_amendment()],
        )
        .map_err(|e| e.to_string())?;
        if let Some(d) = out.diagnostic {
            self.diagnostics.push(d);
        }
        let mut amendments = Vec::new();
        for call in &out.calls {
            match amendment_from_call(call, ctx.agent) {
                Ok(a) => amendments.push(a),
                Err(e) => self.diagnostics.push(e.to_string()),
            }
        }
        amendments.truncate(ctx.max_proposals);
        Ok(amendments)
    }
}

/// Votes through the model. One request covers every proposal of a round;
/// the ballots are cached and handed out proposal by proposal.
pub struct ModelVoter {
    config: GatewayConfig,
    transport: Arc<dyn Transport>,
    round_key: Option<(u32, Vec<u32>)>,
    ballots: BTreeMap<u32, (Vote, String)>,
    pub diagnostics: Vec<String>,
}

impl ModelVoter {
    pub fn new(config: GatewayConfig, transport: Arc<dyn Transport>) -> Self {
        Self {
            config,
            transport,
            round_key: None,
            ballots: BTreeMap::new(),
            diagnostics: Vec::new(),
        }
    }

    fn fetch(&mut self, ctx: &VoteContext<'_>) -> Result<(), String> {
        let prompt = vote_prompt(ctx).map_err(|e| e.to_string())?;
        let out = complete(
            &self.config,
            self.transport.as_ref(),
            &[ChatMessage::system(prompt)],
            &[schema::vote_on_proposal()],
        )
        .map_err(|e| e.to_string())?;
        if let Some(d) = out.diagnostic {
            self.diagnostics.push(d);
        }
        for call in out.calls {
            let a = &call.arguments;
            let Some(id) = a.get("amendment_id").and_then(Value::as_u64) else {
                continue;
            };
            let vote = match a.get("vote").and_then(Value::as_str) {
                Some("YEA") => Vote::Yea,
                Some("NAY") => Vote::Nay,
                _ => Vote::Abstain,
            };
            let reasoning = a.get("reasoning").and_then(Value::as_str).unwrap_or_default().to_string();
            self.ballots.entry(id as u32).or_insert((vote, reasoning));
        }
        Ok(())
    }
}

impl Voter for ModelVoter {
    fn vote(&mut self, ctx: &VoteContext<'_>) -> Result<(Vote, String), String> {
        let key = (ctx.summary.turn, ctx.all_proposals.iter().map(|p| p.id).collect::<Vec<_>>());
        if self.round_key.as_ref() != Some(&key) {
            self.round_key = Some(key);
            self.ballots.clear();
            self.fetch(ctx)?;
        }
        self.ballots
            .get(&ctx.proposal.id)
            .cloned()
            .ok_or_else(|| format!("model cast no ballot on amendment #{}", ctx.proposal.id))
    }
}

/// A model proposer and voter in every agent slot, sharing one transport.
pub fn model_protocol(config: &GatewayConfig, transport: Arc<dyn Transport>) -> Protocol {
    Protocol {
        proposers: AgentId::all()
            .map(|_| Box::new(ModelProposer::new(config.clone(), transport.clone())) as Box<dyn Proposer>)
            .collect(),
        voters: AgentId::all()
            .map(|_| Box::new(ModelVoter::new(config.clone(), transport.clone())) as Box<dyn Voter>)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn call(args: Value) -> ToolCall {
        ToolCall {
            name: "propose_amendment".into(),
            arguments: args,
        }
    }

    #[test]
    fn add_defaults_priority_to_one() {
        let a = amendment_from_call(
            &call(json!({"action": "ADD", "new_rule_name": "Share", "new_rule_guidance": "Contribute 10.",
                         "justification": "more pool"})),
            AgentId(3),
        )
        .unwrap();
        assert_eq!(a.action, AmendmentAction::Add);
        assert_eq!(a.new_rule.as_ref().unwrap().priority, 1);
        assert_eq!(a.proposer, AgentId(3));
    }

    #[test]
    fn modify_without_name_keeps_target_name() {
        let a = amendment_from_call(
            &call(json!({"action": "MODIFY", "target_rule": "Share", "new_rule_guidance": "Contribute 8.",
                         "new_rule_priority": 2, "justification": "softer"})),
            AgentId(1),
        )
        .unwrap();
        assert_eq!(a.target_rule.as_deref(), Some("Share"));
        assert_eq!(a.new_rule.unwrap().name, "Share");
    }

    #[test]
    fn repeal_needs_target() {
        let e = amendment_from_call(&call(json!({"action": "REPEAL", "justification": "x"})), AgentId(1));
        assert!(matches!(e, Err(GatewayError::SchemaViolation(_))));
    }

    #[test]
    fn own_line_lookup() {
        let text = "Player 1: wealth 12.0, last contribution 3\nPlayer 2: wealth 9.0, last contribution 0";
        assert_eq!(own_line(text, AgentId(2)), "wealth 9.0, last contribution 0");
        assert_eq!(own_line(text, AgentId(5)), "none recorded");
    }
}
