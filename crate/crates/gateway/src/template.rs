//! Prompt templates shipped verbatim and a strict `{placeholder}` renderer.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use civitas_core::Constitution;

use crate::GatewayError;

/// Line rendered for a constitution with no rules.
pub const BLANK_CONSTITUTION: &str = "(no rules adopted yet)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemplateId {
    GridworldAgent,
    PggAgent,
    TradingAgent,
    DelibPropose,
    DelibVote,
    EvolveSystem,
    EvaluatorSystem,
}

impl TemplateId {
    pub const ALL: [TemplateId; 7] = [
        TemplateId::GridworldAgent,
        TemplateId::PggAgent,
        TemplateId::TradingAgent,
        TemplateId::DelibPropose,
        TemplateId::DelibVote,
        TemplateId::EvolveSystem,
        TemplateId::EvaluatorSystem,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::GridworldAgent => "gridworld-agent",
            TemplateId::PggAgent => "pgg-agent",
            TemplateId::TradingAgent => "trading-agent",
            TemplateId::DelibPropose => "delib-propose",
            TemplateId::DelibVote => "delib-vote",
            TemplateId::EvolveSystem => "evolve-system",
            TemplateId::EvaluatorSystem => "evaluator-system",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            TemplateId::GridworldAgent => include_str!("../templates/gridworld-agent.txt"),
            TemplateId::PggAgent => include_str!("../templates/pgg-agent.txt"),
            TemplateId::TradingAgent => include_str!("../templates/trading-agent.txt"),
            TemplateId::DelibPropose => include_str!("../templates/delib-propose.txt"),
            TemplateId::DelibVote => include_str!("../templates/delib-vote.txt"),
            TemplateId::EvolveSystem => include_str!("../templates/evolve-system.txt"),
            TemplateId::EvaluatorSystem => include_str!("../templates/evaluator-system.txt"),
        }
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for seg in segments(self.text()) {
            if let Segment::Hole(name) = seg {
                if !out.contains(&name) {
                    out.push(name);
                }
            }
        }
        out
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown template {s:?}"))
    }
}

enum Segment<'a> {
    Text(&'a str),
    Hole(&'a str),
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

/// Splits on `{name}` holes. Braces around anything else are literal text.
fn segments(text: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_name(&after[..close]) => {
                if open > 0 {
                    out.push(Segment::Text(&rest[..open]));
                }
                out.push(Segment::Hole(&after[..close]));
                rest = &after[close + 1..];
            }
            _ => {
                out.push(Segment::Text(&rest[..=open]));
                rest = after;
            }
        }
    }
    if !rest.is_empty() {
        out.push(Segment::Text(rest));
    }
    out
}

pub type Substitutions = BTreeMap<String, String>;

/// Builds a substitution map from pairs.
pub fn subs<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Substitutions {
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}

/// Substitutes every placeholder. Substituted values are not rescanned.
pub fn render(id: TemplateId, values: &Substitutions) -> Result<String, GatewayError> {
    render_text(id.text(), values)
}

pub fn render_text(text: &str, values: &Substitutions) -> Result<String, GatewayError> {
    let mut out = String::with_capacity(text.len() + 256);
    for seg in segments(text) {
        match seg {
            Segment::Text(t) => out.push_str(t),
            Segment::Hole(name) => match values.get(name) {
                Some(v) => out.push_str(v),
                None => return Err(GatewayError::MissingPlaceholder(name.to_string())),
            },
        }
    }
    Ok(out)
}

/// One line per rule in priority order: a dash, the name, an em-dash and the guidance.
pub fn constitution_block(c: &Constitution) -> String {
    if c.rules.is_empty() {
        return BLANK_CONSTITUTION.to_string();
    }
    c.by_priority()
        .iter()
        .map(|r| format!("- {} \u{2014} {}", r.name, r.guidance))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use civitas_core::ConstitutionRule;

    #[test]
    fn pgg_prompt_carries_wealth() {
        let v = subs([
            ("agent_id", "Player 2"),
            ("wealth", "120"),
            ("avg_wealth", "100"),
            ("constitution_block", BLANK_CONSTITUTION),
        ]);
        let text = render(TemplateId::PggAgent, &v).unwrap();
        assert!(text.contains("Your cumulative wealth: 120\n"));
        assert!(text.contains("Group average wealth: 100\n"));
        assert!(text.starts_with("You are Player 2, a participant in a public goods game."));
        assert!(text.ends_with("=== BEHAVIORAL GUIDELINES (Constitution) ===\n(no rules adopted yet)\n"));
    }

    #[test]
    fn missing_goal_is_reported_by_name() {
        let v = subs([
            ("agent_id", "Trader 1"),
            ("holdings_desc", "3 grain"),
            ("completion", "0.50"),
            ("constitution_block", "x"),
        ]);
        assert_eq!(
            render(TemplateId::TradingAgent, &v),
            Err(GatewayError::MissingPlaceholder("goal_desc".into()))
        );
    }

    #[test]
    fn placeholder_inventory() {
        assert_eq!(TemplateId::GridworldAgent.placeholders(), vec!["constitution_block"]);
        assert_eq!(
            TemplateId::DelibPropose.placeholders(),
            vec!["agent_name", "constitution_block", "performance_summary", "agent_contributions", "max_proposals"]
        );
        assert_eq!(
            TemplateId::DelibVote.placeholders(),
            vec!["agent_name", "constitution_block", "proposals_block", "debate_summary"]
        );
        assert!(TemplateId::EvolveSystem.placeholders().is_empty());
        assert!(TemplateId::EvaluatorSystem.placeholders().is_empty());
    }

    #[test]
    fn block_follows_priority_then_insertion() {
        let c = Constitution::blank()
            .with_rule(ConstitutionRule::new("Late", "go last", "s", 3))
            .with_rule(ConstitutionRule::new("First", "go first", "s", 1))
            .with_rule(ConstitutionRule::new("Second", "tie", "s", 3));
        assert_eq!(
            constitution_block(&c),
            "- First \u{2014} go first\n- Late \u{2014} go last\n- Second \u{2014} tie"
        );
        assert_eq!(constitution_block(&Constitution::blank()), BLANK_CONSTITUTION);
    }

    #[test]
    fn values_are_not_rescanned() {
        let v = subs([("a", "{b}")]);
        assert_eq!(render_text("x {a} y", &v).unwrap(), "x {b} y");
        assert_eq!(render_text("{ not a hole } {A}", &Substitutions::new()).unwrap(), "{ not a hole } {A}");
    }
}
