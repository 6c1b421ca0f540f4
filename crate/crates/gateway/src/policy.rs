//! An agent policy backed by a model endpoint.

use std::sync::Arc;

use civitas_core::agents::{Action, DecisionContext, Memory, Observation, Policy};
use civitas_core::env::gridworld::{Direction, GridAction, GridPhysical, Resource};
use civitas_core::env::public_goods::PggAction;
use civitas_core::env::trading::{Good, TradeAction, TradePrimary};
use civitas_core::env::Communication;
use civitas_core::AgentId;
use serde_json::Value;

use crate::client::{complete, ChatMessage, ToolCall, Transport};
use crate::config::GatewayConfig;
use crate::schema::{self, ToolSchema};
use crate::template::{constitution_block, render, subs, TemplateId};
use crate::GatewayError;

/// Renders the system prompt for an agent's environment and current state.
pub fn system_prompt(obs: &Observation, constitution_text: &str) -> Result<String, GatewayError> {
    match obs {
        Observation::PublicGoods(o) => render(
            TemplateId::PggAgent,
            &subs([
                ("agent_id", format!("Player {}", o.agent.0)),
                ("wealth", number(o.wealth)),
                ("avg_wealth", number(o.average_wealth)),
                ("constitution_block", constitution_text.to_string()),
            ]),
        ),
        Observation::Gridworld(_) => render(
            TemplateId::GridworldAgent,
            &subs([("constitution_block", constitution_text.to_string())]),
        ),
        Observation::Trading(o) => {
            let goal: Vec<String> = o.goal.needs.iter().map(|(g, n)| format!("{n} {g}")).collect();
            let held: Vec<String> = Good::ALL.iter().map(|g| format!("{} {g}", o.holdings[g.index()])).collect();
            render(
                TemplateId::TradingAgent,
                &subs([
                    ("agent_id", format!("Trader {}", o.agent.0)),
                    ("goal_desc", goal.join(", ")),
                    ("holdings_desc", held.join(", ")),
                    ("completion", format!("{:.0}%", o.completion * 100.0)),
                    ("constitution_block", constitution_text.to_string()),
                ]),
            )
        }
    }
}

/// Integers print without a decimal point, everything else with two places.
fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

pub fn tools_for(obs: &Observation) -> Vec<ToolSchema> {
    match obs {
        Observation::PublicGoods(_) => schema::public_goods_tools(),
        Observation::Gridworld(_) => schema::gridworld_tools(),
        Observation::Trading(_) => schema::trading_tools(),
    }
}

/// Asks the model for tool calls each turn and translates them into an action.
/// Anything unusable falls back to the environment's null action (contribute 0,
/// rest, hoard) and is noted in [`ModelPolicy::diagnostics`].
pub struct ModelPolicy {
    config: GatewayConfig,
    transport: Arc<dyn Transport>,
    memory: Memory<ChatMessage>,
    diagnostics: Vec<String>,
}

impl ModelPolicy {
    pub fn new(config: GatewayConfig, transport: Arc<dyn Transport>) -> Self {
        Self {
            config,
            transport,
            memory: Memory::default(),
            diagnostics: Vec::new(),
        }
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    fn ask(&mut self, obs: &Observation, ctx: &DecisionContext<'_>) -> Result<Vec<ToolCall>, GatewayError> {
        let system = system_prompt(obs, &constitution_block(ctx.constitution))?;
        let mut user = format!(
            "Turn {}. Your observation:\n{}",
            ctx.turn,
            serde_json::to_string(obs).expect("observations serialize")
        );
        if ctx.attempt > 0 {
            user.push_str("\nYour previous action was illegal. Choose a different one.");
        }
        let mut messages = vec![ChatMessage::system(system)];
        messages.extend(self.memory.iter().cloned());
        messages.push(ChatMessage::user(user.clone()));
        let out = complete(&self.config, self.transport.as_ref(), &messages, &tools_for(obs))?;
        if let Some(d) = &out.diagnostic {
            self.diagnostics.push(format!("turn {}: {d}", ctx.turn));
        }
        self.memory.push(ChatMessage::user(user));
        let summary: Vec<String> = out.calls.iter().map(|c| format!("{}({})", c.name, c.arguments)).collect();
        self.memory.push(ChatMessage::assistant(if summary.is_empty() {
            "(no action)".to_string()
        } else {
            summary.join("; ")
        }));
        Ok(out.calls)
    }
}

impl Policy for ModelPolicy {
    fn decide(&mut self, obs: &Observation, ctx: &DecisionContext<'_>) -> Action {
        let calls = match self.ask(obs, ctx) {
            Ok(c) => c,
            Err(e) => {
                self.diagnostics.push(format!("turn {}: {e}", ctx.turn));
                Vec::new()
            }
        };
        calls_to_action(obs, &calls)
    }

    fn name(&self) -> String {
        format!("model:{}", self.config.model)
    }
}

fn int(args: &Value, key: &str) -> Option<u32> {
    args.get(key)?.as_u64().and_then(|v| u32::try_from(v).ok())
}

fn text(args: &Value, key: &str) -> Option<String> {
    args.get(key)?.as_str().map(str::to_string)
}

fn agent(args: &Value, key: &str) -> Option<AgentId> {
    int(args, key).and_then(|v| u8::try_from(v).ok()).map(AgentId)
}

fn communication(c: &ToolCall) -> Option<Communication> {
    match c.name.as_str() {
        "broadcast_message" => text(&c.arguments, "message").map(Communication::Broadcast),
        "send_private_message" => Some(Communication::Private {
            to: agent(&c.arguments, "recipient")?,
            text: text(&c.arguments, "message")?,
        }),
        _ => None,
    }
}

/// Maps validated tool calls onto one environment action. The first call of
/// each kind wins; later duplicates are ignored.
pub fn calls_to_action(obs: &Observation, calls: &[ToolCall]) -> Action {
    let message = calls.iter().find_map(communication);
    match obs {
        Observation::PublicGoods(_) => {
            let amount = calls
                .iter()
                .find(|c| c.name == "contribute")
                .and_then(|c| int(&c.arguments, "amount"))
                .unwrap_or(0);
            let mut act = PggAction::contribute(amount);
            if let Some((t, n)) = calls
                .iter()
                .find(|c| c.name == "punish")
                .and_then(|c| Some((agent(&c.arguments, "target")?, int(&c.arguments, "amount")?)))
            {
                act = act.with_punish(t, n);
            }
            act.message = message;
            Action::PublicGoods(act)
        }
        Observation::Gridworld(_) => {
            let physical = calls.iter().find_map(|c| grid_physical(c));
            Action::Gridworld(GridAction {
                communication: message,
                physical,
            })
        }
        Observation::Trading(_) => {
            let primary = calls.iter().find_map(|c| trade_primary(c));
            Action::Trading(TradeAction {
                communication: message,
                primary: primary.filter(|p| *p != TradePrimary::Hoard),
            })
        }
    }
}

fn grid_physical(c: &ToolCall) -> Option<GridPhysical> {
    let a = &c.arguments;
    let resource = |k| text(a, k).and_then(|s| s.parse::<Resource>().ok());
    Some(match c.name.as_str() {
        "move_resident" => GridPhysical::Move(text(a, "direction")?.to_ascii_uppercase().parse::<Direction>().ok()?),
        "gather_resources" => GridPhysical::Gather,
        "deposit_resources" => GridPhysical::Deposit,
        "give_resource" => GridPhysical::Give {
            target: agent(a, "target")?,
            resource: resource("resource")?,
            units: int(a, "amount")?,
        },
        "attack_resident" => GridPhysical::Attack {
            target: agent(a, "target")?,
        },
        "steal_resource" => GridPhysical::Steal {
            target: agent(a, "target")?,
            resource: resource("resource")?,
        },
        _ => return None,
    })
}

fn trade_primary(c: &ToolCall) -> Option<TradePrimary> {
    let a = &c.arguments;
    let good = |k| text(a, k).and_then(|s| s.parse::<Good>().ok());
    Some(match c.name.as_str() {
        "propose_trade" => TradePrimary::Propose {
            target: agent(a, "target")?,
            offer: (good("offer_resource")?, int(a, "offer_amount")?),
            request: (good("request_resource")?, int(a, "request_amount")?),
        },
        "accept_trade" => TradePrimary::Accept {
            id: int(a, "trade_id")?,
        },
        "reject_trade" => TradePrimary::Reject {
            id: int(a, "trade_id")?,
        },
        "hoard" => TradePrimary::Hoard,
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use civitas_core::agents::PggObservation;
    use serde_json::json;

    fn pgg_obs() -> Observation {
        Observation::PublicGoods(PggObservation {
            agent: AgentId(2),
            round: 3,
            horizon: 40,
            m: 1.5,
            wealth: 120.0,
            average_wealth: 100.5,
            alive: [true; 6],
            last_contributions: [Some(10); 6],
            inbox: vec![],
        })
    }

    #[test]
    fn pgg_prompt_numbers() {
        let p = system_prompt(&pgg_obs(), "(no rules adopted yet)").unwrap();
        assert!(p.contains("Your cumulative wealth: 120\n"));
        assert!(p.contains("Group average wealth: 100.50\n"));
        assert!(p.starts_with("You are Player 2,"));
    }

    #[test]
    fn pgg_calls_combine() {
        let calls = vec![
            ToolCall {
                name: "punish".into(),
                arguments: json!({"target": 4, "amount": 2}),
            },
            ToolCall {
                name: "contribute".into(),
                arguments: json!({"amount": 7}),
            },
            ToolCall {
                name: "broadcast_message".into(),
                arguments: json!({"message": "hi"}),
            },
        ];
        let want = PggAction::contribute(7)
            .with_punish(AgentId(4), 2)
            .with_message(Communication::Broadcast("hi".into()));
        assert_eq!(calls_to_action(&pgg_obs(), &calls), Action::PublicGoods(want));
        assert_eq!(calls_to_action(&pgg_obs(), &[]), Action::PublicGoods(PggAction::contribute(0)));
    }

    #[test]
    fn grid_move_parses_direction_words() {
        let c = ToolCall {
            name: "move_resident".into(),
            arguments: json!({"direction": "north"}),
        };
        assert_eq!(grid_physical(&c), Some(GridPhysical::Move(Direction::N)));
    }

    #[test]
    fn trade_hoard_is_no_primary() {
        let c = ToolCall {
            name: "propose_trade".into(),
            arguments: json!({"target": 3, "offer_resource": "ore", "offer_amount": 2,
                              "request_resource": "spice", "request_amount": 1}),
        };
        assert_eq!(
            trade_primary(&c),
            Some(TradePrimary::Propose {
                target: AgentId(3),
                offer: (Good::Ore, 2),
                request: (Good::Spice, 1)
            })
        );
    }
}
