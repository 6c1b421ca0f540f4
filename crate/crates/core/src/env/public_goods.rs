//! Iterated public goods game with costly punishment.
//!
//! Each round every alive agent receives 10 tokens, contributes 0–10 to a
//! pool and may spend 1–3 of the remaining tokens punishing one other alive
//! agent. The pool is multiplied by `m` and split equally among the alive
//! agents; each punishment token costs its target 3 wealth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_log::{Event, EventKind};
use crate::agents::AgentId;
use crate::env::Communication;
use crate::scoring::N_AGENTS;

pub use crate::scoring::{nash_freerider_payoff, pareto_wealth};

pub const ENDOWMENT: u32 = 10;
pub const PUNISH_DAMAGE: f64 = 3.0;
pub const MAX_PUNISH_TOKENS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Punish {
    pub target: AgentId,
    pub tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PggAction {
    pub contribute: u32,
    pub punish: Option<Punish>,
    pub message: Option<Communication>,
}

impl PggAction {
    pub fn contribute(amount: u32) -> Self {
        Self {
            contribute: amount,
            ..Self::default()
        }
    }

    pub fn with_punish(mut self, target: AgentId, tokens: u32) -> Self {
        self.punish = Some(Punish { target, tokens });
        self
    }

    pub fn with_message(mut self, message: Communication) -> Self {
        self.message = Some(message);
        self
    }
}

/// What happened in one resolved round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLedger {
    pub round: u32,
    pub contributions: [Option<u32>; N_AGENTS],
    pub punishments: Vec<(AgentId, Punish)>,
    pub pool: f64,
    pub share: f64,
    pub payoffs: [f64; N_AGENTS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PggState {
    pub round: u32,
    pub m: f64,
    pub wealth: [f64; N_AGENTS],
    pub alive: [bool; N_AGENTS],
    pub last_contributions: [Option<u32>; N_AGENTS],
    pub history: Vec<RoundLedger>,
    pub punish_tokens_spent: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PggError {
    #[error("agent {agent} contributed {amount}, outside 0-10")]
    InvalidContribution { agent: AgentId, amount: u32 },
    #[error("agent {agent} cannot punish {target}")]
    InvalidPunishTarget { agent: AgentId, target: AgentId },
    #[error("agent {agent} spent {tokens} punishment tokens, outside 1-3")]
    InvalidPunishTokens { agent: AgentId, tokens: u32 },
    #[error("agent {agent} spent more than its 10-token endowment")]
    OverSpend { agent: AgentId },
    #[error("agent {agent} submitted no action")]
    MissingAction { agent: AgentId },
    #[error("agent {agent} is not alive")]
    DeadActor { agent: AgentId },
}

impl PggError {
    pub fn agent(&self) -> AgentId {
        match self {
            PggError::InvalidContribution { agent, .. }
            | PggError::InvalidPunishTarget { agent, .. }
            | PggError::InvalidPunishTokens { agent, .. }
            | PggError::OverSpend { agent }
            | PggError::MissingAction { agent }
            | PggError::DeadActor { agent } => *agent,
        }
    }
}

impl PggState {
    pub fn new(m: f64) -> Self {
        Self {
            round: 0,
            m,
            wealth: [0.0; N_AGENTS],
            alive: [true; N_AGENTS],
            last_contributions: [None; N_AGENTS],
            history: Vec::new(),
            punish_tokens_spent: 0,
        }
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn is_alive(&self, a: AgentId) -> bool {
        self.alive[a.index()]
    }

    pub fn eliminate(&mut self, a: AgentId) {
        self.alive[a.index()] = false;
    }

    /// Mean wealth over alive agents.
    pub fn average_alive_wealth(&self) -> f64 {
        let n = self.alive_count();
        if n == 0 {
            return 0.0;
        }
        AgentId::all()
            .filter(|a| self.is_alive(*a))
            .map(|a| self.wealth[a.index()])
            .sum::<f64>()
            / n as f64
    }

    /// Checks one agent's action in isolation.
    pub fn check_action(&self, agent: AgentId, act: &PggAction) -> Result<(), PggError> {
        if !self.is_alive(agent) {
            return Err(PggError::DeadActor { agent });
        }
        if act.contribute > ENDOWMENT {
            return Err(PggError::InvalidContribution {
                agent,
                amount: act.contribute,
            });
        }
        if let Some(p) = act.punish {
            if p.target == agent || !p.target.is_valid() || !self.is_alive(p.target) {
                return Err(PggError::InvalidPunishTarget {
                    agent,
                    target: p.target,
                });
            }
            if !(1..=MAX_PUNISH_TOKENS).contains(&p.tokens) {
                return Err(PggError::InvalidPunishTokens {
                    agent,
                    tokens: p.tokens,
                });
            }
            if act.contribute + p.tokens > ENDOWMENT {
                return Err(PggError::OverSpend { agent });
            }
        }
        Ok(())
    }

    /// Resolves one round. `actions` must hold exactly one entry per alive agent.
    pub fn resolve_round(&self, actions: &[(AgentId, PggAction)]) -> Result<(PggState, Vec<Event>), PggError> {
        let mut by_agent: [Option<&PggAction>; N_AGENTS] = [None; N_AGENTS];
        for (agent, act) in actions {
            self.check_action(*agent, act)?;
            by_agent[agent.index()] = Some(act);
        }
        if let Some(missing) = AgentId::all().find(|a| self.is_alive(*a) && by_agent[a.index()].is_none()) {
            return Err(PggError::MissingAction { agent: missing });
        }

        let round = self.round + 1;
        let alive_n = self.alive_count() as f64;
        let total: u32 = by_agent.iter().flatten().map(|a| a.contribute).sum();
        let pool = total as f64 * self.m;
        let share = if alive_n > 0.0 { pool / alive_n } else { 0.0 };

        let mut next = self.clone();
        let mut events = Vec::new();
        let mut ledger = RoundLedger {
            round,
            contributions: [None; N_AGENTS],
            punishments: Vec::new(),
            pool,
            share,
            payoffs: [0.0; N_AGENTS],
        };
        for a in AgentId::all() {
            let Some(act) = by_agent[a.index()] else {
                continue;
            };
            let spend = act.punish.map_or(0, |p| p.tokens);
            let kept = (ENDOWMENT - act.contribute - spend) as f64;
            ledger.payoffs[a.index()] += kept + share;
            ledger.contributions[a.index()] = Some(act.contribute);
            events.push(Event::new(round, a, EventKind::Contribute(act.contribute)));
        }
        for a in AgentId::all() {
            let Some(p) = by_agent[a.index()].and_then(|act| act.punish) else {
                continue;
            };
            ledger.payoffs[p.target.index()] -= PUNISH_DAMAGE * p.tokens as f64;
            ledger.punishments.push((a, p));
            next.punish_tokens_spent += p.tokens;
            events.push(Event::new(
                round,
                a,
                EventKind::Punish {
                    target: p.target,
                    tokens: p.tokens,
                },
            ));
        }
        for a in AgentId::all().filter(|a| self.is_alive(*a)) {
            next.wealth[a.index()] += ledger.payoffs[a.index()];
        }
        next.last_contributions = ledger.contributions;
        next.round = round;
        next.history.push(ledger);
        Ok((next, events))
    }
}
