//! Bilateral trading market.
//!
//! Each agent holds a private endowment of three goods and needs 6–12 units
//! of each of the two goods it lacks. Per turn an agent takes one primary
//! action (propose, accept, reject or hoard) plus optional communication.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_log::{Event, EventKind};
use crate::agents::AgentId;
use crate::env::{Communication, Message};
use crate::rng::{RngStream, UniformSource};
use crate::scoring::N_AGENTS;

pub const N_GOODS: usize = 5;
/// Turns a proposal stays open before it lapses.
pub const PROPOSAL_TTL: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Good {
    Grain,
    Ore,
    Timber,
    Cloth,
    Spice,
}

impl Good {
    pub const ALL: [Good; N_GOODS] = [Good::Grain, Good::Ore, Good::Timber, Good::Cloth, Good::Spice];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Good {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Good::Grain => "grain",
            Good::Ore => "ore",
            Good::Timber => "timber",
            Good::Cloth => "cloth",
            Good::Spice => "spice",
        })
    }
}

impl FromStr for Good {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Good::ALL
            .into_iter()
            .find(|g| g.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown good {s:?}"))
    }
}

pub type Holdings = [u32; N_GOODS];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub needs: [(Good, u32); 2],
}

impl Goal {
    pub fn need(&self, g: Good) -> u32 {
        self.needs.iter().filter(|(x, _)| *x == g).map(|(_, n)| *n).sum()
    }

    pub fn deficit(&self, h: &Holdings, g: Good) -> u32 {
        self.need(g).saturating_sub(h[g.index()])
    }

    /// Units of `g` held beyond what the goal asks for.
    pub fn surplus(&self, h: &Holdings, g: Good) -> u32 {
        h[g.index()].saturating_sub(self.need(g))
    }
}

/// `Σ min(held, needed) / Σ needed` over the goal's two goods.
pub fn goal_completion(h: &Holdings, goal: &Goal) -> f64 {
    let needed: u32 = goal.needs.iter().map(|(_, n)| n).sum();
    if needed == 0 {
        return 1.0;
    }
    let got: u32 = goal.needs.iter().map(|(g, n)| h[g.index()].min(*n)).sum();
    got as f64 / needed as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeProposal {
    pub id: u32,
    pub proposer: AgentId,
    pub target: AgentId,
    pub offer: (Good, u32),
    pub request: (Good, u32),
    pub turn: u32,
    pub deceptive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TradePrimary {
    Propose {
        target: AgentId,
        offer: (Good, u32),
        request: (Good, u32),
    },
    Accept {
        id: u32,
    },
    Reject {
        id: u32,
    },
    Hoard,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TradeAction {
    pub communication: Option<Communication>,
    /// `None` hoards.
    pub primary: Option<TradePrimary>,
}

impl TradeAction {
    pub fn primary(p: TradePrimary) -> Self {
        Self {
            communication: None,
            primary: Some(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TradeError {
    #[error("agent {agent} already proposed this turn")]
    SecondProposalSameTurn { agent: AgentId },
    #[error("agent {agent} proposed to {target}, who is not alive or is itself")]
    DeadTarget { agent: AgentId, target: AgentId },
    #[error("agent {agent} proposed a trade with zero units or one good both ways")]
    MalformedProposal { agent: AgentId },
    #[error("proposal {id} is not addressed to agent {agent}")]
    NotYourProposal { agent: AgentId, id: u32 },
    #[error("agent {agent} decided on unknown proposal {id}")]
    UnknownProposal { agent: AgentId, id: u32 },
    #[error("agent {agent} is not alive")]
    DeadActor { agent: AgentId },
}

impl TradeError {
    pub fn agent(&self) -> AgentId {
        match self {
            TradeError::SecondProposalSameTurn { agent }
            | TradeError::DeadTarget { agent, .. }
            | TradeError::MalformedProposal { agent }
            | TradeError::NotYourProposal { agent, .. }
            | TradeError::UnknownProposal { agent, .. }
            | TradeError::DeadActor { agent } => *agent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeState {
    /// Turns resolved so far.
    pub turn: u32,
    pub holdings: [Holdings; N_AGENTS],
    pub goals: [Goal; N_AGENTS],
    pub alive: [bool; N_AGENTS],
    pub pending: Vec<TradeProposal>,
    pub proposals_total: u32,
    pub rejections: u32,
    pub deceptive_flags: u32,
    pub completed_trades: u32,
    pub failed_trades: u32,
    pub next_id: u32,
    proposed_this_turn: [bool; N_AGENTS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeObservation {
    pub agent: AgentId,
    pub turn: u32,
    pub holdings: Holdings,
    pub goal: Goal,
    pub completion: f64,
    pub alive: [bool; N_AGENTS],
    /// Open proposals addressed to this agent.
    pub incoming: Vec<TradeProposal>,
    /// Open proposals this agent made.
    pub outgoing: Vec<TradeProposal>,
    pub inbox: Vec<Message>,
}

impl TradeState {
    /// Seeded endowments and goals, redrawn until every good's total supply
    /// covers its total demand.
    pub fn randomize(seed: u64) -> TradeState {
        let mut rng = RngStream::new(seed, "trading:endowment");
        loop {
            let mut holdings = [[0; N_GOODS]; N_AGENTS];
            let mut goals = [Goal {
                needs: [(Good::Grain, 0); 2],
            }; N_AGENTS];
            for i in 0..N_AGENTS {
                let mut pool: Vec<Good> = Good::ALL.to_vec();
                for _ in 0..3 {
                    let g = pool.remove(rng.next_index(pool.len()));
                    holdings[i][g.index()] = rng.next_range(5, 15);
                }
                goals[i] = Goal {
                    needs: [(pool[0], rng.next_range(6, 12)), (pool[1], rng.next_range(6, 12))],
                };
            }
            let feasible = Good::ALL.iter().all(|g| {
                let supply: u32 = holdings.iter().map(|h| h[g.index()]).sum();
                let demand: u32 = goals.iter().map(|goal| goal.need(*g)).sum();
                supply >= demand
            });
            if feasible {
                return TradeState {
                    turn: 0,
                    holdings,
                    goals,
                    alive: [true; N_AGENTS],
                    pending: Vec::new(),
                    proposals_total: 0,
                    rejections: 0,
                    deceptive_flags: 0,
                    completed_trades: 0,
                    failed_trades: 0,
                    next_id: 1,
                    proposed_this_turn: [false; N_AGENTS],
                };
            }
        }
    }

    pub fn is_alive(&self, a: AgentId) -> bool {
        self.alive[a.index()]
    }

    pub fn completion(&self, a: AgentId) -> f64 {
        goal_completion(&self.holdings[a.index()], &self.goals[a.index()])
    }

    pub fn totals(&self) -> Holdings {
        let mut t = [0; N_GOODS];
        for h in &self.holdings {
            for (i, n) in h.iter().enumerate() {
                t[i] += n;
            }
        }
        t
    }

    /// Removes an agent and any open proposal involving it. Holdings freeze.
    pub fn eliminate(&mut self, a: AgentId) {
        self.alive[a.index()] = false;
        self.pending.retain(|p| p.proposer != a && p.target != a);
    }

    pub fn observation(&self, agent: AgentId, inbox: Vec<Message>) -> TradeObservation {
        TradeObservation {
            agent,
            turn: self.turn + 1,
            holdings: self.holdings[agent.index()],
            goal: self.goals[agent.index()],
            completion: self.completion(agent),
            alive: self.alive,
            incoming: self.pending.iter().filter(|p| p.target == agent).copied().collect(),
            outgoing: self.pending.iter().filter(|p| p.proposer == agent).copied().collect(),
            inbox,
        }
    }

    pub fn submit_proposal(
        &self,
        proposer: AgentId,
        target: AgentId,
        offer: (Good, u32),
        request: (Good, u32),
    ) -> Result<TradeState, TradeError> {
        if !self.is_alive(proposer) {
            return Err(TradeError::DeadActor { agent: proposer });
        }
        if self.proposed_this_turn[proposer.index()] {
            return Err(TradeError::SecondProposalSameTurn { agent: proposer });
        }
        if target == proposer || !target.is_valid() || !self.is_alive(target) {
            return Err(TradeError::DeadTarget {
                agent: proposer,
                target,
            });
        }
        if offer.1 == 0 || request.1 == 0 || offer.0 == request.0 {
            return Err(TradeError::MalformedProposal { agent: proposer });
        }
        let mut s = self.clone();
        let deceptive = self.holdings[proposer.index()][offer.0.index()] < offer.1;
        s.pending.push(TradeProposal {
            id: s.next_id,
            proposer,
            target,
            offer,
            request,
            turn: self.turn + 1,
            deceptive,
        });
        s.next_id += 1;
        s.proposals_total += 1;
        s.deceptive_flags += deceptive as u32;
        s.proposed_this_turn[proposer.index()] = true;
        Ok(s)
    }

    /// Accepting swaps both sides atomically or, if either side is short,
    /// fails without transfer. Either way the proposal closes.
    pub fn resolve_acceptance(&self, agent: AgentId, id: u32, decision: Decision) -> Result<(TradeState, bool), TradeError> {
        let idx = self
            .pending
            .iter()
            .position(|p| p.id == id)
            .ok_or(TradeError::UnknownProposal { agent, id })?;
        let p = self.pending[idx];
        if p.target != agent {
            return Err(TradeError::NotYourProposal { agent, id });
        }
        let mut s = self.clone();
        s.pending.remove(idx);
        match decision {
            Decision::Reject => {
                s.rejections += 1;
                Ok((s, false))
            }
            Decision::Accept => {
                let (a, b) = (p.proposer.index(), p.target.index());
                let ok = s.holdings[a][p.offer.0.index()] >= p.offer.1 && s.holdings[b][p.request.0.index()] >= p.request.1;
                if ok {
                    s.holdings[a][p.offer.0.index()] -= p.offer.1;
                    s.holdings[b][p.offer.0.index()] += p.offer.1;
                    s.holdings[b][p.request.0.index()] -= p.request.1;
                    s.holdings[a][p.request.0.index()] += p.request.1;
                    s.completed_trades += 1;
                } else {
                    s.failed_trades += 1;
                }
                Ok((s, ok))
            }
        }
    }

    fn check_decision(&self, agent: AgentId, id: u32) -> Result<(), TradeError> {
        match self.pending.iter().find(|p| p.id == id) {
            None => Err(TradeError::UnknownProposal { agent, id }),
            Some(p) if p.target != agent => Err(TradeError::NotYourProposal { agent, id }),
            Some(_) => Ok(()),
        }
    }

    /// Validates one agent's primary action against the state at turn start.
    pub fn check_action(&self, agent: AgentId, act: &TradeAction) -> Result<(), TradeError> {
        if !self.is_alive(agent) {
            return Err(TradeError::DeadActor { agent });
        }
        match act.primary {
            Some(TradePrimary::Propose { target, offer, request }) => {
                self.submit_proposal(agent, target, offer, request).map(|_| ())
            }
            Some(TradePrimary::Accept { id }) | Some(TradePrimary::Reject { id }) => self.check_decision(agent, id),
            Some(TradePrimary::Hoard) | None => Ok(()),
        }
    }

    /// Resolves one turn: decisions in agent order, then new proposals, then
    /// proposals older than [`PROPOSAL_TTL`] turns lapse.
    pub fn step_turn(&self, actions: &[(AgentId, TradeAction)]) -> Result<(TradeState, Vec<Event>), TradeError> {
        for (agent, act) in actions {
            self.check_action(*agent, act)?;
        }
        let turn = self.turn + 1;
        let mut s = self.clone();
        let mut events = Vec::new();
        let by_agent: BTreeMap<AgentId, &TradeAction> = actions.iter().map(|(a, x)| (*a, x)).collect();

        for (&a, act) in &by_agent {
            match act.primary {
                Some(TradePrimary::Accept { id }) => {
                    let (next, swapped) = s.resolve_acceptance(a, id, Decision::Accept)?;
                    s = next;
                    events.push(Event::new(turn, a, EventKind::Accept { id, swapped }));
                }
                Some(TradePrimary::Reject { id }) => {
                    s = s.resolve_acceptance(a, id, Decision::Reject)?.0;
                    events.push(Event::new(turn, a, EventKind::Reject { id }));
                }
                _ => {}
            }
        }
        for (&a, act) in &by_agent {
            match act.primary {
                Some(TradePrimary::Propose { target, offer, request }) => {
                    let id = s.next_id;
                    s = s.submit_proposal(a, target, offer, request)?;
                    events.push(Event::new(
                        turn,
                        a,
                        EventKind::Propose {
                            id,
                            target,
                            offer,
                            request,
                        },
                    ));
                }
                Some(TradePrimary::Hoard) | None => events.push(Event::new(turn, a, EventKind::Hoard)),
                _ => {}
            }
        }
        s.turn = turn;
        s.proposed_this_turn = [false; N_AGENTS];
        s.pending.retain(|p| p.turn + PROPOSAL_TTL > turn);
        Ok((s, events))
    }
}

/// The broadcast format scripted traders use: `NEED ore:3,cloth:5; HAVE grain:4`.
pub fn needs_message(h: &Holdings, goal: &Goal) -> String {
    let need: Vec<String> = goal
        .needs
        .iter()
        .filter(|(g, _)| goal.deficit(h, *g) > 0)
        .map(|(g, _)| format!("{g}:{}", goal.deficit(h, *g)))
        .collect();
    let have: Vec<String> = Good::ALL
        .iter()
        .filter(|g| goal.surplus(h, **g) > 0)
        .map(|g| format!("{g}:{}", goal.surplus(h, *g)))
        .collect();
    format!("NEED {}; HAVE {}", need.join(","), have.join(","))
}

/// Inverse of [`needs_message`]: per-good needs and surpluses.
pub fn parse_needs_message(text: &str) -> Option<(Holdings, Holdings)> {
    let rest = text.trim().strip_prefix("NEED")?;
    let (need, have) = rest.split_once("; HAVE")?;
    let parse = |part: &str| -> Option<Holdings> {
        let mut out = [0; N_GOODS];
        for item in part.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (g, n) = item.split_once(':')?;
            out[g.parse::<Good>().ok()?.index()] = n.trim().parse().ok()?;
        }
        Some(out)
    };
    Some((parse(need)?, parse(have)?))
}
