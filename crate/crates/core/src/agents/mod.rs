//! Agent identities, the policy contract and the scripted policies.

mod baselines;
mod follower;

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::constitution::Constitution;
use crate::env::gridworld::{GridAction, GridObservation};
use crate::env::public_goods::PggAction;
use crate::env::trading::{TradeAction, TradeObservation};
use crate::env::Message;
use crate::scoring::N_AGENTS;

pub use baselines::{ConditionalCooperator, GreedyGatherer, GreedyTrader, NashFreeRider, ParetoCooperator};
pub use follower::DirectiveFollower;

/// Conversation memory per agent, in entries.
pub const MEMORY_CAPACITY: usize = 25;

/// Agent identifier, 1 through 6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Team {
    One,
    Two,
}

impl AgentId {
    pub fn all() -> impl Iterator<Item = AgentId> {
        (1..=N_AGENTS as u8).map(AgentId)
    }

    pub fn is_valid(self) -> bool {
        (1..=N_AGENTS as u8).contains(&self.0)
    }

    /// Zero-based slot for per-agent arrays.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn team(self) -> Team {
        if self.0 <= 3 {
            Team::One
        } else {
            Team::Two
        }
    }

    pub fn teammates(self) -> impl Iterator<Item = AgentId> {
        AgentId::all().filter(move |a| *a != self && a.team() == self.team())
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Player {}", self.0)
    }
}

/// Bounded FIFO memory; the oldest entry is dropped when full.
#[derive(Debug, Clone, PartialEq)]
pub struct Memory<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T> Memory<T> {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, item: T) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn retain(&mut self, f: impl FnMut(&T) -> bool) {
        self.items.retain(f);
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &T> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

impl<T> Default for Memory<T> {
    fn default() -> Self {
        Self::new(MEMORY_CAPACITY)
    }
}

/// What a public goods player sees at the start of a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PggObservation {
    pub agent: AgentId,
    pub round: u32,
    pub horizon: u32,
    pub m: f64,
    pub wealth: f64,
    pub average_wealth: f64,
    pub alive: [bool; N_AGENTS],
    pub last_contributions: [Option<u32>; N_AGENTS],
    pub inbox: Vec<Message>,
}

impl PggObservation {
    /// Last-round contributions of the other alive players.
    pub fn others_last(&self) -> Vec<(AgentId, u32)> {
        AgentId::all()
            .filter(|a| *a != self.agent && self.alive[a.index()])
            .filter_map(|a| self.last_contributions[a.index()].map(|c| (a, c)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    PublicGoods(PggObservation),
    Gridworld(GridObservation),
    Trading(TradeObservation),
}

impl Observation {
    pub fn agent(&self) -> AgentId {
        match self {
            Observation::PublicGoods(o) => o.agent,
            Observation::Gridworld(o) => o.agent,
            Observation::Trading(o) => o.agent,
        }
    }

    pub fn inbox(&self) -> &[Message] {
        match self {
            Observation::PublicGoods(o) => &o.inbox,
            Observation::Gridworld(o) => &o.inbox,
            Observation::Trading(o) => &o.inbox,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    PublicGoods(PggAction),
    Gridworld(GridAction),
    Trading(TradeAction),
}

/// Everything a policy may consult besides its observation.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub agent: AgentId,
    pub turn: u32,
    pub constitution: &'a Constitution,
    /// Zero on the first request of a turn; counts re-asks after an illegal action.
    pub attempt: u32,
}

/// The contract every agent implements. Scripted policies are deterministic
/// functions of their observation, context and internal memory.
pub trait Policy: Send {
    fn decide(&mut self, obs: &Observation, ctx: &DecisionContext<'_>) -> Action;

    fn name(&self) -> String;
}

/// A named family of scripted policies, one per environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Environment baselines: greedy gatherer, conditional cooperator, greedy trader.
    Baseline,
    DirectiveFollower,
    NashFreeRider,
    ParetoCooperator,
    ConditionalCooperator,
}

impl Profile {
    pub const ALL: [Profile; 5] = [
        Profile::Baseline,
        Profile::DirectiveFollower,
        Profile::NashFreeRider,
        Profile::ParetoCooperator,
        Profile::ConditionalCooperator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Baseline => "baseline",
            Profile::DirectiveFollower => "follower",
            Profile::NashFreeRider => "nash",
            Profile::ParetoCooperator => "pareto",
            Profile::ConditionalCooperator => "conditional",
        }
    }

    pub fn parse(s: &str) -> Option<Profile> {
        Profile::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn teams_and_indices() {
        let one: Vec<u8> = AgentId::all().filter(|a| a.team() == Team::One).map(|a| a.0).collect();
        assert_eq!(one, vec![1, 2, 3]);
        assert_eq!(AgentId(6).index(), 5);
        assert!(!AgentId(0).is_valid() && !AgentId(7).is_valid());
        assert_eq!(AgentId(5).teammates().map(|a| a.0).collect::<Vec<_>>(), vec![4, 6]);
    }

    #[test]
    fn memory_is_bounded() {
        let mut m = Memory::default();
        for i in 0..40 {
            m.push(i);
        }
        assert_eq!(m.len(), MEMORY_CAPACITY);
        assert_eq!(m.iter().next(), Some(&15));
    }
}
