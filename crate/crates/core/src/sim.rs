//! The turn loop shared by all three environments.
//!
//! Each turn, every alive agent receives an observation holding the messages
//! sent to it last turn and returns one action. Communications are logged
//! before physical actions. At every multiple of the Overseer interval a
//! deliberation round (when enabled) runs at the start of the turn and the
//! Overseer removes the lowest-metric agent at the end of it, until only
//! `elimination_floor` agents remain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_log::{Event, EventKind};
use crate::agents::{
    Action, AgentId, ConditionalCooperator, DecisionContext, DirectiveFollower, GreedyGatherer, GreedyTrader,
    NashFreeRider, Observation, ParetoCooperator, PggObservation, Policy, Profile,
};
use crate::constitution::Constitution;
use crate::deliberation::{summarize, DeliberationHook, DeliberationRound, Protocol};
use crate::env::gridworld::{GridConfig, GridState};
use crate::env::public_goods::PggState;
use crate::env::trading::TradeState;
use crate::env::{Communication, Message};
use crate::rng::RngStream;
use crate::scoring::{
    conflict_grid, conflict_pgg, conflict_trading, productivity_grid, productivity_pgg, productivity_trading,
    survival, StabilityBreakdown, N_AGENTS,
};

/// Re-asks after an illegal action before the run fails.
pub const MAX_RETRIES: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Gridworld,
    PublicGoods,
    Trading,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::Gridworld, EnvKind::PublicGoods, EnvKind::Trading];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::Gridworld => "gridworld",
            EnvKind::PublicGoods => "public_goods",
            EnvKind::Trading => "trading",
        }
    }

    pub fn parse(s: &str) -> Option<EnvKind> {
        match s {
            "gridworld" | "grid" => Some(EnvKind::Gridworld),
            "public_goods" | "pgg" | "public-goods" => Some(EnvKind::PublicGoods),
            "trading" => Some(EnvKind::Trading),
            _ => None,
        }
    }

    pub fn default_horizon(self) -> u32 {
        match self {
            EnvKind::Gridworld => 80,
            EnvKind::PublicGoods | EnvKind::Trading => 40,
        }
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Control,
    Deliberation,
    Evolution { constitution: Constitution },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Control => "control",
            Method::Deliberation => "deliberation",
            Method::Evolution { .. } => "evolution",
        }
    }

    pub fn initial_constitution(&self) -> Constitution {
        match self {
            Method::Evolution { constitution } => constitution.clone(),
            _ => Constitution::blank(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub env: EnvKind,
    pub horizon: u32,
    pub n_agents: usize,
    pub seed: u64,
    pub overseer_interval: u32,
    /// Public goods pool multiplier; ignored elsewhere.
    pub multiplier: f64,
    pub method: Method,
    pub elimination_floor: usize,
    pub profile: Profile,
    #[serde(default)]
    pub debate: bool,
    #[serde(default)]
    pub grid: GridConfig,
}

impl SimulationConfig {
    pub fn new(env: EnvKind, seed: u64) -> Self {
        Self {
            env,
            horizon: env.default_horizon(),
            n_agents: N_AGENTS,
            seed,
            overseer_interval: 10,
            multiplier: 1.5,
            method: Method::Control,
            elimination_floor: 0,
            profile: Profile::DirectiveFollower,
            debate: false,
            grid: GridConfig::default(),
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_multiplier(mut self, m: f64) -> Self {
        self.multiplier = m;
        self
    }

    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = profile;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.n_agents != N_AGENTS {
            return bad(format!("n_agents must be {N_AGENTS}"));
        }
        if self.horizon == 0 || self.overseer_interval == 0 {
            return bad("horizon and overseer_interval must be positive".into());
        }
        if self.horizon % self.overseer_interval != 0 {
            return bad(format!(
                "horizon {} is not a multiple of the overseer interval {}",
                self.horizon, self.overseer_interval
            ));
        }
        if !(self.multiplier.is_finite() && self.multiplier > 0.0) {
            return bad(format!("multiplier {} must be positive", self.multiplier));
        }
        if self.elimination_floor > N_AGENTS {
            return bad(format!("elimination_floor {} exceeds {N_AGENTS}", self.elimination_floor));
        }
        if self.debate {
            return Err(SimError::DebateUnsupported);
        }
        Ok(())
    }

    /// Number of Overseer eliminations a run performs.
    pub fn expected_eliminations(&self) -> usize {
        ((self.horizon / self.overseer_interval) as usize).min(N_AGENTS - self.elimination_floor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} policies, got {got}")]
    PolicyCount { expected: usize, got: usize },
    #[error("the deliberation method needs a deliberation hook")]
    MissingHook,
    #[error("the debate phase is not available")]
    DebateUnsupported,
    #[error("{agent} produced no legal action on turn {turn}: {detail}")]
    PolicyFailure { agent: AgentId, turn: u32, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Elimination {
    pub turn: u32,
    pub agent: AgentId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: SimulationConfig,
    pub events: Vec<Event>,
    pub eliminations: Vec<Elimination>,
    pub deliberation: Vec<DeliberationRound>,
    pub final_constitution: Constitution,
    pub final_metrics: StabilityBreakdown,
    /// Wealth, deposited units or goal completion, by agent slot.
    pub per_agent_final: [f64; N_AGENTS],
}

impl RunRecord {
    /// Canonical JSON encoding; equal records give equal bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run records serialize")
    }

    pub fn from_json(text: &str) -> Result<RunRecord, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn survivors(&self) -> Vec<AgentId> {
        AgentId::all()
            .filter(|a| !self.eliminations.iter().any(|e| e.agent == *a))
            .collect()
    }
}

/// The live state of whichever environment a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnvState {
    PublicGoods(PggState),
    Gridworld(GridState),
    Trading(TradeState),
}

impl EnvState {
    pub fn init(config: &SimulationConfig) -> EnvState {
        match config.env {
            EnvKind::PublicGoods => EnvState::PublicGoods(PggState::new(config.multiplier)),
            EnvKind::Gridworld => EnvState::Gridworld(GridState::randomize(config.seed, config.grid)),
            EnvKind::Trading => EnvState::Trading(TradeState::randomize(config.seed)),
        }
    }

    pub fn kind(&self) -> EnvKind {
        match self {
            EnvState::PublicGoods(_) => EnvKind::PublicGoods,
            EnvState::Gridworld(_) => EnvKind::Gridworld,
            EnvState::Trading(_) => EnvKind::Trading,
        }
    }

    pub fn is_alive(&self, a: AgentId) -> bool {
        match self {
            EnvState::PublicGoods(s) => s.is_alive(a),
            EnvState::Gridworld(s) => s.is_alive(a),
            EnvState::Trading(s) => s.is_alive(a),
        }
    }

    pub fn alive_count(&self) -> usize {
        AgentId::all().filter(|a| self.is_alive(*a)).count()
    }

    pub fn eliminate(&mut self, a: AgentId) {
        match self {
            EnvState::PublicGoods(s) => s.eliminate(a),
            EnvState::Gridworld(s) => s.eliminate(a),
            EnvState::Trading(s) => s.eliminate(a),
        }
    }

    /// The Overseer's metric: wealth, deposited units or goal completion.
    pub fn metric(&self) -> [f64; N_AGENTS] {
        let mut out = [0.0; N_AGENTS];
        for a in AgentId::all() {
            out[a.index()] = match self {
                EnvState::PublicGoods(s) => s.wealth[a.index()],
                EnvState::Gridworld(s) => f64::from(s.contributions[a.index()]),
                EnvState::Trading(s) => s.completion(a),
            };
        }
        out
    }

    fn observe(&self, agent: AgentId, turn: u32, horizon: u32, inbox: Vec<Message>) -> Observation {
        match self {
            EnvState::PublicGoods(s) => Observation::PublicGoods(PggObservation {
                agent,
                round: turn,
                horizon,
                m: s.m,
                wealth: s.wealth[agent.index()],
                average_wealth: s.average_alive_wealth(),
                alive: s.alive,
                last_contributions: s.last_contributions,
                inbox,
            }),
            EnvState::Gridworld(s) => Observation::Gridworld(s.local_observation(agent, inbox)),
            EnvState::Trading(s) => Observation::Trading(s.observation(agent, inbox)),
        }
    }

    fn check(&self, agent: AgentId, action: &Action) -> Result<(), String> {
        let comm = match (self, action) {
            (EnvState::PublicGoods(s), Action::PublicGoods(a)) => {
                s.check_action(agent, a).map_err(|e| e.to_string())?;
                &a.message
            }
            (EnvState::Gridworld(s), Action::Gridworld(a)) => {
                s.check_action(agent, a).map_err(|e| e.to_string())?;
                &a.communication
            }
            (EnvState::Trading(s), Action::Trading(a)) => {
                s.check_action(agent, a).map_err(|e| e.to_string())?;
                &a.communication
            }
            _ => return Err("action for the wrong environment".into()),
        };
        match comm {
            Some(Communication::Private { to, .. }) if !to.is_valid() || *to == agent => {
                Err(format!("cannot message {to}"))
            }
            _ => Ok(()),
        }
    }

    fn step(&self, actions: Vec<(AgentId, Action)>, conflict_rng: &mut RngStream) -> Result<(EnvState, Vec<Event>), (AgentId, String)> {
        match self {
            EnvState::PublicGoods(s) => {
                let acts: Vec<_> = actions
                    .into_iter()
                    .filter_map(|(a, x)| match x {
                        Action::PublicGoods(p) => Some((a, p)),
                        _ => None,
                    })
                    .collect();
                s.resolve_round(&acts)
                    .map(|(n, e)| (EnvState::PublicGoods(n), e))
                    .map_err(|e| (e.agent(), e.to_string()))
            }
            EnvState::Gridworld(s) => {
                let acts: Vec<_> = actions
                    .into_iter()
                    .filter_map(|(a, x)| match x {
                        Action::Gridworld(g) => Some((a, g)),
                        _ => None,
                    })
                    .collect();
                s.step_turn(&acts, conflict_rng)
                    .map(|(n, e)| (EnvState::Gridworld(n), e))
                    .map_err(|e| (e.agent(), e.to_string()))
            }
            EnvState::Trading(s) => {
                let acts: Vec<_> = actions
                    .into_iter()
                    .filter_map(|(a, x)| match x {
                        Action::Trading(t) => Some((a, t)),
                        _ => None,
                    })
                    .collect();
                s.step_turn(&acts)
                    .map(|(n, e)| (EnvState::Trading(n), e))
                    .map_err(|e| (e.agent(), e.to_string()))
            }
        }
    }

    /// P, V and C for the state at the end of a run.
    pub fn final_metrics(&self, config: &SimulationConfig) -> StabilityBreakdown {
        let v = survival(self.alive_count());
        let (p, c) = match self {
            EnvState::PublicGoods(s) => (
                productivity_pgg(&s.wealth, s.m, config.horizon),
                conflict_pgg(s.punish_tokens_spent, 10 * N_AGENTS as u32 * config.horizon),
            ),
            EnvState::Gridworld(s) => (
                productivity_grid(&s.project_fractions()),
                conflict_grid(s.conflict_events),
            ),
            EnvState::Trading(s) => {
                let completions: Vec<f64> = AgentId::all().map(|a| s.completion(a)).collect();
                (
                    productivity_trading(&completions),
                    conflict_trading(s.deceptive_flags, s.rejections, s.proposals_total),
                )
            }
        };
        StabilityBreakdown::from_components(p, v, c).expect("components are clipped to [0,1]")
    }
}

fn communication_of(action: &Action) -> Option<&Communication> {
    match action {
        Action::PublicGoods(a) => a.message.as_ref(),
        Action::Gridworld(a) => a.communication.as_ref(),
        Action::Trading(a) => a.communication.as_ref(),
    }
}

/// The alive agent with the smallest metric, ties to the lowest index.
pub fn overseer_eliminate(metric: &[f64; N_AGENTS], alive: &[AgentId]) -> Option<AgentId> {
    alive
        .iter()
        .copied()
        .min_by(|a, b| metric[a.index()].total_cmp(&metric[b.index()]).then(a.cmp(b)))
}

/// Runs one simulation. `policies` holds one policy per agent slot.
pub fn run_simulation(
    config: &SimulationConfig,
    policies: &mut [Box<dyn Policy>],
    mut hook: Option<&mut dyn DeliberationHook>,
) -> Result<RunRecord, SimError> {
    config.validate()?;
    if policies.len() != N_AGENTS {
        return Err(SimError::PolicyCount {
            expected: N_AGENTS,
            got: policies.len(),
        });
    }
    let deliberating = config.method == Method::Deliberation;
    if deliberating && hook.is_none() {
        return Err(SimError::MissingHook);
    }

    let mut state = EnvState::init(config);
    let mut constitution = config.method.initial_constitution();
    let mut conflict_rng = RngStream::new(config.seed, "gridworld:conflict");
    let mut events: Vec<Event> = Vec::new();
    let mut eliminations = Vec::new();
    let mut rounds = Vec::new();
    let mut outbox: Vec<(AgentId, Communication)> = Vec::new();
    let mut window_start = 0usize;

    for turn in 1..=config.horizon {
        let review = turn % config.overseer_interval == 0;
        let alive: Vec<AgentId> = AgentId::all().filter(|a| state.is_alive(*a)).collect();

        if review && deliberating {
            let index = turn / config.overseer_interval;
            let summary = summarize(&state, turn, &events[window_start..]);
            let round = match hook.as_deref_mut() {
                Some(h) => h.deliberate(index, turn, &constitution, &alive, &summary),
                None => unreachable!("checked above"),
            };
            constitution = round.constitution_after.clone();
            rounds.push(round);
        }

        let mut chosen: Vec<(AgentId, Action)> = Vec::with_capacity(alive.len());
        for &agent in &alive {
            let inbox = deliver(&outbox, agent, turn - 1);
            let obs = state.observe(agent, turn, config.horizon, inbox);
            let mut attempt = 0;
            let action = loop {
                let ctx = DecisionContext {
                    agent,
                    turn,
                    constitution: &constitution,
                    attempt,
                };
                let action = policies[agent.index()].decide(&obs, &ctx);
                match state.check(agent, &action) {
                    Ok(()) => break action,
                    Err(detail) if attempt >= MAX_RETRIES => {
                        return Err(SimError::PolicyFailure { agent, turn, detail });
                    }
                    Err(_) => attempt += 1,
                }
            };
            chosen.push((agent, action));
        }

        outbox.clear();
        for (agent, action) in &chosen {
            if let Some(c) = communication_of(action) {
                let kind = match c {
                    Communication::Broadcast(text) => EventKind::Broadcast(text.clone()),
                    Communication::Private { to, text } => EventKind::Private {
                        to: *to,
                        text: text.clone(),
                    },
                };
                events.push(Event::new(turn, *agent, kind));
                outbox.push((*agent, c.clone()));
            }
        }

        let (next, step_events) = state
            .step(chosen, &mut conflict_rng)
            .map_err(|(agent, detail)| SimError::PolicyFailure { agent, turn, detail })?;
        state = next;
        events.extend(step_events);

        if review {
            window_start = events.len();
            let alive: Vec<AgentId> = AgentId::all().filter(|a| state.is_alive(*a)).collect();
            if alive.len() > config.elimination_floor {
                if let Some(agent) = overseer_eliminate(&state.metric(), &alive) {
                    state.eliminate(agent);
                    eliminations.push(Elimination { turn, agent });
                }
            }
        }
    }

    Ok(RunRecord {
        config: config.clone(),
        final_metrics: state.final_metrics(config),
        per_agent_final: state.metric(),
        events,
        eliminations,
        deliberation: rounds,
        final_constitution: constitution,
    })
}

fn deliver(outbox: &[(AgentId, Communication)], to: AgentId, turn: u32) -> Vec<Message> {
    outbox
        .iter()
        .filter_map(|(from, c)| match c {
            Communication::Broadcast(text) if *from != to => Some(Message {
                turn,
                from: *from,
                text: text.clone(),
                private: false,
            }),
            Communication::Private { to: dest, text } if *dest == to => Some(Message {
                turn,
                from: *from,
                text: text.clone(),
                private: true,
            }),
            _ => None,
        })
        .collect()
}

/// The scripted policy an agent slot uses under a profile.
pub fn scripted_policy(env: EnvKind, profile: Profile) -> Box<dyn Policy> {
    match (profile, env) {
        (Profile::DirectiveFollower, _) => Box::new(DirectiveFollower::new()),
        (Profile::NashFreeRider, EnvKind::PublicGoods) => Box::new(NashFreeRider),
        (Profile::ParetoCooperator, EnvKind::PublicGoods) => Box::new(ParetoCooperator),
        (Profile::ConditionalCooperator, EnvKind::PublicGoods) | (Profile::Baseline, EnvKind::PublicGoods) => {
            Box::new(ConditionalCooperator)
        }
        (_, EnvKind::Gridworld) => Box::new(GreedyGatherer::default()),
        (_, EnvKind::Trading) => Box::new(GreedyTrader::default()),
    }
}

/// Runs a fully scripted simulation: the configured profile for every agent
/// and, under the deliberation method, the template proposer and voter.
pub fn run_scripted(config: &SimulationConfig) -> Result<RunRecord, SimError> {
    let mut policies: Vec<Box<dyn Policy>> = AgentId::all().map(|_| scripted_policy(config.env, config.profile)).collect();
    let mut protocol = Protocol::scripted();
    let hook: Option<&mut dyn DeliberationHook> = match config.method {
        Method::Deliberation => Some(&mut protocol),
        _ => None,
    };
    run_simulation(config, &mut policies, hook)
}
