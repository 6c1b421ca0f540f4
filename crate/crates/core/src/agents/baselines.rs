//! Rational baselines and greedy environment heuristics, plus the grid and
//! market helpers the directive follower shares with them.

use crate::agents::{Action, AgentId, DecisionContext, Memory, Observation, PggObservation, Policy};
use crate::env::gridworld::{region_hint, GridAction, GridObservation, GridPhysical, Pos, Resource};
use crate::env::public_goods::{PggAction, ENDOWMENT};
use crate::env::trading::{needs_message, parse_needs_message, Good, Holdings, TradeAction, TradeObservation, TradePrimary};
use crate::env::Communication;

fn pgg_only(policy: &str, obs: &Observation) -> ! {
    panic!("{policy} only plays the public goods game, got {obs:?}")
}

/// Contributes nothing, every round.
#[derive(Debug, Clone, Default)]
pub struct NashFreeRider;

impl Policy for NashFreeRider {
    fn decide(&mut self, obs: &Observation, _: &DecisionContext<'_>) -> Action {
        match obs {
            Observation::PublicGoods(_) => Action::PublicGoods(PggAction::contribute(0)),
            other => pgg_only("NashFreeRider", other),
        }
    }

    fn name(&self) -> String {
        "nash_free_rider".into()
    }
}

/// Contributes the full endowment, every round.
#[derive(Debug, Clone, Default)]
pub struct ParetoCooperator;

impl Policy for ParetoCooperator {
    fn decide(&mut self, obs: &Observation, _: &DecisionContext<'_>) -> Action {
        match obs {
            Observation::PublicGoods(_) => Action::PublicGoods(PggAction::contribute(ENDOWMENT)),
            other => pgg_only("ParetoCooperator", other),
        }
    }

    fn name(&self) -> String {
        "pareto_cooperator".into()
    }
}

/// Opens with 10, then matches the others' mean contribution, rounded half up.
#[derive(Debug, Clone, Default)]
pub struct ConditionalCooperator;

impl ConditionalCooperator {
    pub fn contribution(obs: &PggObservation) -> u32 {
        let others = obs.others_last();
        if others.is_empty() {
            return ENDOWMENT;
        }
        let mean = others.iter().map(|(_, c)| *c as f64).sum::<f64>() / others.len() as f64;
        ((mean + 0.5).floor() as u32).min(ENDOWMENT)
    }
}

impl Policy for ConditionalCooperator {
    fn decide(&mut self, obs: &Observation, _: &DecisionContext<'_>) -> Action {
        match obs {
            Observation::PublicGoods(o) => Action::PublicGoods(PggAction::contribute(Self::contribution(o))),
            other => pgg_only("ConditionalCooperator", other),
        }
    }

    fn name(&self) -> String {
        "conditional_cooperator".into()
    }
}

/// Resource cells an agent has seen or heard about.
#[derive(Debug, Clone, Default)]
pub(crate) struct GridKnowledge {
    cells: Memory<(Pos, [u32; 3])>,
}

pub(crate) fn rich_cluster_message(r: Resource, p: Pos, units: u32) -> String {
    format!("RICH {r} at {p}: {units}")
}

fn parse_rich_cluster(text: &str) -> Option<(Resource, Pos, u32)> {
    let rest = text.strip_prefix("RICH ")?;
    let (res, rest) = rest.split_once(" at (")?;
    let (coords, units) = rest.split_once("): ")?;
    let (r, c) = coords.split_once(',')?;
    Some((res.parse().ok()?, Pos::new(r.trim().parse().ok()?, c.trim().parse().ok()?), units.trim().parse().ok()?))
}

impl GridKnowledge {
    fn record(&mut self, p: Pos, units: [u32; 3]) {
        self.cells.retain(|(q, _)| *q != p);
        if units.iter().any(|&u| u > 0) {
            self.cells.push((p, units));
        }
    }

    pub fn observe(&mut self, obs: &GridObservation) {
        for m in &obs.inbox {
            if let Some((r, p, n)) = parse_rich_cluster(&m.text) {
                let mut units = [0; 3];
                units[r.index()] = n;
                self.record(p, units);
            }
        }
        for c in obs.cells() {
            self.record(c.pos, c.units);
        }
    }

    /// Nearest remembered cell holding any of `wanted`, ties to the lowest position.
    pub fn nearest(&self, from: Pos, wanted: &[Resource]) -> Option<Pos> {
        self.cells
            .iter()
            .filter(|(p, u)| *p != from && wanted.iter().any(|r| u[r.index()] > 0))
            .map(|(p, _)| *p)
            .min_by_key(|p| (from.manhattan(*p), *p))
    }
}

pub(crate) fn needed(obs: &GridObservation) -> Vec<Resource> {
    Resource::ALL.into_iter().filter(|r| obs.deficit[r.index()] > 0).collect()
}

pub(crate) fn carrying_needed(obs: &GridObservation) -> bool {
    needed(obs).iter().any(|r| obs.inventory[r.index()] > 0)
}

pub(crate) fn here_has(obs: &GridObservation, wanted: &[Resource]) -> bool {
    wanted.iter().any(|r| obs.here().units[r.index()] > 0)
}

pub(crate) fn room(obs: &GridObservation) -> u32 {
    obs.carry_capacity.saturating_sub(obs.inventory.iter().sum())
}

/// One step towards the nearest known cell with a wanted resource, or towards
/// the area where the resource is said to be.
pub(crate) fn step_towards(obs: &GridObservation, know: &GridKnowledge, wanted: &[Resource]) -> Option<GridPhysical> {
    if let Some(target) = know.nearest(obs.pos, wanted) {
        return obs.pos.direction_to(target).map(GridPhysical::Move);
    }
    wanted
        .iter()
        .map(|r| region_hint(*r))
        .find(|hint| *hint != obs.pos)
        .and_then(|hint| obs.pos.direction_to(hint))
        .map(GridPhysical::Move)
}

/// Carries needed resources home and deposits them; never attacks.
#[derive(Debug, Clone, Default)]
pub struct GreedyGatherer {
    know: GridKnowledge,
}

impl GreedyGatherer {
    fn choose(&mut self, obs: &GridObservation) -> GridAction {
        self.know.observe(obs);
        let want = needed(obs);
        if carrying_needed(obs) {
            return GridAction {
                communication: None,
                physical: Some(match obs.pos.direction_to(obs.site) {
                    None => GridPhysical::Deposit,
                    Some(d) => GridPhysical::Move(d),
                }),
            };
        }
        if want.is_empty() {
            return GridAction::rest();
        }
        if here_has(obs, &want) && room(obs) > 0 {
            return GridAction::physical(GridPhysical::Gather);
        }
        GridAction {
            communication: None,
            physical: step_towards(obs, &self.know, &want),
        }
    }
}

impl Policy for GreedyGatherer {
    fn decide(&mut self, obs: &Observation, _: &DecisionContext<'_>) -> Action {
        match obs {
            Observation::Gridworld(o) => Action::Gridworld(self.choose(o)),
            other => panic!("GreedyGatherer only plays the gridworld, got {other:?}"),
        }
    }

    fn name(&self) -> String {
        "greedy_gatherer".into()
    }
}

/// Latest needs/surplus broadcast heard from each trader.
#[derive(Debug, Clone, Default)]
pub(crate) struct PartnerBook {
    heard: Memory<(AgentId, Holdings, Holdings)>,
}

impl PartnerBook {
    pub fn observe(&mut self, obs: &TradeObservation) {
        for m in &obs.inbox {
            if m.from == obs.agent {
                continue;
            }
            if let Some((need, have)) = parse_needs_message(&m.text) {
                self.heard.retain(|(a, _, _)| *a != m.from);
                self.heard.push((m.from, need, have));
            }
        }
    }

    pub fn latest(&self, a: AgentId) -> Option<(Holdings, Holdings)> {
        self.heard.iter().rev().find(|(x, _, _)| *x == a).map(|(_, n, h)| (*n, *h))
    }
}

/// First incoming proposal that offers a good this agent still needs and
/// requests units it holds; with `surplus_only` the request must also come
/// out of surplus.
pub(crate) fn acceptable(obs: &TradeObservation, surplus_only: bool) -> Option<u32> {
    let mut incoming = obs.incoming.clone();
    incoming.sort_by_key(|p| p.id);
    incoming
        .iter()
        .find(|p| {
            let (give, units) = p.request;
            let spare = if surplus_only {
                obs.goal.surplus(&obs.holdings, give)
            } else {
                obs.holdings[give.index()]
            };
            obs.goal.deficit(&obs.holdings, p.offer.0) > 0 && spare >= units
        })
        .map(|p| p.id)
}

/// The non-deceptive 1:1 proposal with the largest completion gain among
/// partners whose last broadcast asks for the offered good and lists the
/// requested good as surplus. Ties go to the lowest partner, then the goal's
/// good order, then the lowest offered good.
pub(crate) fn best_proposal(obs: &TradeObservation, book: &PartnerBook) -> Option<TradePrimary> {
    let mut best: Option<(u32, TradePrimary)> = None;
    for partner in AgentId::all() {
        if partner == obs.agent || !obs.alive[partner.index()] {
            continue;
        }
        if obs.outgoing.iter().any(|p| p.target == partner) {
            continue;
        }
        let Some((their_need, their_have)) = book.latest(partner) else {
            continue;
        };
        for (y, _) in obs.goal.needs {
            let deficit = obs.goal.deficit(&obs.holdings, y);
            if deficit == 0 || their_have[y.index()] == 0 {
                continue;
            }
            for x in Good::ALL {
                let spare = obs.goal.surplus(&obs.holdings, x);
                if x == y || spare == 0 || their_need[x.index()] == 0 {
                    continue;
                }
                let units = deficit.min(their_have[y.index()]).min(spare).min(their_need[x.index()]);
                if best.as_ref().is_none_or(|(u, _)| units > *u) {
                    best = Some((
                        units,
                        TradePrimary::Propose {
                            target: partner,
                            offer: (x, units),
                            request: (y, units),
                        },
                    ));
                }
            }
        }
    }
    best.map(|(_, p)| p)
}

/// Accepts useful offers, otherwise proposes the most useful trade it knows
/// of, otherwise hoards. Broadcasts its needs every turn.
#[derive(Debug, Clone, Default)]
pub struct GreedyTrader {
    book: PartnerBook,
}

impl GreedyTrader {
    fn choose(&mut self, obs: &TradeObservation) -> TradeAction {
        self.book.observe(obs);
        let primary = if let Some(id) = acceptable(obs, true) {
            TradePrimary::Accept { id }
        } else if let Some(p) = best_proposal(obs, &self.book) {
            p
        } else {
            TradePrimary::Hoard
        };
        TradeAction {
            communication: Some(Communication::Broadcast(needs_message(&obs.holdings, &obs.goal))),
            primary: Some(primary),
        }
    }
}

impl Policy for GreedyTrader {
    fn decide(&mut self, obs: &Observation, _: &DecisionContext<'_>) -> Action {
        match obs {
            Observation::Trading(o) => Action::Trading(self.choose(o)),
            other => panic!("GreedyTrader only plays the trading market, got {other:?}"),
        }
    }

    fn name(&self) -> String {
        "greedy_trader".into()
    }
}
