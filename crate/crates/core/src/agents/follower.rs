//! Literal execution of a constitution's structured directives.
//!
//! Directives are read in ascending priority, list order breaking ties. The
//! first directive that yields a primary (physical) action wins; message
//! directives add a communication alongside it. When no directive applies the
//! agent falls back to the environment default: contribute 0, move toward the
//! nearest needed resource, or hoard.

use crate::agents::baselines::{
    acceptable, best_proposal, carrying_needed, here_has, needed, rich_cluster_message, room, step_towards,
    GridKnowledge, PartnerBook,
};
use crate::agents::{Action, AgentId, DecisionContext, Observation, PggObservation, Policy};
use crate::constitution::{Constitution, Directive};
use crate::env::gridworld::{GridAction, GridObservation, GridPhysical};
use crate::env::public_goods::{PggAction, ENDOWMENT};
use crate::env::trading::{needs_message, TradeAction, TradeObservation, TradePrimary};
use crate::env::Communication;

#[derive(Debug, Clone, Default)]
pub struct DirectiveFollower {
    grid: GridKnowledge,
    book: PartnerBook,
}

impl DirectiveFollower {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn public_goods(c: &Constitution, obs: &PggObservation) -> PggAction {
        let mut contribute: Option<u32> = None;
        let mut punish: Option<(AgentId, u32)> = None;
        let mut message: Option<Communication> = None;
        for d in c.directives() {
            match d {
                Directive::ContributeFixed { amount } if contribute.is_none() => {
                    contribute = Some((*amount).min(ENDOWMENT));
                }
                Directive::PunishBelowMax { tokens, per_round_cap } if punish.is_none() => {
                    let target = obs
                        .others_last()
                        .into_iter()
                        .filter(|(_, c)| *c < ENDOWMENT)
                        .min_by_key(|(a, c)| (*c, *a));
                    if let Some((target, _)) = target {
                        punish = Some((target, (*tokens).min(*per_round_cap).max(1)));
                    }
                }
                Directive::BroadcastEachRound { text } if message.is_none() => {
                    message = Some(Communication::Broadcast(text.clone()));
                }
                _ => {}
            }
        }
        let mut act = PggAction::contribute(contribute.unwrap_or(0));
        if let Some((target, tokens)) = punish {
            // punishment shares the round's endowment with the contribution
            act.contribute = act.contribute.min(ENDOWMENT - tokens);
            act = act.with_punish(target, tokens);
        }
        act.message = message;
        act
    }

    fn gridworld(&mut self, c: &Constitution, obs: &GridObservation) -> GridAction {
        self.grid.observe(obs);
        let want = needed(obs);
        let mut physical: Option<GridPhysical> = None;
        let mut message: Option<Communication> = None;
        for d in c.directives() {
            match d {
                Directive::DepositFirst if physical.is_none() => {
                    if carrying_needed(obs) && obs.pos == obs.site {
                        physical = Some(GridPhysical::Deposit);
                    }
                }
                Directive::GatherNeeded if physical.is_none() => {
                    if here_has(obs, &want) && room(obs) > 0 {
                        physical = Some(GridPhysical::Gather);
                    } else if carrying_needed(obs) {
                        physical = obs.pos.direction_to(obs.site).map(GridPhysical::Move);
                    }
                }
                Directive::MoveToLargestDeficit if physical.is_none() => {
                    let largest = want.iter().copied().max_by_key(|r| (obs.deficit[r.index()], std::cmp::Reverse(*r)));
                    if let Some(r) = largest {
                        physical = step_towards(obs, &self.grid, &[r]);
                    }
                }
                Directive::ShareSurplus { max_units } if physical.is_none() => {
                    physical = share_surplus(obs, *max_units);
                }
                Directive::ReportRichCluster { min_units } if message.is_none() => {
                    let here = obs.here();
                    if let Some(r) = want.iter().find(|r| here.units[r.index()] >= *min_units) {
                        message = Some(Communication::Broadcast(rich_cluster_message(*r, here.pos, here.units[r.index()])));
                    }
                }
                _ => {}
            }
        }
        if physical.is_none() && !c.directives().any(|d| matches!(d, Directive::DepositFirst | Directive::GatherNeeded | Directive::MoveToLargestDeficit | Directive::ShareSurplus { .. })) {
            physical = step_towards(obs, &self.grid, &want);
        }
        GridAction {
            communication: message,
            physical,
        }
    }

    fn trading(&mut self, c: &Constitution, obs: &TradeObservation) -> TradeAction {
        self.book.observe(obs);
        let mut primary: Option<TradePrimary> = None;
        let mut message: Option<Communication> = None;
        for d in c.directives() {
            match d {
                Directive::AcceptIfNeededAndFulfillable if primary.is_none() => {
                    primary = acceptable(obs, false).map(|id| TradePrimary::Accept { id });
                }
                Directive::RejectOnlyIfCannotFulfill if primary.is_none() => {
                    primary = obs
                        .incoming
                        .iter()
                        .filter(|p| obs.holdings[p.request.0.index()] < p.request.1)
                        .map(|p| p.id)
                        .min()
                        .map(|id| TradePrimary::Reject { id });
                }
                Directive::AvoidHoarding if primary.is_none() => {
                    primary = best_proposal(obs, &self.book);
                }
                Directive::BroadcastNeeds if message.is_none() => {
                    message = Some(Communication::Broadcast(needs_message(&obs.holdings, &obs.goal)));
                }
                _ => {}
            }
        }
        TradeAction {
            communication: message,
            primary: Some(primary.unwrap_or(TradePrimary::Hoard)),
        }
    }
}

/// Gives surplus of a needed resource to the first adjacent teammate.
fn share_surplus(obs: &GridObservation, max_units: u32) -> Option<GridPhysical> {
    let resource = needed(obs)
        .into_iter()
        .find(|r| obs.inventory[r.index()] > obs.deficit[r.index()])?;
    let surplus = obs.inventory[resource.index()] - obs.deficit[resource.index()];
    let mate = obs
        .cells()
        .flat_map(|c| c.residents.iter().copied())
        .filter(|a| *a != obs.agent && a.team() == obs.agent.team())
        .min()?;
    Some(GridPhysical::Give {
        target: mate,
        resource,
        units: surplus.min(max_units),
    })
}

impl Policy for DirectiveFollower {
    fn decide(&mut self, obs: &Observation, ctx: &DecisionContext<'_>) -> Action {
        let c = ctx.constitution;
        match obs {
            Observation::PublicGoods(o) => Action::PublicGoods(Self::public_goods(c, o)),
            Observation::Gridworld(o) => Action::Gridworld(self.gridworld(c, o)),
            Observation::Trading(o) => Action::Trading(self.trading(c, o)),
        }
    }

    fn name(&self) -> String {
        "directive_follower".into()
    }
}
