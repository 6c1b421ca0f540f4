//! In-run deliberation: proposal and voting rounds that amend the live
//! constitution by strict majority.
//!
//! A round collects at most [`MAX_PROPOSALS_PER_AGENT`] amendments per
//! participant, asks every participant for one ballot per proposal, adopts
//! those with strictly more YEA than NAY, and applies the adopted set in
//! submission order. Amendments that no longer apply (for example a MODIFY
//! whose target an earlier adopted REPEAL removed) are recorded as failed.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::action_log::{Event, EventKind};
use crate::agents::AgentId;
use crate::classify::{primary_category, Category};
use crate::constitution::{apply_amendment, Amendment, AmendmentAction, Constitution, ConstitutionRule, Directive};
use crate::sim::{EnvKind, EnvState};

pub const MAX_PROPOSALS_PER_AGENT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Vote {
    Yea,
    Nay,
    Abstain,
}

impl fmt::Display for Vote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Vote::Yea => "YEA",
            Vote::Nay => "NAY",
            Vote::Abstain => "ABSTAIN",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub voter: AgentId,
    pub vote: Vote,
    pub reasoning: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub yea: u32,
    pub nay: u32,
    pub abstain: u32,
}

impl Tally {
    pub fn of(ballots: &[Ballot]) -> Tally {
        let mut t = Tally::default();
        for b in ballots {
            match b.vote {
                Vote::Yea => t.yea += 1,
                Vote::Nay => t.nay += 1,
                Vote::Abstain => t.abstain += 1,
            }
        }
        t
    }

    pub fn passes(&self) -> bool {
        self.yea > self.nay
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: u32,
    pub amendment: Amendment,
    pub ballots: Vec<Ballot>,
    pub tally: Tally,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliberationRound {
    pub index: u32,
    pub turn: u32,
    pub participants: Vec<AgentId>,
    pub proposals: Vec<Proposal>,
    /// Ids of proposals with strictly more YEA than NAY.
    pub adopted: Vec<u32>,
    /// Adopted proposals that could not be applied, with the reason.
    pub failed: Vec<(u32, String)>,
    pub warnings: Vec<String>,
    pub constitution_before: Constitution,
    pub constitution_after: Constitution,
}

/// What every participant is told about the society before proposing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSummary {
    pub env: EnvKind,
    pub turn: u32,
    /// Observed deficits, most severe first.
    pub deficits: Vec<(Deficit, f64)>,
    pub text: String,
    /// One line per agent describing its contribution so far.
    pub agent_contributions: String,
}

impl PerformanceSummary {
    pub fn worst(&self) -> Option<Deficit> {
        self.deficits.first().map(|(d, _)| *d)
    }

    pub fn empty(env: EnvKind, turn: u32) -> Self {
        Self {
            env,
            turn,
            deficits: Vec::new(),
            text: String::new(),
            agent_contributions: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Deficit {
    FreeRiding,
    LowParticipation,
    Inequality,
    Conflict,
}

impl fmt::Display for Deficit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Deficit::FreeRiding => "free-riding",
            Deficit::LowParticipation => "low participation",
            Deficit::Inequality => "inequality",
            Deficit::Conflict => "conflict",
        })
    }
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    let min = values.iter().copied().fold(f64::MAX, f64::min);
    if values.is_empty() || max <= 0.0 {
        0.0
    } else {
        (max - min) / max
    }
}

fn rank(mut deficits: Vec<(Deficit, f64)>) -> Vec<(Deficit, f64)> {
    deficits.retain(|(_, s)| *s > 0.0);
    deficits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    deficits
}

/// Summarizes the state at a review point. `window` holds the events since the
/// previous review.
pub fn summarize(state: &EnvState, turn: u32, window: &[Event]) -> PerformanceSummary {
    let alive: Vec<AgentId> = AgentId::all().filter(|a| state.is_alive(*a)).collect();
    let n = alive.len().max(1) as f64;
    let mut deficits = Vec::new();
    let mut lines = Vec::new();
    let mut contrib = Vec::new();
    match state {
        EnvState::PublicGoods(s) => {
            let last: Vec<f64> = alive
                .iter()
                .filter_map(|a| s.last_contributions[a.index()])
                .map(f64::from)
                .collect();
            if !last.is_empty() {
                let mean = last.iter().sum::<f64>() / last.len() as f64;
                lines.push(format!("Mean contribution last round: {mean:.2} of 10."));
                if mean < 5.0 {
                    deficits.push((Deficit::FreeRiding, (5.0 - mean) / 5.0));
                }
            }
            let wealth: Vec<f64> = alive.iter().map(|a| s.wealth[a.index()]).collect();
            let sp = spread(&wealth);
            lines.push(format!("Wealth spread among survivors: {sp:.2}."));
            if sp > 0.3 {
                deficits.push((Deficit::Inequality, sp - 0.3));
            }
            let tokens: u32 = window
                .iter()
                .map(|e| match e.kind {
                    EventKind::Punish { tokens, .. } => tokens,
                    _ => 0,
                })
                .sum();
            if tokens > 0 {
                let len = window.iter().map(|e| e.turn).collect::<std::collections::BTreeSet<_>>().len().max(1);
                deficits.push((Deficit::Conflict, (tokens as f64 / (n * len as f64)).min(1.0)));
            }
            for a in AgentId::all() {
                let c = s.last_contributions[a.index()].map_or("-".to_string(), |c| c.to_string());
                contrib.push(format!("{a}: wealth {:.1}, last contribution {c}", s.wealth[a.index()]));
            }
        }
        EnvState::Gridworld(s) => {
            let idle = alive
                .iter()
                .filter(|a| !window.iter().any(|e| e.agent == **a && matches!(e.kind, EventKind::Deposit(_))))
                .count();
            lines.push(format!("{idle} of {} players deposited nothing this period.", alive.len()));
            if idle > 0 {
                deficits.push((Deficit::LowParticipation, idle as f64 / n));
            }
            let deposited: Vec<f64> = alive.iter().map(|a| f64::from(s.contributions[a.index()])).collect();
            let sp = spread(&deposited);
            if sp > 0.5 {
                deficits.push((Deficit::Inequality, (sp - 0.5) * 0.5));
            }
            let fights = window
                .iter()
                .filter(|e| matches!(e.kind, EventKind::Attack { .. } | EventKind::Steal { .. }))
                .count();
            if fights > 0 {
                deficits.push((Deficit::Conflict, (fights as f64 / 5.0).min(1.0)));
            }
            for a in AgentId::all() {
                contrib.push(format!("{a}: deposited {}", s.contributions[a.index()]));
            }
        }
        EnvState::Trading(s) => {
            let trades = window
                .iter()
                .filter(|e| matches!(e.kind, EventKind::Accept { swapped: true, .. }))
                .count() as f64;
            let wanted = n / 2.0;
            lines.push(format!("{trades} trades completed this period."));
            if trades < wanted {
                deficits.push((Deficit::LowParticipation, 1.0 - trades / wanted));
            }
            let completion: Vec<f64> = alive.iter().map(|a| s.completion(*a)).collect();
            let max = completion.iter().copied().fold(0.0, f64::max);
            let min = completion.iter().copied().fold(1.0, f64::min);
            if !completion.is_empty() && max - min > 0.3 {
                deficits.push((Deficit::Inequality, max - min - 0.3));
            }
            let friction = window
                .iter()
                .filter(|e| matches!(e.kind, EventKind::Reject { .. } | EventKind::Accept { swapped: false, .. }))
                .count();
            if friction > 0 {
                deficits.push((Deficit::Conflict, (friction as f64 / n).min(1.0)));
            }
            for a in AgentId::all() {
                contrib.push(format!("{a}: goal completion {:.0}%", s.completion(a) * 100.0));
            }
        }
    }
    let deficits = rank(deficits);
    if deficits.is_empty() {
        lines.push("No deficits observed.".into());
    } else {
        let list: Vec<String> = deficits.iter().map(|(d, s)| format!("{d} ({s:.2})")).collect();
        lines.push(format!("Observed deficits: {}.", list.join(", ")));
    }
    PerformanceSummary {
        env: state.kind(),
        turn,
        deficits,
        text: lines.join("\n"),
        agent_contributions: contrib.join("\n"),
    }
}

/// Parameterized amendment templates available to scripted proposers. Peer
/// punishment is deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Template {
    MinThreshold(u32),
    AdminPenalty(u32),
    Redistribute(u32),
    Mentorship(u32),
    CommNorm,
    Participation(u32),
}

impl Template {
    pub fn category(self) -> Category {
        match self {
            Template::MinThreshold(_) | Template::Participation(_) => Category::MinThresh,
            Template::AdminPenalty(_) => Category::AdminPen,
            Template::Redistribute(_) => Category::Redist,
            Template::Mentorship(_) => Category::Mentor,
            Template::CommNorm => Category::Comm,
        }
    }

    fn param(self) -> Option<u32> {
        match self {
            Template::MinThreshold(k)
            | Template::AdminPenalty(k)
            | Template::Redistribute(k)
            | Template::Mentorship(k)
            | Template::Participation(k) => Some(k),
            Template::CommNorm => None,
        }
    }

    fn with_param(self, k: u32) -> Template {
        match self {
            Template::MinThreshold(_) => Template::MinThreshold(k),
            Template::AdminPenalty(_) => Template::AdminPenalty(k),
            Template::Redistribute(_) => Template::Redistribute(k),
            Template::Mentorship(_) => Template::Mentorship(k),
            Template::Participation(_) => Template::Participation(k),
            Template::CommNorm => Template::CommNorm,
        }
    }

    /// Next parameter when strengthening an existing rule, `None` at the bound.
    fn adjusted(self, env: EnvKind, current: u32) -> Option<u32> {
        let (step, cap) = match (self, env) {
            (Template::MinThreshold(_), EnvKind::PublicGoods) => (1, 10),
            (Template::MinThreshold(_), EnvKind::Trading) => (10, 100),
            (Template::MinThreshold(_), EnvKind::Gridworld) => (1, 5),
            (Template::AdminPenalty(_), _) | (Template::Redistribute(_), _) => (5, 50),
            (Template::Mentorship(_), _) => (1, 3),
            (Template::Participation(_), _) => (1, 5),
            (Template::CommNorm, _) => return None,
        };
        (current < cap).then(|| (current + step).min(cap))
    }

    pub fn rule(self, env: EnvKind) -> ConstitutionRule {
        use EnvKind::*;
        let (name, guidance, summary, priority, directive) = match (self, env) {
            (Template::MinThreshold(k), PublicGoods) => (
                "Minimum Contribution Requirement",
                format!("All players must contribute at least {k} tokens each round: contribute({k})."),
                format!("Contribute at least {k} tokens every round."),
                1,
                Some(Directive::ContributeFixed { amount: k }),
            ),
            (Template::MinThreshold(k), Gridworld) => (
                "Minimum Contribution Requirement",
                format!("Every player must deposit at least {k} units at the team site each review period; deposit carried resources before anything else."),
                format!("Deposit at least {k} units per period."),
                1,
                Some(Directive::DepositFirst),
            ),
            (Template::MinThreshold(k), Trading) => (
                "Minimum Goal Completion Requirement",
                format!("Every trader should reach at least {k}% goal completion; accept any offer that supplies a needed good you can pay for."),
                format!("Target {k}% completion; accept fulfillable needed offers."),
                1,
                Some(Directive::AcceptIfNeededAndFulfillable),
            ),
            (Template::AdminPenalty(k), PublicGoods) => (
                "Contribution Shortfall Penalty",
                format!("Players contributing below the group minimum have {k}% of their round earnings deducted by the administrator."),
                format!("{k}% deduction for shortfalls."),
                2,
                None,
            ),
            (Template::AdminPenalty(k), Gridworld) => (
                "Aggression Penalty",
                format!("Any player who attacks or steals forfeits {k}% of carried resources as an administrative penalty."),
                format!("{k}% forfeiture for aggression."),
                2,
                None,
            ),
            (Template::AdminPenalty(k), Trading) => (
                "Rejection Penalty",
                format!("Traders who reject fulfillable offers receive a {k}% penalty on their next completion review."),
                format!("{k}% penalty for needless rejections."),
                2,
                None,
            ),
            (Template::Redistribute(k), PublicGoods) => (
                "Progressive Redistribution",
                format!("At the end of each round, {k}% of wealth above the group average is redistributed equally to players below it."),
                format!("Redistribute {k}% of above-average wealth."),
                3,
                None,
            ),
            (Template::Redistribute(k), Gridworld) => (
                "Resource Redistribution",
                format!("Teams redistribute {k}% of surplus carried resources to the team with the larger project deficit."),
                format!("Redistribute {k}% of surplus."),
                3,
                None,
            ),
            (Template::Redistribute(k), Trading) => (
                "Surplus Redistribution",
                format!("Offer surplus goods to traders who need them; keep no more than {k}% of any surplus idle."),
                "Trade away surplus instead of hoarding.".to_string(),
                3,
                Some(Directive::AvoidHoarding),
            ),
            (Template::Mentorship(k), PublicGoods) => (
                "Mentorship Program",
                format!("Wealthier players mentor newer contributors; mentors earn a bonus of {k} tokens when a mentee raises its contribution."),
                format!("{k}-token mentorship bonus."),
                4,
                None,
            ),
            (Template::Mentorship(k), Gridworld) => (
                "Mentorship Support",
                format!("Players with surplus resources give up to {k} units to an adjacent teammate who still needs them."),
                format!("Give up to {k} surplus units to teammates."),
                3,
                Some(Directive::ShareSurplus { max_units: k.clamp(1, 3) }),
            ),
            (Template::Mentorship(k), Trading) => (
                "Trading Mentorship",
                format!("Experienced traders guide others toward fair trades and earn a bonus of {k} goods for each mentored completion."),
                format!("{k}-good mentorship bonus."),
                4,
                None,
            ),
            (Template::CommNorm, PublicGoods) => (
                "Communication Norm",
                "Each round, broadcast a message stating your intended contribution.".to_string(),
                "Announce intentions every round.".to_string(),
                5,
                Some(Directive::BroadcastEachRound {
                    text: "I will contribute my share".into(),
                }),
            ),
            (Template::CommNorm, Gridworld) => (
                "Resource Reporting",
                "Broadcast the location of any rich resource cluster you find so others can gather there.".to_string(),
                "Report rich clusters.".to_string(),
                4,
                Some(Directive::ReportRichCluster { min_units: 3 }),
            ),
            (Template::CommNorm, Trading) => (
                "Collaboration Incentive",
                "Broadcast what you need and what you can offer each turn so partners can find you.".to_string(),
                "Broadcast needs and offers.".to_string(),
                2,
                Some(Directive::BroadcastNeeds),
            ),
            (Template::Participation(k), _) => (
                "Minimum Participation Requirement",
                format!("Every player must gather resources the team still needs on at least {k} turns per period, carrying them home once loaded."),
                format!("Gather needed resources at least {k} turns per period."),
                2,
                Some(Directive::GatherNeeded),
            ),
        };
        let mut rule = ConstitutionRule::new(name, guidance, summary, priority);
        rule.directive = directive;
        rule
    }

    /// Templates addressing a deficit in an environment, in proposal order.
    pub fn for_deficit(env: EnvKind, d: Deficit) -> Vec<Template> {
        use Deficit::*;
        use EnvKind::*;
        match (env, d) {
            (PublicGoods, FreeRiding) => vec![Template::MinThreshold(7), Template::AdminPenalty(20)],
            (PublicGoods, Inequality) => vec![Template::Redistribute(10)],
            (PublicGoods, Conflict) => vec![Template::CommNorm],
            (PublicGoods, LowParticipation) => vec![Template::Mentorship(2)],
            (Gridworld, LowParticipation) | (Gridworld, FreeRiding) => {
                vec![Template::Participation(1), Template::MinThreshold(1)]
            }
            (Gridworld, Inequality) => vec![Template::Mentorship(2), Template::Redistribute(10)],
            (Gridworld, Conflict) => vec![Template::CommNorm, Template::AdminPenalty(10)],
            (Trading, LowParticipation) | (Trading, FreeRiding) => vec![
                Template::CommNorm,
                Template::MinThreshold(70),
                Template::Redistribute(10),
            ],
            (Trading, Inequality) => vec![Template::Redistribute(10)],
            (Trading, Conflict) => vec![Template::AdminPenalty(10)],
        }
    }

    /// The template a rule was instantiated from, if any, matched by name.
    pub fn recognize(env: EnvKind, rule: &ConstitutionRule) -> Option<Template> {
        let all = [
            Template::MinThreshold(0),
            Template::AdminPenalty(0),
            Template::Redistribute(0),
            Template::Mentorship(0),
            Template::CommNorm,
            Template::Participation(0),
        ];
        all.into_iter().find(|t| t.rule(env).name == rule.name).map(|t| match t.param() {
            Some(_) => t.with_param(first_number(&rule.guidance).unwrap_or(0)),
            None => t,
        })
    }
}

fn first_number(text: &str) -> Option<u32> {
    let start = text.find(|c: char| c.is_ascii_digit())?;
    let digits: String = text[start..].chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

/// The category a voter attributes to a rule: its template's, else the
/// classifier's primary category.
pub fn rule_category(env: EnvKind, rule: &ConstitutionRule) -> Category {
    Template::recognize(env, rule).map_or_else(|| primary_category(rule), Template::category)
}

#[derive(Debug, Clone, Copy)]
pub struct ProposalContext<'a> {
    pub agent: AgentId,
    pub constitution: &'a Constitution,
    pub summary: &'a PerformanceSummary,
    pub max_proposals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct VoteContext<'a> {
    pub agent: AgentId,
    pub constitution: &'a Constitution,
    pub summary: &'a PerformanceSummary,
    pub proposal: &'a Proposal,
    pub all_proposals: &'a [Proposal],
}

pub trait Proposer: Send {
    fn propose(&mut self, ctx: &ProposalContext<'_>) -> Result<Vec<Amendment>, String>;
}

pub trait Voter: Send {
    fn vote(&mut self, ctx: &VoteContext<'_>) -> Result<(Vote, String), String>;
}

/// Template-driven proposer: walks the ranked deficits and proposes the
/// addressing templates, strengthening rules that already exist.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedProposer;

impl Proposer for ScriptedProposer {
    fn propose(&mut self, ctx: &ProposalContext<'_>) -> Result<Vec<Amendment>, String> {
        Ok(scripted_proposals(ctx.agent, ctx.summary, ctx.constitution, ctx.max_proposals))
    }
}

pub fn scripted_proposals(
    agent: AgentId,
    summary: &PerformanceSummary,
    constitution: &Constitution,
    max: usize,
) -> Vec<Amendment> {
    let env = summary.env;
    let mut out: Vec<Amendment> = Vec::new();
    for (deficit, _) in &summary.deficits {
        for t in Template::for_deficit(env, *deficit) {
            if out.len() >= max {
                return out;
            }
            let fresh = t.rule(env);
            let why = format!("Addresses observed {deficit}.");
            let amendment = match constitution.rule(&fresh.name) {
                None => Amendment::add(fresh, agent, why),
                Some(existing) => {
                    let current = Template::recognize(env, existing).and_then(Template::param);
                    match current.and_then(|k| t.adjusted(env, k)) {
                        Some(k) => Amendment::modify(existing.name.clone(), t.with_param(k).rule(env), agent, why),
                        None => continue,
                    }
                }
            };
            if !out.iter().any(|a| same_change(a, &amendment)) {
                out.push(amendment);
            }
        }
    }
    out
}

/// Deterministic voter: NAY on an ADD duplicating an existing rule's
/// category, YEA when the amendment addresses the worst deficit, else ABSTAIN.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedVoter;

impl Voter for ScriptedVoter {
    fn vote(&mut self, ctx: &VoteContext<'_>) -> Result<(Vote, String), String> {
        Ok(scripted_vote(&ctx.proposal.amendment, ctx.constitution, ctx.summary))
    }
}

pub fn scripted_vote(a: &Amendment, c: &Constitution, summary: &PerformanceSummary) -> (Vote, String) {
    let env = summary.env;
    let rule = a.new_rule.as_ref().or_else(|| a.target_rule.as_deref().and_then(|n| c.rule(n)));
    let Some(rule) = rule else {
        return (Vote::Abstain, "The amendment names no known rule.".into());
    };
    let category = rule_category(env, rule);
    if a.action == AmendmentAction::Add
        && category != Category::Other
        && c.rules.iter().any(|r| rule_category(env, r) == category)
    {
        return (Vote::Nay, format!("A {} rule already exists.", category.label()));
    }
    if a.action != AmendmentAction::Repeal {
        if let Some(worst) = summary.worst() {
            if Template::for_deficit(env, worst).iter().any(|t| t.category() == category) {
                return (Vote::Yea, format!("Addresses the worst observed deficit, {worst}."));
            }
        }
    }
    (Vote::Abstain, "Not related to the most pressing deficit.".into())
}

fn same_change(a: &Amendment, b: &Amendment) -> bool {
    a.action == b.action && a.target_rule == b.target_rule && a.new_rule == b.new_rule
}

/// Runs one round. `proposers` and `voters` are indexed by agent slot; only
/// `participants` are consulted.
pub fn run_round(
    index: u32,
    turn: u32,
    constitution: &Constitution,
    participants: &[AgentId],
    summary: &PerformanceSummary,
    proposers: &mut [Box<dyn Proposer>],
    voters: &mut [Box<dyn Voter>],
) -> DeliberationRound {
    let mut warnings = Vec::new();
    let mut proposals: Vec<Proposal> = Vec::new();
    for &agent in participants {
        let ctx = ProposalContext {
            agent,
            constitution,
            summary,
            max_proposals: MAX_PROPOSALS_PER_AGENT,
        };
        let submitted = match proposers[agent.index()].propose(&ctx) {
            Ok(list) => list,
            Err(e) => {
                warnings.push(format!("{agent}: proposer failed: {e}"));
                continue;
            }
        };
        if submitted.len() > MAX_PROPOSALS_PER_AGENT {
            warnings.push(format!(
                "{agent}: {} proposals submitted, {} dropped",
                submitted.len(),
                submitted.len() - MAX_PROPOSALS_PER_AGENT
            ));
        }
        for mut a in submitted.into_iter().take(MAX_PROPOSALS_PER_AGENT) {
            a.proposer = agent;
            if let Err(e) = a.check_shape() {
                warnings.push(format!("{agent}: {e}, dropped"));
                continue;
            }
            if let Some(first) = proposals.iter().find(|p| same_change(&p.amendment, &a)) {
                warnings.push(format!("{agent}: duplicate of proposal {}, merged", first.id));
                continue;
            }
            proposals.push(Proposal {
                id: proposals.len() as u32 + 1,
                amendment: a,
                ballots: Vec::new(),
                tally: Tally::default(),
            });
        }
    }

    for i in 0..proposals.len() {
        let mut ballots = Vec::with_capacity(participants.len());
        for &agent in participants {
            let ctx = VoteContext {
                agent,
                constitution,
                summary,
                proposal: &proposals[i],
                all_proposals: &proposals,
            };
            let ballot = match voters[agent.index()].vote(&ctx) {
                Ok((vote, reasoning)) => Ballot {
                    voter: agent,
                    vote,
                    reasoning,
                },
                Err(e) => Ballot {
                    voter: agent,
                    vote: Vote::Abstain,
                    reasoning: format!("voter failed: {e}"),
                },
            };
            ballots.push(ballot);
        }
        proposals[i].tally = Tally::of(&ballots);
        proposals[i].ballots = ballots;
    }

    let adopted: Vec<u32> = proposals.iter().filter(|p| p.tally.passes()).map(|p| p.id).collect();
    let (after, failed) = apply_adopted(constitution, &proposals, &adopted);
    DeliberationRound {
        index,
        turn,
        participants: participants.to_vec(),
        proposals,
        adopted,
        failed,
        warnings,
        constitution_before: constitution.clone(),
        constitution_after: after,
    }
}

/// Applies adopted proposals in submission order. The version increases by one
/// when the adopted set is nonempty.
pub fn apply_adopted(c: &Constitution, proposals: &[Proposal], adopted: &[u32]) -> (Constitution, Vec<(u32, String)>) {
    let mut current = c.clone();
    let mut failed = Vec::new();
    for p in proposals.iter().filter(|p| adopted.contains(&p.id)) {
        match apply_amendment(&current, &p.amendment) {
            Ok(next) => current = next,
            Err(e) => failed.push((p.id, e.to_string())),
        }
    }
    if !adopted.is_empty() {
        current.version = c.version + 1;
    }
    (current, failed)
}

/// Called by the simulation kernel at each review point.
pub trait DeliberationHook: Send {
    fn deliberate(
        &mut self,
        index: u32,
        turn: u32,
        constitution: &Constitution,
        participants: &[AgentId],
        summary: &PerformanceSummary,
    ) -> DeliberationRound;
}

/// A proposer and a voter per agent slot.
pub struct Protocol {
    pub proposers: Vec<Box<dyn Proposer>>,
    pub voters: Vec<Box<dyn Voter>>,
}

impl Protocol {
    pub fn scripted() -> Self {
        Self {
            proposers: AgentId::all().map(|_| Box::new(ScriptedProposer) as Box<dyn Proposer>).collect(),
            voters: AgentId::all().map(|_| Box::new(ScriptedVoter) as Box<dyn Voter>).collect(),
        }
    }
}

impl DeliberationHook for Protocol {
    fn deliberate(
        &mut self,
        index: u32,
        turn: u32,
        constitution: &Constitution,
        participants: &[AgentId],
        summary: &PerformanceSummary,
    ) -> DeliberationRound {
        run_round(
            index,
            turn,
            constitution,
            participants,
            summary,
            &mut self.proposers,
            &mut self.voters,
        )
    }
}
