//! Mutation operators over constitutions.

use serde::{Deserialize, Serialize};

use crate::constitution::{validate_constitution, PRIORITY_MAX, PRIORITY_MIN, Constitution, ConstitutionRule, Directive};
use crate::deliberation::{Deficit, Template};
use crate::fixtures;
use crate::rng::UniformSource;
use crate::sim::EnvKind;

/// Redraws allowed before the parent is copied unchanged.
pub const MAX_REDRAWS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutation {
    pub child: Constitution,
    /// Short description, e.g. `add:FullContribution`.
    pub op: String,
}

pub trait Mutator: Send {
    fn mutate(&mut self, parent: &Constitution, rng: &mut dyn UniformSource) -> Mutation;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Add,
    Remove,
    Perturb,
    Swap,
}

/// Add a library rule, remove a rule, nudge a numeric payload by one, or swap
/// two priorities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedMutator {
    pub library: Vec<ConstitutionRule>,
}

impl ScriptedMutator {
    pub fn new(library: Vec<ConstitutionRule>) -> Self {
        Self { library }
    }

    /// The published evolved rules for `env` plus the deliberation templates.
    /// Published priorities outside 1-5 are clamped into range.
    pub fn for_env(env: EnvKind) -> Self {
        let mut library: Vec<ConstitutionRule> = fixtures::evolved_for(env).rules;
        for r in &mut library {
            r.priority = r.priority.clamp(PRIORITY_MIN, PRIORITY_MAX);
        }
        if env == EnvKind::PublicGoods {
            library.push(
                ConstitutionRule::new(
                    "HalfContribution",
                    "Each round, contribute half of your endowment: contribute(5).",
                    "Contribute 5 tokens each round.",
                    2,
                )
                .with_directive(Directive::ContributeFixed { amount: 5 }),
            );
        }
        for d in [Deficit::FreeRiding, Deficit::LowParticipation, Deficit::Inequality, Deficit::Conflict] {
            for t in Template::for_deficit(env, d) {
                let rule = t.rule(env);
                if !library.iter().any(|r| r.name == rule.name) {
                    library.push(rule);
                }
            }
        }
        Self { library }
    }

    fn applicable(&self, parent: &Constitution) -> Vec<Op> {
        let mut ops = Vec::new();
        if self.library.iter().any(|r| !parent.contains(&r.name)) {
            ops.push(Op::Add);
        }
        if !parent.rules.is_empty() {
            ops.push(Op::Remove);
        }
        if parent.rules.iter().any(|r| r.directive.as_ref().is_some_and(has_number)) {
            ops.push(Op::Perturb);
        }
        if parent.rules.len() >= 2 {
            ops.push(Op::Swap);
        }
        ops
    }

    fn draw(&self, parent: &Constitution, ops: &[Op], rng: &mut dyn UniformSource) -> Option<Mutation> {
        let mut child = parent.clone();
        let op = match ops[rng.next_index(ops.len())] {
            Op::Add => {
                let fresh: Vec<&ConstitutionRule> = self.library.iter().filter(|r| !parent.contains(&r.name)).collect();
                let rule = fresh[rng.next_index(fresh.len())].clone();
                let op = format!("add:{}", rule.name);
                child.rules.push(rule);
                op
            }
            Op::Remove => {
                let i = rng.next_index(child.rules.len());
                format!("remove:{}", child.rules.remove(i).name)
            }
            Op::Perturb => {
                let idx: Vec<usize> = (0..child.rules.len())
                    .filter(|&i| child.rules[i].directive.as_ref().is_some_and(has_number))
                    .collect();
                let i = idx[rng.next_index(idx.len())];
                let up = rng.next_f64() < 0.5;
                let rule = &mut child.rules[i];
                let d = rule.directive.as_mut().expect("filtered on directive");
                if !nudge(d, up) {
                    return None;
                }
                format!("perturb:{}:{}", rule.name, if up { "+1" } else { "-1" })
            }
            Op::Swap => {
                let n = child.rules.len();
                let a = rng.next_index(n);
                let b = (a + 1 + rng.next_index(n - 1)) % n;
                let pa = child.rules[a].priority;
                child.rules[a].priority = child.rules[b].priority;
                child.rules[b].priority = pa;
                format!("swap:{}:{}", child.rules[a].name, child.rules[b].name)
            }
        };
        child.version = u64::from(!child.rules.is_empty());
        validate_constitution(&child).is_empty().then_some(Mutation { child, op })
    }
}

fn has_number(d: &Directive) -> bool {
    matches!(
        d,
        Directive::ContributeFixed { .. }
            | Directive::PunishBelowMax { .. }
            | Directive::ShareSurplus { .. }
            | Directive::ReportRichCluster { .. }
    )
}

/// Moves the directive's numeric payload one step; false when that leaves bounds.
fn nudge(d: &mut Directive, up: bool) -> bool {
    let field = match d {
        Directive::ContributeFixed { amount } => amount,
        Directive::PunishBelowMax { tokens, .. } => tokens,
        Directive::ShareSurplus { max_units } => max_units,
        Directive::ReportRichCluster { min_units } => min_units,
        _ => return false,
    };
    match (up, *field) {
        (false, 0) => return false,
        (true, v) => *field = v + 1,
        (false, v) => *field = v - 1,
    }
    d.payload_in_bounds()
}

impl Mutator for ScriptedMutator {
    fn mutate(&mut self, parent: &Constitution, rng: &mut dyn UniformSource) -> Mutation {
        let ops = self.applicable(parent);
        if !ops.is_empty() {
            for _ in 0..=MAX_REDRAWS {
                if let Some(m) = self.draw(parent, &ops, rng) {
                    return m;
                }
            }
        }
        Mutation {
            child: parent.clone(),
            op: "copy".into(),
        }
    }
}
