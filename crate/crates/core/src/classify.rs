//! Keyword classifier for governance rule categories.
//!
//! Each rule's name and guidance are lowercased and matched against the
//! substring lists in the bundled keyword file. A `PunishBelowMax` directive
//! always marks a rule as peer punishment.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::constitution::{Constitution, ConstitutionRule, Directive};
use crate::fixtures::RULE_KEYWORDS_JSON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Peer,
    AdminPen,
    Redist,
    MinThresh,
    Mentor,
    Comm,
    Other,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Peer,
        Category::AdminPen,
        Category::Redist,
        Category::MinThresh,
        Category::Mentor,
        Category::Comm,
        Category::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::Peer => "Peer",
            Category::AdminPen => "AdminPen",
            Category::Redist => "Redist",
            Category::MinThresh => "MinThresh",
            Category::Mentor => "Mentor",
            Category::Comm => "Comm",
            Category::Other => "Other",
        }
    }
}

/// Substring lists per category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keywords {
    pub peer: Vec<String>,
    pub admin_penalty: Vec<String>,
    pub redistribution: Vec<String>,
    pub min_threshold: Vec<String>,
    pub mentorship: Vec<String>,
    pub communication: Vec<String>,
    pub other: Vec<String>,
}

impl Keywords {
    pub fn parse(text: &str) -> Result<Keywords, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn bundled() -> &'static Keywords {
        static KW: OnceLock<Keywords> = OnceLock::new();
        KW.get_or_init(|| Keywords::parse(RULE_KEYWORDS_JSON).expect("bundled keyword file parses"))
    }

    fn list(&self, c: Category) -> &[String] {
        match c {
            Category::Peer => &self.peer,
            Category::AdminPen => &self.admin_penalty,
            Category::Redist => &self.redistribution,
            Category::MinThresh => &self.min_threshold,
            Category::Mentor => &self.mentorship,
            Category::Comm => &self.communication,
            Category::Other => &self.other,
        }
    }
}

/// Category flags, in [`Category::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RuleCategoryProfile {
    pub flags: [bool; 7],
}

impl RuleCategoryProfile {
    pub fn has(&self, c: Category) -> bool {
        self.flags[c.index()]
    }

    pub fn set(&mut self, c: Category) {
        self.flags[c.index()] = true;
    }

    pub fn categories(&self) -> impl Iterator<Item = Category> + '_ {
        Category::ALL.into_iter().filter(|c| self.has(*c))
    }

    pub fn union(mut self, other: RuleCategoryProfile) -> Self {
        for (a, b) in self.flags.iter_mut().zip(other.flags) {
            *a |= b;
        }
        self
    }
}

pub fn classify_rule_with(rule: &ConstitutionRule, kw: &Keywords) -> RuleCategoryProfile {
    let text = format!("{}\n{}", rule.name, rule.guidance).to_lowercase();
    let mut profile = RuleCategoryProfile::default();
    for c in Category::ALL {
        if kw.list(c).iter().any(|k| text.contains(&k.to_lowercase())) {
            profile.set(c);
        }
    }
    if matches!(rule.directive, Some(Directive::PunishBelowMax { .. })) {
        profile.set(Category::Peer);
    }
    profile
}

pub fn classify_rule(rule: &ConstitutionRule) -> RuleCategoryProfile {
    classify_rule_with(rule, Keywords::bundled())
}

/// The first flagged category in [`Category::ALL`] order, `Other` if none.
pub fn primary_category(rule: &ConstitutionRule) -> Category {
    classify_rule(rule).categories().next().unwrap_or(Category::Other)
}

pub fn classify_rules_with(c: &Constitution, kw: &Keywords) -> RuleCategoryProfile {
    c.rules
        .iter()
        .map(|r| classify_rule_with(r, kw))
        .fold(RuleCategoryProfile::default(), RuleCategoryProfile::union)
}

pub fn classify_rules(c: &Constitution) -> RuleCategoryProfile {
    classify_rules_with(c, Keywords::bundled())
}
