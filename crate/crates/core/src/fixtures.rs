//! Bundled reference data: published constitutions, per-seed results and the
//! published summary tables used for regression checks.
//!
//! The per-seed table is hash-pinned; [`per_seed_results`] refuses to parse a
//! copy whose SHA-256 differs from [`PER_SEED_SHA256`].

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constitution::{parse_constitution, Constitution};
use crate::sim::EnvKind;

pub const PER_SEED_CSV: &str = include_str!("../fixtures/per_seed_results.csv");
pub const PER_SEED_SHA256: &str = "8d2a4aa06a62e70bf4e86112004659165838d8ade8f10e259f8e1a35a7151538";

pub const PUBLISHED_TABLE8_CSV: &str = include_str!("../fixtures/published_table8.csv");
pub const PUBLISHED_MEANS_CSV: &str = include_str!("../fixtures/published_condition_means.csv");
pub const PUBLISHED_CATEGORIES_CSV: &str = include_str!("../fixtures/published_rule_categories.csv");
pub const RULE_KEYWORDS_JSON: &str = include_str!("../fixtures/rule_keywords.json");

const EVOLVED_GRIDWORLD: &str = include_str!("../fixtures/constitutions/evolved_gridworld.json");
const EVOLVED_PUBLIC_GOODS: &str = include_str!("../fixtures/constitutions/evolved_public_goods.json");
const EVOLVED_TRADING: &str = include_str!("../fixtures/constitutions/evolved_trading.json");
const DELIBERATED_GRIDWORLD: &str =
    include_str!("../fixtures/constitutions/deliberated_gridworld_seed42.json");
const DELIBERATED_PUBLIC_GOODS: &str =
    include_str!("../fixtures/constitutions/deliberated_public_goods_seed48.json");
const DELIBERATED_TRADING: &str = include_str!("../fixtures/constitutions/deliberated_trading_seed47.json");

fn load(text: &str) -> Constitution {
    parse_constitution(text).expect("bundled constitution fixture parses")
}

pub fn evolved_gridworld() -> Constitution {
    load(EVOLVED_GRIDWORLD)
}

pub fn evolved_public_goods() -> Constitution {
    load(EVOLVED_PUBLIC_GOODS)
}

pub fn evolved_trading() -> Constitution {
    load(EVOLVED_TRADING)
}

pub fn deliberated_gridworld_seed42() -> Constitution {
    load(DELIBERATED_GRIDWORLD)
}

pub fn deliberated_public_goods_seed48() -> Constitution {
    load(DELIBERATED_PUBLIC_GOODS)
}

pub fn deliberated_trading_seed47() -> Constitution {
    load(DELIBERATED_TRADING)
}

pub fn evolved_for(env: EnvKind) -> Constitution {
    match env {
        EnvKind::Gridworld => evolved_gridworld(),
        EnvKind::PublicGoods => evolved_public_goods(),
        EnvKind::Trading => evolved_trading(),
    }
}

/// Every bundled constitution, keyed by fixture name.
pub fn all_constitutions() -> Vec<(&'static str, Constitution)> {
    vec![
        ("evolved_gridworld", evolved_gridworld()),
        ("evolved_public_goods", evolved_public_goods()),
        ("evolved_trading", evolved_trading()),
        ("deliberated_gridworld_seed42", deliberated_gridworld_seed42()),
        ("deliberated_public_goods_seed48", deliberated_public_goods_seed48()),
        ("deliberated_trading_seed47", deliberated_trading_seed47()),
    ]
}

pub fn by_name(name: &str) -> Option<Constitution> {
    all_constitutions()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| c)
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("fixture hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: String, found: String },
    #[error("fixture line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// One row of the per-seed results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub study: String,
    pub env: String,
    pub multiplier: String,
    pub method: String,
    pub seed: u64,
    pub s: f64,
    pub p: f64,
    pub v: f64,
    pub c: f64,
}

impl SeedRow {
    /// Condition key: study / env / multiplier.
    pub fn group(&self) -> (String, String, String) {
        (self.study.clone(), self.env.clone(), self.multiplier.clone())
    }
}

fn split_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split(',').map(str::trim).collect()))
}

fn num(field: &str, line: usize) -> Result<f64, FixtureError> {
    field.parse().map_err(|_| FixtureError::Parse {
        line,
        message: format!("not a number: {field:?}"),
    })
}

/// Parses a per-seed table after checking it against the pinned hash.
pub fn parse_per_seed(text: &str) -> Result<Vec<SeedRow>, FixtureError> {
    let found = sha256_hex(text);
    if found != PER_SEED_SHA256 {
        return Err(FixtureError::HashMismatch {
            expected: PER_SEED_SHA256.to_string(),
            found,
        });
    }
    split_rows(text)
        .map(|(line, f)| {
            if f.len() != 9 {
                return Err(FixtureError::Parse {
                    line,
                    message: format!("expected 9 fields, found {}", f.len()),
                });
            }
            Ok(SeedRow {
                study: f[0].to_string(),
                env: f[1].to_string(),
                multiplier: f[2].to_string(),
                method: f[3].to_string(),
                seed: num(f[4], line)? as u64,
                s: num(f[5], line)?,
                p: num(f[6], line)?,
                v: num(f[7], line)?,
                c: num(f[8], line)?,
            })
        })
        .collect()
}

pub fn per_seed_results() -> Vec<SeedRow> {
    parse_per_seed(PER_SEED_CSV).expect("bundled per-seed fixture is intact")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PublishedWelch {
    pub study: String,
    pub env: String,
    pub multiplier: String,
    pub a: String,
    pub b: String,
    pub t: f64,
    pub df: f64,
    /// Printed p; `None` when printed as "<0.001".
    pub p: Option<f64>,
    pub sig: String,
}

pub fn published_table8() -> Vec<PublishedWelch> {
    split_rows(PUBLISHED_TABLE8_CSV)
        .map(|(line, f)| PublishedWelch {
            study: f[0].into(),
            env: f[1].into(),
            multiplier: f[2].into(),
            a: f[3].into(),
            b: f[4].into(),
            t: num(f[5], line).unwrap(),
            df: num(f[6], line).unwrap(),
            p: f[7].parse().ok(),
            sig: f[8].into(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PublishedCell {
    pub study: String,
    pub env: String,
    pub multiplier: String,
    pub method: String,
    pub mean: f64,
    pub std: f64,
}

pub fn published_condition_means() -> Vec<PublishedCell> {
    split_rows(PUBLISHED_MEANS_CSV)
        .map(|(line, f)| PublishedCell {
            study: f[0].into(),
            env: f[1].into(),
            multiplier: f[2].into(),
            method: f[3].into(),
            mean: num(f[4], line).unwrap(),
            std: num(f[5], line).unwrap(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PublishedCategories {
    pub env: String,
    pub seed: u64,
    /// Peer, AdminPen, Redist, MinThresh, Mentor, Comm, Other.
    pub flags: [bool; 7],
}

pub fn published_rule_categories() -> Vec<PublishedCategories> {
    split_rows(PUBLISHED_CATEGORIES_CSV)
        .map(|(_, f)| {
            let mut flags = [false; 7];
            for (i, flag) in flags.iter_mut().enumerate() {
                *flag = f[2 + i] == "1";
            }
            PublishedCategories {
                env: f[0].into(),
                seed: f[1].parse().unwrap(),
                flags,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_seed_table_shape() {
        let rows = per_seed_results();
        assert_eq!(rows.len(), 180);
        assert!(rows.iter().all(|r| (42..=51).contains(&r.seed)));
    }

    #[test]
    fn edited_fixture_is_refused() {
        let edited = PER_SEED_CSV.replacen("0.277", "0.278", 1);
        assert!(matches!(parse_per_seed(&edited), Err(FixtureError::HashMismatch { .. })));
    }

    #[test]
    fn published_tables_load() {
        assert_eq!(published_table8().len(), 18);
        assert_eq!(published_condition_means().len(), 18);
        assert_eq!(published_rule_categories().len(), 30);
    }
}
