//! Experiment plans: parsed from TOML or JSON, overridden by flags, expanded
//! into one cell per run.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use civitas_core::agents::Profile;
use civitas_core::constitution::parse_constitution;
use civitas_core::{fixtures, Constitution, EnvKind, Method};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEEDS: std::ops::RangeInclusive<u64> = 42..=51;
pub const ABLATION_MULTIPLIERS: [f64; 3] = [1.5, 1.0, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Control,
    Deliberation,
    Evolution,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] = [MethodKind::Control, MethodKind::Deliberation, MethodKind::Evolution];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::Control => "control",
            MethodKind::Deliberation => "deliberation",
            MethodKind::Evolution => "evolution",
        }
    }

    pub fn parse(s: &str) -> Result<MethodKind> {
        MethodKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| anyhow!("unknown method {s:?} (expected control, deliberation or evolution)"))
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `42-51`, `42,44,50` or a mix such as `42-45,50`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (
                    a.trim().parse().with_context(|| format!("bad seed {a:?}"))?,
                    b.trim().parse().with_context(|| format!("bad seed {b:?}"))?,
                );
                if a > b {
                    bail!("empty seed range {part:?}");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().with_context(|| format!("bad seed {part:?}"))?),
        }
    }
    Ok(out)
}

pub fn parse_list<T>(s: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(f).collect()
}

pub fn parse_env(s: &str) -> Result<EnvKind> {
    EnvKind::parse(s.trim()).ok_or_else(|| anyhow!("unknown environment {s:?}"))
}

pub fn parse_profile(s: &str) -> Result<Profile> {
    Profile::parse(s.trim()).ok_or_else(|| {
        let names: Vec<&str> = Profile::ALL.iter().map(|p| p.as_str()).collect();
        anyhow!("unknown profile {s:?} (expected one of {})", names.join(", "))
    })
}

pub fn parse_multiplier(s: &str) -> Result<f64> {
    let m: f64 = s.trim().parse().with_context(|| format!("bad multiplier {s:?}"))?;
    if !(m.is_finite() && m > 0.0) {
        bail!("multiplier must be positive, got {m}");
    }
    Ok(m)
}

/// A constitution file path or the name of a bundled constitution.
pub fn load_constitution(spec: &str) -> Result<Constitution> {
    if let Some(c) = fixtures::by_name(spec) {
        return Ok(c);
    }
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading constitution {spec}"))?;
    parse_constitution(&text).map_err(|e| anyhow!("{spec}:{}:{}: {}", e.line, e.column, e.message))
}

/// The on-disk plan. Every field is optional; flags fill or override them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub envs: Option<Vec<String>>,
    pub methods: Option<Vec<String>>,
    pub seeds: Option<Vec<u64>>,
    pub multipliers: Option<Vec<f64>>,
    pub profiles: Option<Vec<String>>,
    pub constitution: Option<String>,
    pub out: Option<PathBuf>,
}

impl PlanFile {
    /// TOML unless the extension is `.json`.
    pub fn load(path: &Path) -> Result<PlanFile> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading plan {}", path.display()))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub envs: Vec<EnvKind>,
    pub methods: Vec<MethodKind>,
    pub seeds: Vec<u64>,
    pub multipliers: Vec<f64>,
    pub profiles: Vec<Profile>,
    /// Installed under the evolution method; defaults to the bundled evolved
    /// constitution of each environment.
    pub constitution: Option<Constitution>,
    pub out: PathBuf,
}

impl ExperimentPlan {
    pub fn from_file(file: &PlanFile) -> Result<ExperimentPlan> {
        let plan = ExperimentPlan {
            envs: match &file.envs {
                Some(v) => v.iter().map(|s| parse_env(s)).collect::<Result<_>>()?,
                None => vec![EnvKind::PublicGoods],
            },
            methods: match &file.methods {
                Some(v) => v.iter().map(|s| MethodKind::parse(s)).collect::<Result<_>>()?,
                None => MethodKind::ALL.to_vec(),
            },
            seeds: file.seeds.clone().unwrap_or_else(|| DEFAULT_SEEDS.collect()),
            multipliers: file.multipliers.clone().unwrap_or_else(|| vec![1.5]),
            profiles: match &file.profiles {
                Some(v) => v.iter().map(|s| parse_profile(s)).collect::<Result<_>>()?,
                None => vec![Profile::DirectiveFollower],
            },
            constitution: file.constitution.as_deref().map(load_constitution).transpose()?,
            out: file.out.clone().unwrap_or_else(|| PathBuf::from("runs")),
        };
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("plan has no seeds");
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            let mut seen = BTreeSet::new();
            let dup: Vec<u64> = self.seeds.iter().copied().filter(|s| !seen.insert(*s)).collect();
            bail!("duplicate seeds in plan: {dup:?}");
        }
        for (what, empty) in [
            ("environments", self.envs.is_empty()),
            ("methods", self.methods.is_empty()),
            ("multipliers", self.multipliers.is_empty()),
            ("profiles", self.profiles.is_empty()),
        ] {
            if empty {
                bail!("plan has no {what}");
            }
        }
        for m in &self.multipliers {
            if !(m.is_finite() && *m > 0.0) {
                bail!("multiplier must be positive, got {m}");
            }
        }
        Ok(())
    }

    /// Every run in the plan. The multiplier only varies the public goods
    /// game, so other environments run once per remaining combination, with
    /// the first multiplier recorded.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &env in &self.envs {
            let ms: &[f64] = if env == EnvKind::PublicGoods {
                &self.multipliers
            } else {
                &self.multipliers[..1]
            };
            for &method in &self.methods {
                for &profile in &self.profiles {
                    for &m in ms {
                        for &seed in &self.seeds {
                            out.push(Cell {
                                env,
                                method,
                                profile,
                                multiplier: m,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn method_for(&self, kind: MethodKind, env: EnvKind) -> Method {
        match kind {
            MethodKind::Control => Method::Control,
            MethodKind::Deliberation => Method::Deliberation,
            MethodKind::Evolution => Method::Evolution {
                constitution: self.constitution.clone().unwrap_or_else(|| fixtures::evolved_for(env)),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub env: EnvKind,
    pub method: MethodKind,
    pub profile: Profile,
    pub multiplier: f64,
    pub seed: u64,
}

impl Cell {
    /// Condition label shared by every seed of this cell.
    pub fn condition(&self) -> String {
        format!("{}/{}/m={}", self.env, self.profile, self.multiplier)
    }

    pub fn file_name(&self) -> String {
        format!(
            "{}_{}_{}_m{}_s{}.json",
            self.env, self.method, self.profile, self.multiplier, self.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_syntax() {
        assert_eq!(parse_seeds("42-45,50").unwrap(), vec![42, 43, 44, 45, 50]);
        assert!(parse_seeds("45-42").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn duplicate_seeds_rejected() {
        let file = PlanFile {
            seeds: Some(vec![42, 43, 42]),
            ..PlanFile::default()
        };
        let err = ExperimentPlan::from_file(&file).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("duplicate seeds"));
    }

    #[test]
    fn defaults_and_cells() {
        let plan = ExperimentPlan::from_file(&PlanFile::default()).unwrap();
        plan.validate().unwrap();
        assert_eq!(plan.seeds, (42..=51).collect::<Vec<_>>());
        assert_eq!(plan.cells().len(), 30);
        let file = PlanFile {
            envs: Some(vec!["gridworld".into(), "pgg".into()]),
            methods: Some(vec!["control".into()]),
            multipliers: Some(ABLATION_MULTIPLIERS.to_vec()),
            seeds: Some(vec![1]),
            ..PlanFile::default()
        };
        let cells = ExperimentPlan::from_file(&file).unwrap().cells();
        assert_eq!(cells.len(), 1 + 3);
        assert_eq!(cells[0].file_name(), "gridworld_control_follower_m1.5_s1.json");
    }

    #[test]
    fn toml_plan() {
        let file: PlanFile = toml::from_str(
            r#"
            envs = ["public_goods"]
            methods = ["evolution"]
            seeds = [42, 43]
            multipliers = [1.5, 0.75]
            profiles = ["nash"]
            "#,
        )
        .unwrap();
        let plan = ExperimentPlan::from_file(&file).unwrap();
        assert_eq!(plan.profiles, vec![Profile::NashFreeRider]);
        assert_eq!(plan.cells().len(), 4);
        assert!(toml::from_str::<PlanFile>("bogus = 1").is_err());
    }
}
