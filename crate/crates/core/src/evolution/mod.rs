//! Offline constitution search: island-model MAP-Elites with a structural
//! gate before simulation-based fitness.
//!
//! Each island keeps an 8×8 grid keyed by (text-length bin, fitness bin).
//! Every iteration each island draws parents uniformly from its occupied
//! cells, mutates them, gates the children structurally, evaluates survivors
//! with all agents following the candidate's directives, and inserts them on
//! strict improvement. Every `migration_interval` iterations each island sends
//! copies of its fittest occupants to the next island in the ring. Random
//! streams are keyed by (island, iteration, child), so results do not depend
//! on evaluation order.

mod archive;
mod mutator;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::action_log::encode_action_log;
use crate::agents::Profile;
use crate::constitution::{serialize_constitution, validate_constitution, Constitution};
use crate::rng::{RngStream, UniformSource};
use crate::scoring::StabilityBreakdown;
use crate::sim::{run_scripted, EnvKind, Method, SimulationConfig};

pub use archive::{Archive, Insertion};
pub use mutator::{Mutation, Mutator, ScriptedMutator, MAX_REDRAWS};

/// Score the structural stage awards to a well-formed candidate.
pub const STAGE1_PASS: f64 = 0.31;
/// Byte budget for the action-log artifact attached to each trace record.
pub const ARTIFACT_BUDGET: usize = 32 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub iterations: u32,
    pub population: usize,
    pub islands: usize,
    pub migration_interval: u32,
    pub migration_rate: f64,
    pub k_evolution: u32,
    pub k_final: u32,
    pub max_text_length: usize,
    pub base_seed: u64,
    pub feature_bins: usize,
    /// Only the first threshold gates; the others are carried for reporting.
    pub cascade_thresholds: [f64; 3],
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            iterations: 30,
            population: 10,
            islands: 3,
            migration_interval: 5,
            migration_rate: 0.2,
            k_evolution: 1,
            k_final: 10,
            max_text_length: 20_000,
            base_seed: 42,
            feature_bins: 8,
            cascade_thresholds: [0.30, 0.50, 0.70],
        }
    }
}

impl EvolutionConfig {
    /// Children each island produces per iteration, so that one migration
    /// epoch generates `population` candidates.
    pub fn children_per_iteration(&self) -> usize {
        (self.population / self.migration_interval.max(1) as usize).max(1)
    }

    pub fn migrants(&self) -> usize {
        (self.migration_rate * self.population as f64).ceil() as usize
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.iterations == 0 {
            return Err("iterations must be at least 1".into());
        }
        if self.islands == 0 || self.population == 0 || self.feature_bins == 0 {
            return Err("islands, population and feature_bins must be positive".into());
        }
        if self.k_evolution == 0 || self.k_final == 0 {
            return Err("evaluation run counts must be positive".into());
        }
        if self.migration_interval == 0 {
            return Err("migration_interval must be positive".into());
        }
        Ok(())
    }
}

/// Environment settings candidates are evaluated under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub env: EnvKind,
    pub multiplier: f64,
}

impl EvalSettings {
    pub fn new(env: EnvKind) -> Self {
        Self { env, multiplier: 1.5 }
    }

    pub fn sim_config(&self, c: &Constitution, seed: u64) -> SimulationConfig {
        SimulationConfig::new(self.env, seed)
            .with_multiplier(self.multiplier)
            .with_profile(Profile::DirectiveFollower)
            .with_method(Method::Evolution {
                constitution: c.clone(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: u64,
    pub island: usize,
    pub iteration: u32,
    pub constitution: Constitution,
    pub stage1: f64,
    pub fitness: Option<f64>,
    pub features: Option<(usize, usize)>,
    pub parent: Option<u64>,
    pub op: String,
}

pub fn stage1_structural(c: &Constitution, max_text_length: usize) -> f64 {
    if validate_constitution(c).is_empty() && serialize_constitution(c).len() <= max_text_length {
        STAGE1_PASS
    } else {
        0.0
    }
}

pub fn features_of(text_len: usize, fitness: f64, max_text_length: usize, bins: usize) -> (usize, usize) {
    let top = bins as f64 - 1.0;
    let complexity = (text_len as f64 / max_text_length as f64 * bins as f64).floor().clamp(0.0, top);
    let score = (fitness * bins as f64).floor().clamp(0.0, top);
    (complexity as usize, score as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: f64,
    pub runs: Vec<StabilityBreakdown>,
    /// Compact action log of the first run, within [`ARTIFACT_BUDGET`].
    pub artifact: String,
    pub error: Option<String>,
}

/// Mean Stability Score over `k` runs at seeds `base_seed..base_seed + k`.
/// A failing run makes the fitness 0 and records the diagnostic.
pub fn evaluate_candidate(c: &Constitution, settings: &EvalSettings, k: u32, base_seed: u64) -> Evaluation {
    let mut runs = Vec::new();
    let mut artifact = String::new();
    for i in 0..k {
        match run_scripted(&settings.sim_config(c, base_seed + u64::from(i))) {
            Ok(record) => {
                if i == 0 {
                    artifact = cap_bytes(encode_action_log(&record.events), ARTIFACT_BUDGET);
                }
                runs.push(record.final_metrics);
            }
            Err(e) => {
                return Evaluation {
                    fitness: 0.0,
                    runs,
                    artifact,
                    error: Some(e.to_string()),
                }
            }
        }
    }
    let fitness = runs.iter().map(|r| r.s).sum::<f64>() / runs.len() as f64;
    Evaluation {
        fitness,
        runs,
        artifact,
        error: None,
    }
}

fn cap_bytes(mut s: String, budget: usize) -> String {
    if s.len() > budget {
        let mut cut = budget;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        s.truncate(cut);
    }
    s
}

/// One line of the search trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub kind: TraceKind,
    pub id: u64,
    pub island: usize,
    pub iteration: u32,
    pub parent: Option<u64>,
    pub op: String,
    pub stage1: f64,
    pub fitness: Option<f64>,
    pub features: Option<(usize, usize)>,
    pub insertion: Option<Insertion>,
    pub error: Option<String>,
    pub artifact: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Seed,
    Child,
    Migrant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationRecord {
    pub iteration: u32,
    pub from: usize,
    pub to: usize,
    pub ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub best: Candidate,
    /// Best candidate's mean score over `k_final` runs.
    pub final_fitness: f64,
    pub final_runs: Vec<StabilityBreakdown>,
    pub archives: Vec<Archive>,
    pub trace: Vec<TraceRecord>,
    pub migrations: Vec<MigrationRecord>,
}

impl EvolutionResult {
    /// The trace as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.trace {
            out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}

struct Search<'a> {
    config: &'a EvolutionConfig,
    settings: &'a EvalSettings,
    cache: HashMap<String, Evaluation>,
    next_id: u64,
    trace: Vec<TraceRecord>,
}

impl Search<'_> {
    fn evaluate(&mut self, c: &Constitution) -> Evaluation {
        let key = serialize_constitution(c);
        if let Some(e) = self.cache.get(&key) {
            return e.clone();
        }
        let e = evaluate_candidate(c, self.settings, self.config.k_evolution, self.config.base_seed);
        self.cache.insert(key, e.clone());
        e
    }

    fn candidate(&mut self, island: usize, iteration: u32, constitution: Constitution, parent: Option<u64>, op: String) -> (Candidate, Option<Evaluation>) {
        let id = self.next_id;
        self.next_id += 1;
        let stage1 = stage1_structural(&constitution, self.config.max_text_length);
        let mut c = Candidate {
            id,
            island,
            iteration,
            constitution,
            stage1,
            fitness: None,
            features: None,
            parent,
            op,
        };
        if stage1 < self.config.cascade_thresholds[0] {
            return (c, None);
        }
        let eval = self.evaluate(&c.constitution);
        let len = serialize_constitution(&c.constitution).len();
        c.fitness = Some(eval.fitness);
        c.features = Some(features_of(len, eval.fitness, self.config.max_text_length, self.config.feature_bins));
        (c, Some(eval))
    }

    fn record(&mut self, kind: TraceKind, c: &Candidate, insertion: Option<Insertion>, eval: Option<&Evaluation>) {
        self.trace.push(TraceRecord {
            kind,
            id: c.id,
            island: c.island,
            iteration: c.iteration,
            parent: c.parent,
            op: c.op.clone(),
            stage1: c.stage1,
            fitness: c.fitness,
            features: c.features,
            insertion,
            error: eval.and_then(|e| e.error.clone()),
            artifact: eval.map(|e| e.artifact.clone()).unwrap_or_default(),
        });
    }
}

/// Runs the full search and re-evaluates the global best with `k_final` runs.
pub fn evolve(config: &EvolutionConfig, settings: &EvalSettings, mutator: &mut dyn Mutator) -> Result<EvolutionResult, String> {
    config.validate()?;
    let mut search = Search {
        config,
        settings,
        cache: HashMap::new(),
        next_id: 0,
        trace: Vec::new(),
    };
    let mut archives: Vec<Archive> = (0..config.islands).map(|k| Archive::new(k, config.feature_bins)).collect();
    let mut migrations = Vec::new();

    for (k, archive) in archives.iter_mut().enumerate() {
        let (c, eval) = search.candidate(k, 0, Constitution::blank(), None, "seed".into());
        let ins = eval.is_some().then(|| archive.insert(c.clone()));
        search.record(TraceKind::Seed, &c, ins, eval.as_ref());
    }

    for iteration in 1..=config.iterations {
        for (k, archive) in archives.iter_mut().enumerate() {
            for j in 0..config.children_per_iteration() {
                let mut rng = RngStream::new(config.base_seed, format!("evolve:island{k}:iter{iteration}:child{j}"));
                let parents = archive.occupied();
                if parents.is_empty() {
                    continue;
                }
                let parent = parents[rng.next_index(parents.len())].clone();
                let m = mutator.mutate(&parent.constitution, &mut rng);
                let (c, eval) = search.candidate(k, iteration, m.child, Some(parent.id), m.op);
                let ins = eval.is_some().then(|| archive.insert(c.clone()));
                search.record(TraceKind::Child, &c, ins, eval.as_ref());
            }
        }

        if iteration % config.migration_interval == 0 && config.islands > 1 {
            let snapshot: Vec<Vec<Candidate>> = archives.iter().map(|a| a.elites(config.migrants())).collect();
            for (from, elites) in snapshot.into_iter().enumerate() {
                let to = (from + 1) % config.islands;
                migrations.push(MigrationRecord {
                    iteration,
                    from,
                    to,
                    ids: elites.iter().map(|c| c.id).collect(),
                });
                for mut c in elites {
                    c.island = to;
                    let ins = archives[to].insert(c.clone());
                    search.record(TraceKind::Migrant, &c, Some(ins), None);
                }
            }
        }
    }

    let best = archives
        .iter()
        .filter_map(Archive::best)
        .min_by(|a, b| {
            b.fitness
                .unwrap_or(0.0)
                .total_cmp(&a.fitness.unwrap_or(0.0))
                .then(a.id.cmp(&b.id))
        })
        .cloned()
        .ok_or_else(|| "no candidate passed the structural stage".to_string())?;
    let final_eval = evaluate_candidate(&best.constitution, settings, config.k_final, config.base_seed);
    Ok(EvolutionResult {
        best,
        final_fitness: final_eval.fitness,
        final_runs: final_eval.runs,
        archives,
        trace: search.trace,
        migrations,
    })
}
