use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use civitas_core::action_log::encode_action_log;
use civitas_core::agents::{Policy, Profile};
use civitas_core::classify::{classify_rules, Category};
use civitas_core::constitution::serialize_constitution;
use civitas_core::deliberation::DeliberationHook;
use civitas_core::evolution::{evolve, EvalSettings, EvolutionConfig, Mutator, ScriptedMutator};
use civitas_core::sim::{run_scripted, run_simulation, SimulationConfig};
use civitas_core::stats::{conditions_from_rows, pairwise, render_comparisons, render_summary, Condition};
use civitas_core::{fixtures, AgentId, EnvKind, Method, RunRecord};
use civitas_gateway::deliberation::model_protocol;
use civitas_gateway::mutator::ModelMutator;
use civitas_gateway::policy::ModelPolicy;
use civitas_gateway::{GatewayConfig, HttpTransport, Transport};
use rayon::prelude::*;
use serde::Serialize;

use crate::plan::{
    load_constitution, parse_env, parse_list, parse_multiplier, parse_seeds, Cell, ExperimentPlan,
    MethodKind, PlanFile, ABLATION_MULTIPLIERS,
};
use crate::{ClassifyArgs, EvolveArgs, ModelArgs, ReplayArgs, RunArgs, StatsArgs};

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Plan file first, then flag overrides, then the sweep defaults for anything
/// still unset.
pub fn build_plan(args: &RunArgs, sweep: bool) -> Result<ExperimentPlan> {
    let mut file = match &args.plan {
        Some(p) => PlanFile::load(p)?,
        None => PlanFile::default(),
    };
    let split = |s: &str| s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect::<Vec<_>>();
    if let Some(v) = &args.env {
        file.envs = Some(split(v));
    }
    if let Some(v) = &args.method {
        file.methods = Some(split(v));
    }
    if let Some(v) = &args.seeds {
        file.seeds = Some(parse_seeds(v)?);
    }
    if let Some(v) = &args.multiplier {
        file.multipliers = Some(parse_list(v, parse_multiplier)?);
    }
    if let Some(v) = &args.profile {
        file.profiles = Some(split(v));
    }
    if let Some(v) = &args.constitution {
        file.constitution = Some(v.clone());
    }
    if let Some(v) = &args.out {
        file.out = Some(v.clone());
    }
    if sweep {
        file.methods.get_or_insert_with(|| vec!["evolution".into()]);
        file.multipliers.get_or_insert_with(|| ABLATION_MULTIPLIERS.to_vec());
        file.profiles
            .get_or_insert_with(|| vec![Profile::DirectiveFollower.to_string(), Profile::NashFreeRider.to_string()]);
    }
    let plan = ExperimentPlan::from_file(&file)?;
    plan.validate()?;
    Ok(plan)
}

fn gateway(args: &ModelArgs) -> Option<(GatewayConfig, Arc<dyn Transport>)> {
    let endpoint = args.endpoint.as_ref()?;
    let transport: Arc<dyn Transport> = Arc::new(HttpTransport::new(endpoint.clone()));
    Some((GatewayConfig::agent(endpoint.clone(), args.model.clone()), transport))
}

pub fn sim_config(plan: &ExperimentPlan, cell: &Cell) -> SimulationConfig {
    SimulationConfig::new(cell.env, cell.seed)
        .with_multiplier(cell.multiplier)
        .with_profile(cell.profile)
        .with_method(plan.method_for(cell.method, cell.env))
}

fn run_cell(plan: &ExperimentPlan, cell: &Cell, model: &ModelArgs) -> Result<RunRecord> {
    let config = sim_config(plan, cell);
    let Some((agent_cfg, transport)) = gateway(model) else {
        return run_scripted(&config).map_err(|e| anyhow!(e));
    };
    let mut policies: Vec<Box<dyn Policy>> = AgentId::all()
        .map(|_| Box::new(ModelPolicy::new(agent_cfg.clone(), transport.clone())) as Box<dyn Policy>)
        .collect();
    let delib_cfg = GatewayConfig {
        temperature: 0.7,
        ..agent_cfg
    };
    let mut protocol = model_protocol(&delib_cfg, transport);
    let hook: Option<&mut dyn DeliberationHook> = match config.method {
        Method::Deliberation => Some(&mut protocol),
        _ => None,
    };
    run_simulation(&config, &mut policies, hook).map_err(|e| anyhow!(e))
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    condition: String,
    method: String,
    n: usize,
    mean: f64,
    std: f64,
}

/// Groups records into conditions: `env/profile/m=X` by method.
pub fn conditions_from_records(records: &[RunRecord]) -> Vec<Condition> {
    let mut map: BTreeMap<(String, usize, String), Vec<(u64, f64)>> = BTreeMap::new();
    let mut groups: Vec<String> = Vec::new();
    for r in records {
        let c = &r.config;
        let group = format!("{}/{}/m={}", c.env, c.profile, c.multiplier);
        if !groups.contains(&group) {
            groups.push(group.clone());
        }
        let gi = groups.iter().position(|g| *g == group).expect("just inserted");
        let method = c.method.name();
        let rank = MethodKind::parse(method).map_or(3, |m| m as usize);
        map.entry((group, gi, format!("{rank}{method}")))
            .or_default()
            .push((c.seed, r.final_metrics.s));
    }
    let mut out: Vec<(usize, Condition)> = map
        .into_iter()
        .map(|((group, gi, method), mut v)| {
            v.sort_by_key(|(seed, _)| *seed);
            (
                gi,
                Condition {
                    group,
                    method: method[1..].to_string(),
                    values: v.into_iter().map(|(_, s)| s).collect(),
                },
            )
        })
        .collect();
    out.sort_by_key(|(gi, _)| *gi);
    out.into_iter().map(|(_, c)| c).collect()
}

pub fn cmd_run(args: &RunArgs, sweep: bool) -> Result<String> {
    let plan = build_plan(args, sweep)?;
    let cells = plan.cells();
    let results: Vec<(Cell, Result<RunRecord>)> = cells
        .par_iter()
        .map(|cell| (*cell, run_cell(&plan, cell, &args.model)))
        .collect();

    let records_dir = plan.out.join("records");
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (cell, res) in results {
        match res {
            Ok(rec) => {
                let path = records_dir.join(cell.file_name());
                write(&path, &rec.to_json())?;
                write(&path.with_extension("log"), &encode_action_log(&rec.events))?;
                records.push(rec);
            }
            Err(e) => failures.push(format!("{}: {e}", cell.file_name())),
        }
    }

    let conditions = conditions_from_records(&records);
    let summary = render_summary(&conditions);
    write(&plan.out.join("summary.txt"), &summary)?;
    let rows: Vec<SummaryRow> = conditions
        .iter()
        .filter_map(|c| {
            let a = civitas_core::stats::aggregate(&c.values).ok()?;
            Some(SummaryRow {
                condition: c.group.clone(),
                method: c.method.clone(),
                n: a.n,
                mean: a.mean,
                std: a.std,
            })
        })
        .collect();
    write(&plan.out.join("summary.json"), &(serde_json::to_string_pretty(&rows)? + "\n"))?;

    let mut report = format!("{} runs written to {}\n{summary}", records.len(), records_dir.display());
    if !failures.is_empty() {
        let _ = writeln!(report, "{} runs failed:", failures.len());
        for f in &failures {
            let _ = writeln!(report, "  {f}");
        }
        bail!("{report}");
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
struct EvolveSummary {
    env: EnvKind,
    multiplier: f64,
    iterations: u32,
    seed: u64,
    best_id: u64,
    best_search_fitness: Option<f64>,
    final_fitness: f64,
    final_runs: usize,
    candidates: usize,
}

pub fn cmd_evolve(args: &EvolveArgs) -> Result<String> {
    let env = parse_env(&args.env)?;
    let config = EvolutionConfig {
        iterations: args.iterations,
        base_seed: args.seed,
        ..EvolutionConfig::default()
    };
    config.validate().map_err(|e| anyhow!(e))?;
    let settings = EvalSettings {
        env,
        multiplier: parse_multiplier(&args.multiplier.to_string())?,
    };
    let mut mutator: Box<dyn Mutator> = match gateway(&args.model) {
        Some((cfg, transport)) => Box::new(ModelMutator::new(cfg, transport)),
        None => Box::new(ScriptedMutator::for_env(env)),
    };
    let result = evolve(&config, &settings, mutator.as_mut()).map_err(|e| anyhow!(e))?;

    write(&args.out.join("best_constitution.json"), &serialize_constitution(&result.best.constitution))?;
    write(&args.out.join("trace.jsonl"), &result.trace_jsonl())?;
    let summary = EvolveSummary {
        env,
        multiplier: settings.multiplier,
        iterations: config.iterations,
        seed: config.base_seed,
        best_id: result.best.id,
        best_search_fitness: result.best.fitness,
        final_fitness: result.final_fitness,
        final_runs: result.final_runs.len(),
        candidates: result.trace.len(),
    };
    write(&args.out.join("summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;

    let mut out = String::new();
    let _ = writeln!(out, "best candidate #{} after {} iterations", result.best.id, config.iterations);
    let _ = writeln!(
        out,
        "final fitness {:.3} over {} runs (search fitness {:.3})",
        result.final_fitness,
        result.final_runs.len(),
        result.best.fitness.unwrap_or(0.0)
    );
    for r in result.best.constitution.by_priority() {
        let _ = writeln!(out, "  [{}] {}", r.priority, r.name);
    }
    let _ = writeln!(out, "wrote {}", args.out.display());
    Ok(out)
}

fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunRecord::from_json(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect()
}

pub fn stats_report(conditions: &[Condition]) -> Result<String> {
    if conditions.len() < 2 {
        bail!("need at least 2 conditions, found {}", conditions.len());
    }
    for c in conditions {
        if c.values.len() < 2 {
            bail!("condition {} / {} has {} run(s); at least 2 are needed", c.group, c.method, c.values.len());
        }
    }
    let rows = pairwise(conditions).map_err(|e| anyhow!(e))?;
    Ok(format!("{}\n{}", render_summary(conditions), render_comparisons(&rows)))
}

pub fn cmd_stats(args: &StatsArgs) -> Result<String> {
    let conditions = match (&args.records, &args.fixture) {
        (Some(dir), _) => {
            let dir = if dir.join("records").is_dir() { dir.join("records") } else { dir.clone() };
            conditions_from_records(&load_records(&dir)?)
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            conditions_from_rows(&fixtures::parse_per_seed(&text)?)
        }
        (None, None) => conditions_from_rows(&fixtures::parse_per_seed(fixtures::PER_SEED_CSV)?),
    };
    let report = stats_report(&conditions)?;
    if let Some(out) = &args.out {
        write(&out.join("report.txt"), &report)?;
        let rows = pairwise(&conditions).map_err(|e| anyhow!(e))?;
        write(&out.join("comparisons.json"), &(serde_json::to_string_pretty(&rows)? + "\n"))?;
    }
    Ok(report)
}

pub fn cmd_classify(args: &ClassifyArgs) -> Result<String> {
    let targets: Vec<(String, civitas_core::Constitution)> = if args.constitutions.is_empty() {
        fixtures::all_constitutions().into_iter().map(|(n, c)| (n.to_string(), c)).collect()
    } else {
        args.constitutions
            .iter()
            .map(|s| Ok((s.clone(), load_constitution(s)?)))
            .collect::<Result<_>>()?
    };
    let width = targets.iter().map(|(n, _)| n.len()).max().unwrap_or(4).max(12);
    let mut out = format!("{:<width$}", "constitution");
    for c in Category::ALL {
        let _ = write!(out, " {:>8}", c.label());
    }
    out.push('\n');
    for (name, c) in &targets {
        let p = classify_rules(c);
        let _ = write!(out, "{name:<width$}");
        for cat in Category::ALL {
            let _ = write!(out, " {:>8}", if p.has(cat) { "x" } else { "." });
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn cmd_replay(args: &ReplayArgs) -> Result<String> {
    let text = fs::read_to_string(&args.record).with_context(|| format!("reading {}", args.record.display()))?;
    let original = RunRecord::from_json(&text).with_context(|| format!("parsing {}", args.record.display()))?;
    let again = run_scripted(&original.config).map_err(|e| anyhow!(e))?.to_json();
    if let Some(out) = &args.out {
        write(out, &again)?;
    }
    if again == text {
        return Ok(format!(
            "{}: reproduced byte for byte (S = {:.3})\n",
            args.record.display(),
            original.final_metrics.s
        ));
    }
    let line = text
        .lines()
        .zip(again.lines())
        .position(|(a, b)| a != b)
        .map_or_else(|| text.lines().count().min(again.lines().count()) + 1, |i| i + 1);
    bail!("{}: replay differs from the record at line {line}", args.record.display())
}
