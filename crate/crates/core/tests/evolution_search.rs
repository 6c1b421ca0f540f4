use std::collections::BTreeMap;

use civitas_core::constitution::{serialize_constitution, Directive};
use civitas_core::evolution::{
    evaluate_candidate, evolve, features_of, EvalSettings, EvolutionConfig, Insertion, ScriptedMutator, TraceKind,
};
use civitas_core::{fixtures, Constitution, EnvKind};

fn run(env: EnvKind, iterations: u32) -> civitas_core::evolution::EvolutionResult {
    let config = EvolutionConfig {
        iterations,
        ..EvolutionConfig::default()
    };
    evolve(&config, &EvalSettings::new(env), &mut ScriptedMutator::for_env(env)).unwrap()
}

#[test]
fn known_optimum_and_blank_baseline() {
    let s = EvalSettings::new(EnvKind::PublicGoods);
    assert_eq!(evaluate_candidate(&fixtures::evolved_public_goods(), &s, 1, 42).fitness, 0.475);
    assert!((evaluate_candidate(&Constitution::blank(), &s, 1, 42).fitness - 0.35).abs() < 1e-12);
    assert_eq!(features_of(1200, 0.475, 20_000, 8), (0, 3));
}

#[test]
fn public_goods_search_finds_the_plateau() {
    let r = run(EnvKind::PublicGoods, 30);
    assert_eq!(r.best.fitness, Some(0.475));
    assert!(r.best.constitution.directives().any(|d| *d == Directive::ContributeFixed { amount: 10 }));
    assert_eq!(r.final_runs.len(), 10);
    assert!(r.final_runs.iter().all(|b| b.s == 0.475));
}

#[test]
fn trace_replays_into_the_final_archives() {
    for env in EnvKind::ALL {
        let r = run(env, 10);
        let mut cells: Vec<BTreeMap<(usize, usize), (u64, f64)>> = vec![BTreeMap::new(); 3];
        for t in &r.trace {
            if t.kind == TraceKind::Child {
                assert!(t.parent.is_some());
            }
            let (Some(ins), Some(f), Some(cell)) = (t.insertion, t.fitness, t.features) else {
                continue;
            };
            let prev = cells[t.island].get(&cell).map(|(_, f)| *f);
            match ins {
                Insertion::EmptyCell => assert!(prev.is_none()),
                Insertion::Improved => assert!(f > prev.unwrap()),
                Insertion::Rejected => assert!(f <= prev.unwrap()),
            }
            if ins != Insertion::Rejected {
                cells[t.island].insert(cell, (t.id, f));
            }
        }
        for (i, archive) in r.archives.iter().enumerate() {
            let held: BTreeMap<_, _> = archive.occupied().iter().map(|c| (c.features.unwrap(), (c.id, c.fitness.unwrap()))).collect();
            assert_eq!(held, cells[i], "{env} island {i}");
        }
        let best = r.archives.iter().flat_map(|a| a.occupied()).map(|c| c.fitness.unwrap()).fold(f64::MIN, f64::max);
        assert_eq!(r.best.fitness, Some(best));
    }
}

#[test]
fn migrants_travel_around_the_ring() {
    let r = run(EnvKind::PublicGoods, 30);
    assert_eq!(r.migrations.len(), 18);
    for m in &r.migrations {
        assert_eq!(m.iteration % 5, 0);
        assert_eq!(m.to, (m.from + 1) % 3);
        assert_eq!(m.ids.len(), 2);
    }
    let migrants = r.trace.iter().filter(|t| t.kind == TraceKind::Migrant).count();
    assert_eq!(migrants, 18 * 2);
}

#[test]
fn every_artifact_stays_within_the_text_budget() {
    let r = run(EnvKind::Gridworld, 10);
    let cfg = EvolutionConfig::default();
    for t in &r.trace {
        assert!(t.artifact.len() <= civitas_core::evolution::ARTIFACT_BUDGET);
    }
    assert!(serialize_constitution(&r.best.constitution).len() <= cfg.max_text_length);
}
