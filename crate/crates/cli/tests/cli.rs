use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn civitas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_civitas")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = civitas(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn run_is_deterministic_and_summarised() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&["run", "--env", "public_goods", "--method", "evolution", "--seeds", "42-51", "--out", dir.to_str().unwrap()]);
    }
    let (ra, rb) = (read_dir_sorted(&a.join("records")), read_dir_sorted(&b.join("records")));
    assert_eq!(ra.len(), 20);
    assert_eq!(ra, rb);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary[0]["n"], 10);
    assert_eq!(summary[0]["mean"], 0.475);
    assert_eq!(summary[0]["std"], 0.0);
}

#[test]
fn sweep_shows_the_inversion() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&["sweep", "--seeds", "42", "--out", tmp.path().to_str().unwrap()]);
    let rows: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    let mean = |cond: &str| rows.iter().find(|r| r["condition"] == cond).unwrap()["mean"].as_f64().unwrap();
    for m in ["1.5", "1", "0.75"] {
        assert!((mean(&format!("public_goods/follower/m={m}")) - 0.475).abs() < 1e-9, "{out}");
    }
    assert!((mean("public_goods/nash/m=1.5") - 0.350).abs() < 1e-9);
    assert!((mean("public_goods/nash/m=1") - 0.475).abs() < 1e-9);
    assert!((mean("public_goods/nash/m=0.75") - 0.600).abs() < 1e-9);
}

#[test]
fn plan_files_and_duplicate_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let plan = tmp.path().join("plan.toml");
    fs::write(
        &plan,
        format!(
            "envs = [\"trading\", \"gridworld\"]\nmethods = [\"control\", \"deliberation\"]\nseeds = [42, 43]\nout = {:?}\n",
            out_dir.to_str().unwrap()
        ),
    )
    .unwrap();
    ok(&["run", "--plan", plan.to_str().unwrap()]);
    let logs = read_dir_sorted(&out_dir.join("records"));
    assert_eq!(logs.iter().filter(|(n, _)| n.ends_with(".json")).count(), 8);
    assert!(logs.iter().any(|(n, _)| n == "gridworld_deliberation_follower_m1.5_s43.log"));

    let json_plan = tmp.path().join("plan.json");
    fs::write(&json_plan, r#"{"seeds": [42, 43, 42]}"#).unwrap();
    let out = civitas(&["run", "--plan", json_plan.to_str().unwrap(), "--out", tmp.path().join("dup").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate seeds"));
    assert!(!tmp.path().join("dup").exists());
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["run", "--env", "gridworld", "--method", "deliberation", "--seeds", "44", "--out", tmp.path().to_str().unwrap()]);
    let record = tmp.path().join("records/gridworld_deliberation_follower_m1.5_s44.json");
    assert!(ok(&["replay", record.to_str().unwrap()]).contains("byte for byte"));

    let text = fs::read_to_string(&record).unwrap();
    let tampered = tmp.path().join("tampered.json");
    let mut lines: Vec<&str> = text.lines().collect();
    let idx = lines.iter().position(|l| l.contains("\"T1:")).unwrap();
    lines.remove(idx);
    fs::write(&tampered, lines.join("\n")).unwrap();
    let out = civitas(&["replay", tampered.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("line {}", idx + 1)));
}

#[test]
fn evolve_writes_deterministic_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = ok(&["evolve", "--iterations", "30", "--out", dir.to_str().unwrap()]);
        assert!(out.contains("final fitness 0.475"), "{out}");
    }
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));
    let best = fs::read_to_string(a.join("best_constitution.json")).unwrap();
    assert!(best.contains("\"ContributeFixed\""), "{best}");

    let out = civitas(&["evolve", "--iterations", "0", "--out", tmp.path().join("none").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(!tmp.path().join("none").exists());
}

#[test]
fn stats_over_bundled_tables_and_fresh_records() {
    let report = ok(&["stats"]);
    assert!(report.contains("k = 18"), "{report}");

    let tmp = tempfile::tempdir().unwrap();
    ok(&["run", "--env", "public_goods", "--method", "control,evolution", "--seeds", "42-44", "--profile", "conditional", "--out", tmp.path().to_str().unwrap()]);
    let out_dir = tmp.path().join("stats");
    let report = ok(&["stats", "--records", tmp.path().to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(report.contains("k = 1"), "{report}");
    assert!(out_dir.join("comparisons.json").exists());

    let bad = tmp.path().join("edited.csv");
    fs::write(&bad, civitas_core::fixtures::PER_SEED_CSV.replacen("0.", "1.", 1)).unwrap();
    let out = civitas(&["stats", "--fixture", bad.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn classify_marks_peer_sanction_only_for_the_evolved_game_constitution() {
    let out = ok(&["classify", "--constitution", "evolved_public_goods", "--constitution", "deliberated_public_goods_seed48"]);
    let lines: Vec<&str> = out.lines().collect();
    let row = |name: &str| lines.iter().find(|l| l.starts_with(name)).unwrap().split_whitespace().collect::<Vec<_>>();
    assert_eq!(row("evolved_public_goods")[1], "x");
    assert_eq!(row("deliberated_public_goods_seed48")[1], ".");
}

#[test]
fn unknown_inputs_are_rejected() {
    assert!(!civitas(&["run", "--env", "mars"]).status.success());
    assert!(!civitas(&["run", "--multiplier", "-1"]).status.success());
    assert!(!civitas(&["classify", "--constitution", "no_such_thing"]).status.success());
}
