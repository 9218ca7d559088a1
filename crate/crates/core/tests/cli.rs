use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lifecycle::config::{load_config, Scale, ScenarioConfig};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lifecycle"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn error_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn solve_small(dir: &Path, config: Option<&Path>) {
    let d = dir.to_str().unwrap();
    let mut args = vec!["solve-dp", "--out", d, "--agents", "300", "--runs", "2", "--seed", "5"];
    let c;
    if let Some(p) = config {
        c = p.to_str().unwrap().to_string();
        args.extend(["--config", &c]);
    }
    ok(&args);
}

#[test]
fn dp_run_writes_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("base");
    solve_small(&dir, Some(&scenario("baseline")));
    for f in ["valuegrid.bin", "aggregates.csv", "policy_age64_employed.csv", "summary.json"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let s = summary(&dir);
    assert!(s.get("training_telemetry").is_none());
    assert_eq!(s["solver"], "dp");
    assert_eq!(s["scenario"], "baseline");
    assert_eq!(s["runs"], 2);
    assert_eq!(s["per_run"].as_array().unwrap().len(), 2);
    let cfg: ScenarioConfig = serde_json::from_value(s["config"].clone()).unwrap();
    assert_eq!(s["config_hash"], cfg.content_hash());
    assert_eq!(s["model_hash"], cfg.model_hash());
    assert!(s["wall_clock_seconds"].as_f64().unwrap() > 0.0);
    for key in [
        "initial_discounted_utility",
        "time_avg_discounted_utility",
        "equivalent_net_income",
        "employment_person_years",
    ] {
        assert!(s["stats"][key].as_f64().unwrap().is_finite());
        assert!(s["stats_std"][key].as_f64().unwrap() >= 0.0);
    }

    let map = std::fs::read_to_string(dir.join("policy_age64_employed.csv")).unwrap();
    let mut lines = map.lines();
    assert_eq!(lines.next(), Some("pension_accrued,wage,action"));
    let g = &cfg.grid;
    assert_eq!(lines.clone().count(), g.n_pension * g.n_wage);
    assert!(lines.all(|l| matches!(l.rsplit(',').next(), Some("0" | "1" | "2"))));

    let agg = std::fs::read_to_string(dir.join("aggregates.csv")).unwrap();
    assert!(agg.starts_with("age,employed_share,unemployed_share,retired_share,mean_net_income\n18,"));

    // same seed, same bytes
    let again = tmp.path().join("again");
    solve_small(&again, Some(&scenario("baseline")));
    assert_eq!(agg, std::fs::read_to_string(again.join("aggregates.csv")).unwrap());

    // the saved grid reproduces the run without re-solving
    let reuse = tmp.path().join("reuse");
    let grid = dir.join("valuegrid.bin");
    ok(&[
        "simulate", "--solver", "dp", "--artifact", grid.to_str().unwrap(), "--out", reuse.to_str().unwrap(),
        "--agents", "300", "--runs", "2", "--seed", "5",
    ]);
    assert_eq!(agg, std::fs::read_to_string(reuse.join("aggregates.csv")).unwrap());

    // compare against itself
    let cmp = tmp.path().join("cmp");
    ok(&["compare", dir.to_str().unwrap(), again.to_str().unwrap(), "--out", cmp.to_str().unwrap()]);
    let c: Value = serde_json::from_str(&std::fs::read_to_string(cmp.join("comparison.json")).unwrap()).unwrap();
    for key in ["initial_discounted_utility", "employment_person_years", "equivalent_net_income"] {
        assert_eq!(c[key]["delta"], 0.0);
    }
    assert!(c["compensating_consumption_pct"].as_f64().unwrap().abs() < 1e-9);
    let diff = std::fs::read_to_string(cmp.join("employment_diff.csv")).unwrap();
    let mut lines = diff.lines();
    assert_eq!(lines.next(), Some("age,employed_share_a,employed_share_b,employed_share_diff"));
    assert_eq!(lines.count(), 53);

    let out = run(&["report", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("initial discounted utility") && text.contains("peak employment share"));

    // an artifact solved for another model is refused
    let bad = tmp.path().join("bad");
    let out = run(&[
        "simulate", "--artifact", grid.to_str().unwrap(), "--config", scenario("retirement-66").to_str().unwrap(),
        "--out", bad.to_str().unwrap(), "--agents", "10", "--runs", "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "hash_mismatch");
}

#[test]
fn random_solver_writes_no_maps_or_telemetry() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("rand");
    ok(&["simulate", "--solver", "random", "--out", d.to_str().unwrap(), "--agents", "100", "--runs", "2"]);
    let s = summary(&d);
    assert!(s.get("training_telemetry").is_none());
    assert_eq!(s["solver"], "random");
    assert!(!d.join("policy_age64_employed.csv").exists());
    assert!(d.join("aggregates.csv").is_file());
}

#[test]
fn rl_run_records_telemetry_and_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("short.json");
    std::fs::write(&cfg_path, r#"{"name": "short", "train": {"total_env_steps": 3000}}"#).unwrap();
    let d = tmp.path().join("rl");
    ok(&[
        "train-rl", "--config", cfg_path.to_str().unwrap(), "--out", d.to_str().unwrap(), "--agents", "50", "--runs", "2",
        "--trajectories",
    ]);
    let s = summary(&d);
    let tel = s["training_telemetry"].as_array().unwrap();
    assert_eq!(tel.len(), 2);
    assert!(tel.iter().all(|t| !t.as_array().unwrap().is_empty()));
    assert!(d.join("policy.bin").is_file() && d.join("policy_run1.bin").is_file());
    assert!(d.join("policy_age64_employed.csv").is_file());
    let traj = std::fs::read_to_string(d.join("trajectories_run1.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 50 * 53);
    assert!(traj.starts_with(lifecycle::simulate::TRAJECTORY_HEADER));
}

#[test]
fn reform_runs_compare_and_horizon_mismatch_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path().join("base");
    let reform = tmp.path().join("ret66");
    solve_small(&base, None);
    solve_small(&reform, Some(&scenario("retirement-66")));
    let cmp = tmp.path().join("cmp");
    ok(&["compare", base.to_str().unwrap(), reform.to_str().unwrap(), "--out", cmp.to_str().unwrap()]);
    let c: Value = serde_json::from_str(&std::fs::read_to_string(cmp.join("comparison.json")).unwrap()).unwrap();
    assert_eq!(c["scenario_b"], "retirement-66");
    assert!(c["compensating_consumption_pct"].as_f64().unwrap().is_finite());

    let short_cfg = tmp.path().join("short.json");
    std::fs::write(&short_cfg, r#"{"model": {"first_age": 30}, "simulation": {"panels": []}}"#).unwrap();
    let short = tmp.path().join("short");
    solve_small(&short, Some(&short_cfg));
    let out = run(&["compare", base.to_str().unwrap(), short.to_str().unwrap(), "--out", cmp.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "horizon");
}

#[test]
fn errors_are_reported_as_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("x");
    let out = run(&["solve-dp"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "usage");

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"model": {"kapa": 1.0}}"#).unwrap();
    let out = run(&["solve-dp", "--config", bad.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let e = error_json(&out);
    assert!(e["error"]["message"].as_str().unwrap().contains("kapa"), "{e}");

    std::fs::write(&bad, r#"{"model": {"reward": {"gamma": 1.5}}}"#).unwrap();
    let out = run(&["solve-dp", "--config", bad.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    let e = error_json(&out);
    assert_eq!(e["error"]["kind"], "config");
    assert!(e["error"]["message"].as_str().unwrap().contains("gamma"), "{e}");

    let out = run(&["simulate", "--solver", "nope", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(error_json(&out)["error"]["kind"], "unknown_solver");

    let out = run(&["solve-dp", "--scale", "huge", "--out", out_dir.to_str().unwrap()]);
    assert_ne!(out.status.code(), Some(0));
    error_json(&out);

    let out = run(&["report", tmp.path().join("missing").to_str().unwrap()]);
    assert_eq!(error_json(&out)["error"]["kind"], "io");
}

#[test]
fn shipped_scenarios_differ_only_in_reform_fields() {
    let base = load_config(scenario("baseline")).unwrap();
    assert_eq!(base.model, ScenarioConfig::default().model);
    assert_eq!(base.fiscal, ScenarioConfig::default().fiscal);

    let ret = load_config(scenario("retirement-66")).unwrap();
    assert_eq!(ret.model.min_retirement_age, 66.0);
    assert_eq!(ret.reform_neutral_hash(), base.reform_neutral_hash());
    assert_ne!(ret.model_hash(), base.model_hash());

    let ubi = load_config(scenario("ubi-500-flat40")).unwrap();
    assert!(ubi.fiscal.ubi_enabled);
    assert_eq!(ubi.fiscal.ubi_amount, 6_000.0);
    assert_eq!(ubi.fiscal.flat_tax_rate, 0.40);
    assert_eq!(ubi.reform_neutral_hash(), base.reform_neutral_hash());

    let empty = ScenarioConfig::from_json("").unwrap();
    assert_eq!(empty, ScenarioConfig::default());
    let only_ubi = ScenarioConfig::from_json(r#"{"fiscal": {"ubi_enabled": true}}"#).unwrap();
    assert_eq!(only_ubi.fiscal.flat_tax_rate, 0.40);
    let desk = ScenarioConfig::from_json_with_base("{}", &ScenarioConfig::preset(Scale::Desk)).unwrap();
    assert_eq!(desk.grid, lifecycle::dp::GridSpec::desk());
}
