use std::path::Path;
use std::process::Command;

use congestion_bandit::learner::{Schedule, Variant};
use congestion_bandit_harness::{load_config, parse_config, run_experiment};

const GAME: &str = r#"{"graph": {"nodes": 2, "edges": [[0, 1], [0, 1]],
    "agents": [{"s": 0, "t": 1}, {"s": 0, "t": 1}]},
    "costs": [[0, 1, 2], [0, 1, 2]]}"#;

fn self_play(horizon: u64, seeds: &str, extra: &str) -> String {
    format!(
        r#"{{"game": {GAME}, "schedule": {{"variant": "nash"}}, "horizon": {horizon},
            "seeds": {seeds}, "stride": 7, "progress": false{extra}}}"#
    )
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_congestion-bandit"))
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn single_round() {
    let dir = tempfile::tempdir().unwrap();
    let r = parse_config(&self_play(1, "[3]", ""), Path::new(".")).unwrap();
    let summary = run_experiment(&r, Some(dir.path())).unwrap();
    assert_eq!(summary.failed, 0);
    let header = csv::Reader::from_path(dir.path().join("seed_3.csv"))
        .unwrap()
        .headers()
        .unwrap()
        .clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["t", "agent_id", "realized_cost", "cum_regret", "mu", "gamma", "nash_gap", "expected_potential"]
    );
    let rows = rows(&dir.path().join("seed_3.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| &r[0] == "1" && !r[6].is_empty() && !r[3].is_empty()));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["aggregates"]["final_nash_gap"]["count"], 1);
}

#[test]
fn series_match_the_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let r = parse_config(&self_play(300, "[0, 1]", ""), Path::new(".")).unwrap();
    run_experiment(&r, Some(dir.path())).unwrap();
    let schedule = Schedule::new(Variant::Nash, 2, 2, 2.0, 1.0);
    for seed in [0, 1] {
        let rows = rows(&dir.path().join(format!("seed_{seed}.csv")));
        assert_eq!(rows.len(), 600);
        for row in &rows {
            let t: u64 = row[0].parse().unwrap();
            let (gamma, mu) = schedule.values(t);
            assert_eq!(row[4].parse::<f64>().unwrap(), mu);
            assert_eq!(row[5].parse::<f64>().unwrap(), gamma);
            let on_stride = t == 1 || t == 300 || (t - 1) % 7 == 0;
            assert_eq!(!row[6].is_empty(), on_stride, "t = {t}");
            assert_eq!(!row[7].is_empty(), on_stride);
            if on_stride {
                assert!(row[6].parse::<f64>().unwrap() >= -1e-9);
            }
            let cost: f64 = row[2].parse().unwrap();
            assert!(cost == 1.0 || cost == 2.0);
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let r = parse_config(&self_play(500, "[4, 9]", ""), Path::new(".")).unwrap();
    run_experiment(&r, Some(a.path())).unwrap();
    run_experiment(&r, Some(b.path())).unwrap();
    for name in ["seed_4.csv", "seed_9.csv", "summary.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
    let x = std::fs::read(a.path().join("seed_4.csv")).unwrap();
    let y = std::fs::read(a.path().join("seed_9.csv")).unwrap();
    assert!(x != y);
}

#[test]
fn one_failing_seed_does_not_stop_the_others() {
    let dir = tempfile::tempdir().unwrap();
    // a directory where the CSV should go makes that seed fail
    std::fs::create_dir(dir.path().join("seed_1.csv")).unwrap();
    let r = parse_config(&self_play(50, "[0, 1, 2]", ""), Path::new(".")).unwrap();
    let summary = run_experiment(&r, Some(dir.path())).unwrap();
    assert_eq!(summary.failed, 1);
    assert!(summary.seeds[1].error.is_some());
    assert!(summary.seeds[0].outcome.is_some() && summary.seeds[2].outcome.is_some());
    assert_eq!(summary.aggregates.final_nash_gap.unwrap().count, 2);
}

#[test]
fn adversary_mode() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"game": {"graph": {"nodes": 3, "edges": [[0, 1], [1, 2], [0, 2]],
            "agents": [{"s": 0, "t": 2}]}},
        "mode": "adversary",
        "adversary": {"c_max": 1, "script": {"kind": "adaptive"}},
        "schedule": {"variant": "regret"}, "horizon": 200, "seeds": [0], "exact_regret": true,
        "progress": false}"#;
    let r = parse_config(text, Path::new(".")).unwrap();
    let summary = run_experiment(&r, Some(dir.path())).unwrap();
    assert_eq!(summary.failed, 0);
    let rows = rows(&dir.path().join("seed_0.csv"));
    assert_eq!(rows.len(), 200);
    assert!(rows.iter().all(|r| !r[3].is_empty() && r[6].is_empty()));
    // the path 0-1-2 has two edges, so losses stay within [0, 2]
    assert!(rows.iter().all(|r| (0.0..=2.0).contains(&r[2].parse::<f64>().unwrap())));
    let o = summary.outcomes().next().unwrap();
    assert_eq!(o.regret_curve.len(), 200);
    assert!(o.gap.is_none());
}

#[test]
fn cli_run_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, self_play(20, "[0]", r#", "out_dir": "results""#)).unwrap();
    let resolved = load_config(&config).unwrap();
    assert_eq!(resolved.config.horizon, 20);

    let out = dir.path().join("elsewhere");
    let status = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("seed_0.csv").is_file() && out.join("summary.json").is_file());

    std::fs::write(&config, self_play(0, "[0]", "")).unwrap();
    let output = bin().args(["run", "--config"]).arg(&config).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("horizon"));

    let output = bin().args(["run", "--config", "/nonexistent/run.json"]).output().unwrap();
    assert!(!output.status.success());
}

#[test]
fn cli_spanner_and_decompose() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    std::fs::write(
        &graph,
        r#"{"nodes": 8, "edges": [[0,1],[0,2],[1,3],[2,3],[3,4],[4,6],[4,5],[5,7],[6,7]],
            "agents": [{"s": 0, "t": 7}]}"#,
    )
    .unwrap();
    let output = bin().args(["spanner", "--agent", "0", "--graph"]).arg(&graph).output().unwrap();
    assert!(output.status.success());
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["basis"].as_array().unwrap().len(), 3);
    assert_eq!(report["theta"], 1.0);

    let point = "[0.5, 0.5, 0.5, 0.5, 1, 0.5, 0.5, 0.5, 0.5]";
    let output = bin()
        .args(["decompose", "--point", point, "--graph"])
        .arg(&graph)
        .output()
        .unwrap();
    assert!(output.status.success());
    let d: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let total: f64 = d["atoms"].as_array().unwrap().iter().map(|a| a["weight"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);

    let output = bin()
        .args(["decompose", "--point", "[2, 0]", "--graph"])
        .arg(&graph)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let output = bin().args(["spanner", "--agent", "5", "--graph"]).arg(&graph).output().unwrap();
    assert!(!output.status.success());
}

#[test]
fn cli_validate() {
    let output = bin().arg("validate").output().unwrap();
    assert!(output.status.success());
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 6);
}
