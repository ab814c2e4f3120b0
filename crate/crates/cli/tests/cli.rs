use std::fs;
use std::path::Path;
use std::process::Command;

use cnma_core::benchmarks::{rastrigin, toy_constrained_problem};
use cnma_core::report::read_trace_file;

fn cnma() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cnma"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, format!("schema_id = \"cnma-run/1\"\n{body}")).unwrap();
    path
}

fn result_json(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("result.json")).unwrap()).unwrap()
}

#[test]
fn unknown_benchmark_exits_1_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "engine = \"cnma\"\n[problem]\nbenchmark = \"marsrover\"\n");
    let out = cnma().arg("run").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("marsrover"));
}

#[test]
fn malformed_config_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "engine = \"cnma\"\n[problem\n");
    let out = cnma().arg("run").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let config = write_config(tmp.path(), "engine = \"cnma\"\n[problem]\nbenchmark = \"rastrigin\"\n[cnma]\nmax_iterations = 0\n");
    let out = cnma().arg("run").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_iterations"));
}

#[test]
fn external_simulator_benchmarks_are_stubs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "engine = \"cnma\"\n[problem]\nbenchmark = \"lander\"\n");
    let out = cnma().arg("run").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("external simulator required"));
}

#[test]
fn random_search_on_toy_writes_consistent_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let config = write_config(
        tmp.path(),
        "engine = \"random_search\"\nseed = 4\n[problem]\nbenchmark = \"toy_constrained\"\n[random_search]\neval_budget = 10000\n",
    );
    let out = cnma().arg("run").arg(&config).arg("--output-dir").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = result_json(&out_dir);
    let problem = toy_constrained_problem();
    let best = &doc["best"];
    let x: Vec<f64> = serde_json::from_value(best["x"].clone()).unwrap();
    let y = problem.blackbox.evaluate(&x).unwrap();
    let recheck = problem.is_feasible(&x, &y).unwrap();
    assert_eq!(doc["feasible"].as_bool(), Some(recheck));
    assert!(recheck);
    let y_doc: Vec<f64> = serde_json::from_value(best["y"].clone()).unwrap();
    assert_eq!(y, y_doc);
    assert_eq!(doc["evaluations"].as_u64(), Some(10000));

    let trace = read_trace_file(&out_dir.join("trace.csv")).unwrap();
    assert_eq!(trace.rows.len(), 10000);
    assert!(trace.rows.windows(2).all(|w| w[0].cumulative_evaluations <= w[1].cumulative_evaluations));
    assert!(trace.rows.windows(2).all(|w| w[0].wall_seconds <= w[1].wall_seconds));
    assert!(out_dir.join("run.log").exists());
}

#[test]
fn cnma_run_reproduces_and_overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "engine = \"parallel_cnma\"\n[problem]\nbenchmark = \"rastrigin\"\n[cnma]\nmax_iterations = 2\n\
         [parallel]\nworkers = 2\narchitectures = [[10]]\n[training]\nepochs = 200\n[solver]\nmilp_time_limit = 2.0\n",
    );
    let run = |dir: &str| {
        let out_dir = tmp.path().join(dir);
        let out = cnma()
            .args(["run", config.to_str().unwrap(), "--engine", "cnma", "--seed", "9", "--output-dir"])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        result_json(&out_dir)
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a["engine"], "cnma");
    assert_eq!(a["seed"], 9);
    assert_eq!(a["best"], b["best"]);
    assert_eq!(a["evaluations"], 4);
    let x = a["best"]["x"][0].as_f64().unwrap();
    assert_eq!(a["best"]["y"][0].as_f64().unwrap(), rastrigin(&[x]).unwrap());
    assert_eq!(a["config"]["seed"], 9);
}

#[test]
fn compare_ranks_and_writes_series() {
    let tmp = tempfile::tempdir().unwrap();
    let mut traces = Vec::new();
    for (name, budget) in [("small", 5), ("large", 400)] {
        let config = write_config(
            tmp.path(),
            &format!("engine = \"random_search\"\n[problem]\nbenchmark = \"rastrigin\"\n[random_search]\neval_budget = {budget}\n"),
        );
        let out_dir = tmp.path().join(name);
        assert!(cnma().arg("run").arg(&config).arg("--output-dir").arg(&out_dir).output().unwrap().status.success());
        traces.push(out_dir.join("trace.csv"));
    }
    let out = cnma()
        .arg("compare")
        .args(&traces)
        .arg("--output-dir")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    let first = table.lines().nth(1).unwrap();
    assert!(first.contains("large"), "{table}");
    let csv = fs::read_to_string(tmp.path().join("comparison.csv")).unwrap();
    assert!(csv.starts_with("rank,trace,best_objective,evaluations_to_best,wall_time_to_best,total_evaluations"));
    assert!(tmp.path().join("series_0.csv").exists());
    assert!(tmp.path().join("series_1.csv").exists());
}

#[test]
fn compare_reports_unreadable_trace() {
    let out = cnma().args(["compare", "/nonexistent/trace.csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/trace.csv"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let out = cnma().arg("check").arg(&path).output().unwrap();
            assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
            count += 1;
        }
    }
    assert!(count >= 3);
}
