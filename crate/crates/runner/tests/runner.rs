use std::fs;
use std::path::Path;
use std::process::Command;

use fkdrift_runner::{parse_scenario, run, RunnerError, Scenario, Status, ALL_CHECKS, INCOMPLETE_MARKER};
use serde_json::Value;

fn records(dir: &Path) -> Vec<Value> {
    fs::read_to_string(dir.join("results.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

const CHEAP: &str = r#"
[resolvent]
depth = 3
grid = { time_nodes = 5, space_nodes = 5, source_time_nodes = 9, source_space_nodes = 9, lattice_nodes = 3 }
[simulation]
dt = 0.02
n_paths = 4000
seed = 11
"#;

#[test]
fn empty_document_gives_defaults() {
    let sc = parse_scenario("").unwrap();
    assert_eq!(sc, Scenario::default());
    assert_eq!((sc.d, sc.alpha, sc.eps1), (3, 0.25, 0.25));
    assert_eq!(sc.resolvent.lambda, vec![1.0]);
    assert_eq!(sc.resolvent.depth, 12);
    assert_eq!(sc.simulation.dt, 1e-3);
    assert_eq!(sc.simulation.n_paths, 100_000);
    assert_eq!(sc.ordered_checks().len(), ALL_CHECKS.len());
}

#[test]
fn alpha_above_half_is_rejected() {
    match parse_scenario("alpha = 0.6") {
        Err(RunnerError::Invalid(m)) => assert!(m.contains("alpha") && m.contains("1/2"), "{m}"),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn malformed_and_unknown_inputs_are_rejected() {
    assert!(matches!(parse_scenario("alpha = "), Err(RunnerError::Parse(_))));
    assert!(matches!(parse_scenario("alhpa = 0.2"), Err(RunnerError::Parse(_))));
    assert!(matches!(parse_scenario("checks = [\"kato.nonsense\"]"), Err(RunnerError::Invalid(_))));
    assert!(matches!(parse_scenario("[drift]\nname = \"nope\""), Err(RunnerError::Invalid(_))));
    assert!(matches!(parse_scenario("[kato]\nhorizons = [0.01, 0.1]"), Err(RunnerError::Invalid(_))));
    let e = parse_scenario("[simulation]\nn_paths = -3").unwrap_err().to_string();
    assert!(e.contains("n_paths"), "{e}");
}

#[test]
fn zero_drift_passes_every_check_and_echoes_the_scenario() {
    let sc = parse_scenario(&format!("name = \"zero\"\n{CHEAP}\n[drift]\nname = \"zero\"\n")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let rep = run(&sc, dir.path(), |_| {}).unwrap();
    assert_eq!(rep.exit_code, 0, "{:?}", rep.records);
    assert_eq!(rep.records.len(), ALL_CHECKS.len());
    let recs = records(dir.path());
    assert_eq!(recs[0]["kind"], "header");
    let echoed: Scenario = serde_json::from_value(recs[0]["scenario"].clone()).unwrap();
    assert_eq!(echoed, sc);
    let last = recs.last().unwrap();
    assert_eq!(last["kind"], "trailer");
    assert_eq!(last["complete"], true);
    assert!(!dir.path().join(INCOMPLETE_MARKER).exists());
    let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), ALL_CHECKS.len() + 1);
}

#[test]
fn reversed_example_is_recorded_as_non_member() {
    let sc = parse_scenario(
        r#"
checks = ["kato.membership"]
[drift]
name = "example_f_reversed"
[kato]
expect = "non-member"
"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let rep = run(&sc, dir.path(), |_| {}).unwrap();
    assert_eq!(rep.exit_code, 0);
    assert_eq!(rep.records[0].values["verdict"], "non-member");
}

#[test]
fn huge_drift_is_refused_with_smallness_report() {
    let sc = parse_scenario(&format!(
        "checks = [\"resolvent.geometric_decay\", \"kernel.envelope\"]\n{CHEAP}\n[drift]\nname = \"radial_singular\"\nparams = {{ amplitude = 1e4 }}\n"
    ))
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let rep = run(&sc, dir.path(), |_| {}).unwrap();
    assert_eq!(rep.exit_code, 2);
    // Dependency order puts the kernel check first; the refusal does not stop it.
    assert_eq!(rep.records[0].check, "kernel.envelope");
    assert_eq!(rep.records[0].status, Status::Pass);
    let decay = &rep.records[1];
    assert_eq!(decay.status, Status::Fail);
    assert_eq!(decay.values["smallness"]["satisfied"], false);
    assert!(decay.values["smallness"]["threshold"].as_f64().unwrap() > 0.0);
}

#[test]
fn failing_check_does_not_block_later_ones() {
    let sc = parse_scenario(&format!(
        "checks = [\"simulate.zero_drift_law\", \"resolvent.smallness\"]\n{CHEAP}\n[drift]\nname = \"radial_singular\"\nparams = {{ amplitude = 1e4 }}\n"
    ))
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let rep = run(&sc, dir.path(), |_| {}).unwrap();
    let ids: Vec<&str> = rep.records.iter().map(|r| r.check.as_str()).collect();
    assert_eq!(ids, ["resolvent.smallness", "simulate.zero_drift_law"]);
    assert_eq!(rep.records[0].status, Status::Fail);
    assert_eq!(rep.records[1].status, Status::Pass);
    assert_eq!(rep.exit_code, 2);
}

#[test]
fn same_scenario_reproduces_numbers() {
    let sc = parse_scenario(&format!(
        "checks = [\"simulate.laplace_match\", \"simulate.modulus\", \"kato.membership\"]\n{CHEAP}"
    ))
    .unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run(&sc, a.path(), |_| {}).unwrap();
    let rb = run(&sc, b.path(), |_| {}).unwrap();
    for (x, y) in ra.records.iter().zip(&rb.records) {
        assert_eq!(x.values, y.values, "{}", x.check);
        assert_eq!(x.status, y.status);
    }
}

#[test]
fn cli_lists_and_runs() {
    let bin = env!("CARGO_BIN_EXE_fkdrift");
    let out = Command::new(bin).arg("list-checks").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for (id, _) in ALL_CHECKS {
        assert!(text.contains(id));
    }
    let out = Command::new(bin).arg("list-drifts").output().unwrap();
    assert!(String::from_utf8(out.stdout).unwrap().contains("radial_singular"));

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.toml");
    fs::write(&file, "checks = [\"kernel.envelope\"]\n").unwrap();
    let res = dir.path().join("res");
    let out = Command::new(bin)
        .args(["run", file.to_str().unwrap(), "--seed", "5", "--threads", "1"])
        .env("FKDRIFT_OUT", &res)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&res);
    assert_eq!(recs[0]["scenario"]["simulation"]["seed"], 5);

    fs::write(&file, "alpha = 0.6\n").unwrap();
    let out = Command::new(bin).args(["run", file.to_str().unwrap(), "--out"]).arg(dir.path().join("bad")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("alpha must lie in (0, 1/2)"));
}
