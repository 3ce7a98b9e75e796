use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_tempfair");

const FOUR_GOODS: &str = r#"{
  "version": 1,
  "n": 2,
  "days": [
    [{"id": "g1", "values": ["4", "4"]}, {"id": "g4", "values": ["1", "1"]}],
    [{"id": "g3", "values": ["2", "2"]}],
    [{"id": "g2", "values": ["3", "3"]}]
  ]
}"#;

const THREE_AGENTS: &str = r#"{
  "version": 1,
  "n": 3,
  "days": [
    [{"id": "a", "values": ["7/2", "1", "0"]}, {"id": "b", "values": ["1", "2", "3"]}],
    [{"id": "c", "values": ["5", "5", "5"]}, {"id": "d", "values": ["0", "1/3", "2"]}]
  ]
}"#;

const CROSSED: &str = r#"{
  "version": 1,
  "n": 2,
  "days": [[{"id": "x", "values": ["2", "1"]}, {"id": "y", "values": ["1", "2"]}]]
}"#;

fn tempfair(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("TEMPFAIR_ENUMERATION_BUDGET")
        .env_remove("TEMPFAIR_NODE_BUDGET")
        .env_remove("TEMPFAIR_PO_BUDGET")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_counterexamples_reports_three_infeasible_instances() {
    let out = tempfair(&["verify-counterexamples"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l.contains(": infeasible (")));
    assert!(lines[0].contains("16 allocations enumerated"));
    assert!(lines[1].contains("256 allocations enumerated"));
}

#[test]
fn oracle_on_the_four_goods_fixture_is_infeasible() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "four.json", FOUR_GOODS);
    let out = tempfair(&[
        "oracle",
        "--instance",
        s(&f),
        "--query",
        "SD_EF1@up-to-each-day",
    ]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).starts_with("infeasible"));

    let out = tempfair(&[
        "oracle",
        "--instance",
        s(&f),
        "--query",
        "EF1@up-to-each-day",
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["result"], "found");
    assert_eq!(v["allocation"]["allocation"].as_object().unwrap().len(), 4);
}

#[test]
fn oracle_budget_exhaustion_exits_2() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "three.json", THREE_AGENTS);
    let out = Command::new(BIN)
        .args([
            "oracle",
            "--instance",
            s(&f),
            "--query",
            "EF@overall",
            "--method",
            "enumerate",
        ])
        .env("TEMPFAIR_ENUMERATION_BUDGET", "10")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("resource limit"));
}

#[test]
fn two_agent_algorithm_rejects_three_agents() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "three.json", THREE_AGENTS);
    let out = tempfair(&["allocate", "--algorithm", "two-agents", "--instance", s(&f)]);
    assert_eq!(code(&out), 64);
    assert!(stderr(&out).contains("two agents"));
}

#[test]
fn identical_orderings_algorithm_rejects_crossed_preferences() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "crossed.json", CROSSED);
    let out = tempfair(&[
        "allocate",
        "--algorithm",
        "identical-orderings",
        "--instance",
        s(&f),
    ]);
    assert_eq!(code(&out), 64);
    assert!(!stderr(&out).is_empty());
}

#[test]
fn allocate_then_check_round_trip() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "three.json", THREE_AGENTS);
    let alloc = dir.path().join("alloc.json");
    let out = tempfair(&[
        "allocate",
        "--algorithm",
        "general",
        "--instance",
        s(&f),
        "--out",
        s(&alloc),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = stdout(&out);
    assert!(report.contains("SD_EF1@per-day: pass"));
    assert!(report.contains("PROP1@overall: pass"));

    let out = tempfair(&[
        "check",
        "--instance",
        s(&f),
        "--allocation",
        s(&alloc),
        "--predicate",
        "SD_EF1",
        "--scope",
        "per-day",
    ]);
    assert_eq!(code(&out), 0);

    // Everything to agent 3 fails EF1 overall.
    let unfair = write(
        &dir,
        "unfair.json",
        r#"{"version": 1, "allocation": {"a": 3, "b": 3, "c": 3, "d": 3}}"#,
    );
    let out = tempfair(&[
        "check",
        "--instance",
        s(&f),
        "--allocation",
        s(&unfair),
        "--predicate",
        "EF1",
        "--scope",
        "overall",
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 1);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["passed"], false);
    assert!(!v["violations"].as_array().unwrap().is_empty());
}

#[test]
fn partial_allocations_are_rejected() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "four.json", FOUR_GOODS);
    let partial = write(
        &dir,
        "partial.json",
        r#"{"version": 1, "allocation": {"g1": 1, "g2": 2}}"#,
    );
    let out = tempfair(&[
        "check",
        "--instance",
        s(&f),
        "--allocation",
        s(&partial),
        "--predicate",
        "EF",
        "--scope",
        "overall",
    ]);
    assert_eq!(code(&out), 64);
    assert!(stderr(&out).contains("not allocated"));
}

#[test]
fn laminar_scope_needs_a_family() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "four.json", FOUR_GOODS);
    let alloc = write(
        &dir,
        "a.json",
        r#"{"version": 1, "allocation": {"g1": 1, "g2": 1, "g3": 2, "g4": 2}}"#,
    );
    let args = [
        "check",
        "--instance",
        s(&f),
        "--allocation",
        s(&alloc),
        "--predicate",
        "EF1",
        "--scope",
        "laminar",
    ];
    assert_eq!(code(&tempfair(&args)), 64);

    let with_family = FOUR_GOODS.replace(
        r#""days""#,
        r#""laminar": [["g1", "g4"], ["g1", "g4", "g3"]], "days""#,
    );
    let f2 = write(&dir, "family.json", &with_family);
    let args = [
        "check",
        "--instance",
        s(&f2),
        "--allocation",
        s(&alloc),
        "--predicate",
        "EF1",
        "--scope",
        "laminar",
    ];
    assert_eq!(code(&tempfair(&args)), 0);
    let out = tempfair(&["allocate", "--algorithm", "laminar", "--instance", s(&f2)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("EF1@laminar: pass"));
}

#[test]
fn parse_errors_exit_64_with_a_path() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", &FOUR_GOODS.replace(r#""g3""#, "3"));
    let out = tempfair(&["allocate", "--algorithm", "general", "--instance", s(&bad)]);
    assert_eq!(code(&out), 64);
    assert!(stderr(&out).contains("days[1][0].id"), "{}", stderr(&out));
    let missing = dir.path().join("missing.json");
    assert_eq!(
        code(&tempfair(&[
            "allocate",
            "--algorithm",
            "general",
            "--instance",
            s(&missing)
        ])),
        64
    );
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&tempfair(&[])), 64);
    assert_eq!(code(&tempfair(&["frobnicate"])), 64);
    assert_eq!(
        code(&tempfair(&[
            "allocate",
            "--algorithm",
            "magic",
            "--instance",
            "x.json"
        ])),
        64
    );
    assert_eq!(code(&tempfair(&["--help"])), 0);
}

#[test]
fn generate_is_deterministic_and_seed_overrides() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "gen.json",
        r#"{"n": 3, "k": 3, "goods_per_day": {"min": 1, "max": 4},
            "distribution": {"kind": "identical-agents", "lo": 0, "hi": 9}, "identical_days": true}"#,
    );
    let a = tempfair(&["generate", "--config", s(&config), "--seed", "11"]);
    let b = tempfair(&["generate", "--config", s(&config), "--seed", "11"]);
    let c = tempfair(&["generate", "--config", s(&config), "--seed", "12"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);

    let inst = write(&dir, "inst.json", &stdout(&a));
    for algorithm in ["general", "identical-orderings", "identical-days"] {
        let out = tempfair(&["allocate", "--algorithm", algorithm, "--instance", s(&inst)]);
        assert_eq!(code(&out), 0, "{algorithm}: {}", stderr(&out));
    }
}

#[test]
fn batch_output_order_does_not_depend_on_jobs() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "gen.json",
        r#"{"n": 2, "k": 4, "goods_per_day": {"min": 1, "max": 5},
            "distribution": {"kind": "uniform-integer", "lo": 0, "hi": 9}}"#,
    );
    let mut paths = Vec::new();
    for seed in 0..8 {
        let out = tempfair(&[
            "generate",
            "--config",
            s(&config),
            "--seed",
            &seed.to_string(),
        ]);
        paths.push(write(&dir, &format!("i{seed}.json"), &stdout(&out)));
    }
    let run = |jobs: &str| {
        let mut args = vec![
            "allocate",
            "--algorithm",
            "two-agents",
            "--format",
            "json",
            "--jobs",
            jobs,
            "--instance",
        ];
        args.extend(paths.iter().map(|p| s(p)));
        tempfair(&args)
    };
    let one = run("1");
    let four = run("4");
    assert_eq!(code(&one), 0, "{}", stderr(&one));
    assert_eq!(one.stdout, four.stdout);
    let v: serde_json::Value = serde_json::from_str(&stdout(&one)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 8);
}

#[test]
fn fixtures_export_as_instance_documents() {
    let dir = TempDir::new().unwrap();
    for name in [
        "four-goods-three-days",
        "eight-goods-three-days",
        "twelve-agents-four-identical-days",
    ] {
        let out = tempfair(&["fixture", name]);
        assert_eq!(code(&out), 0);
        let f = write(&dir, "fixture.json", &stdout(&out));
        let alloc = tempfair(&["allocate", "--algorithm", "general", "--instance", s(&f)]);
        assert_eq!(code(&alloc), 0, "{name}: {}", stderr(&alloc));
    }
    assert_eq!(code(&tempfair(&["fixture", "nope"])), 64);
}

#[test]
fn in_process_runner_matches_the_binary() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = tempfair::cli::run(
        ["tempfair", "verify-counterexamples", "--format", "json"],
        &mut out,
        &mut err,
    );
    assert_eq!(code, tempfair::cli::EXIT_OK);
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert!(v
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["infeasible"] == true));
}
