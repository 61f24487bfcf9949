use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rdbsc_core::harness::io::{read_assignment, read_tasks, read_workers};
use rdbsc_core::harness::SimulationReport;
use rdbsc_core::model::enumerate_pairs;
use rdbsc_core::{objective, Instance, WaitPolicy};

fn rdbsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdbsc")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TASKS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/tiny/tasks.csv");
const WORKERS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/tiny/workers.csv");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny").join(name)
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture_instance() -> Instance {
    let tasks = read_tasks(fs::File::open(fixture("tasks.csv")).unwrap()).unwrap();
    let workers = read_workers(fs::File::open(fixture("workers.csv")).unwrap()).unwrap();
    Instance::new(tasks, workers).unwrap()
}

/// The number after `key=` in the output.
fn field(out: &str, key: &str) -> f64 {
    let start = out.find(&format!("{key}=")).unwrap_or_else(|| panic!("no {key} in {out}")) + key.len() + 1;
    out[start..].split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = rdbsc(&["generate", "--m", "100", "--n", "200", "--dist", "uniform", "--seed", "7", "--out", path(d)]);
        assert!(o.status.success(), "{o:?}");
    }
    for f in ["tasks.csv", "workers.csv"] {
        let x = fs::read(a.join(f)).unwrap();
        assert_eq!(x, fs::read(b.join(f)).unwrap());
        assert!(!x.is_empty());
    }
    assert_eq!(read_tasks(&fs::read(a.join("tasks.csv")).unwrap()[..]).unwrap().len(), 100);
    assert_eq!(read_workers(&fs::read(a.join("workers.csv")).unwrap()[..]).unwrap().len(), 200);

    let c = dir.path().join("c");
    rdbsc(&["generate", "--m", "100", "--n", "200", "--seed", "8", "--out", path(&c)]);
    assert_ne!(fs::read(a.join("tasks.csv")).unwrap(), fs::read(c.join("tasks.csv")).unwrap());
}

#[test]
fn generate_writes_json_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let o = rdbsc(&["--format", "json", "--out", path(dir.path()), "generate", "--m", "3", "--n", "4"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("instance.json")).unwrap()).unwrap();
    assert_eq!(v["tasks"].as_array().unwrap().len(), 3);
    assert_eq!(v["workers"].as_array().unwrap().len(), 4);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 7] = [
        &["generate", "--m", "0", "--out", path(dir.path())],
        &["generate", "--p-min", "0.9", "--p-max", "0.1", "--out", path(dir.path())],
        &["generate", "--bogus"],
        &["verify", "--suite", "nonsense"],
        &["solve", "--tasks", TASKS, "--workers", WORKERS, "--algo", "sampling", "--epsilon", "1.5"],
        &["solve", "--tasks", TASKS, "--workers", WORKERS, "--algo", "dc", "--gamma", "1"],
        &["reduce-np", "--values", "3,0"],
    ];
    for args in cases {
        assert_eq!(rdbsc(args).status.code(), Some(2), "{args:?}");
    }
    assert_eq!(rdbsc(&[]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let o = rdbsc(&["solve", "--tasks", path(&missing), "--workers", WORKERS]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));

    let garbage = dir.path().join("garbage.csv");
    fs::write(&garbage, "id,x,y\n1,2\n").unwrap();
    let o = rdbsc(&["solve", "--tasks", path(&garbage), "--workers", WORKERS]);
    assert_eq!(o.status.code(), Some(1));

    let unwritable = dir.path().join("no/such/dir/out.csv");
    let o = rdbsc(&["--out", path(&unwritable), "solve", "--tasks", TASKS, "--workers", WORKERS]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn greedy_on_the_fixture_matches_the_golden_assignment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let o = rdbsc(&["--seed", "11", "--out", path(&out), "solve", "--tasks", TASKS, "--workers", WORKERS, "--algo", "greedy"]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(fs::read_to_string(&out).unwrap(), fs::read_to_string(fixture("greedy_assignment.csv")).unwrap());

    // the golden file is a valid assignment whose objective is the one printed
    let inst = fixture_instance();
    let golden = read_assignment(fs::File::open(fixture("greedy_assignment.csv")).unwrap()).unwrap();
    golden.validate(&inst, &enumerate_pairs(&inst, 0.0, WaitPolicy::Strict)).unwrap();
    let obj = objective(&golden, &inst).unwrap();
    let text = stdout(&o);
    assert!((field(&text, "min_rel") - obj.min_rel).abs() < 1e-9);
    assert!((field(&text, "total_std") - obj.total_std).abs() < 1e-9);
}

#[test]
fn index_and_sweep_give_the_same_solution() {
    let run = |extra: &[&str]| {
        let mut args = vec!["solve", "--tasks", TASKS, "--workers", WORKERS, "--policy", "wait"];
        args.extend_from_slice(extra);
        stdout(&rdbsc(&args))
    };
    let strip = |s: String| s.lines().filter(|l| !l.contains("seconds")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(run(&["--index"])), strip(run(&[])));
}

#[test]
fn dc_on_the_fixture_is_valid_and_compared_with_greedy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dc.csv");
    let o = rdbsc(&[
        "--out",
        path(&out),
        "solve",
        "--tasks",
        TASKS,
        "--workers",
        WORKERS,
        "--algo",
        "dc",
        "--gamma",
        "2",
        "--compare",
    ]);
    assert!(o.status.success());
    let inst = fixture_instance();
    let a = read_assignment(fs::File::open(&out).unwrap()).unwrap();
    a.validate(&inst, &enumerate_pairs(&inst, 0.0, WaitPolicy::Strict)).unwrap();
    let text = stdout(&o);
    let baseline = text.lines().find(|l| l.starts_with("greedy baseline")).expect("baseline line");
    let dc_rel = field(&text, "min_rel");
    assert!(dc_rel >= field(baseline, "min_rel") || baseline.contains("below greedy"), "{text}");
}

#[test]
fn sampling_echoes_its_sample_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let o = rdbsc(&[
        "--format",
        "json",
        "--out",
        path(&out),
        "solve",
        "--tasks",
        TASKS,
        "--workers",
        WORKERS,
        "--algo",
        "sampling",
        "--epsilon",
        "0.1",
        "--delta",
        "0.9",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(field(&text, "k_hat") >= 1.0, "{text}");
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["plan"]["k_hat"].as_f64().unwrap(), field(&text, "k_hat"));
    assert_eq!(v["algorithm"], "sampling");
}

#[test]
fn seeds_make_solves_reproducible() {
    let run = |seed: &str| {
        let o = rdbsc(&["--seed", seed, "solve", "--tasks", TASKS, "--workers", WORKERS, "--algo", "sampling"]);
        stdout(&o).lines().filter(|l| !l.contains("seconds")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(run("5"), run("5"));
}

#[test]
fn quiet_silences_the_summary() {
    let o = rdbsc(&["--quiet", "solve", "--tasks", TASKS, "--workers", WORKERS]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
}

#[test]
fn verify_suites_pass_and_report_errors() {
    let o = rdbsc(&["verify", "--suite", "lemma1", "--trials", "1000"]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(text.starts_with("PASS"));
    let err: f64 = text.split("max error ").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!(err <= 1e-9);

    for (suite, trials) in [("index-equivalence", "200"), ("np-reduction", "50"), ("bounds", "200"), ("pruning", "50")] {
        let o = rdbsc(&["verify", "--suite", suite, "--trials", trials]);
        assert!(o.status.success(), "{suite}: {}", stdout(&o));
        assert!(stdout(&o).contains(" 0 failures"));
    }
}

#[test]
fn simulate_with_a_short_horizon_runs_one_round() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = rdbsc(&[
        "--format",
        "json",
        "--out",
        path(&out),
        "simulate",
        "--tasks",
        TASKS,
        "--workers",
        WORKERS,
        "--t-interval",
        "2",
        "--horizon",
        "1",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("1 rounds"));
    let report: SimulationReport = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(report.rounds.len(), 1);
    assert_eq!(report.assigned, report.successes + report.failures);

    let csv = dir.path().join("r.csv");
    let o = rdbsc(&["--out", path(&csv), "simulate", "--tasks", TASKS, "--workers", WORKERS]);
    assert!(o.status.success());
    let body = fs::read_to_string(&csv).unwrap();
    assert!(body.starts_with("task,assigned,successes,failures,reliability,expected_std,realized_std,error_score\n"));
    assert_eq!(body.lines().count(), 1 + 6);
    assert_eq!(rdbsc(&["simulate", "--tasks", TASKS, "--workers", WORKERS, "--t-interval", "0"]).status.code(), Some(2));
}

#[test]
fn reduce_np_writes_the_encoded_instance() {
    let dir = tempfile::tempdir().unwrap();
    let o = rdbsc(&["--out", path(dir.path()), "reduce-np", "--values", "1,1"]);
    assert!(o.status.success());
    let tasks = read_tasks(fs::File::open(dir.path().join("tasks.csv")).unwrap()).unwrap();
    let workers = read_workers(fs::File::open(dir.path().join("workers.csv")).unwrap()).unwrap();
    assert_eq!((tasks.len(), workers.len()), (2, 2));
    for w in &workers {
        assert!((-(-w.confidence).ln_1p() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn index_bench_prints_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let o = rdbsc(&["--out", path(&out), "index-bench", "--sizes", "300,600"]);
    assert!(o.status.success(), "{o:?}");
    let body = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines[0], "n,eta,pairs,build_seconds,indexed_seconds,brute_seconds,speedup");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("300,") && lines[2].starts_with("600,"));
    assert_eq!(rdbsc(&["index-bench", "--sizes", "0"]).status.code(), Some(2));
}
