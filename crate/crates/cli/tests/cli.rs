use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn expagg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expagg"))
        .args(args)
        .output()
        .expect("spawn expagg")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TRACE: &str = "version=1 N=2 D=1 T=2\np 0\np 1\no 1\np 0\np 2\no 10\n";

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn run_hand_trace() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "trace.txt", TRACE);
    let log = dir.path().join("log.jsonl");
    let report = dir.path().join("report.json");
    let out = expagg(&[
        "run",
        "--input",
        s(&input),
        "--algo",
        "paper",
        "--out",
        s(&log),
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!((rep["regret"].as_f64().unwrap() - 16.130358658490294).abs() < 1e-9);
    assert_eq!(rep["all_passed"], true);
    assert_eq!(rep["regret_within_bound_maxloss"], "pass");

    // T records plus the final report line
    let lines = std::fs::read_to_string(&log).unwrap();
    assert_eq!(lines.lines().count(), 3);
}

#[test]
fn report_goes_to_stdout_without_flag() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "trace.txt", TRACE);
    let out = expagg(&["run", "--input", s(&input)]);
    assert_eq!(code(&out), 0);
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["rounds"], 2);
}

#[test]
fn baseline_run_marks_proof_checks_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "trace.txt", TRACE);
    let log = dir.path().join("uniform.jsonl");
    let out = expagg(&[
        "run",
        "--input",
        s(&input),
        "--algo",
        "uniform",
        "--out",
        s(&log),
    ]);
    assert_eq!(code(&out), 0);
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["mode"], "reduced");
    assert_eq!(rep["mixloss_cum_bound"], "not_applicable");
    assert_eq!(rep["regret_within_bound_dagger"], "not_applicable");
    assert_eq!(code(&expagg(&["verify", "--log", s(&log)])), 0);
}

#[test]
fn usage_errors_exit_one() {
    let out = expagg(&["run"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "trace.txt", TRACE);
    assert_eq!(
        code(&expagg(&[
            "run",
            "--input",
            s(&input),
            "--scenario",
            "family=noisy-regression"
        ])),
        1
    );
    assert_eq!(
        code(&expagg(&["run", "--input", s(&input), "--algo", "hedge"])),
        1
    );
    assert_eq!(
        code(&expagg(&[
            "run",
            "--input",
            s(&dir.path().join("missing.txt"))
        ])),
        1
    );
    assert_eq!(
        code(&expagg(&[
            "run",
            "--scenario",
            "family=noisy-regression,p=2"
        ])),
        1
    );
    assert_eq!(
        code(&expagg(&[
            "run",
            "--scenario",
            "family=noisy-regression,t=0"
        ])),
        1
    );
    assert_eq!(code(&expagg(&["frobnicate"])), 1);
    assert_eq!(code(&expagg(&["--help"])), 0);
}

#[test]
fn malformed_stream_names_round() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "bad.txt",
        "version=1 N=2 D=1 T=2\np 0\np 1\no 1\np 0\np 2\np 3\no 10\n",
    );
    let out = expagg(&["run", "--input", s(&input)]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("round 2"), "{err}");
    assert!(err.contains("line 7"), "{err}");
}

#[test]
fn scenario_and_generated_file_give_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = "family=density-grid,n=4,t=50,d=8,seed=3";
    let file = dir.path().join("grid.txt");
    assert_eq!(
        code(&expagg(&[
            "generate",
            "--scenario",
            spec,
            "--out",
            s(&file)
        ])),
        0
    );
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    assert_eq!(
        code(&expagg(&[
            "run",
            "--scenario",
            spec,
            "--out",
            s(&a),
            "--report",
            s(&dir.path().join("ra.json"))
        ])),
        0
    );
    assert_eq!(
        code(&expagg(&[
            "run",
            "--input",
            s(&file),
            "--out",
            s(&b),
            "--report",
            s(&dir.path().join("rb.json"))
        ])),
        0
    );
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn compare_single_expert_has_zero_regret() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cmp.csv");
    let out = expagg(&[
        "compare",
        "--scenario",
        "family=noisy-regression,n=1,t=40,d=2",
        "--algos",
        "paper,uniform",
        "--out",
        s(&csv),
    ]);
    assert_eq!(code(&out), 0);
    let rows = read_csv(&csv);
    assert_eq!(rows.len(), 80);
    assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap() == 0.0));
    assert_eq!(
        std::fs::read_to_string(&csv)
            .unwrap()
            .lines()
            .next()
            .unwrap(),
        "t,algo,cumulative_player_loss,cumulative_best_expert_loss,regret"
    );
}

#[test]
fn compare_with_fixed_bound_from_paper_run() {
    let dir = tempfile::tempdir().unwrap();
    let spec = "family=scale-burst,n=6,t=120,d=3,seed=11,p=0.1";
    let out = expagg(&["run", "--scenario", spec]);
    assert_eq!(code(&out), 0);
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let bound = rep["final_scale_dagger"].as_f64().unwrap();
    let algos = format!("paper,fixed-ew:{bound:?}");
    let csv = dir.path().join("cmp.csv");
    assert_eq!(
        code(&expagg(&[
            "compare",
            "--scenario",
            spec,
            "--algos",
            &algos,
            "--out",
            s(&csv)
        ])),
        0
    );
    let rows = read_csv(&csv);
    assert_eq!(rows.len(), 2 * 120);
    assert_eq!(rows.iter().filter(|r| r[1] == "paper").count(), 120);
}

#[test]
fn compare_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = expagg(&[
            "compare",
            "--scenario",
            "family=scale-burst,n=5,t=200,d=2,seed=7",
            "--algos",
            "paper,ftl",
            "--out",
            s(path),
        ]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn compare_needs_two_algorithms() {
    assert_eq!(
        code(&expagg(&[
            "compare",
            "--scenario",
            "family=noisy-regression",
            "--algos",
            "paper"
        ])),
        1
    );
}

#[test]
fn verify_detects_truncation_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "trace.txt", TRACE);
    let log = dir.path().join("log.jsonl");
    assert_eq!(
        code(&expagg(&[
            "run",
            "--input",
            s(&input),
            "--out",
            s(&log),
            "--report",
            s(&dir.path().join("r.json"))
        ])),
        0
    );
    assert_eq!(code(&expagg(&["verify", "--log", s(&log)])), 0);

    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();

    // report line missing
    let cut = write(dir.path(), "cut.jsonl", &(lines[..2].join("\n") + "\n"));
    assert_eq!(code(&expagg(&["verify", "--log", s(&cut)])), 1);
    // last line cut mid-object
    let half = &text[..text.len() - 40];
    let torn = write(dir.path(), "torn.jsonl", half);
    assert_eq!(code(&expagg(&["verify", "--log", s(&torn)])), 1);
    assert_eq!(
        code(&expagg(&[
            "verify",
            "--log",
            s(&dir.path().join("nope.jsonl"))
        ])),
        1
    );

    // shrinking B_dagger below the observed loss scale breaks the proof inequalities
    let mut rec: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    rec["scale_dagger"] = serde_json::json!(2.0);
    let tampered = [lines[0].to_string(), rec.to_string(), lines[2].to_string()].join("\n");
    let tampered = write(dir.path(), "tampered.jsonl", &tampered);
    let out = expagg(&["verify", "--log", s(&tampered)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("first failing round: 2"));
}
