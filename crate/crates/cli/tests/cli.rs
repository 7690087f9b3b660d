use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn leadopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leadopt"))
        .args(args)
        .output()
        .expect("spawn leadopt")
}

fn ok(args: &[&str]) -> String {
    let out = leadopt(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, train: usize, test: usize) {
    ok(&[
        "synth-dataset",
        "--seed",
        "3",
        "--train",
        &train.to_string(),
        "--test",
        &test.to_string(),
        "--out",
        s(dir),
    ]);
}

#[test]
fn run_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 0, 10);
    let test = dir.path().join("test.jsonl");
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    ok(&["run", "--dataset", s(&test), "--seed", "42", "--out", s(&a), "--jobs", "4"]);
    ok(&["run", "--dataset", s(&test), "--seed", "42", "--out", s(&b), "--jobs", "1"]);
    let (a, b) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 10);
}

#[test]
fn retrieve_without_buffer_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 0, 3);
    let out_path = dir.path().join("r.jsonl");
    let out = leadopt(&[
        "run",
        "--dataset",
        s(&dir.path().join("test.jsonl")),
        "--mode",
        "retrieve",
        "--out",
        s(&out_path),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("buffer"));
    assert!(!out_path.exists());
}

#[test]
fn missing_dataset_fails() {
    let out = leadopt(&["validate-dataset", "--dataset", "/nonexistent/x.jsonl"]);
    assert!(!out.status.success());
}

#[test]
fn buffer_retrieve_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 12, 6);
    let train = dir.path().join("train.jsonl");
    let buf = dir.path().join("buffer.jsonl");
    let buf2 = dir.path().join("buffer2.jsonl");
    ok(&["build-buffer", "--dataset", s(&train), "--seed", "1", "--out", s(&buf), "--jobs", "3"]);
    ok(&["build-buffer", "--dataset", s(&train), "--seed", "1", "--out", s(&buf2)]);
    assert_eq!(fs::read(&buf).unwrap(), fs::read(&buf2).unwrap());

    let results = dir.path().join("results.jsonl");
    ok(&[
        "run",
        "--dataset",
        s(&dir.path().join("test.jsonl")),
        "--mode",
        "retrieve",
        "--buffer",
        s(&buf),
        "--out",
        s(&results),
    ]);
    let series = dir.path().join("series");
    let table = ok(&["report", s(&results), "--out", s(&series), "--no-sim-gate"]);
    assert!(table.contains("plogp"), "{table}");
    assert!(table.contains("SR without similarity gate"));
    let csv = fs::read_to_string(series.join("plogp_series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
}

#[test]
fn validate_reports_skips() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.jsonl");
    fs::write(
        &p,
        "{\"smiles\":\"CCO\",\"property\":\"qed\"}\n{\"smiles\":\"C1CC\",\"property\":\"qed\"}\n{\"smiles\":\"CC\",\"property\":\"nope\"}\n",
    )
    .unwrap();
    let out = ok(&["validate-dataset", "--dataset", s(&p)]);
    assert!(out.contains("3 rows, 1 usable, 2 skipped"), "{out}");
    assert!(out.contains("line 2"));
}

#[test]
fn report_rejects_malformed_results() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.jsonl");
    fs::write(&p, "{\"x\": 1}\n").unwrap();
    assert!(!leadopt(&["report", s(&p)]).status.success());
}

const LENGTH_EVALUATOR: &str = r#"
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    vals = [len(s) / 10.0 for s in req["smiles_list"]]
    print(json.dumps({"request_id": req["request_id"], "values": vals, "errors": []}), flush=True)
"#;

#[test]
fn external_evaluator_process() {
    if Command::new("python3").arg("--version").output().is_err() {
        eprintln!("python3 not available; skipped");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("eval.py");
    fs::write(&script, LENGTH_EVALUATOR).unwrap();
    let evals = dir.path().join("evaluators.json");
    fs::write(
        &evals,
        format!(
            r#"[{{"property_id": "length", "direction": "maximize", "endpoint": {{"process": ["python3", "{}"]}}}}]"#,
            s(&script)
        ),
    )
    .unwrap();
    let data = dir.path().join("d.jsonl");
    fs::write(&data, "{\"smiles\":\"CC(=O)Nc1ccc(O)cc1\",\"property\":\"length\"}\n").unwrap();
    let out = dir.path().join("r.jsonl");
    ok(&["run", "--dataset", s(&data), "--evaluators-config", s(&evals), "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"property_id\":\"length\""), "{text}");
    assert!(text.contains("\"lead_value\":1.8"), "{text}");
}
