use std::path::Path;
use std::process::{Command, Output};

fn cmcq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmcq")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn bound_reports_all_three_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let q = write(dir.path(), "q.cmcq", r#"REL R1(b,c) FROM "r1.csv"; TREE T FROM "d.xml" MATCH :a[:b]/:c; RETURN a,b,c;"#);
    let out = cmcq(&["bound", &q]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!((v["rho1"].as_str(), v["rho2"].as_str(), v["rho3"].as_str()), (Some("2"), Some("3/2"), Some("3/2")));
    assert!(v["reports"]["r3"]["witness"].is_object());
    assert!(v["reports"]["r1"]["suites_enumerated"].is_number());
}

#[test]
fn bound_single_mode_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let q = write(dir.path(), "q.cmcq", r#"REL R1(a,b) FROM "1"; REL R2(b,c) FROM "2"; REL R3(a,c) FROM "3"; RETURN a,b,c;"#);
    let out = cmcq(&["bound", &q, "--mode", "r3", "--no-opt1", "--no-opt2"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["rho3"], "3/2");
    assert!(v.get("rho1").is_none());
}

#[test]
fn input_errors_exit_with_one() {
    let out = cmcq(&["bound", "/no/such/query.cmcq"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cmcq", "RETURN x;");
    assert_eq!(cmcq(&["bound", &bad]).status.code(), Some(1));
    let missing_data = write(dir.path(), "m.cmcq", r#"REL R(x) FROM "absent.csv"; RETURN x;"#);
    assert_eq!(cmcq(&["run", &missing_data]).status.code(), Some(1));
    assert_eq!(cmcq(&["run", &missing_data, "--algo", "hash"]).status.code(), Some(1));
    assert_eq!(cmcq(&["gen", "star", "--n", "2", "--dir", dir.path().to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(cmcq(&["gen", "child-fan", "--n", "0", "--dir", dir.path().to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn run_on_generated_triangle_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let gen = cmcq(&["gen", "triangle-like", "--n", "4", "--dir", d, "--seed", "1"]);
    assert!(gen.status.success());
    let query = String::from_utf8(gen.stdout).unwrap().trim().to_owned();

    let mut rows = Vec::new();
    for algo in ["cmjoin", "sj", "vj", "naive"] {
        let report = dir.path().join(format!("{algo}.json"));
        let out = cmcq(&["run", &query, "--algo", algo, "--report", report.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        assert_eq!(text.lines().count(), 5, "{algo}: header plus four rows");
        rows.push(text);
        let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
        match algo {
            "cmjoin" => {
                assert_eq!(m["mode"], "paths-as-tables");
                assert_eq!(m["optimality_certificate"], true);
            }
            "sj" => assert!(m["total_intermediate"].as_u64().unwrap() >= 16),
            _ => {}
        }
    }
    assert!(rows.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn jsonl_output_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(cmcq(&["gen", "child-fan", "--n", "3", "--dir", d]).status.success());
    let out = dir.path().join("out.jsonl");
    let q = dir.path().join("query.cmcq");
    let run = cmcq(&["run", q.to_str().unwrap(), "--format", "jsonl", "--out", out.to_str().unwrap(), "--sequential"]);
    assert!(run.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 9);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["a"], "a0");
    // Without --report the metrics go to standard error.
    let m: serde_json::Value = serde_json::from_slice(&run.stderr).unwrap();
    assert_eq!(m["steps"].as_array().unwrap().last().unwrap()["rows"], 9);
}

#[test]
fn bench_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let run = cmcq(&["bench", "--dir", dir.path().join("fx").to_str().unwrap(), "--out", out.to_str().unwrap(), "--sizes", "2,3"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("query,algo,n,rows,total_intermediate,ms"));
    // Five families, two sizes, three algorithms.
    assert_eq!(lines.count(), 30);
    assert!(text.contains("descendant-fan,cmjoin,3,27,"));
}
