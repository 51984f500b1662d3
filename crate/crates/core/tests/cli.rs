//! Drives the `transbench` binary.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn transbench(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transbench"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Mini plan rewritten with absolute paths and the given overrides.
fn write_plan(dir: &Path, cache: &Path, strategies: &str) -> std::path::PathBuf {
    let mini = common::mini_dir();
    let text = fs::read_to_string(mini.join("plan.toml"))
        .unwrap()
        .replace(
            "root = \"corpus\"",
            &format!("root = {:?}", mini.join("corpus").display().to_string()),
        )
        .replace(
            "cache_dir = \"cache\"",
            &format!("cache_dir = {:?}", cache.display().to_string()),
        );
    let text = match text.find("strategies = [") {
        Some(start) => {
            let end = start + text[start..].find('\n').unwrap();
            format!("{}strategies = {strategies}{}", &text[..start], &text[end..])
        }
        None => panic!("plan lists strategies"),
    };
    let path = dir.join("plan.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn replay_with_empty_cache_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty-cache");
    let plan = write_plan(dir.path(), &empty, r#"["0SP"]"#);
    let out = transbench(
        &["--config", plan.to_str().unwrap(), "run", "--results", "runs"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let records = dir.path().join("runs/mini/records.jsonl");
    assert_eq!(fs::read_to_string(records).unwrap_or_default(), "");
}

#[test]
fn invalid_plan_exits_1_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), &common::mini_dir().join("cache"), r#"["0SP", "3SP"]"#);
    let out = transbench(
        &["--config", plan.to_str().unwrap(), "run", "--results", "runs"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("3SP"));
    assert!(!dir.path().join("runs").exists());
}

#[test]
fn plan_run_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(
        dir.path(),
        &common::mini_dir().join("cache"),
        r#"["0SP", "2S-NL", "CoT-NL"]"#,
    );
    let p = plan.to_str().unwrap();
    let out = transbench(&["--config", p, "plan", "--results", "runs"], dir.path());
    assert!(out.status.success());
    assert!(stdout(&out).contains("units     18"));
    assert!(stdout(&out).contains("calls     24"));

    let out = transbench(
        &["--config", p, "--workers", "2", "run", "--results", "runs"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("18 written"));

    let out = transbench(
        &["report", "runs/mini", "--format", "csv", "--group-by", "strategy", "--baseline", "0SP"],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = stdout(&out);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(
        lines[0],
        "strategy,aggregation,total,successes,success_pct,incomplete,tool_missing,delta_pp"
    );
    assert!(lines[1].starts_with("0SP,micro,6,") && lines[1].ends_with(",+0.0"));

    let out = transbench(&["judge", "--results", "runs", "mini"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rejudged = dir.path().join("runs/mini/records.rejudged.jsonl");
    assert_eq!(fs::read_to_string(rejudged).unwrap().lines().count(), 18);
}

#[test]
fn postprocess_and_ir_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let resp = dir.path().join("resp.txt");
    fs::write(&resp, "Here is the code:\n```python\nprint(1)\n```\n").unwrap();
    let out = transbench(&["postprocess", "--lang", "python", "resp.txt"], dir.path());
    assert!(out.status.success());
    assert_eq!(stdout(&out), "print(1)\n");

    fs::write(dir.path().join("f.c"), "f(x){y;}").unwrap();
    let out = transbench(&["ir", "extract", "--lang", "c", "f.c"], dir.path());
    assert!(out.status.success());
    assert_eq!(
        stdout(&out).trim(),
        r#"(root (tok "f") (group paren (tok "x")) (group brace (tok "y") (tok ";")))"#
    );

    fs::write(dir.path().join("bad.c"), "f(").unwrap();
    let out = transbench(&["ir", "extract", "--lang", "c", "bad.c"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    let out = transbench(&["ir", "extract", "--lang", "c", "--parser", "nope", "f.c"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cache_verify_and_inspect_fixture() {
    let cache = common::mini_dir().join("cache");
    let here = Path::new(env!("CARGO_MANIFEST_DIR"));
    let out = transbench(&["cache", "verify", cache.to_str().unwrap()], here);
    assert!(out.status.success());
    assert!(stdout(&out).contains("84 entries, 0 bad"));
    let out = transbench(&["cache", "inspect", cache.to_str().unwrap()], here);
    let first = stdout(&out).lines().next().unwrap().to_string();
    let out = transbench(&["cache", "inspect", cache.to_str().unwrap(), &first], here);
    assert!(out.status.success());
    assert!(stdout(&out).contains("\"model_id\": \"mock-translator\""));
}

#[test]
fn probe_lists_every_language() {
    let out = transbench(&["probe"], Path::new(env!("CARGO_MANIFEST_DIR")));
    assert!(out.status.success());
    let text = stdout(&out);
    for lang in ["c", "cpp", "go", "java", "python"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{lang}\t"))), "{text}");
    }
}

#[test]
fn ingest_reports_counts() {
    let out = transbench(
        &["ingest", common::mini_dir().join("corpus").to_str().unwrap()],
        Path::new(env!("CARGO_MANIFEST_DIR")),
    );
    assert!(out.status.success());
    assert_eq!(stdout(&out), "dataset mini\nc\t3\npython\t3\n");
}
